"""Tests for the periodic load fields and their interval quadrature."""

import numpy as np
import pytest
from scipy.integrate import quad

from qcadapt.forces import PeriodicLoad, SingularLoad, ZeroLoad, wrap_to_period


class TestWrap:
    def test_window(self):
        assert wrap_to_period(0.5) == 0.5
        assert wrap_to_period(-0.5) == 0.5
        assert wrap_to_period(0.75) == pytest.approx(-0.25)
        assert wrap_to_period(1.25) == pytest.approx(0.25)
        np.testing.assert_allclose(wrap_to_period(np.array([0.0, 2.0, -1.1])), [0.0, 0.0, -0.1], atol=1e-12)


class TestSingularLoad:
    def test_reference_values(self):
        f = SingularLoad(0.4)
        assert f.eval(0.25) == pytest.approx(0.4)
        assert f.eval(-0.25) == pytest.approx(0.4)
        assert f.eval(0.5) == 0.0
        assert f.eval(-0.5) == 0.0
        assert f.eval(0.0) == 0.0

    def test_even_symmetry(self):
        f = SingularLoad(0.4)
        x = np.linspace(1e-3, 0.5, 57)
        np.testing.assert_allclose(f.eval(x), f.eval(-x), rtol=1e-13)
        np.testing.assert_allclose(f.eval(x, 2), f.eval(-x, 2), rtol=1e-13)
        # the derivative is odd away from the +-1/2 kink (one-sided there)
        interior = x[:-1]
        np.testing.assert_allclose(f.eval(interior, 1), -f.eval(-interior, 1), rtol=1e-13)

    def test_singularity_strength(self):
        # f ~ c/(2x) near the origin
        f = SingularLoad(0.4)
        assert f.eval(1e-4) == pytest.approx(0.2 / 1e-4, rel=1e-3)

    def test_periodicity(self):
        f = SingularLoad(0.4)
        x = np.array([0.1, -0.3, 0.45])
        np.testing.assert_allclose(f.eval(x + 1.0), f.eval(x), rtol=1e-12)
        np.testing.assert_allclose(f.eval(x - 3.0), f.eval(x), rtol=1e-12)

    @pytest.mark.parametrize("order", [1, 2])
    def test_derivatives_by_finite_differences(self, order):
        f = SingularLoad(0.4)
        h = 1e-7
        for x in (0.05, 0.2, -0.11, 0.49, -0.37):
            fd = (f.eval(x + h, order - 1) - f.eval(x - h, order - 1)) / (2 * h)
            assert f.eval(x, order) == pytest.approx(fd, rel=1e-5)

    def test_amplitude_scaling(self):
        a, b = SingularLoad(0.4), SingularLoad(0.8)
        x = np.linspace(0.01, 0.49, 11)
        np.testing.assert_allclose(2 * a.eval(x), b.eval(x), rtol=1e-14)


class TestQuadrature:
    def test_l2_against_adaptive_oracle(self):
        f = SingularLoad(0.4)
        for a, b in [(0.02, 0.11), (0.3, 0.5), (-0.47, -0.21)]:
            ref, _ = quad(lambda x: f.eval(x) ** 2, a, b, epsabs=1e-14, epsrel=1e-13)
            assert f.l2_norm(a, b) == pytest.approx(np.sqrt(ref), rel=1e-11)

    def test_l2_of_derivatives(self):
        f = SingularLoad(0.4)
        for order in (1, 2):
            ref, _ = quad(lambda x: f.eval(x, order) ** 2, 0.05, 0.2, epsabs=1e-13, epsrel=1e-13)
            assert f.l2_norm(0.05, 0.2, order=order) == pytest.approx(np.sqrt(ref), rel=1e-10)

    def test_l1_with_closed_form(self):
        # int_a^b c(1/(2x) - 1) dx = c(log(b/a)/2 - (b-a)) for 0 < a < b <= 1/2
        c = 0.4
        f = SingularLoad(c)
        a, b = 0.03, 0.31
        exact = c * (0.5 * np.log(b / a) - (b - a))
        assert f.l1_norm(a, b) == pytest.approx(exact, rel=1e-11)

    def test_split_across_kink(self):
        # integrating across the +-1/2 kink must split the panel there
        f = SingularLoad(0.4)
        ref_left, _ = quad(lambda x: f.eval(x) ** 2, 0.45, 0.5, epsabs=1e-15)
        ref_right, _ = quad(lambda x: f.eval(x) ** 2, -0.5, -0.45, epsabs=1e-15)
        val = f.l2_norm(0.45, 0.55)
        assert val == pytest.approx(np.sqrt(ref_left + ref_right), rel=1e-9)

    def test_interval_reversed_or_empty(self):
        f = SingularLoad()
        assert f.integrate(lambda x: x, 0.3, 0.3) == 0.0
        assert f.integrate(lambda x: x, 0.4, 0.3) == 0.0

    def test_determinism(self):
        f = SingularLoad(0.4)
        v1 = f.l2_norm(0.07, 0.33)
        v2 = f.l2_norm(0.07, 0.33)
        assert v1 == v2


class TestOtherLoads:
    def test_zero_load(self):
        z = ZeroLoad()
        assert z.is_zero
        assert z.eval(0.3) == 0.0
        assert z.l2_norm(0.1, 0.4) == 0.0

    def test_periodic_wrapper(self):
        g = PeriodicLoad(
            lambda x: np.cos(2 * np.pi * x),
            lambda x: -2 * np.pi * np.sin(2 * np.pi * x),
            lambda x: -4 * np.pi**2 * np.cos(2 * np.pi * x),
        )
        assert g.eval(0.25) == pytest.approx(0.0, abs=1e-12)
        assert g.eval(1.25) == pytest.approx(g.eval(0.25), abs=1e-12)
        ref, _ = quad(lambda x: np.cos(2 * np.pi * x) ** 2, -0.2, 0.2)
        assert g.l2_norm(-0.2, 0.2) == pytest.approx(np.sqrt(ref), rel=1e-9)
