"""Periodic dead loads on the chain.

A load field knows its pointwise values and first two derivatives on the
period (-1/2, 1/2], the breakpoints where those formulas change, and how to
integrate expressions of itself over intervals.  Interval norms use a fixed
composite Gauss rule (15 points per panel after splitting at breakpoint
images), which keeps repeated runs bit-for-bit reproducible.
"""

import numpy as np

__all__ = ["LoadField", "ZeroLoad", "SingularLoad", "PeriodicLoad", "wrap_to_period"]

_GAUSS_X, _GAUSS_W = np.polynomial.legendre.leggauss(15)


def wrap_to_period(x):
    """Map x to the canonical window (-1/2, 1/2]."""
    x = np.asarray(x, dtype=float)
    t = x - np.floor(x + 0.5)
    t = np.where(t == -0.5, 0.5, t)
    return t if t.ndim else float(t)


class LoadField:
    """Base class: periodic load with derivatives and interval quadrature."""

    #: formula breakpoints in the canonical window, as a sorted tuple
    breakpoints = ()
    is_zero = False

    def eval(self, x, order=0):
        raise NotImplementedError

    def _split_points(self, a, b):
        """Images of the breakpoints that fall strictly inside (a, b)."""
        if not self.breakpoints:
            return []
        pts = []
        for bp in self.breakpoints:
            k0 = int(np.floor(a - bp))
            k1 = int(np.ceil(b - bp))
            for k in range(k0, k1 + 1):
                p = bp + k
                if a < p < b:
                    pts.append(p)
        return sorted(pts)

    def integrate(self, fn, a, b, subdiv=4):
        """Integrate fn over [a, b], splitting panels at breakpoint images.

        fn receives absolute coordinates; each smooth piece is divided into
        `subdiv` equal panels carrying a 15-point Gauss rule.
        """
        if b <= a:
            return 0.0
        edges = [a] + self._split_points(a, b) + [b]
        total = 0.0
        for lo, hi in zip(edges[:-1], edges[1:]):
            panels = np.linspace(lo, hi, subdiv + 1)
            for p0, p1 in zip(panels[:-1], panels[1:]):
                mid = 0.5 * (p0 + p1)
                half = 0.5 * (p1 - p0)
                total += half * float(np.sum(_GAUSS_W * fn(mid + half * _GAUSS_X)))
        return total

    def l2_norm(self, a, b, order=0, subdiv=4):
        val = self.integrate(lambda x: self.eval(x, order) ** 2, a, b, subdiv)
        return float(np.sqrt(max(val, 0.0)))

    def l1_norm(self, a, b, order=0, subdiv=8):
        return self.integrate(lambda x: np.abs(self.eval(x, order)), a, b, subdiv)


class ZeroLoad(LoadField):
    is_zero = True

    def eval(self, x, order=0):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        return out if out.ndim else 0.0

    def integrate(self, fn, a, b, subdiv=4):
        return super().integrate(fn, a, b, subdiv)


class SingularLoad(LoadField):
    """The benchmark load: even in x, ~ c/(2|x|) near the origin, 0 at +-1/2.

    f(x) = c (1/2 - x)/x on (0, 1/2] and f(x) = -c (x + 1/2)/x on [-1/2, 0),
    continued periodically.  The value at the pinned site x = 0 is taken as 0;
    it never enters any functional because test functions vanish there.
    """

    breakpoints = (0.0, 0.5)

    def __init__(self, amplitude=0.4):
        self.amplitude = float(amplitude)

    def eval(self, x, order=0):
        t = np.asarray(wrap_to_period(x), dtype=float)
        scalar = t.ndim == 0
        t = np.atleast_1d(t)
        c = self.amplitude
        out = np.zeros_like(t)
        pos = t > 0
        neg = t < 0
        if order == 0:
            out[pos] = c * (0.5 - t[pos]) / t[pos]
            out[neg] = -c * (t[neg] + 0.5) / t[neg]
        elif order == 1:
            out[pos] = -0.5 * c / t[pos] ** 2
            out[neg] = 0.5 * c / t[neg] ** 2
        elif order == 2:
            out[pos] = c / t[pos] ** 3
            out[neg] = -c / t[neg] ** 3
        else:
            raise ValueError(f"derivative order {order} not supported")
        return float(out[0]) if scalar else out


class PeriodicLoad(LoadField):
    """Wrap plain callables (used for smooth test loads)."""

    def __init__(self, f, fp=None, fpp=None, breakpoints=()):
        self._fns = (f, fp, fpp)
        self.breakpoints = tuple(sorted(wrap_to_period(np.asarray(breakpoints)).tolist())) if len(breakpoints) else ()

    def eval(self, x, order=0):
        fn = self._fns[order] if order < len(self._fns) else None
        if fn is None:
            raise ValueError(f"derivative order {order} not available")
        t = wrap_to_period(x)
        out = np.asarray(fn(np.atleast_1d(np.asarray(t, dtype=float))), dtype=float)
        return float(out[0]) if np.ndim(t) == 0 else out
