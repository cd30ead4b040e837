"""Coarse-grained model: bond splitting, assembled energy, calculus, solve."""

import numpy as np
import pytest

from qcadapt.forces import PeriodicLoad, SingularLoad
from qcadapt.lattice import Bond, bonds
from qcadapt.mesh import MeshFunction, generate_apriori, initial_adaptive_mesh
from qcadapt.potential import cauchy_born
from qcadapt.qc import QcModel


def wiggled(model, amplitude=0.02, waves=2):
    """Admissible non-affine state: stretch plus a smooth periodic ripple."""
    mesh = model.mesh
    two_pi_w = 2.0 * np.pi * waves
    vals = model.stretch * mesh.nodes + amplitude * np.sin(two_pi_w * mesh.nodes)
    return MeshFunction(mesh, vals, model.stretch)


def sample_meshes():
    out = [
        initial_adaptive_mesh(16, atom_radius=3),
        initial_adaptive_mesh(24, atom_radius=4, continuum_nodes_per_half=3),
        generate_apriori(40, 5, SingularLoad(0.4)),
    ]
    return out


class TestSplitBond:
    def setup_method(self):
        self.mesh = initial_adaptive_mesh(16, atom_radius=3, continuum_nodes_per_half=2)
        self.model = QcModel(self.mesh)
        self.eps = self.mesh.epsilon

    def test_interior_bond_is_all_atomistic(self):
        split = self.model.split_bond(Bond(-1, 2, self.eps))
        assert split.atom_part == (-self.eps, self.eps)
        assert split.pieces == []

    def test_far_bond_is_all_continuum(self):
        split = self.model.split_bond(Bond(7, 1, self.eps))
        assert split.atom_part is None
        total = sum(length for _, length in split.pieces)
        np.testing.assert_allclose(total, self.eps, rtol=1e-12)

    def test_interface_bond_splits(self):
        # window edge at 3 eps; bond (2 eps, 4 eps) is half in, half out
        split = self.model.split_bond(Bond(2, 2, self.eps))
        np.testing.assert_allclose(split.atom_part, (2 * self.eps, 3 * self.eps))
        assert len(split.pieces) >= 1
        total = sum(length for _, length in split.pieces)
        np.testing.assert_allclose(total, self.eps, rtol=1e-12)

    def test_wrapped_bond_uses_window_image(self):
        n = self.mesh.n_half
        split = self.model.split_bond(Bond(n - 1, 2, self.eps))
        assert split.atom_part is None
        total = sum(length for _, length in split.pieces)
        np.testing.assert_allclose(total, 2 * self.eps, rtol=1e-12)

    def test_census_lengths_add_up(self):
        for bond in bonds(self.mesh.n_half):
            split = self.model.split_bond(bond)
            total = split.atom_length + sum(length for _, length in split.pieces)
            np.testing.assert_allclose(total, bond.length, rtol=1e-10)

    def test_interface_bond_census(self):
        # bonds overlapping the window: 1-bonds tile it once, 2-bonds twice
        atom_len = sum(
            s.atom_length for s in self.model.interface_bonds() if s.bond.neighbor_range == 1
        )
        np.testing.assert_allclose(atom_len, 6 * self.eps, rtol=1e-12)
        atom_len2 = sum(
            s.atom_length for s in self.model.interface_bonds() if s.bond.neighbor_range == 2
        )
        np.testing.assert_allclose(atom_len2, 12 * self.eps, rtol=1e-12)


class TestEnergy:
    @pytest.mark.parametrize("stretch", [0.8, 1.0, 1.2])
    def test_homogeneous_energy_is_cell_average(self, stretch):
        for mesh in sample_meshes():
            model = QcModel(mesh, stretch=stretch)
            y = model.homogeneous()
            np.testing.assert_allclose(
                model.energy(y), cauchy_born(model.potential, stretch), rtol=1e-12
            )

    @pytest.mark.parametrize("stretch", [0.8, 1.0, 1.2])
    def test_homogeneous_gradient_vanishes(self, stretch):
        for mesh in sample_meshes():
            model = QcModel(mesh, stretch=stretch)
            g = model.gradient(model.homogeneous())
            np.testing.assert_allclose(g, 0.0, atol=1e-12)

    def test_assembled_energy_matches_bondsum(self):
        for mesh in sample_meshes():
            model = QcModel(mesh, stretch=1.05)
            y = wiggled(model)
            np.testing.assert_allclose(
                model.stored_energy(y), model.stored_energy_bondsum(y), rtol=1e-12
            )

    def test_load_work_is_nodal_trapezoid(self):
        mesh = initial_adaptive_mesh(20, atom_radius=3, continuum_nodes_per_half=2)
        load = SingularLoad(0.4)
        model = QcModel(mesh, load=load, stretch=1.0)
        # mixed-parity displacement so the even load has nonzero work
        two_pi = 2.0 * np.pi
        u = 0.01 * (np.sin(two_pi * mesh.nodes) + 1.0 - np.cos(two_pi * mesh.nodes))
        y = MeshFunction(mesh, mesh.nodes + u, 1.0)
        expect = 0.0
        for k in range(mesh.dof):
            km = (k - 1) % mesh.dof
            f_km = load.eval(mesh.elem_left[k]) if k == 0 else load.eval(mesh.nodes[km])
            expect += 0.5 * mesh.lengths[k] * (f_km * u[km] + load.eval(mesh.nodes[k]) * u[k])
        np.testing.assert_allclose(model.load_work(y), expect, rtol=1e-12)


class TestDerivatives:
    def test_gradient_matches_finite_differences(self):
        mesh = initial_adaptive_mesh(20, atom_radius=3, continuum_nodes_per_half=2)
        model = QcModel(mesh, load=SingularLoad(0.4), stretch=1.05)
        y = wiggled(model)
        g = model.gradient(y)
        h = 1e-6
        for i in range(mesh.dof):
            bump = np.zeros(mesh.dof)
            bump[i] = h
            ep = model.energy(model.wrap(y.values + bump))
            em = model.energy(model.wrap(y.values - bump))
            np.testing.assert_allclose(g[i], (ep - em) / (2 * h), rtol=5e-7, atol=1e-9)

    def test_hessian_matches_gradient_differences(self):
        mesh = initial_adaptive_mesh(14, atom_radius=3, continuum_nodes_per_half=1)
        model = QcModel(mesh, load=SingularLoad(0.4), stretch=1.0)
        y = wiggled(model)
        rows, cols, vals = model.hessian_entries(y)
        n = mesh.dof
        dense = np.zeros((n, n))
        np.add.at(dense, (rows, cols), vals)
        np.testing.assert_allclose(dense, dense.T, atol=1e-12)
        h = 1e-6
        for i in range(n):
            bump = np.zeros(n)
            bump[i] = h
            gp = model.gradient(model.wrap(y.values + bump))
            gm = model.gradient(model.wrap(y.values - bump))
            np.testing.assert_allclose(dense[:, i], (gp - gm) / (2 * h), rtol=1e-5, atol=3e-5)

    def test_gradient_on_apriori_mesh(self):
        mesh = generate_apriori(60, 6, SingularLoad(0.4))
        model = QcModel(mesh, load=SingularLoad(0.4), stretch=1.0)
        y = wiggled(model, amplitude=0.01)
        g = model.gradient(y)
        h = 1e-7
        rng = np.random.default_rng(2)
        for i in rng.choice(mesh.dof, size=8, replace=False):
            bump = np.zeros(mesh.dof)
            bump[i] = h
            ep = model.energy(model.wrap(y.values + bump))
            em = model.energy(model.wrap(y.values - bump))
            np.testing.assert_allclose(g[i], (ep - em) / (2 * h), rtol=2e-5, atol=1e-8)


class TestSolve:
    def test_zero_load_stays_homogeneous(self):
        mesh = initial_adaptive_mesh(20, atom_radius=3)
        model = QcModel(mesh, stretch=1.1)
        state, result = model.solve()
        assert result.converged
        assert result.iterations == 0
        np.testing.assert_array_equal(state.values, model.homogeneous().values)

    def test_singular_load_on_graded_mesh(self):
        mesh = generate_apriori(100, 6, SingularLoad(0.4))
        model = QcModel(mesh, load=SingularLoad(0.4), stretch=1.0)
        state, result = model.solve()
        assert result.converged
        g = model.gradient(state)
        g[model.pinned] = 0.0
        assert np.max(np.abs(g)) <= 1e-10 * max(1.0, abs(result.energy))
        assert np.all(state.element_slopes() > 0.5)
        assert state.values[model.pinned] == 0.0

    def test_smooth_load_reference_energy(self):
        two_pi = 2.0 * np.pi
        load = PeriodicLoad(
            lambda x: 0.2 * np.sin(two_pi * x),
            lambda x: 0.2 * two_pi * np.cos(two_pi * x),
            lambda x: -0.2 * two_pi**2 * np.sin(two_pi * x),
        )
        mesh = initial_adaptive_mesh(30, atom_radius=4, continuum_nodes_per_half=6)
        model = QcModel(mesh, load=load, stretch=1.0)
        state, result = model.solve()
        assert result.converged
        # energy went down from the homogeneous start
        assert result.energy < model.energy(model.homogeneous())

    def test_solve_deterministic(self):
        mesh = generate_apriori(80, 5, SingularLoad(0.4))
        a, _ = QcModel(mesh, load=SingularLoad(0.4)).solve()
        b, _ = QcModel(mesh, load=SingularLoad(0.4)).solve()
        np.testing.assert_array_equal(a.values, b.values)
