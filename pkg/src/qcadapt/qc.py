"""Coarse-grained chain: bond energies split between the two regions.

Every bond contributes the exact pair energy of its difference quotient over
the part inside the atomistic window, and the integrated cell energy density
of the mesh interpolant over the part outside.  Summed over all bonds the
continuum contributions collapse to an integral of the cell energy density
over the coarse region, so the assembled energy touches individual bonds only
near the interfaces.  Loads act on the mesh nodes through the trapezoid rule
per element.
"""

from dataclasses import dataclass, field

import numpy as np

from .forces import ZeroLoad
from .lattice import Bond, bonds
from .mesh import MeshFunction
from .newton import damped_newton
from .potential import MorsePotential, cauchy_born

__all__ = ["BondSplit", "QcModel"]

_TOL = 1e-10


@dataclass
class BondSplit:
    """One bond cut by the atomistic window.

    atom_part is the subinterval inside the window (or None), in the bond's
    own coordinates; pieces lists (element index, length) pairs covering the
    remainder, with lengths summing to the bond length minus the atom part.
    """

    bond: Bond
    atom_part: tuple = None
    pieces: list = field(default_factory=list)

    @property
    def atom_length(self):
        return 0.0 if self.atom_part is None else self.atom_part[1] - self.atom_part[0]


class QcModel:
    def __init__(self, mesh, potential=None, load=None, stretch=1.0):
        self.mesh = mesh
        self.potential = MorsePotential() if potential is None else potential
        self.load = ZeroLoad() if load is None else load
        self.stretch = float(stretch)
        self.epsilon = mesh.epsilon
        self.n_half = mesh.n_half
        self.size = mesh.dof
        self.pinned = mesh.zero_index
        if self.pinned is None:
            raise ValueError("mesh lacks a node at the pinned point x = 0")
        self.node_forces = np.asarray(self.load.eval(mesh.nodes), dtype=float)
        self.node_weights = mesh.node_weights()
        self.min_strain = 0.25 * self.potential.inflection_point()
        self._interface_bonds = None

    # -- states --------------------------------------------------------------

    def homogeneous(self):
        return MeshFunction.homogeneous(self.mesh, self.stretch)

    def wrap(self, values):
        return MeshFunction(self.mesh, values, self.stretch)

    # -- geometry ------------------------------------------------------------

    def _walk_elements(self, p, q):
        """Cover (p, q) by mesh elements, returning (element, length) pairs."""
        mesh = self.mesh
        tol = _TOL * self.epsilon
        out = []
        x = p
        while q - x > tol:
            shift = np.ceil(x - mesh.nodes[-1])
            t = x - shift
            idx = int(np.searchsorted(mesh.nodes, t, side="right"))
            if idx == mesh.dof:
                k = 0
                right = mesh.nodes[0] + shift + 1.0
            else:
                k = idx
                right = mesh.nodes[idx] + shift
            stop = min(right, q)
            out.append((k, stop - x))
            x = stop
        return out

    def split_bond(self, bond):
        """Intersect a bond with the atomistic window and the coarse elements."""
        left, right = bond.interval
        l_a, r_a = self.mesh.atom_interval
        tol = _TOL * self.epsilon
        if r_a - l_a >= 1.0 - tol:
            # window covers the period: every bond lies inside it whole
            return BondSplit(bond, (left, right), [])
        atom = None
        for m in (-1.0, 0.0, 1.0):
            lo = max(left, l_a + m)
            hi = min(right, r_a + m)
            if hi - lo > tol:
                if atom is not None:
                    raise ValueError("bond meets two images of the atomistic window")
                atom = (lo, hi)
        pieces = []
        if atom is None:
            pieces = self._walk_elements(left, right)
        else:
            if atom[0] - left > tol:
                pieces = self._walk_elements(left, atom[0])
            if right - atom[1] > tol:
                pieces += self._walk_elements(atom[1], right)
        return BondSplit(bond, atom, pieces)

    def interface_bonds(self):
        """All bonds with positive overlap with the atomistic window, split."""
        if self._interface_bonds is None:
            eps = self.epsilon
            l_a, r_a = self.mesh.atom_interval
            tol = _TOL * eps
            if r_a - l_a >= 1.0 - tol:
                # window covers the period: take each bond exactly once
                self._interface_bonds = [self.split_bond(b) for b in bonds(self.n_half)]
                return self._interface_bonds
            lo = int(np.floor(l_a / eps)) - 2
            hi = int(np.ceil(r_a / eps)) + 1
            out = []
            for ell in range(lo, hi + 1):
                for r in (1, 2):
                    bond = Bond(ell, r, eps)
                    if min(bond.right, r_a) - max(bond.left, l_a) > tol:
                        out.append(self.split_bond(bond))
            self._interface_bonds = out
        return self._interface_bonds

    def node_hat(self, x):
        """Nodal hat weights of the point x: ((index, weight), (index, weight))."""
        mesh = self.mesh
        k = int(mesh.locate(x))
        shift = np.ceil(x - mesh.nodes[-1])
        theta = (x - shift - mesh.elem_left[k]) / mesh.lengths[k]
        return ((k - 1) % mesh.dof, 1.0 - theta), (k, theta)

    # -- energy ----------------------------------------------------------------

    def _atom_quotient(self, yh, atom):
        p, q = atom
        return (yh.eval(q) - yh.eval(p)) / (q - p)

    def stored_energy(self, yh):
        pot = self.potential
        eps = self.epsilon
        total = 0.0
        for split in self.interface_bonds():
            r = split.bond.neighbor_range
            d = self._atom_quotient(yh, split.atom_part)
            total += eps * (split.atom_length / split.bond.length) * pot.eval(r * d)
        s = yh.element_slopes()
        cont = ~self.mesh.is_atomistic
        total += float(np.dot(self.mesh.lengths[cont], cauchy_born(pot, s[cont])))
        return total

    def stored_energy_bondsum(self, yh):
        """Slow reference path: sum the split energy over every bond."""
        pot = self.potential
        eps = self.epsilon
        slopes = yh.element_slopes()
        total = 0.0
        for bond in bonds(self.n_half):
            split = self.split_bond(bond)
            r = bond.neighbor_range
            if split.atom_part is not None:
                d = self._atom_quotient(yh, split.atom_part)
                total += eps * (split.atom_length / bond.length) * pot.eval(r * d)
            for k, length in split.pieces:
                total += eps * (length / bond.length) * pot.eval(r * slopes[k])
        return total

    def load_work(self, yh):
        if self.load.is_zero:
            return 0.0
        u = yh.values - self.stretch * self.mesh.nodes
        return float(np.dot(self.node_weights * self.node_forces, u))

    def energy(self, yh):
        return self.stored_energy(yh) - self.load_work(yh)

    # -- first and second variations --------------------------------------------

    def stored_gradient(self, yh):
        pot = self.potential
        g = np.zeros(self.size)
        for split in self.interface_bonds():
            r = split.bond.neighbor_range
            p, q = split.atom_part
            d = self._atom_quotient(yh, split.atom_part)
            coef = pot.eval(r * d, order=1)
            for idx, w in self.node_hat(q):
                g[idx] += coef * w
            for idx, w in self.node_hat(p):
                g[idx] -= coef * w
        s = yh.element_slopes()
        wp = cauchy_born(pot, s, order=1)
        n = self.size
        for k in np.flatnonzero(~self.mesh.is_atomistic):
            g[k] += wp[k]
            g[(k - 1) % n] -= wp[k]
        return g

    def gradient(self, yh):
        g = self.stored_gradient(yh)
        if not self.load.is_zero:
            g -= self.node_weights * self.node_forces
        return g

    def hessian_entries(self, yh):
        pot = self.potential
        rows, cols, vals = [], [], []
        for split in self.interface_bonds():
            r = split.bond.neighbor_range
            p, q = split.atom_part
            d = self._atom_quotient(yh, split.atom_part)
            coef = r * pot.eval(r * d, order=2) / split.atom_length
            support = [(idx, w) for idx, w in self.node_hat(q)]
            support += [(idx, -w) for idx, w in self.node_hat(p)]
            for i, wi in support:
                for j, wj in support:
                    rows.append(i)
                    cols.append(j)
                    vals.append(coef * wi * wj)
        s = yh.element_slopes()
        wpp = cauchy_born(pot, s, order=2)
        n = self.size
        for k in np.flatnonzero(~self.mesh.is_atomistic):
            c = wpp[k] / self.mesh.lengths[k]
            km = (k - 1) % n
            rows += [k, km, k, km]
            cols += [k, km, km, k]
            vals += [c, c, -c, -c]
        return np.array(rows), np.array(cols), np.array(vals)

    # -- solve --------------------------------------------------------------------

    def solve(self, initial=None, tol_rel=1e-10, max_iter=100):
        x0 = (self.homogeneous() if initial is None else initial).values
        model = self

        class _Objective:
            size = model.size
            pinned = model.pinned

            @staticmethod
            def energy(vals):
                return model.energy(model.wrap(vals))

            @staticmethod
            def gradient(vals):
                return model.gradient(model.wrap(vals))

            @staticmethod
            def hessian(vals):
                return model.hessian_entries(model.wrap(vals))

            @staticmethod
            def admissible(vals):
                s = model.wrap(vals).element_slopes()
                return bool(np.all(s >= model.min_strain))

        result = damped_newton(_Objective, x0, tol_rel=tol_rel, max_iter=max_iter)
        state = self.wrap(result.values)
        return state, result
