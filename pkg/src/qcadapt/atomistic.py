"""Full chain model: every site is a degree of freedom.

The stored elastic energy per period couples nearest and next-nearest sites
through the pair potential; dead loads enter through the scaled inner product
over the sites.  States are lattice functions with the macroscopic stretch as
their slope and the site at the origin pinned to zero.
"""

import numpy as np

from .forces import ZeroLoad
from .lattice import LatticeFunction, sites
from .newton import damped_newton
from .potential import MorsePotential

__all__ = ["AtomisticModel"]


class AtomisticModel:
    def __init__(self, n_half, potential=None, load=None, stretch=1.0):
        self.n_half = int(n_half)
        self.potential = MorsePotential() if potential is None else potential
        self.load = ZeroLoad() if load is None else load
        self.stretch = float(stretch)
        self.epsilon = 1.0 / (2 * self.n_half)
        self.sites = sites(self.n_half)
        self.site_forces = np.asarray(self.load.eval(self.sites), dtype=float)
        self.size = 2 * self.n_half
        self.pinned = self.n_half - 1  # array index of the site at x = 0
        self.min_strain = 0.25 * self.potential.inflection_point()

    # -- state helpers -----------------------------------------------------

    def homogeneous(self):
        return LatticeFunction.homogeneous(self.n_half, self.stretch)

    def wrap(self, values):
        return LatticeFunction(self.n_half, values, self.stretch)

    def strains(self, y):
        """First and second neighbour strains per site index."""
        d1 = y.first_differences()
        d2 = np.roll(d1, 1) + d1
        return d1, d2

    # -- energy, gradient, hessian ------------------------------------------

    def stored_energy(self, y):
        d1, d2 = self.strains(y)
        phi = self.potential.eval
        return self.epsilon * float(np.sum(phi(d1)) + np.sum(phi(d2)))

    def load_work(self, y):
        if self.load.is_zero:
            return 0.0
        u = y.values - self.stretch * self.sites
        return self.epsilon * float(np.dot(self.site_forces, u))

    def energy(self, y):
        return self.stored_energy(y) - self.load_work(y)

    def stored_gradient(self, y):
        """Derivative of the stored energy with respect to the site values."""
        d1, d2 = self.strains(y)
        p1 = self.potential.eval(d1, order=1)
        p2 = self.potential.eval(d2, order=1)
        return p1 - np.roll(p1, -1) + p2 - np.roll(p2, -2)

    def gradient(self, y):
        """Derivative of the total energy with respect to the site values."""
        return self.stored_gradient(y) - self.epsilon * self.site_forces

    def hessian_entries(self, y):
        """Symmetric triplets of the energy Hessian on the full site space."""
        d1, d2 = self.strains(y)
        c1 = self.potential.eval(d1, order=2) / self.epsilon
        c2 = self.potential.eval(d2, order=2) / self.epsilon
        n = self.size
        i = np.arange(n)
        i1 = (i - 1) % n
        i2 = (i - 2) % n
        rows = np.concatenate((i, i1, i, i1, i, i2, i, i2))
        cols = np.concatenate((i, i1, i1, i, i, i2, i2, i))
        vals = np.concatenate((c1, c1, -c1, -c1, c2, c2, -c2, -c2))
        return rows, cols, vals

    # -- solve ---------------------------------------------------------------

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
                d1 = model.wrap(vals).first_differences()
                return bool(np.all(d1 >= model.min_strain))

        result = damped_newton(_Objective, x0, tol_rel=tol_rel, max_iter=max_iter)
        state = self.wrap(result.values)
        return state, result
