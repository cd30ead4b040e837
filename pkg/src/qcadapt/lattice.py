"""Periodic lattice functions and the bond set of the reference chain.

One period of the chain holds 2N atoms at spacing eps = 1/(2N), indexed
ell = -N+1 .. N with x_ell = ell * eps.  A lattice function stores the nodal
values over that window together with a macroscopic slope F, extended by
v(ell + 2N) = v(ell) + F.  Displacements carry slope 0, deformations carry
the applied stretch.
"""

from dataclasses import dataclass

import numpy as np

__all__ = [
    "LatticeFunction",
    "Bond",
    "bonds",
    "sites",
    "first_difference",
    "bond_difference",
    "sobolev_norms",
    "interpolate_to_lattice",
]


def sites(n_half):
    """Lattice coordinates eps*ell for ell = -N+1 .. N."""
    n = int(n_half)
    eps = 1.0 / (2 * n)
    return eps * np.arange(-n + 1, n + 1)


class LatticeFunction:
    """Values on one period of the lattice plus a macroscopic slope.

    The entry at position ell + N - 1 holds the value at x = eps*ell.  The
    value at the pinned site ell = 0 is zero for admissible displacements and
    deformations; the constructor does not enforce it so that shifted copies
    remain representable, use assert_pinned() where the constraint matters.
    """

    def __init__(self, n_half, values, macroscopic_slope=0.0):
        self.n_half = int(n_half)
        self.values = np.asarray(values, dtype=float)
        if self.values.shape != (2 * self.n_half,):
            raise ValueError(
                f"expected {2 * self.n_half} values, got shape {self.values.shape}"
            )
        self.macroscopic_slope = float(macroscopic_slope)
        self.epsilon = 1.0 / (2 * self.n_half)

    @classmethod
    def homogeneous(cls, n_half, stretch):
        """The affine state y = F*x sampled on the lattice."""
        return cls(n_half, stretch * sites(n_half), macroscopic_slope=stretch)

    def copy(self, values=None):
        vals = self.values.copy() if values is None else values
        return LatticeFunction(self.n_half, vals, self.macroscopic_slope)

    @property
    def is_pinned(self):
        return self.value(0) == 0.0

    def assert_pinned(self):
        if abs(self.value(0)) > 1e-12:
            raise ValueError("lattice function does not vanish at the pinned site")

    def value(self, ell):
        """Value at site ell for any integer ell, via the periodic extension."""
        n2 = 2 * self.n_half
        q, r = divmod(int(ell) + self.n_half - 1, n2)
        return float(self.values[r]) + q * self.macroscopic_slope

    def first_differences(self):
        """Array of (v_ell - v_(ell-1))/eps for ell = -N+1 .. N."""
        prev = np.concatenate(([self.values[-1] - self.macroscopic_slope], self.values[:-1]))
        return (self.values - prev) / self.epsilon

    def eval(self, x):
        """Piecewise affine interpolant at arbitrary x, periodically extended."""
        x = np.asarray(x, dtype=float)
        n2 = 2 * self.n_half
        t = x / self.epsilon
        ell = np.floor(t).astype(int)
        frac = t - ell
        idx = ell + self.n_half - 1
        q, r = np.divmod(idx, n2)
        q1, r1 = np.divmod(idx + 1, n2)
        left = self.values[r] + q * self.macroscopic_slope
        right = self.values[r1] + q1 * self.macroscopic_slope
        out = left + frac * (right - left)
        return out if out.ndim else float(out)

    def displacement(self, stretch):
        """Subtract the affine part F*x, returning a slope-0 lattice function."""
        return LatticeFunction(
            self.n_half,
            self.values - stretch * sites(self.n_half),
            self.macroscopic_slope - stretch,
        )


@dataclass(frozen=True)
class Bond:
    """First or second neighbour bond (eps*ell, eps*(ell+r)) with r in {1, 2}."""

    left_index: int
    neighbor_range: int
    epsilon: float

    def __post_init__(self):
        if self.neighbor_range not in (1, 2):
            raise ValueError("neighbour range must be 1 or 2")

    @property
    def left(self):
        return self.left_index * self.epsilon

    @property
    def right(self):
        return (self.left_index + self.neighbor_range) * self.epsilon

    @property
    def length(self):
        return self.neighbor_range * self.epsilon

    @property
    def interval(self):
        return (self.left, self.right)


def bonds(n_half):
    """The 4N bonds of one period: ell = -N+1 .. N, ranges 1 and 2."""
    eps = 1.0 / (2 * n_half)
    out = []
    for ell in range(-n_half + 1, n_half + 1):
        out.append(Bond(ell, 1, eps))
        out.append(Bond(ell, 2, eps))
    return out


def first_difference(v, ell):
    """Difference quotient (v_ell - v_(ell-1))/eps at any integer ell."""
    return (v.value(ell) - v.value(ell - 1)) / v.epsilon


def bond_difference(v, interval):
    """Finite difference of v over an interval, D v = (v(R) - v(L)) / (R - L).

    Accepts a Bond or an (L, R) pair; v is anything with a periodic eval().
    """
    if isinstance(interval, Bond):
        left, right = interval.interval
    else:
        left, right = interval
    if not right > left:
        raise ValueError(f"degenerate interval ({left}, {right})")
    return (v.eval(right) - v.eval(left)) / (right - left)


def sobolev_norms(v):
    """(L2, sup) norms of the difference quotients of a lattice function.

    The L2 value equals the exact L2 norm of the derivative of the piecewise
    affine interpolant, since that derivative is constant on each cell.
    """
    d = v.first_differences()
    return float(np.sqrt(v.epsilon * np.sum(d * d))), float(np.max(np.abs(d)))


def interpolate_to_lattice(source, n_half, macroscopic_slope=None):
    """Sample a function at the lattice sites (the operator I_eps).

    `source` is either an object with eval() and macroscopic_slope (a mesh or
    lattice function) or a plain callable; in the latter case the slope must
    be given explicitly.
    """
    if macroscopic_slope is None:
        macroscopic_slope = getattr(source, "macroscopic_slope", None)
        if macroscopic_slope is None:
            raise ValueError("macroscopic_slope required for bare callables")
    fn = source.eval if hasattr(source, "eval") else source
    vals = np.asarray(fn(sites(n_half)), dtype=float)
    return LatticeFunction(n_half, vals, macroscopic_slope)
