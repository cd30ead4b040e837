"""Pair potentials for the chain model.

The chain interacts through first and second neighbour pairs with a common
potential phi.  Everything downstream only needs phi and its first three
derivatives, the inflection point, and decreasing envelopes of the derivative
magnitudes, so that is the whole interface.
"""

from abc import ABC, abstractmethod

import numpy as np

__all__ = ["PairPotential", "MorsePotential", "cauchy_born"]


class PairPotential(ABC):
    """Interaction law between a pair of atoms at scaled distance r > 0."""

    @abstractmethod
    def eval(self, r, order=0):
        """Evaluate the order-th derivative of phi at r (scalar or array)."""

    @abstractmethod
    def inflection_point(self):
        """Return r|* with phi convex on (0, r|*) and concave beyond."""

    @abstractmethod
    def derivative_bound(self, order, t):
        """Return M_order(t) = sup of |phi^(order)(s)| over s >= t."""


class MorsePotential(PairPotential):
    """Morse potential phi(r) = exp(-2 a (r-1)) - 2 exp(-a (r-1)).

    The minimum sits at r = 1 with phi(1) = -1.  Derivatives of any order
    stay in the two-exponential family, which keeps the envelope bounds
    closed-form: |phi^(j)| restricted to s >= t is a single arch through the
    origin in the variable q = exp(-a (s-1)), peaking at q = 2^-j with value
    (a/2)^j, plus a monotone tail for larger q.
    """

    def __init__(self, alpha=5.0):
        if alpha <= 0:
            raise ValueError(f"alpha must be positive, got {alpha}")
        self.alpha = float(alpha)

    def eval(self, r, order=0):
        r = np.asarray(r, dtype=float)
        if np.any(r <= 0):
            raise ValueError("pair distance must be positive")
        if order not in (0, 1, 2, 3):
            raise ValueError(f"derivative order {order} not supported")
        a = self.alpha
        e2 = np.exp(-2.0 * a * (r - 1.0))
        e1 = np.exp(-a * (r - 1.0))
        out = (-2.0 * a) ** order * e2 - 2.0 * (-a) ** order * e1
        return out if out.ndim else float(out)

    def inflection_point(self):
        return 1.0 + np.log(2.0) / self.alpha

    def derivative_bound(self, order, t):
        """Exact sup of |phi^(order)| over [t, inf).

        In q = exp(-a (t-1)) the magnitude is a^j * q * |2^j q - 2| with an
        interior peak (a/2)^j at q = 2^-j; the peak counts only when it is
        reachable, i.e. q(t) >= 2^-j.
        """
        if t <= 0:
            raise ValueError("bound only defined for positive distances")
        j = int(order)
        at_t = abs(self.eval(t, order=j))
        q_t = np.exp(-self.alpha * (t - 1.0))
        if q_t >= 2.0 ** (-j):
            return max(at_t, (self.alpha / 2.0) ** j)
        return at_t


def cauchy_born(potential, r, order=0):
    """Energy density W(r) = phi(r) + phi(2 r) of the homogeneous chain.

    Differentiating brings down a factor 2 per order on the second term.
    """
    return potential.eval(r, order) + 2.0 ** order * potential.eval(2.0 * r, order)
