"""Pinned periodic linear algebra.

Stiffness matrices of periodic chains are banded apart from corner entries
that couple the first and last unknowns.  Pinning one unknown and renumbering
the rest outward from the pin, alternating sides, turns the cyclic coupling
into a true band: neighbours along either arm stay within a couple of
positions of each other and the arms only meet at the antipode, which is
local again.  The reduced system then factors with a banded Cholesky routine,
which doubles as the positive definiteness check.

Callers pass symmetric coordinate triplets over the full cyclic index space,
including both (i, j) and (j, i) for every off-diagonal entry; rows and
columns touching the pinned index are discarded.
"""

import numpy as np
from scipy.linalg import solveh_banded

__all__ = ["NotPositiveDefinite", "interleaved_order", "solve_pinned", "dense_reduced"]


class NotPositiveDefinite(Exception):
    """The reduced matrix failed its Cholesky factorization."""


def interleaved_order(n, pinned):
    """Reduced-to-full index map: pinned+1, pinned-1, pinned+2, ... (mod n)."""
    seq = []
    for k in range(1, n // 2 + 1):
        seq.append(k)
        if n - k != k:
            seq.append(n - k)
    return (pinned + np.array(seq, dtype=np.int64)) % n


def _band_upper(n, pos, rows, cols, vals):
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    vals = np.asarray(vals, dtype=float)
    bi = pos[rows]
    bj = pos[cols]
    keep = (bi >= 0) & (bj >= 0) & (bi <= bj)
    bi, bj, v = bi[keep], bj[keep], vals[keep]
    width = int(np.max(bj - bi)) if bi.size else 0
    ab = np.zeros((width + 1, n - 1))
    np.add.at(ab, (width + bi - bj, bj), v)
    return ab, width


def solve_pinned(n, pinned, rows, cols, vals, rhs):
    """Solve the reduced SPD system and scatter back with a zero at the pin.

    rhs lives on the full index space; its pinned component is ignored.
    Raises NotPositiveDefinite when the banded Cholesky factorization fails.
    """
    order = interleaved_order(n, pinned)
    pos = np.full(n, -1, dtype=np.int64)
    pos[order] = np.arange(n - 1)
    ab, _ = _band_upper(n, pos, rows, cols, vals)
    try:
        xr = solveh_banded(ab, np.asarray(rhs, dtype=float)[order])
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from None
    x = np.zeros(n)
    x[order] = xr
    return x


def dense_reduced(n, pinned, rows, cols, vals):
    """Reduced matrix in natural order with the pinned row/column removed."""
    a = np.zeros((n, n))
    np.add.at(a, (np.asarray(rows, dtype=np.int64), np.asarray(cols, dtype=np.int64)),
              np.asarray(vals, dtype=float))
    keep = np.delete(np.arange(n), pinned)
    return a[np.ix_(keep, keep)]
