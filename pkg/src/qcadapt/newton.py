"""Damped Newton iteration shared by the chain and coarse-grained models.

The objective passed in exposes energy, gradient, and symmetric Hessian
triplets over a cyclic index space with one pinned unknown, plus an
admissibility test that keeps strains away from the breakdown region of the
pair potential.  Steps are halved until the energy decreases inside the
admissible set; an indefinite Hessian falls back to a diagonally shifted
solve so the direction stays downhill.
"""

from dataclasses import dataclass

import numpy as np

from .linsolve import NotPositiveDefinite, solve_pinned

__all__ = ["SolveResult", "damped_newton"]


@dataclass
class SolveResult:
    values: np.ndarray
    converged: bool
    iterations: int
    energy: float
    grad_norm: float
    message: str = ""


def _reduced_norm(g, pinned):
    g = g.copy()
    g[pinned] = 0.0
    return float(np.max(np.abs(g)))


def damped_newton(obj, x0, tol_rel=1e-10, max_iter=100, max_halvings=50):
    x = np.asarray(x0, dtype=float).copy()
    n, pinned = obj.size, obj.pinned
    if not obj.admissible(x):
        raise ValueError("initial state violates the strain floor")

    energy = obj.energy(x)
    for it in range(max_iter):
        grad = obj.gradient(x)
        gnorm = _reduced_norm(grad, pinned)
        if gnorm <= tol_rel * max(1.0, abs(energy)):
            return SolveResult(x, True, it, energy, gnorm)

        rows, cols, vals = obj.hessian(x)
        lam = 0.0
        while True:
            if lam == 0.0:
                r, c, v = rows, cols, vals
            else:
                idx = np.delete(np.arange(n), pinned)
                r = np.concatenate((rows, idx))
                c = np.concatenate((cols, idx))
                v = np.concatenate((vals, np.full(n - 1, lam)))
            try:
                step = solve_pinned(n, pinned, r, c, v, grad)
                break
            except NotPositiveDefinite:
                lam = 1e-6 * max(1.0, float(np.max(np.abs(vals)))) if lam == 0.0 else 10.0 * lam
                if lam > 1e8 * max(1.0, float(np.max(np.abs(vals)))):
                    return SolveResult(x, False, it, energy, gnorm,
                                       "hessian regularization failed")

        # stiff chains floor the attainable gradient norm above the relative
        # tolerance; once the correction drops below the float resolution of
        # the iterate, the minimizer is resolved as far as doubles allow
        if float(np.max(np.abs(step))) <= 1e-15 * (1.0 + float(np.max(np.abs(x)))):
            return SolveResult(x, True, it, energy, gnorm,
                               "newton correction below float resolution")

        # near the minimum the energy decrease drops below float resolution,
        # so take plain Newton steps once the gradient is already small
        if gnorm <= 1e-6 * max(1.0, abs(energy)):
            trial = x - step
            if obj.admissible(trial):
                x = trial
                energy = obj.energy(x)
                continue

        t = 1.0
        accepted = False
        for _ in range(max_halvings):
            trial = x - t * step
            if obj.admissible(trial):
                trial_energy = obj.energy(trial)
                if trial_energy < energy:
                    x, energy = trial, trial_energy
                    accepted = True
                    break
            t *= 0.5
        if not accepted:
            # flat-energy endgame: the decrease per step has fallen below float
            # resolution; accept the full step if it contracts the gradient
            trial = x - step
            if obj.admissible(trial):
                tnorm = _reduced_norm(obj.gradient(trial), pinned)
                if tnorm <= 0.5 * gnorm:
                    x = trial
                    energy = obj.energy(x)
                    continue
            return SolveResult(x, False, it, energy, gnorm, "line search stalled")

    grad = obj.gradient(x)
    gnorm = _reduced_norm(grad, pinned)
    converged = gnorm <= tol_rel * max(1.0, abs(energy))
    msg = "" if converged else "iteration limit reached"
    return SolveResult(x, converged, max_iter, energy, gnorm, msg)
