"""Estimator-driven mesh adaptation.

Each sweep solves the coarse model, assembles the error report, checks the
degree-of-freedom budget, marks elements by bulk chasing on the chosen
indicator, and refines the marked elements in ascending index order.  The
mesh mutates while refining, so every marked element is re-located by its
original midpoint before the action.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .estimators import build_report, external_residual
from .mesh import bisect, initial_adaptive_mesh, interpolate_to_mesh
from .qc import QcModel

__all__ = ["AdaptiveConfig", "StepRecord", "AdaptiveRun", "dorfler_mark", "adapt"]

_INDICATORS = ("grad", "energy")


@dataclass
class AdaptiveConfig:
    indicator: str = "grad"
    dorfler_fraction: float = 0.5
    max_dof: int = 600
    atom_radius: int = 3
    initial_continuum_nodes_per_half: int = 0
    warm_start: bool = True
    use_weighted: bool = True
    tolerance: float = 1e-12
    max_sweeps: int = 200

    def __post_init__(self):
        if self.indicator not in _INDICATORS:
            raise ValueError(f"indicator must be one of {_INDICATORS}")
        if not 0.0 < self.dorfler_fraction <= 1.0:
            raise ValueError("dorfler_fraction must lie in (0, 1]")
        if self.max_dof < 8:
            raise ValueError("max_dof must be at least 8")
        if self.atom_radius < 3:
            raise ValueError("atom_radius must be at least 3")
        if self.initial_continuum_nodes_per_half < 0:
            raise ValueError("initial_continuum_nodes_per_half must be nonnegative")
        if self.tolerance < 0.0:
            raise ValueError("tolerance must be nonnegative")


@dataclass
class StepRecord:
    mesh: object
    state: object
    report: object
    dof: int
    iterations: int = 0
    marked: tuple = ()
    actions: tuple = ()

    def to_dict(self):
        return {
            "dof": self.dof,
            "mesh_hash": self.mesh.content_hash(),
            "atom_interval": list(self.mesh.atom_interval),
            "iterations": self.iterations,
            "eta": self.report.eta,
            "eta_f": self.report.external.eta_f,
            "eta_q": self.report.eta_q_selected,
            "a_star": self.report.stability.a_star,
            "gradient_bound": self.report.gradient_bound,
            "energy_bound": self.report.energy_bound,
            "marked": len(self.marked),
            "actions": list(self.actions),
        }


@dataclass
class AdaptiveRun:
    steps: list = field(default_factory=list)
    status: str = ""
    flags: list = field(default_factory=list)

    @property
    def final(self):
        return self.steps[-1]

    def to_dict(self):
        return {
            "status": self.status,
            "flags": list(self.flags),
            "steps": [s.to_dict() for s in self.steps],
        }


def dorfler_mark(rho, fraction):
    """Shortest prefix of elements, by descending value, holding the mass share.

    Ties break toward the smaller element index so marking is reproducible.
    """
    rho = np.asarray(rho, dtype=float)
    total = float(rho.sum())
    if total <= 0.0:
        return []
    order = sorted(range(rho.size), key=lambda k: (-rho[k], k))
    acc = 0.0
    out = []
    for k in order:
        out.append(k)
        acc += rho[k]
        if acc >= fraction * total:
            break
    return out


def _refine(mesh, marked, flags):
    """Apply bisections in ascending element order, tracking mesh mutation."""
    mids = [float(mesh.midpoints[k]) for k in sorted(marked)]
    actions = []
    current = mesh
    changed = False
    for mid in mids:
        k = int(current.locate(mid))
        if current.is_atomistic[k]:
            actions.append("absorbed-already")
            continue
        try:
            result = bisect(current, k)
        except ValueError as err:
            flags.append(f"refinement skipped: {err}")
            actions.append("skipped")
            continue
        actions.append(result.action)
        if result.action != "unrefined":
            current = result.mesh
            changed = True
    return current, tuple(actions), changed


class _RunLog:
    """Append-only JSON-lines log, one record per completed sweep."""

    def __init__(self, path):
        self.path = path

    def emit(self, payload):
        if self.path is None:
            return
        with open(self.path, "a") as fh:
            fh.write(json.dumps(payload, sort_keys=True) + "\n")


def adapt(n_half, load=None, stretch=1.0, potential=None, config=None, log_path=None):
    """Run the solve/estimate/mark/refine loop until budget, tolerance, or stall.

    When log_path is given, one JSON line per sweep is appended there as the
    run progresses, plus a closing line with the final status.
    """
    config = AdaptiveConfig() if config is None else config
    log = _RunLog(log_path)
    mesh = initial_adaptive_mesh(
        n_half, config.atom_radius, config.initial_continuum_nodes_per_half
    )
    run = AdaptiveRun()
    prev = None
    flushed = 0

    def flush():
        nonlocal flushed
        while flushed < len(run.steps):
            log.emit(run.steps[flushed].to_dict())
            flushed += 1

    def finish(status):
        run.status = status
        flush()
        log.emit({"status": status, "flags": list(run.flags)})
        return run

    for _ in range(config.max_sweeps):
        model = QcModel(mesh, potential=potential, load=load, stretch=stretch)
        initial = None
        if config.warm_start and prev is not None:
            initial = interpolate_to_mesh(prev, mesh)
        state, result = model.solve(initial=initial)
        if not result.converged:
            log.emit({"status": "solver-failure", "message": result.message,
                      "mesh": mesh.to_dict()})
            err = RuntimeError(
                f"coarse solve failed on {mesh.dof} nodes: {result.message}; "
                f"mesh: {json.dumps(mesh.to_dict())}"
            )
            err.mesh = mesh
            raise err
        report = build_report(model, state, use_weighted=config.use_weighted)
        record = StepRecord(mesh, state, report, mesh.dof, result.iterations)
        run.steps.append(record)

        if config.indicator == "grad":
            rho = report.grad_indicator
        else:
            rho = report.energy_indicator
        if rho is None:
            run.flags.extend(report.flags)
            return finish("stalled")
        if float(np.sum(rho)) <= config.tolerance:
            return finish("converged")

        marked = dorfler_mark(rho, config.dorfler_fraction)
        mesh, actions, changed = _refine(mesh, marked, run.flags)
        record.marked = tuple(sorted(marked))
        record.actions = actions
        if not changed:
            return finish("stalled")
        prev = state
        # budget applies to the refined mesh, which is then left unsolved
        if mesh.dof >= config.max_dof:
            return finish("budget")
        flush()
    run.flags.append(f"sweep limit {config.max_sweeps} reached")
    return finish("stalled")
