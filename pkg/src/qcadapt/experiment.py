"""Benchmark harness: three refinement strategies against the exact chain.

The driver solves the full chain once, then produces one record per mesh for
each strategy: a graded-mesh family swept over the atomistic radius, and the
two estimator-driven refinement loops.  Records carry relative errors against
the exact solution, the certified bounds scaled by the same denominators, and
efficiency factors (bound over true error).  CSV output is fully determined
by the configuration; wall-clock timings go to the JSON summary only, so
rerunning a configuration reproduces the CSV files byte for byte.
"""

import json
import os
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .adapt import AdaptiveConfig, adapt
from .atomistic import AtomisticModel
from .forces import SingularLoad, ZeroLoad
from .lattice import LatticeFunction, interpolate_to_lattice, sites, sobolev_norms
from .mesh import generate_apriori
from .potential import MorsePotential
from .qc import QcModel

__all__ = [
    "STRATEGIES",
    "CSV_COLUMNS",
    "ExperimentConfig",
    "ExperimentRecord",
    "StrategyResult",
    "ExperimentResult",
    "fit_slope",
    "run_experiment",
    "write_csv",
    "write_summary",
]

STRATEGIES = ("apriori", "adaptive_gradient", "adaptive_energy")

#: column order of the per-strategy CSV files
CSV_COLUMNS = (
    "strategy",
    "dof",
    "rel_grad_error",
    "rel_energy_error",
    "grad_bound",
    "energy_bound",
    "grad_efficiency",
    "energy_efficiency",
    "a_star",
)


@dataclass
class ExperimentConfig:
    n_half: int = 2500
    stretch: float = 1.0
    alpha: float = 5.0
    force_amplitude: float = 0.4
    dorfler_fraction: float = 0.5
    max_dof: int = 600
    initial_continuum_nodes_per_half: int = 8
    use_weighted: bool = True
    apriori_first_radius: int = 4
    apriori_growth: float = 1.5

    def __post_init__(self):
        if self.n_half < 8:
            raise ValueError("n_half must be at least 8")
        if self.max_dof < 8:
            raise ValueError("max_dof must be at least 8")
        if self.apriori_first_radius < 3:
            raise ValueError("apriori_first_radius must be at least 3")
        if self.apriori_growth <= 1.0:
            raise ValueError("apriori_growth must exceed 1")

    def load(self):
        if self.force_amplitude == 0.0:
            return ZeroLoad()
        return SingularLoad(self.force_amplitude)

    def potential(self):
        return MorsePotential(self.alpha)


@dataclass
class ExperimentRecord:
    strategy: str
    dof: int
    rel_grad_error: float
    rel_energy_error: float
    grad_bound: float
    energy_bound: float
    grad_efficiency: float
    energy_efficiency: float
    a_star: float


@dataclass
class StrategyResult:
    strategy: str
    records: list = field(default_factory=list)
    wall_time_ms: int = 0
    flags: list = field(default_factory=list)
    status: str = "ok"

    @property
    def bound_violations(self):
        out = 0
        for r in self.records:
            if not (r.rel_grad_error <= r.grad_bound) or not (
                r.rel_energy_error <= r.energy_bound
            ):
                out += 1
        return out


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    strategies: dict
    reference_energy: float
    grad_denominator: float
    energy_denominator: float
    reference_wall_time_ms: int = 0


def _format_value(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, float):
        return "%.17g" % v
    return str(v)


def fit_slope(dofs, values, decade=10.0):
    """Least-squares slope of log10(values) vs log10(dofs) over the top span.

    Only points with dof >= max(dof)/decade and positive finite values enter
    the fit; fewer than two such points yield nan.
    """
    dofs = np.asarray(dofs, dtype=float)
    values = np.asarray(values, dtype=float)
    if dofs.size == 0:
        return float("nan")
    keep = (dofs >= dofs.max() / decade) & np.isfinite(values) & (values > 0)
    if keep.sum() < 2:
        return float("nan")
    coeffs = np.polyfit(np.log10(dofs[keep]), np.log10(values[keep]), 1)
    return float(coeffs[0])


class _Reference:
    """Exact-chain solution and the error denominators shared by strategies."""

    def __init__(self, config):
        self.config = config
        load = config.load()
        pot = config.potential()
        self.model = AtomisticModel(
            config.n_half, potential=pot, load=load, stretch=config.stretch
        )
        t0 = time.perf_counter()
        self.solution, result = self.model.solve()
        self.wall_time_ms = int(round(1000 * (time.perf_counter() - t0)))
        if not result.converged:
            raise RuntimeError(f"reference chain solve failed: {result.message}")
        self.energy = self.model.energy(self.solution)
        u = self.solution.values - config.stretch * sites(config.n_half)
        self.grad_denominator = sobolev_norms(
            LatticeFunction(config.n_half, u, 0.0)
        )[0]
        self.energy_denominator = abs(
            self.energy - self.model.energy(self.model.homogeneous())
        )

    def record(self, strategy, model, state, report):
        n = self.config.n_half
        iy = interpolate_to_lattice(state, n)
        diff = LatticeFunction(n, iy.values - self.solution.values, 0.0)
        abs_grad = sobolev_norms(diff)[0]
        abs_energy = abs(self.energy - model.energy(state))
        gden = self.grad_denominator
        eden = self.energy_denominator
        gb = report.gradient_bound
        eb = report.energy_bound
        return ExperimentRecord(
            strategy=strategy,
            dof=model.mesh.dof,
            rel_grad_error=abs_grad / gden if gden > 0 else float("nan"),
            rel_energy_error=abs_energy / eden if eden > 0 else float("nan"),
            grad_bound=gb / gden if gb is not None and gden > 0 else float("nan"),
            energy_bound=eb / eden if eb is not None and eden > 0 else float("nan"),
            grad_efficiency=gb / abs_grad if gb is not None and abs_grad > 0 else float("nan"),
            energy_efficiency=eb / abs_energy if eb is not None and abs_energy > 0 else float("nan"),
            a_star=report.stability.a_star,
        )


def _run_apriori(config, reference):
    from .estimators import build_report

    result = StrategyResult("apriori")
    load = config.load()
    pot = config.potential()
    radius = config.apriori_first_radius
    max_radius = config.n_half // 2
    while True:
        mesh = generate_apriori(config.n_half, radius, load)
        # the budget caps every solved mesh, matching the adaptive loop
        if mesh.dof >= config.max_dof:
            break
        model = QcModel(mesh, potential=pot, load=load, stretch=config.stretch)
        state, solve_result = model.solve()
        if not solve_result.converged:
            result.flags.append(
                f"coarse solve failed at radius {radius}: {solve_result.message}"
            )
            result.status = "solver-failure"
            break
        report = build_report(model, state, use_weighted=config.use_weighted)
        result.records.append(reference.record("apriori", model, state, report))
        if report.flags:
            result.flags.extend(f"radius {radius}: {f}" for f in report.flags)
        radius = max(radius + 1, int(round(radius * config.apriori_growth)))
        if radius > max_radius:
            result.flags.append("atomistic radius reached the half period")
            break
    return result


def _run_adaptive(config, reference, indicator):
    strategy = "adaptive_gradient" if indicator == "grad" else "adaptive_energy"
    result = StrategyResult(strategy)
    cfg = AdaptiveConfig(
        indicator=indicator,
        dorfler_fraction=config.dorfler_fraction,
        max_dof=config.max_dof,
        initial_continuum_nodes_per_half=config.initial_continuum_nodes_per_half,
        use_weighted=config.use_weighted,
    )
    run = adapt(
        config.n_half,
        load=config.load(),
        stretch=config.stretch,
        potential=config.potential(),
        config=cfg,
    )
    result.status = run.status
    result.flags.extend(run.flags)
    pot = config.potential()
    load = config.load()
    for step in run.steps:
        model = QcModel(step.mesh, potential=pot, load=load, stretch=config.stretch)
        result.records.append(
            reference.record(strategy, model, step.state, step.report)
        )
    return result


def _timed(fn, *args):
    t0 = time.perf_counter()
    out = fn(*args)
    out.wall_time_ms = int(round(1000 * (time.perf_counter() - t0)))
    return out


def run_experiment(config=None, strategies=STRATEGIES, max_workers=None):
    """Solve the reference chain, then run the requested strategies.

    Strategies run in worker threads when max_workers (or QCADAPT_THREADS)
    allows; results are keyed and written in the fixed STRATEGIES order, so
    parallelism never changes any output.
    """
    config = ExperimentConfig() if config is None else config
    unknown = [s for s in strategies if s not in STRATEGIES]
    if unknown:
        raise ValueError(f"unknown strategies: {unknown}")
    reference = _Reference(config)

    runners = {
        "apriori": lambda: _timed(_run_apriori, config, reference),
        "adaptive_gradient": lambda: _timed(_run_adaptive, config, reference, "grad"),
        "adaptive_energy": lambda: _timed(_run_adaptive, config, reference, "energy"),
    }
    ordered = [s for s in STRATEGIES if s in strategies]
    if max_workers is None:
        max_workers = int(os.environ.get("QCADAPT_THREADS", "1"))
    max_workers = max(1, min(max_workers, len(ordered) or 1))

    results = {}
    if max_workers == 1 or len(ordered) <= 1:
        for name in ordered:
            results[name] = runners[name]()
    else:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            futures = {name: pool.submit(runners[name]) for name in ordered}
            for name in ordered:
                results[name] = futures[name].result()

    return ExperimentResult(
        config=config,
        strategies=results,
        reference_energy=reference.energy,
        grad_denominator=reference.grad_denominator,
        energy_denominator=reference.energy_denominator,
        reference_wall_time_ms=reference.wall_time_ms,
    )


def write_csv(result, out_dir):
    """One CSV per strategy, %.17g floats, fixed column order; returns paths."""
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for name in STRATEGIES:
        if name not in result.strategies:
            continue
        path = os.path.join(out_dir, f"{name}.csv")
        lines = [",".join(CSV_COLUMNS)]
        for rec in result.strategies[name].records:
            row = asdict(rec)
            lines.append(",".join(_format_value(row[c]) for c in CSV_COLUMNS))
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")
        paths.append(path)
    return paths


def summary_dict(result):
    out = {
        "version": __version__,
        "config": asdict(result.config),
        "reference": {
            "energy": result.reference_energy,
            "grad_denominator": result.grad_denominator,
            "energy_denominator": result.energy_denominator,
            "wall_time_ms": result.reference_wall_time_ms,
        },
        "strategies": {},
    }
    for name in STRATEGIES:
        if name not in result.strategies:
            continue
        sr = result.strategies[name]
        dofs = [r.dof for r in sr.records]
        out["strategies"][name] = {
            "status": sr.status,
            "flags": list(sr.flags),
            "records": len(sr.records),
            "final_dof": dofs[-1] if dofs else 0,
            "grad_slope": fit_slope(dofs, [r.rel_grad_error for r in sr.records]),
            "energy_slope": fit_slope(dofs, [r.rel_energy_error for r in sr.records]),
            "bound_violations": sr.bound_violations,
            "wall_time_ms": sr.wall_time_ms,
        }
    return out


def write_summary(result, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "summary.json")
    with open(path, "w") as fh:
        json.dump(summary_dict(result), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path
