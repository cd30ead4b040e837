"""Command-line front end.

Two subcommands: `run` executes the benchmark strategies and writes the
delimited output, summary, and figures; `oracle` runs the randomized
self-checks against the brute-force reference computations.
"""

import argparse
import os
import sys

try:
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - python 3.10 fallback
    import tomli as tomllib

from .experiment import (
    ExperimentConfig,
    run_experiment,
    summary_dict,
    write_csv,
    write_summary,
)
from .oracles import format_suite_report, oracle_suite

__all__ = ["main", "load_config", "resolve_strategies"]

_SECTIONS = {
    "model": ("n_half", "stretch", "alpha", "force_amplitude"),
    "adapt": (
        "indicator",
        "dorfler_fraction",
        "max_dof",
        "initial_continuum_nodes_per_half",
    ),
    "output": ("dir", "formats"),
}

_STRATEGY_CHOICES = ("all", "apriori", "grad", "energy")

_FORMATS = ("csv", "json", "png")


def load_config(path):
    """Parse a TOML config file and reject unknown sections or keys."""
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    for section, table in raw.items():
        if section not in _SECTIONS:
            raise ValueError(f"unknown config section [{section}]")
        if not isinstance(table, dict):
            raise ValueError(f"config section [{section}] must be a table")
        for key in table:
            if key not in _SECTIONS[section]:
                raise ValueError(f"unknown key '{key}' in section [{section}]")
    return raw


def resolve_strategies(selection):
    """Map a CLI/config strategy name to the experiment strategy tuple."""
    table = {
        "all": ("apriori", "adaptive_gradient", "adaptive_energy"),
        "apriori": ("apriori",),
        "grad": ("adaptive_gradient",),
        "energy": ("adaptive_energy",),
    }
    if selection not in table:
        raise ValueError(
            f"unknown strategy '{selection}', expected one of {_STRATEGY_CHOICES}"
        )
    return table[selection]


def _build_run(args):
    raw = load_config(args.config) if args.config else {}
    model = raw.get("model", {})
    adapt_cfg = raw.get("adapt", {})
    output = raw.get("output", {})

    kwargs = {}
    for key in ("n_half", "stretch", "alpha", "force_amplitude"):
        if key in model:
            kwargs[key] = model[key]
    for key in ("dorfler_fraction", "max_dof", "initial_continuum_nodes_per_half"):
        if key in adapt_cfg:
            kwargs[key] = adapt_cfg[key]
    if args.n_half is not None:
        kwargs["n_half"] = args.n_half
    if args.max_dof is not None:
        kwargs["max_dof"] = args.max_dof
    config = ExperimentConfig(**kwargs)

    selection = args.strategy or adapt_cfg.get("indicator", "all")
    strategies = resolve_strategies(selection)

    out_dir = args.out or output.get("dir", "results")
    formats = output.get("formats", list(_FORMATS))
    unknown = [f for f in formats if f not in _FORMATS]
    if unknown:
        raise ValueError(f"unknown output formats {unknown}, expected subset of {_FORMATS}")
    return config, strategies, out_dir, formats


def _cmd_run(args):
    config, strategies, out_dir, formats = _build_run(args)
    result = run_experiment(config, strategies=strategies)
    os.makedirs(out_dir, exist_ok=True)

    written = []
    if "csv" in formats:
        written.extend(write_csv(result, out_dir))
    if "json" in formats:
        written.append(write_summary(result, out_dir))
    if "png" in formats:
        from .report import render_figures

        written.extend(render_figures(result, out_dir))

    summary = summary_dict(result)
    print(f"chain of {2 * config.n_half} atoms, budget {config.max_dof} nodes")
    for name, block in summary["strategies"].items():
        print(
            f"  {name}: {block['status']}, {block['records']} meshes, "
            f"final dof {block['final_dof']}, "
            f"error slopes {block['grad_slope']:.3f} (gradient) "
            f"/ {block['energy_slope']:.3f} (energy), "
            f"bound violations {block['bound_violations']}"
        )
        for flag in block["flags"]:
            print(f"    note: {flag}")
    for path in written:
        print(f"wrote {path}")
    return 0


def _cmd_oracle(args):
    sizes = tuple(int(s) for s in args.sizes.split(",") if s.strip())
    if not sizes:
        raise ValueError("--sizes needs at least one chain size")
    report = oracle_suite(seed=args.seed, sizes=sizes)
    print(format_suite_report(report))
    return 0 if report["passed"] else 1


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="qcadapt",
        description="Adaptive atomistic/continuum coupling benchmark for a periodic chain.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run the benchmark and write results")
    run_p.add_argument("--config", metavar="PATH", help="TOML configuration file")
    run_p.add_argument("--out", metavar="DIR", help="output directory (default: results)")
    run_p.add_argument(
        "--strategy",
        choices=_STRATEGY_CHOICES,
        help="which strategy to run (default: all, or the configured indicator)",
    )
    run_p.add_argument("--n-half", type=int, metavar="N", help="atoms per half period")
    run_p.add_argument(
        "--max-dof", type=int, metavar="D", help="node budget per coarse mesh"
    )
    run_p.set_defaults(func=_cmd_run)

    oracle_p = sub.add_parser("oracle", help="run the randomized self-checks")
    oracle_p.add_argument("--seed", type=int, default=0, help="random seed")
    oracle_p.add_argument(
        "--sizes",
        default="8,12,16",
        metavar="LIST",
        help="comma-separated chain sizes (default: 8,12,16)",
    )
    oracle_p.set_defaults(func=_cmd_oracle)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
