"""Figure rendering for benchmark results.

Renders the four summary plots (relative gradient and energy errors against
degrees of freedom, and the matching efficiency factors) as PNG files next to
the delimited output.  The Agg backend is forced so rendering works headless.
"""

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .experiment import STRATEGIES

__all__ = ["FIGURES", "render_figures"]

#: file stem -> (record field, y label, guide slope or None)
FIGURES = {
    "gradient_error": ("rel_grad_error", "relative gradient error", -1.0),
    "energy_error": ("rel_energy_error", "relative energy error", -2.0),
    "gradient_efficiency": ("grad_efficiency", "gradient bound / true error", None),
    "energy_efficiency": ("energy_efficiency", "energy bound / true error", None),
}

_STYLES = {
    "apriori": dict(marker="o", color="tab:blue", label="graded a priori"),
    "adaptive_gradient": dict(marker="s", color="tab:orange", label="adaptive (gradient)"),
    "adaptive_energy": dict(marker="^", color="tab:green", label="adaptive (energy)"),
}


def _guide(ax, dofs, values, slope):
    """Dashed reference line with the given log-log slope through the data tail."""
    dofs = np.asarray(dofs, dtype=float)
    values = np.asarray(values, dtype=float)
    keep = np.isfinite(values) & (values > 0)
    if keep.sum() < 2:
        return
    x0, y0 = dofs[keep][-1], values[keep][-1]
    xs = np.array([dofs[keep].min(), dofs[keep].max()])
    ax.loglog(
        xs,
        y0 * (xs / x0) ** slope,
        linestyle="--",
        color="gray",
        linewidth=1.0,
        label=f"slope {slope:g}",
    )


def render_figures(result, out_dir, dpi=150):
    """Write the four PNGs for an ExperimentResult; returns the file paths."""
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for stem, (fieldname, ylabel, slope) in FIGURES.items():
        fig, ax = plt.subplots(figsize=(6.0, 4.5))
        guide_data = None
        for name in STRATEGIES:
            if name not in result.strategies:
                continue
            records = result.strategies[name].records
            dofs = [r.dof for r in records]
            values = [getattr(r, fieldname) for r in records]
            if not dofs:
                continue
            ax.loglog(dofs, values, linewidth=1.2, markersize=4, **_STYLES[name])
            guide_data = (dofs, values)
        if slope is not None and guide_data is not None:
            _guide(ax, *guide_data, slope)
        if slope is None:
            ax.axhline(1.0, linestyle=":", color="gray", linewidth=1.0)
        ax.set_xlabel("degrees of freedom")
        ax.set_ylabel(ylabel)
        ax.grid(True, which="both", alpha=0.3)
        ax.legend(fontsize=9)
        fig.tight_layout()
        path = os.path.join(out_dir, f"{stem}.png")
        fig.savefig(path, dpi=dpi)
        plt.close(fig)
        paths.append(path)
    return paths
