"""Minimal SVG line charts for rate curves and sweep results."""

from __future__ import annotations

import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402

logger = logging.getLogger(__name__)

# fixed salt and no date so repeated renders are byte-identical
SVG_RC = {"svg.hashsalt": "refined-clt", "svg.fonttype": "none"}


def render_series(
    table: pd.DataFrame,
    path: Path,
    x: str,
    y: str,
    series: str,
    title: str,
    loglog: bool = False,
) -> Path:
    """One line per value of ``series`` from a long-format table, saved as SVG."""
    with plt.rc_context(SVG_RC):
        fig, ax = plt.subplots(figsize=(6.4, 4.2))
        for name, group in table.groupby(series, sort=False):
            ordered = group.sort_values(x)
            ax.plot(ordered[x], ordered[y], marker="o", markersize=3, label=str(name))
        if loglog:
            ax.set_xscale("log")
            ax.set_yscale("log")
        ax.set_xlabel(x)
        ax.set_ylabel(y)
        ax.set_title(title)
        ax.grid(True, which="both", linewidth=0.3)
        ax.legend(fontsize="small")
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
    logger.info(f"🖼️ Wrote {path}")
    return path


def render_rate_curves(curves: pd.DataFrame, path: Path) -> Path:
    """beta*, the limit-law benchmark and the fixed-k exponent against xi, per delta."""
    long = curves.melt(
        id_vars=["xi", "delta"],
        value_vars=["beta_star", "benchmark", "fixed_k_exponent"],
        var_name="curve",
        value_name="exponent",
    ).dropna(subset=["exponent"])
    long["curve"] = long["curve"] + " (delta=" + long["delta"].map("{:g}".format) + ")"
    return render_series(
        long, path, x="xi", y="exponent", series="curve", title="Error exponents n^beta"
    )
