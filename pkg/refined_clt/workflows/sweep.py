"""Sweep workflow - convergence study over an n-grid with fitted slopes."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import pandas as pd

from refined_clt import mc_harness, plotting
from refined_clt.errors import ConfigurationError
from refined_clt.models import DistributionSpec, StudyTable, StudyVariant
from refined_clt.worker import ReplicatePool

logger = logging.getLogger(__name__)

SWEEP_COLUMNS = [
    "row_type",
    "variant",
    "n",
    "k",
    "ks",
    "dkw",
    "reps",
    "clamp_count",
    "noise_limited",
    "slope",
    "reference_exponent",
]
PLOT_COLUMNS = ["variant", "n", "ks"]


@dataclass
class SweepParams:
    """Inputs of one sweep run."""

    spec: DistributionSpec
    variants: list[StudyVariant]
    n_grid: list[int]
    reps: int
    seed: int
    confidence: float
    out_dir: Path
    workers: int = 1
    svg: bool = False
    sigma_sq_at_un: float | None = None

    def __post_init__(self) -> None:
        if not self.variants:
            raise ConfigurationError("sweep needs at least one variant")


@dataclass
class SweepResult:
    study: StudyTable
    outputs: list[Path] = field(default_factory=list)


class SweepWorkflow:
    """
    Convergence study → sweep.csv (cells, then slopes) → sweep_plot.csv → optional SVG.

    The plot file is long format: one (n, ks) series per variant.
    """

    def run(self, params: SweepParams) -> SweepResult:
        logger.info(
            f"🚀 Sweep: {params.spec.family.value}, n-grid={params.n_grid}, reps={params.reps}"
        )
        with ReplicatePool(workers=params.workers) as pool:
            study = mc_harness.convergence_study(
                params.spec,
                params.variants,
                params.n_grid,
                params.reps,
                params.seed,
                pool=pool,
                confidence=params.confidence,
                sigma_sq_at_un=params.sigma_sq_at_un,
            )

        for row in study.slopes.itertuples(index=False):
            logger.info(
                f"📈 {row.variant}: slope {row.slope:.4f} "
                f"(reference {row.reference_exponent:.4f})"
            )

        params.out_dir.mkdir(parents=True, exist_ok=True)
        outputs = [
            self._write_table(study, params.out_dir / "sweep.csv"),
            self._write_plot_data(study, params.out_dir / "sweep_plot.csv"),
        ]
        if params.svg:
            outputs.append(
                plotting.render_series(
                    study.cells[PLOT_COLUMNS],
                    params.out_dir / "sweep.svg",
                    x="n",
                    y="ks",
                    series="variant",
                    title="Kolmogorov distance to true sums",
                    loglog=True,
                )
            )
        return SweepResult(study=study, outputs=outputs)

    @staticmethod
    def _write_table(study: StudyTable, path: Path) -> Path:
        cells = study.cells.assign(row_type="cell")
        slopes = study.slopes.assign(row_type="slope")
        table = pd.concat([cells, slopes], ignore_index=True).reindex(columns=SWEEP_COLUMNS)
        table.to_csv(path, index=False)
        logger.info(f"💾 Wrote {path}")
        return path

    @staticmethod
    def _write_plot_data(study: StudyTable, path: Path) -> Path:
        study.cells[PLOT_COLUMNS].to_csv(path, index=False)
        logger.info(f"💾 Wrote {path}")
        return path
