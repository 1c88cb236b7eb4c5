"""Monte Carlo harness: true-sum ensembles, two-sample Kolmogorov distances and rate studies.

Every ensemble is generated block by block from keyed substreams, so results are
reproducible bit for bit from (seed, configuration) whatever the worker count.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from typing import Any

import numpy as np
import pandas as pd

from refined_clt import error_rates, refined_approx, rng, tail_model
from refined_clt.config import settings
from refined_clt.errors import BudgetExceededError, DomainError
from refined_clt.models import (
    ApproxConfig,
    ApproxInputs,
    ApproxSample,
    DistributionSpec,
    EmpiricalCdf,
    KsResult,
    StudyTable,
    StudyVariant,
    TailParams,
    Variant,
)
from refined_clt.worker import ReplicatePool

logger = logging.getLogger(__name__)

CELL_COLUMNS = ["variant", "n", "k", "ks", "dkw", "reps", "clamp_count", "noise_limited"]
SLOPE_COLUMNS = ["variant", "slope", "reference_exponent"]
MIN_STUDY_POINTS = 3


# ============================================================================
# Distances
# ============================================================================


def dkw_margin(reps: int, confidence: float | None = None) -> float:
    """Two-sided DKW half-width sqrt(ln(2/(1-c)) / (2 reps))."""
    confidence = settings.confidence if confidence is None else confidence
    if reps < 1:
        raise DomainError(f"reps must be at least 1, got {reps}")
    if not 0.0 < confidence < 1.0:
        raise DomainError(f"confidence must lie in (0, 1), got {confidence}")
    return math.sqrt(math.log(2.0 / (1.0 - confidence)) / (2.0 * reps))


def ks_two_sample(a: EmpiricalCdf, b: EmpiricalCdf, confidence: float | None = None) -> KsResult:
    """Exact sup |F_a - F_b| over the pooled jump points.

    The margin is the DKW half-width for the smaller of the two samples.
    """
    confidence = settings.confidence if confidence is None else confidence
    pooled = np.concatenate([a.values, b.values])
    gap = np.abs(a.evaluate(pooled) - b.evaluate(pooled))
    statistic = float(min(max(gap.max(), 0.0), 1.0))
    return KsResult(
        statistic=statistic,
        dkw_margin=dkw_margin(min(a.count, b.count), confidence),
        reps_a=a.count,
        reps_b=b.count,
        confidence=confidence,
    )


# ============================================================================
# Ensembles
# ============================================================================


def check_budget(n: int, reps: int) -> None:
    """Refuse runs above the replicate budget; nothing is truncated silently."""
    if n > settings.max_n:
        raise BudgetExceededError(f"n={n} exceeds the configured maximum {settings.max_n}")
    if n * reps > settings.replicate_budget:
        raise BudgetExceededError(
            f"n * reps = {n * reps:.3g} exceeds the replicate budget "
            f"{settings.replicate_budget:.3g}; lower reps or the largest n"
        )


def sum_scale(n: int, xi: float) -> float:
    """a_n, with a_1 = 1."""
    return 1.0 if n == 1 else refined_approx.scaling_a_n(n, xi)


def _true_sum_block(
    seed: int, task: int, block: int, count: int, spec: DistributionSpec, n: int, scale: float
) -> np.ndarray:
    stream = rng.block_stream(seed, task, block)
    rows = max(1, settings.max_block_elements // n)
    out = np.empty(count)
    for start in range(0, count, rows):
        stop = min(count, start + rows)
        draws = tail_model.sample_iid(spec, (stop - start) * n, stream)
        out[start:stop] = draws.reshape(stop - start, n).sum(axis=1)
    return scale * out


def _approx_block(
    seed: int,
    task: int,
    block: int,
    count: int,
    cfg: ApproxConfig,
    params: TailParams,
    inputs: ApproxInputs,
) -> ApproxSample:
    stream = rng.block_stream(seed, task, block)
    return refined_approx.sample_approx(cfg, params, inputs, count, stream)


def simulate_true_sums(
    spec: DistributionSpec,
    n: int,
    reps: int,
    seed: int,
    pool: ReplicatePool | None = None,
    label: str = Variant.TRUE_SUMS.value,
) -> np.ndarray:
    """``reps`` independent draws of a_n S_n.

    Raises:
        BudgetExceededError: If n * reps exceeds the replicate budget.
    """
    if n < 1 or reps < 1:
        raise DomainError(f"need n >= 1 and reps >= 1, got n={n}, reps={reps}")
    check_budget(n, reps)
    pool = pool or ReplicatePool(workers=1)
    task = rng.task_key(label, n)
    scale = sum_scale(n, spec.params.xi)
    return pool.run(_true_sum_block, seed, task, reps, spec, n, scale)


def simulate_approx(
    cfg: ApproxConfig,
    params: TailParams,
    inputs: ApproxInputs,
    reps: int,
    seed: int,
    pool: ReplicatePool | None = None,
) -> ApproxSample:
    """``reps`` draws of an approximation, one keyed substream per block."""
    pool = pool or ReplicatePool(workers=1)
    task = rng.task_key(cfg.variant.label, cfg.n, cfg.k, cfg.sigma_mode.value)
    parts = pool.map_blocks(_approx_block, seed, task, reps, cfg, params, inputs)
    return ApproxSample(
        values=np.concatenate([part.values for part in parts]),
        clamp_count=sum(part.clamp_count for part in parts),
    )


# ============================================================================
# Studies
# ============================================================================


def resolve_config(
    spec: DistributionSpec, variant: StudyVariant, n: int, scaled: bool = True
) -> ApproxConfig | None:
    """ApproxConfig for one study cell; None for the true-sum self-comparison.

    ``k=None`` resolves through k_star. When k_star prefers the normal limit the
    cell falls back to the normal baseline.
    """
    if variant.variant is Variant.TRUE_SUMS:
        return None
    if variant.variant.is_baseline:
        return ApproxConfig(n=n, k=1, variant=variant.variant, scaled=scaled)
    k = variant.k
    if k is None:
        params = spec.params
        k = error_rates.k_star(n, params.xi, params.delta, variant.multiplier)
        if k == 0:
            logger.info(f"k* = 0 at n={n}: {variant.variant.label} falls back to the normal limit")
            return ApproxConfig(n=n, k=1, variant=Variant.NORMAL_BASELINE, scaled=scaled)
    return ApproxConfig(
        n=n, k=min(k, n - 1), variant=variant.variant, scaled=scaled, sigma_mode=variant.sigma_mode
    )


def evaluate_cell(
    spec: DistributionSpec,
    variant: StudyVariant,
    n: int,
    truth: EmpiricalCdf,
    seed: int,
    pool: ReplicatePool,
    confidence: float,
    sigma_sq_at_un: float | None = None,
) -> dict[str, Any]:
    """KS row for one (n, variant) cell against a true-sum ensemble."""
    reps = truth.count
    cfg = resolve_config(spec, variant, n)
    if cfg is None:
        values = simulate_true_sums(spec, n, reps, seed, pool, label="true-sums-replica")
        k, clamps = 0, 0
    else:
        inputs = refined_approx.prepare_inputs(spec, cfg, sigma_sq_at_un)
        sample = simulate_approx(cfg, spec.params, inputs, reps, seed, pool)
        values, clamps = sample.values, sample.clamp_count
        k = 0 if cfg.variant.is_baseline else cfg.k
        if clamps:
            logger.warning(
                f"⚠️ {cfg.variant.label} n={n}: variance clamp active in {clamps}/{reps} draws"
            )
    result = ks_two_sample(truth, EmpiricalCdf.from_samples(values), confidence)
    return {
        "variant": variant.variant.label,
        "n": n,
        "k": k,
        "ks": result.statistic,
        "dkw": result.dkw_margin,
        "reps": reps,
        "clamp_count": clamps,
        "noise_limited": result.statistic < settings.noise_factor * result.dkw_margin,
    }


def fit_slope(n_values: Sequence[float], ks_values: Sequence[float]) -> float:
    """Least-squares slope of ln KS against ln n; NaN with fewer than two positive points."""
    n_arr = np.asarray(n_values, dtype=np.float64)
    ks_arr = np.asarray(ks_values, dtype=np.float64)
    keep = ks_arr > 0.0
    if np.count_nonzero(keep) < 2:
        return math.nan
    slope, _ = np.polyfit(np.log(n_arr[keep]), np.log(ks_arr[keep]), 1)
    return float(slope)


def reference_exponent(spec: DistributionSpec, variant: Variant) -> float:
    """Theoretical exponent a variant's slope is compared against (NaN if none applies)."""
    params = spec.params
    try:
        if variant.is_baseline:
            exponent = error_rates.benchmark_exponent(params.xi, params.delta).exponent
            return math.nan if exponent is None else exponent
        if variant.is_refined:
            return error_rates.beta_star(params.xi, params.delta)
    except DomainError:
        pass
    return math.nan


def convergence_study(
    spec: DistributionSpec,
    variants: Sequence[StudyVariant],
    n_grid: Sequence[int],
    reps: int,
    seed: int,
    pool: ReplicatePool | None = None,
    confidence: float | None = None,
    sigma_sq_at_un: float | None = None,
) -> StudyTable:
    """KS distance of every variant to the true sums over ``n_grid``, with fitted slopes.

    Args:
        spec: Distribution of the summands.
        variants: Approximations to compare; ``Variant.TRUE_SUMS`` compares the
            true sums with an independent replica of themselves.
        n_grid: Strictly increasing sample sizes, at least three.
        reps: Replicates per ensemble (both sides of each comparison).
        seed: Master seed.
        pool: Replicate pool; serial when omitted.
        confidence: DKW confidence level.
        sigma_sq_at_un: User-supplied sigma^2(omega u_n) for custom families.

    Returns:
        StudyTable with one cell row per (n, variant) and one slope per variant.
    """
    confidence = settings.confidence if confidence is None else confidence
    if len(n_grid) < MIN_STUDY_POINTS:
        raise DomainError(f"a convergence study needs at least {MIN_STUDY_POINTS} n values")
    if any(b <= a for a, b in zip(n_grid, n_grid[1:], strict=False)):
        raise DomainError("n_grid must be strictly increasing")
    if not variants:
        raise DomainError("a convergence study needs at least one variant")
    for n in n_grid:
        check_budget(n, reps)
        for variant in variants:
            cfg = resolve_config(spec, variant, n)
            if cfg is not None:
                refined_approx.prepare_inputs(spec, cfg, sigma_sq_at_un)

    own_pool = pool is None
    pool = pool or ReplicatePool()
    rows: list[dict[str, Any]] = []
    try:
        for n in n_grid:
            logger.info(f"🔄 n={n}: simulating {reps} true sums")
            truth = EmpiricalCdf.from_samples(simulate_true_sums(spec, n, reps, seed, pool))
            for variant in variants:
                row = evaluate_cell(spec, variant, n, truth, seed, pool, confidence, sigma_sq_at_un)
                logger.info(f"   {row['variant']}: KS={row['ks']:.5f} (dkw {row['dkw']:.5f})")
                rows.append(row)
    finally:
        if own_pool:
            pool.shutdown()

    cells = pd.DataFrame(rows, columns=CELL_COLUMNS)
    slopes = []
    for variant in variants:
        label = variant.variant.label
        subset = cells[cells["variant"] == label]
        slopes.append(
            {
                "variant": label,
                "slope": fit_slope(subset["n"].tolist(), subset["ks"].tolist()),
                "reference_exponent": reference_exponent(spec, variant.variant),
            }
        )
    replicate_counts = {"reference-true-sums": reps * len(n_grid)}
    clamp_counts: dict[str, int] = {}
    for variant in variants:
        label = variant.variant.label
        subset = cells[cells["variant"] == label]
        replicate_counts[label] = int(subset["reps"].sum())
        clamp_counts[label] = int(subset["clamp_count"].sum())
    return StudyTable(
        cells=cells,
        slopes=pd.DataFrame(slopes, columns=SLOPE_COLUMNS),
        clamp_counts=clamp_counts,
        replicate_counts=replicate_counts,
    )
