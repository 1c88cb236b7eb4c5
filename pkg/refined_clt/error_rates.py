"""Error-rate bound R(k, n, xi, delta), the optimal choice of k and the limit-law benchmarks."""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence

import numpy as np
import pandas as pd

from refined_clt.errors import DomainError
from refined_clt.models import THEORY_XI_LOWER, BenchmarkRate, RateRegime, RateSpec

logger = logging.getLogger(__name__)

RATE_CURVE_COLUMNS = [
    "xi",
    "delta",
    "beta_star",
    "alpha_star",
    "benchmark",
    "benchmark_logarithmic",
    "fixed_k_exponent",
    "regime",
]

# candidate k values scanned by optimal_k before the local integer refinement
_K_SCAN_POINTS = 4000


def _check(xi: float, delta: float) -> None:
    if not THEORY_XI_LOWER < xi < 1.0:
        raise DomainError(f"xi must lie in (1/3, 1), got {xi}")
    if not delta > 0.0:
        raise DomainError(f"delta must be positive, got {delta}")


# ============================================================================
# Rate Bound
# ============================================================================


def _rate_bound_array(k: np.ndarray, n: int, xi: float, delta: float) -> np.ndarray:
    k = np.asarray(k, dtype=np.float64)
    log_ratio = np.log(k) - math.log(n)
    neighbourhood = np.exp(delta * log_ratio + 0.5 * np.log(k))
    linear = k / n
    if xi < 0.5:
        normal = np.exp(-0.5 * math.log(n) - (3.0 * xi - 1.0) * log_ratio)
    else:
        normal = np.exp(-xi * np.log(k))
    return normal + neighbourhood + linear


def rate_bound(k: int, n: int, xi: float, delta: float) -> float:
    """R(k, n, xi, delta) for the applicable xi regime.

    xi < 1/2:  n^(-1/2) (n/k)^(3 xi - 1) + (k/n)^delta k^(1/2) + k/n
    xi >= 1/2: k^(-xi) + (k/n)^delta k^(1/2) + k/n
    """
    _check(xi, delta)
    if not 1 <= k < n:
        raise DomainError(f"rate_bound needs 1 <= k < n, got k={k}, n={n}")
    return float(_rate_bound_array(np.array([k]), n, xi, delta)[0])


def optimal_k(n: int, xi: float, delta: float) -> tuple[int, float]:
    """Integer k minimising R(k, n, xi, delta) and the minimum value."""
    _check(xi, delta)
    if n < 2:
        raise DomainError(f"n must be at least 2, got {n}")
    if n - 1 <= _K_SCAN_POINTS:
        candidates = np.arange(1, n)
    else:
        candidates = np.unique(np.geomspace(1, n - 1, _K_SCAN_POINTS).round().astype(np.int64))
    values = _rate_bound_array(candidates, n, xi, delta)
    best = int(np.argmin(values))
    lo = int(candidates[max(best - 1, 0)])
    hi = int(candidates[min(best + 1, candidates.size - 1)])
    local = np.arange(lo, hi + 1)
    local_values = _rate_bound_array(local, n, xi, delta)
    pick = int(np.argmin(local_values))
    return int(local[pick]), float(local_values[pick])


# ============================================================================
# Optimal Exponents
# ============================================================================


def alpha_star(xi: float, delta: float) -> float:
    """Growth exponent of the optimal k (k* of order n^alpha*)."""
    _check(xi, delta)
    if xi < 0.5:
        first = (6.0 * xi - 1.0) / (6.0 * xi)
        second = (6.0 * xi + 2.0 * delta - 3.0) / (6.0 * xi + 2.0 * delta - 1.0)
        return max(min(first, second), 0.0)
    return min(2.0 * delta / (1.0 + 2.0 * (delta + xi)), 1.0 / (1.0 + xi))


def beta_star(xi: float, delta: float) -> float:
    """Error exponent achieved with k*; always <= 0."""
    _check(xi, delta)
    if xi < 0.5:
        if delta <= 3.0 * (0.5 - xi):
            return -delta
        if delta <= 0.5 + 3.0 * xi:
            return -(3.0 + 2.0 * delta - 6.0 * xi) / (12.0 * xi + 4.0 * delta - 2.0)
        return -1.0 / (6.0 * xi)
    return -xi * alpha_star(xi, delta)


def benchmark_exponent(xi: float, delta: float) -> BenchmarkRate:
    """Exponent of the plain limit law: normal for xi < 1/2, stable for xi > 1/2.

    At xi = 1/2 the normal limit converges only logarithmically and no power is returned.
    """
    _check(xi, delta)
    if xi < 0.5:
        return BenchmarkRate(exponent=1.0 - 1.0 / (2.0 * xi))
    if xi > 0.5:
        return BenchmarkRate(exponent=max(1.0 - 2.0 * xi, -delta))
    return BenchmarkRate(exponent=None, logarithmic=True)


def fixed_k_exponent(xi: float, delta: float) -> float:
    """Exponent in n of R(k, n, xi, delta) when k stays fixed."""
    _check(xi, delta)
    if xi < 0.5:
        return max(3.0 * xi - 1.5, -delta)
    return 0.0


def regime(xi: float, delta: float) -> RateRegime:
    """Piece of the optimal-k rule in force, ignoring the normal-baseline fallback."""
    _check(xi, delta)
    if xi < 0.5:
        if delta <= 3.0 * (0.5 - xi):
            return RateRegime.DELTA_LIMITED
        if delta <= 0.5 + 3.0 * xi:
            return RateRegime.BALANCED
        return RateRegime.BERRY_ESSEEN_LIMITED
    if 2.0 * delta / (1.0 + 2.0 * (delta + xi)) <= 1.0 / (1.0 + xi):
        return RateRegime.DELTA_LIMITED
    return RateRegime.EXTREME_VALUE_LIMITED


def normal_preferred(xi: float, delta: float) -> bool:
    """True when the refined rate is worse than the plain normal rate (xi < 1/2 only)."""
    benchmark = benchmark_exponent(xi, delta)
    return xi < 0.5 and benchmark.exponent is not None and beta_star(xi, delta) > benchmark.exponent


# ============================================================================
# Concrete k
# ============================================================================


def k_star(n: int, xi: float, delta: float, multiplier: float = 1.0) -> int:
    """max(1, round(multiplier n^alpha*)) capped at n - 1; 0 selects the normal baseline."""
    _check(xi, delta)
    if n < 2:
        raise DomainError(f"n must be at least 2, got {n}")
    if not multiplier > 0.0:
        raise DomainError(f"multiplier must be positive, got {multiplier}")
    if normal_preferred(xi, delta):
        return 0
    k = round(multiplier * math.exp(alpha_star(xi, delta) * math.log(n)))
    return min(max(1, k), n - 1)


def rate_spec(n: int, xi: float, delta: float, multiplier: float = 1.0) -> RateSpec:
    k = k_star(n, xi, delta, multiplier)
    return RateSpec(
        alpha_star=alpha_star(xi, delta),
        beta_star=beta_star(xi, delta),
        k_star=k,
        regime=RateRegime.NORMAL_PREFERRED if k == 0 else regime(xi, delta),
    )


# ============================================================================
# Tables
# ============================================================================


def rate_curves(xi_grid: Sequence[float], delta: float) -> pd.DataFrame:
    """One row per xi: optimal exponents, benchmark, fixed-k exponent and regime."""
    rows = []
    for xi in xi_grid:
        benchmark = benchmark_exponent(xi, delta)
        rows.append(
            {
                "xi": xi,
                "delta": delta,
                "beta_star": beta_star(xi, delta),
                "alpha_star": alpha_star(xi, delta),
                "benchmark": math.nan if benchmark.exponent is None else benchmark.exponent,
                "benchmark_logarithmic": benchmark.logarithmic,
                "fixed_k_exponent": fixed_k_exponent(xi, delta),
                "regime": _curve_regime(xi, delta).value,
            }
        )
    logger.debug(f"rate curves: {len(rows)} xi values at delta={delta}")
    return pd.DataFrame(rows, columns=RATE_CURVE_COLUMNS)


def kstar_table(
    n_grid: Sequence[int], xi: float, delta: float, multiplier: float = 1.0
) -> pd.DataFrame:
    """alpha*, beta*, k* and regime for each n."""
    rows = []
    for n in n_grid:
        spec = rate_spec(n, xi, delta, multiplier)
        rows.append(
            {
                "n": n,
                "xi": xi,
                "delta": delta,
                "alpha_star": spec.alpha_star,
                "beta_star": spec.beta_star,
                "k_star": spec.k_star,
                "regime": spec.regime.value,
            }
        )
    return pd.DataFrame(rows)


def _curve_regime(xi: float, delta: float) -> RateRegime:
    return RateRegime.NORMAL_PREFERRED if normal_preferred(xi, delta) else regime(xi, delta)
