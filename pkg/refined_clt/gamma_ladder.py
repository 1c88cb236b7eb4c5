"""Poisson arrival ladders and the centered LePage partial sums built from them."""

from __future__ import annotations

import logging

import numpy as np
from scipy import special

from refined_clt.config import settings
from refined_clt.errors import DomainError, UnsupportedVariantError
from refined_clt.models import GammaLadder

logger = logging.getLogger(__name__)

MIN_STABLE_TRUNCATION = 100


def unit_exponentials(stream: np.random.Generator, shape: int | tuple[int, ...]) -> np.ndarray:
    """Unit-rate exponentials by inversion, -ln(1 - U)."""
    return -np.log1p(-stream.random(shape))


def ladder_from_exponentials(draws: np.ndarray) -> GammaLadder:
    return GammaLadder(np.cumsum(np.asarray(draws, dtype=np.float64)))


def sample_ladder(k: int, stream: np.random.Generator) -> GammaLadder:
    """Gamma_1 < ... < Gamma_k from one stream."""
    if k < 1:
        raise DomainError(f"ladder length must be at least 1, got {k}")
    return ladder_from_exponentials(unit_exponentials(stream, k))


def sample_ladders(k: int, count: int, stream: np.random.Generator) -> np.ndarray:
    """``count`` ladders as rows of a (count, k) array.

    Row 0 of a single-row batch equals ``sample_ladder(k, stream)`` on the same stream.
    """
    if k < 1 or count < 1:
        raise DomainError(f"need k >= 1 and count >= 1, got k={k}, count={count}")
    return np.cumsum(unit_exponentials(stream, (count, k)), axis=1)


def expected_inverse_power(i: int, xi: float) -> float:
    """E[Gamma_i^(-xi)] = Gamma(i - xi) / Gamma(i)."""
    if i < 1:
        raise DomainError(f"i must be at least 1, got {i}")
    if xi >= i:
        raise DomainError(f"E[Gamma_{i}^(-{xi})] diverges (xi >= i)")
    # poch(i, -xi) = Gamma(i - xi) / Gamma(i) without the cancellation of two log-gammas
    return float(special.poch(i, -xi))


def expected_power(k: int, p: float) -> float:
    """E[Gamma_k^p] = Gamma(k + p) / Gamma(k)."""
    if k < 1 or k + p <= 0.0:
        raise DomainError(f"E[Gamma_{k}^{p}] diverges")
    return float(special.poch(k, p))


def centered_sums(gammas: np.ndarray, xi: float) -> np.ndarray:
    """Row-wise sum_i Gamma_i^(-xi) - Gamma_k^(1-xi)/(1-xi) for a (count, k) ladder array.

    Powers go through the logarithm, so tiny Gamma_1 cannot overflow.
    """
    log_g = np.log(gammas)
    head = np.exp(-xi * log_g).sum(axis=1)
    return head - np.exp((1.0 - xi) * log_g[:, -1]) / (1.0 - xi)


def centered_partial_sum(ladder: GammaLadder, xi: float) -> float:
    """Mean-zero combination sum_{i<=k} Gamma_i^(-xi) - Gamma_k^(1-xi)/(1-xi)."""
    if xi >= 1.0:
        raise DomainError(f"centered_partial_sum needs xi < 1, got {xi}")
    return float(centered_sums(ladder.gammas[np.newaxis, :], xi)[0])


def _check_stable(xi: float, truncation: int) -> None:
    if not 0.5 < xi < 1.0:
        raise UnsupportedVariantError(f"the stable limit needs 1/2 < xi < 1, got {xi}")
    if truncation < MIN_STABLE_TRUNCATION:
        raise DomainError(f"truncation must be at least {MIN_STABLE_TRUNCATION}, got {truncation}")


def stable_limit_sample(
    xi: float, omega: float, truncation: int, stream: np.random.Generator
) -> float:
    """One draw of omega times the centered series truncated after ``truncation`` arrivals."""
    _check_stable(xi, truncation)
    return omega * centered_partial_sum(sample_ladder(truncation, stream), xi)


def stable_limit_samples(
    xi: float,
    omega: float,
    truncation: int,
    count: int,
    stream: np.random.Generator,
    max_block_elements: int | None = None,
) -> np.ndarray:
    """``count`` stable-limit draws, generated in row batches bounded by ``max_block_elements``."""
    _check_stable(xi, truncation)
    rows = max(1, (max_block_elements or settings.max_block_elements) // truncation)
    out = np.empty(count)
    for start in range(0, count, rows):
        stop = min(count, start + rows)
        ladders = sample_ladders(truncation, stop - start, stream)
        out[start:stop] = omega * centered_sums(ladders, xi)
    logger.debug(f"stable draws: {count} rows, truncation {truncation}, batch {rows}")
    return out
