"""Refined approximations to heavy-tailed sums.

A sum of n draws is approximated by an extreme-value block built from a Poisson
ladder (the k largest terms) plus a conditionally normal remainder whose
variance depends on where the ladder puts the k-th largest term. Every variant
is a deterministic map from (ladder, z) to a sum-scale value; ``sample_approx``
draws them in bulk.

Powers of n and of the ladder go through exp/log, and the conditional variance
is clamped at zero before the square root (clamp activations are counted).
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable

import numpy as np

from refined_clt import gamma_ladder, tail_model
from refined_clt.config import settings
from refined_clt.errors import ConfigurationError, DomainError, UnsupportedVariantError
from refined_clt.models import (
    ApproxConfig,
    ApproxInputs,
    ApproxSample,
    DistributionSpec,
    Family,
    GammaLadder,
    ScalingTerms,
    SigmaMode,
    TailParams,
    TwoSidedConfig,
    Variant,
)

logger = logging.getLogger(__name__)

ONE_SIDED_REFINED = (
    Variant.FINITE_VARIANCE,
    Variant.UNIFIED,
    Variant.SIMPLIFIED_SIGMA_TAU,
    Variant.SIMPLIFIED_NO_INTEGRAL,
    Variant.SHIFTED,
)


# ============================================================================
# Scaling
# ============================================================================


def scaling_a_n(n: float, xi: float) -> float:
    """Comparison scale: (n ln n)^(-1/2) at xi = 1/2, n^(-max(xi, 1/2)) otherwise."""
    if n < 2:
        raise DomainError(f"n must be at least 2, got {n}")
    log_n = math.log(n)
    if xi == 0.5:
        return math.exp(-0.5 * (log_n + math.log(log_n)))
    return math.exp(-max(xi, 0.5) * log_n)


def truncation_index(n: float, k: int, xi: float) -> float:
    """u_n = (n/k)^xi."""
    return math.exp(xi * (math.log(n) - math.log(k)))


def scaling_terms(n: int, k: int, xi: float) -> ScalingTerms:
    return ScalingTerms(a_n=scaling_a_n(n, xi), u_n=truncation_index(n, k, xi))


# ============================================================================
# Vectorized Building Blocks
# ============================================================================


def _evt_terms(
    n: int, xi: float, omega: float, gammas: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Drift -n^xi omega/(1-xi) Gamma_k^(1-xi), sum n^xi omega sum Gamma_i^(-xi), log Gamma_k."""
    log_n = math.log(n)
    n_xi = math.exp(xi * log_n)
    log_g = np.log(gammas)
    log_last = log_g[:, -1]
    sums = n_xi * omega * np.exp(-xi * log_g).sum(axis=1)
    drift = -(n_xi * omega / (1.0 - xi)) * np.exp((1.0 - xi) * log_last)
    return drift, sums, log_last


def _tau_units(n: int, xi: float, log_last: np.ndarray) -> np.ndarray:
    """(n / Gamma_k)^xi."""
    return np.exp(xi * (math.log(n) - log_last))


def _noise(n: int, variance_arg: np.ndarray, z: np.ndarray) -> tuple[np.ndarray, int]:
    clamped = variance_arg < 0.0
    coefficient = math.sqrt(n) * np.sqrt(np.where(clamped, 0.0, variance_arg))
    return coefficient * z, int(np.count_nonzero(clamped))


def _require(value: float | None, name: str, variant: Variant) -> float:
    if value is None:
        raise ConfigurationError(f"{variant.label} needs {name}")
    return value


def _refined_batch(
    cfg: ApproxConfig,
    params: TailParams,
    inputs: ApproxInputs,
    gammas: np.ndarray,
    z: np.ndarray,
) -> tuple[np.ndarray, int]:
    """Sum-scale draws of a one-sided refined variant for a (count, k) ladder array."""
    xi, omega, n = params.xi, params.omega, cfg.n
    variant = cfg.variant
    params.require_theory_range()
    if gammas.shape[1] != cfg.k:
        raise DomainError(f"ladder length {gammas.shape[1]} does not match k={cfg.k}")
    drift, sums, log_last = _evt_terms(n, xi, omega, gammas)

    if variant is Variant.FINITE_VARIANCE:
        if xi >= 0.5:
            raise UnsupportedVariantError(f"finite-variance form needs xi < 1/2, got {xi}")
        sigma0_sq = _require(inputs.sigma0_sq, "sigma0_sq", variant)
        shrink = omega * omega / (1.0 - 2.0 * xi)
        arg = sigma0_sq - shrink * np.exp((1.0 - 2.0 * xi) * (log_last - math.log(n)))
    elif variant is Variant.SIMPLIFIED_NO_INTEGRAL:
        arg = np.full(gammas.shape[0], _require(inputs.sigma_sq_at_un, "sigma_sq_at_un", variant))
    elif variant is Variant.SIMPLIFIED_SIGMA_TAU or (
        variant is Variant.SHIFTED and cfg.sigma_mode is SigmaMode.EXACT
    ):
        if inputs.sigma_fn is None:
            raise ConfigurationError(f"{variant.label} needs a truncated-variance accessor")
        shift = params.kappa if variant is Variant.SHIFTED else 0.0
        arg = inputs.sigma_fn(omega * _tau_units(n, xi, log_last) + shift)
    elif variant in (Variant.UNIFIED, Variant.SHIFTED):
        base = _require(inputs.sigma_sq_at_un, "sigma_sq_at_un", variant)
        u_n = truncation_index(n, cfg.k, xi)
        arg = base + tail_model.variance_increment_array(
            xi, omega, _tau_units(n, xi, log_last), np.float64(u_n)
        )
    else:
        raise UnsupportedVariantError(f"{variant.label} is not a one-sided refined variant")

    noise, clamps = _noise(n, arg, z)
    if variant is Variant.SHIFTED:
        shift_term = params.kappa * (cfg.k - np.exp(log_last))
        return shift_term + drift + noise + sums, clamps
    return drift + noise + sums, clamps


def _two_sided_batch(
    cfg: TwoSidedConfig,
    n: int,
    sigma2_fn: Callable[[np.ndarray | None, np.ndarray], np.ndarray],
    right: np.ndarray,
    left: np.ndarray | None,
    z: np.ndarray,
) -> tuple[np.ndarray, int]:
    r, lp = cfg.right, cfg.left
    drift_r, sums_r, log_last_r = _evt_terms(n, r.xi, r.omega, right)
    right_pos = r.omega * _tau_units(n, r.xi, log_last_r)
    if left is None or cfg.k_left == 0:
        left_block = np.zeros_like(drift_r)
        left_pos = None
    else:
        drift_l, sums_l, log_last_l = _evt_terms(n, lp.xi, lp.omega, left)
        left_block = drift_l + sums_l
        left_pos = lp.omega * _tau_units(n, lp.xi, log_last_l)
    noise, clamps = _noise(n, sigma2_fn(left_pos, right_pos), z)
    return drift_r + noise + sums_r - left_block, clamps


def _as_row(ladder: GammaLadder) -> np.ndarray:
    return ladder.gammas[np.newaxis, :]


def _single(values: np.ndarray, clamps: int, variant: Variant) -> float:
    if clamps:
        logger.debug(f"variance clamp active in a {variant.label} draw")
    return float(values[0])


# ============================================================================
# Single Draws
# ============================================================================


def draw_finite_variance(
    cfg: ApproxConfig, params: TailParams, sigma0_sq: float, ladder: GammaLadder, z: float
) -> float:
    """Finite-variance form: the remainder variance depends on F only through sigma0^2."""
    cfg = _with_variant(cfg, Variant.FINITE_VARIANCE)
    values, clamps = _refined_batch(
        cfg, params, ApproxInputs(sigma0_sq=sigma0_sq), _as_row(ladder), np.array([z])
    )
    return _single(values, clamps, cfg.variant)


def draw_unified(
    cfg: ApproxConfig, params: TailParams, sigma_sq_at_un: float, ladder: GammaLadder, z: float
) -> float:
    """Unified form, valid for 1/3 < xi < 1; sigma_sq_at_un = sigma^2(omega u_n)."""
    cfg = _with_variant(cfg, Variant.UNIFIED)
    values, clamps = _refined_batch(
        cfg, params, ApproxInputs(sigma_sq_at_un=sigma_sq_at_un), _as_row(ladder), np.array([z])
    )
    return _single(values, clamps, cfg.variant)


def draw_simplified_sigma_tau(
    cfg: ApproxConfig,
    params: TailParams,
    sigma_fn: Callable[[np.ndarray], np.ndarray],
    ladder: GammaLadder,
    z: float,
) -> float:
    """Variance taken directly as sigma^2(omega (n/Gamma_k)^xi)."""
    cfg = _with_variant(cfg, Variant.SIMPLIFIED_SIGMA_TAU)
    values, clamps = _refined_batch(
        cfg, params, ApproxInputs(sigma_fn=sigma_fn), _as_row(ladder), np.array([z])
    )
    return _single(values, clamps, cfg.variant)


def draw_simplified_no_integral(
    cfg: ApproxConfig, params: TailParams, sigma_sq_at_un: float, ladder: GammaLadder, z: float
) -> float:
    """Unified form with the variance integral dropped."""
    cfg = _with_variant(cfg, Variant.SIMPLIFIED_NO_INTEGRAL)
    values, clamps = _refined_batch(
        cfg, params, ApproxInputs(sigma_sq_at_un=sigma_sq_at_un), _as_row(ladder), np.array([z])
    )
    return _single(values, clamps, cfg.variant)


def draw_shifted(
    cfg: ApproxConfig,
    params: TailParams,
    sigma_fn: Callable[[np.ndarray], np.ndarray] | None,
    ladder: GammaLadder,
    z: float,
    sigma_sq_at_un: float | None = None,
) -> float:
    """Shifted-Pareto form with the leading kappa (k - Gamma_k) term.

    With ``cfg.sigma_mode`` INTEGRAL the variance is sigma^2 at the anchor plus the
    closed-form increment (``sigma_sq_at_un`` or, if absent, ``sigma_fn`` at
    omega u_n + kappa); with EXACT it is ``sigma_fn`` at omega (n/Gamma_k)^xi + kappa.
    For kappa = 0 and INTEGRAL mode the result equals ``draw_unified`` bit for bit.
    """
    cfg = _with_variant(cfg, Variant.SHIFTED)
    if cfg.sigma_mode is SigmaMode.INTEGRAL and sigma_sq_at_un is None:
        if sigma_fn is None:
            raise ConfigurationError("shifted draws need sigma_sq_at_un or sigma_fn")
        u_n = truncation_index(cfg.n, cfg.k, params.xi)
        sigma_sq_at_un = float(sigma_fn(np.array([params.omega * u_n + params.kappa]))[0])
    inputs = ApproxInputs(sigma_sq_at_un=sigma_sq_at_un, sigma_fn=sigma_fn)
    values, clamps = _refined_batch(cfg, params, inputs, _as_row(ladder), np.array([z]))
    return _single(values, clamps, cfg.variant)


def draw_two_sided(
    cfg: TwoSidedConfig,
    n: int,
    sigma2_fn: Callable[[np.ndarray | None, np.ndarray], np.ndarray],
    right_ladder: GammaLadder,
    left_ladder: GammaLadder | None,
    z: float,
) -> float:
    """Both tails approximated by independent ladders; left block enters with a minus sign."""
    if right_ladder.k != cfg.k_right:
        raise DomainError(f"right ladder length {right_ladder.k} != k_right={cfg.k_right}")
    if cfg.k_left and (left_ladder is None or left_ladder.k != cfg.k_left):
        raise DomainError(f"left ladder must have length k_left={cfg.k_left}")
    left = _as_row(left_ladder) if cfg.k_left and left_ladder is not None else None
    values, clamps = _two_sided_batch(cfg, n, sigma2_fn, _as_row(right_ladder), left, np.array([z]))
    return _single(values, clamps, Variant.TWO_SIDED)


def draw_baseline(
    cfg: ApproxConfig,
    params: TailParams,
    inputs: ApproxInputs,
    stream: np.random.Generator,
    z: float | None = None,
) -> float:
    """Plain limit-law draw: n^(1/2) sigma0 z, or n^xi times a stable-limit draw.

    Raises:
        UnsupportedVariantError: normal baseline with xi >= 1/2, stable with xi <= 1/2.
    """
    if cfg.variant is Variant.NORMAL_BASELINE:
        _check_normal(params)
        sigma0_sq = _require(inputs.sigma0_sq, "sigma0_sq", cfg.variant)
        draw = float(stream.standard_normal()) if z is None else z
        return math.sqrt(cfg.n) * math.sqrt(sigma0_sq) * draw
    if cfg.variant is Variant.STABLE_BASELINE:
        n_xi = math.exp(params.xi * math.log(cfg.n))
        return n_xi * gamma_ladder.stable_limit_sample(
            params.xi, params.omega, inputs.truncation, stream
        )
    raise UnsupportedVariantError(f"{cfg.variant.label} is not a baseline")


def _check_normal(params: TailParams) -> None:
    if params.xi >= 0.5:
        raise UnsupportedVariantError(f"the normal baseline needs xi < 1/2, got {params.xi}")


def _with_variant(cfg: ApproxConfig, variant: Variant) -> ApproxConfig:
    if cfg.variant is variant:
        return cfg
    return ApproxConfig(
        n=cfg.n, k=cfg.k, variant=variant, scaled=cfg.scaled, sigma_mode=cfg.sigma_mode
    )


# ============================================================================
# Bulk Sampling
# ============================================================================


def sample_approx(
    cfg: ApproxConfig,
    params: TailParams,
    inputs: ApproxInputs,
    reps: int,
    stream: np.random.Generator,
) -> ApproxSample:
    """``reps`` independent draws of the configured variant.

    Ladders and normal draws come from ``stream`` in row batches bounded by
    ``inputs.max_block_elements`` (ladders first, then z, per batch). Values are
    multiplied by a_n when ``cfg.scaled``.
    """
    if reps < 1:
        raise DomainError(f"reps must be at least 1, got {reps}")
    n, variant = cfg.n, cfg.variant

    if variant is Variant.NORMAL_BASELINE:
        _check_normal(params)
        sigma0_sq = _require(inputs.sigma0_sq, "sigma0_sq", variant)
        values = math.sqrt(n) * math.sqrt(sigma0_sq) * stream.standard_normal(reps)
        clamps = 0
    elif variant is Variant.STABLE_BASELINE:
        n_xi = math.exp(params.xi * math.log(n))
        values = n_xi * gamma_ladder.stable_limit_samples(
            params.xi, params.omega, inputs.truncation, reps, stream, inputs.max_block_elements
        )
        clamps = 0
    elif variant is Variant.TWO_SIDED:
        values, clamps = _sample_two_sided(n, inputs, reps, stream)
    elif variant in ONE_SIDED_REFINED:
        values = np.empty(reps)
        clamps = 0
        rows = max(1, inputs.max_block_elements // cfg.k)
        for start in range(0, reps, rows):
            stop = min(reps, start + rows)
            gammas = gamma_ladder.sample_ladders(cfg.k, stop - start, stream)
            z = stream.standard_normal(stop - start)
            values[start:stop], batch_clamps = _refined_batch(cfg, params, inputs, gammas, z)
            clamps += batch_clamps
    else:
        raise UnsupportedVariantError(f"{variant.label} cannot be sampled as an approximation")

    if cfg.scaled:
        values = values * scaling_a_n(n, params.xi)
    if clamps:
        logger.debug(f"{variant.label}: variance clamp active in {clamps}/{reps} draws (n={n})")
    return ApproxSample(values=values, clamp_count=clamps)


def _sample_two_sided(
    n: int, inputs: ApproxInputs, reps: int, stream: np.random.Generator
) -> tuple[np.ndarray, int]:
    cfg = inputs.two_sided
    if cfg is None or inputs.sigma2_fn is None:
        raise ConfigurationError("two-sided draws need a TwoSidedConfig and a variance accessor")
    values = np.empty(reps)
    clamps = 0
    rows = max(1, inputs.max_block_elements // (cfg.k_right + cfg.k_left))
    for start in range(0, reps, rows):
        count = min(reps, start + rows) - start
        right = gamma_ladder.sample_ladders(cfg.k_right, count, stream)
        left = gamma_ladder.sample_ladders(cfg.k_left, count, stream) if cfg.k_left else None
        z = stream.standard_normal(count)
        batch, batch_clamps = _two_sided_batch(cfg, n, inputs.sigma2_fn, right, left, z)
        values[start : start + count] = batch
        clamps += batch_clamps
    return values, clamps


# ============================================================================
# Two-Sided Variance
# ============================================================================


class ComposedTwoSidedVariance:
    """sigma^2(x, y) anchored at (omega_L v_n, omega_R u_n) plus per-tail increments.

    A tail's increment is dropped when its xi exceeds 1/2 or when it has no block.
    Returns the unclamped argument; the draw applies the positive part.
    """

    def __init__(self, cfg: TwoSidedConfig, n: int, base_sigma_sq: float) -> None:
        self.cfg = cfg
        self.base = base_sigma_sq
        self.u_n = truncation_index(n, cfg.k_right, cfg.right.xi)
        self.v_n = truncation_index(n, cfg.k_left, cfg.left.xi) if cfg.k_left else None

    def __call__(self, x: np.ndarray | None, y: np.ndarray) -> np.ndarray:
        right, left = self.cfg.right, self.cfg.left
        total = np.full(np.shape(y), self.base)
        if right.xi <= 0.5:
            total = total + tail_model.variance_increment_array(
                right.xi, right.omega, np.asarray(y) / right.omega, np.float64(self.u_n)
            )
        if x is not None and self.v_n is not None and left.xi <= 0.5:
            total = total + tail_model.variance_increment_array(
                left.xi, left.omega, np.asarray(x) / left.omega, np.float64(self.v_n)
            )
        return total


# ============================================================================
# Input Preparation
# ============================================================================


def two_sided_config(spec: DistributionSpec, k: int, k_left: int | None = None) -> TwoSidedConfig:
    """Mirror the right-tail description for families with a symmetric heavy left tail."""
    if spec.family is not Family.STUDENT_T:
        raise UnsupportedVariantError(
            f"{spec.family.value} has a light left tail; use a one-sided variant"
        )
    return TwoSidedConfig(
        right=spec.params, k_right=k, left=spec.params, k_left=k if k_left is None else k_left
    )


def prepare_inputs(
    spec: DistributionSpec,
    cfg: ApproxConfig,
    sigma_sq_at_un: float | None = None,
) -> ApproxInputs:
    """Resolve the auxiliary inputs a variant needs from the distribution.

    Args:
        spec: Distribution specification.
        cfg: Approximation configuration.
        sigma_sq_at_un: User-supplied sigma^2(omega u_n); required for custom families.

    Returns:
        ApproxInputs with only the entries relevant for ``cfg.variant`` filled.
    """
    params = spec.params
    variant = cfg.variant
    inputs = ApproxInputs(
        truncation=settings.stable_truncation, max_block_elements=settings.max_block_elements
    )
    custom = spec.family is Family.CUSTOM

    if variant in (Variant.FINITE_VARIANCE, Variant.NORMAL_BASELINE):
        if custom:
            raise ConfigurationError(f"{variant.label} is not available for custom families")
        inputs.sigma0_sq = tail_model.summarize(spec).sigma0_sq
        if not math.isfinite(inputs.sigma0_sq):
            raise UnsupportedVariantError(f"{variant.label} needs a finite variance")
    elif variant in (Variant.UNIFIED, Variant.SIMPLIFIED_NO_INTEGRAL) or (
        variant is Variant.SHIFTED and cfg.sigma_mode is SigmaMode.INTEGRAL
    ):
        if sigma_sq_at_un is not None:
            inputs.sigma_sq_at_un = sigma_sq_at_un
        elif custom:
            raise ConfigurationError("custom families need a user-supplied sigma_sq_at_un")
        else:
            anchor = params.omega * truncation_index(cfg.n, cfg.k, params.xi)
            if variant is Variant.SHIFTED:
                anchor += params.kappa
            inputs.sigma_sq_at_un = _finite_sigma_sq(spec, anchor)
    elif variant in (Variant.SIMPLIFIED_SIGMA_TAU, Variant.SHIFTED):
        if custom:
            raise ConfigurationError(f"{variant.label} is not available for custom families")
        inputs.sigma_fn = tail_model.truncated_variance_fn(spec)
    elif variant is Variant.TWO_SIDED:
        two_sided = two_sided_config(spec, cfg.k)
        u_n = truncation_index(cfg.n, two_sided.k_right, two_sided.right.xi)
        v_n = truncation_index(cfg.n, two_sided.k_left, two_sided.left.xi)
        base = tail_model.truncated_moments_between(
            spec, -two_sided.left.omega * v_n, two_sided.right.omega * u_n
        ).sigma_sq
        inputs.two_sided = two_sided
        inputs.sigma2_fn = ComposedTwoSidedVariance(two_sided, cfg.n, base)
    return inputs


def _finite_sigma_sq(spec: DistributionSpec, t: float) -> float:
    value = tail_model.truncated_moments(spec, t).sigma_sq
    if not math.isfinite(value):
        raise UnsupportedVariantError(
            f"sigma^2({t:.6g}) is infinite for {spec.family.value}; use the two-sided variant"
        )
    return value
