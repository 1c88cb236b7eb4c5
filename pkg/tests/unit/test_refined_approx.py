"""Scaling, single draws and bulk sampling of the refined approximations."""

from __future__ import annotations

import math
from collections.abc import Callable

import numpy as np
import pytest

from refined_clt import gamma_ladder, mc_harness, refined_approx, tail_model
from refined_clt.errors import ConfigurationError, DomainError, UnsupportedVariantError
from refined_clt.models import (
    ApproxConfig,
    ApproxInputs,
    DistributionConfig,
    DistributionSpec,
    EmpiricalCdf,
    Family,
    GammaLadder,
    SigmaMode,
    TailParams,
    TwoSidedConfig,
    Variant,
)

SIGMA0_SQ_04 = 0.16 / (0.36 * 0.2)


def ladder(*gammas: float) -> GammaLadder:
    return GammaLadder(np.array(gammas, dtype=np.float64))


def noise_variance(draw: Callable[[float], float], n: int) -> float:
    """Recover the clamped variance argument from the z-slope of a draw."""
    return (draw(1.0) - draw(0.0)) ** 2 / n


# ============================================================================
# Scaling
# ============================================================================


def test_scaling_a_n_examples() -> None:
    assert refined_approx.scaling_a_n(100, 0.4) == pytest.approx(0.1, rel=1e-12)
    assert refined_approx.scaling_a_n(math.exp(2.0), 0.5) == pytest.approx(0.260130, abs=1e-6)
    assert refined_approx.scaling_a_n(10, 0.8) == pytest.approx(0.158489, abs=1e-6)
    with pytest.raises(DomainError):
        refined_approx.scaling_a_n(1, 0.4)


def test_truncation_index() -> None:
    terms = refined_approx.scaling_terms(10_000, 100, 0.5)
    assert terms.u_n == pytest.approx(10.0, rel=1e-12)
    assert terms.a_n == pytest.approx(1.0 / math.sqrt(1e4 * math.log(1e4)))


# ============================================================================
# Finite-Variance Form
# ============================================================================


def test_finite_variance_without_noise(pareto_04: DistributionSpec) -> None:
    cfg = ApproxConfig(n=100, k=1, variant=Variant.FINITE_VARIANCE)
    value = refined_approx.draw_finite_variance(
        cfg, pareto_04.params, SIGMA0_SQ_04, ladder(1.0), 0.0
    )
    assert value == pytest.approx(-4.20638, abs=1e-5)


def test_finite_variance_with_noise(pareto_04: DistributionSpec) -> None:
    cfg = ApproxConfig(n=100, k=1, variant=Variant.FINITE_VARIANCE)
    sigma0_sq = tail_model.summarize(pareto_04).sigma0_sq
    assert sigma0_sq == pytest.approx(SIGMA0_SQ_04, rel=1e-12)
    value = refined_approx.draw_finite_variance(cfg, pareto_04.params, sigma0_sq, ladder(1.0), 1.0)
    assert value == pytest.approx(0.606999, abs=1e-5)


def test_finite_variance_clamps_negative_variance(pareto_04: DistributionSpec) -> None:
    cfg = ApproxConfig(n=100, k=1, variant=Variant.FINITE_VARIANCE)
    expected = 100**0.4 * (50**-0.4 - 50**0.6 / 0.6)
    for z in (-2.0, 0.0, 3.0):
        value = refined_approx.draw_finite_variance(
            cfg, pareto_04.params, SIGMA0_SQ_04, ladder(50.0), z
        )
        assert value == pytest.approx(expected, rel=1e-12)


def test_finite_variance_domain(pareto_07: DistributionSpec, pareto_04: DistributionSpec) -> None:
    cfg = ApproxConfig(n=100, k=1, variant=Variant.FINITE_VARIANCE)
    with pytest.raises(UnsupportedVariantError):
        refined_approx.draw_finite_variance(cfg, pareto_07.params, 1.0, ladder(1.0), 0.0)
    with pytest.raises(DomainError):
        refined_approx.draw_finite_variance(
            cfg, pareto_04.params, SIGMA0_SQ_04, ladder(1.0, 2.0), 0.0
        )


def test_theory_range_is_enforced() -> None:
    params = TailParams(xi=0.3, omega=1.0, delta=0.3, x0=1.0)
    cfg = ApproxConfig(n=100, k=1, variant=Variant.UNIFIED)
    with pytest.raises(DomainError):
        refined_approx.draw_unified(cfg, params, 1.0, ladder(1.0), 0.0)


# ============================================================================
# Unified, Simplified and Shifted Forms
# ============================================================================


def test_unified_has_no_increment_when_last_arrival_equals_k(pareto_045: DistributionSpec) -> None:
    cfg = ApproxConfig(n=1000, k=3, variant=Variant.UNIFIED)
    gammas = ladder(1.0, 2.0, 3.0)

    def draw(z: float) -> float:
        return refined_approx.draw_unified(cfg, pareto_045.params, 1.7, gammas, z)

    assert noise_variance(draw, 1000) == pytest.approx(1.7, rel=1e-9)


def test_unified_log_increment_at_half() -> None:
    params = TailParams(xi=0.5, omega=1.0, delta=0.5, x0=1.0)
    cfg = ApproxConfig(n=10_000, k=100, variant=Variant.UNIFIED)
    gammas = GammaLadder(np.linspace(0.5, 50.0, 100))

    def draw(z: float) -> float:
        return refined_approx.draw_unified(cfg, params, 1.0, gammas, z)

    assert noise_variance(draw, 10_000) == pytest.approx(1.0 + math.log(2.0), rel=1e-9)


def test_unified_tracks_truncated_variance_for_exact_pareto(pareto_04: DistributionSpec) -> None:
    n, k = 1_000_000, 100
    params = pareto_04.params
    unified_cfg = ApproxConfig(n=n, k=k, variant=Variant.UNIFIED)
    finite_cfg = ApproxConfig(n=n, k=k, variant=Variant.FINITE_VARIANCE)
    sigma_sq_at_un = refined_approx.prepare_inputs(pareto_04, unified_cfg).sigma_sq_at_un
    sigma0_sq = tail_model.summarize(pareto_04).sigma0_sq
    assert sigma_sq_at_un is not None
    for last in (80.0, 100.0, 130.0):
        gammas = GammaLadder(np.linspace(0.5, last, k))
        tau = (n / last) ** params.xi

        def unified(z: float, gammas: GammaLadder = gammas) -> float:
            return refined_approx.draw_unified(unified_cfg, params, sigma_sq_at_un, gammas, z)

        def finite(z: float, gammas: GammaLadder = gammas) -> float:
            return refined_approx.draw_finite_variance(finite_cfg, params, sigma0_sq, gammas, z)

        exact = tail_model.truncated_moments(pareto_04, params.omega * tau).sigma_sq
        assert noise_variance(unified, n) == pytest.approx(exact, rel=1e-2), last
        # the centering shift of the Pareto law keeps the finite-variance form a few % lower
        gap = noise_variance(unified, n) / noise_variance(finite, n) - 1.0
        assert 0.0 < gap < 0.04, last


def test_draws_increase_with_each_summand(pareto_045: DistributionSpec) -> None:
    cfg = ApproxConfig(n=1000, k=3, variant=Variant.UNIFIED)
    base = refined_approx.draw_unified(cfg, pareto_045.params, 1.7, ladder(1.0, 2.0, 3.0), 0.5)
    moved = refined_approx.draw_unified(cfg, pareto_045.params, 1.7, ladder(0.5, 2.0, 3.0), 0.5)
    assert moved > base


def test_no_integral_uses_constant_variance(pareto_07: DistributionSpec) -> None:
    cfg = ApproxConfig(n=1000, k=2, variant=Variant.SIMPLIFIED_NO_INTEGRAL)
    for gammas in (ladder(0.3, 0.9), ladder(1.0, 7.0)):

        def draw(z: float, gammas: GammaLadder = gammas) -> float:
            return refined_approx.draw_simplified_no_integral(
                cfg, pareto_07.params, 0.8, gammas, z
            )

        assert noise_variance(draw, 1000) == pytest.approx(0.8, rel=1e-9)


def test_sigma_tau_evaluates_accessor_at_ladder_position(pareto_045: DistributionSpec) -> None:
    cfg = ApproxConfig(n=1000, k=2, variant=Variant.SIMPLIFIED_SIGMA_TAU)
    accessor = tail_model.ParetoTruncatedVariance(pareto_045.params)
    gammas = ladder(0.4, 1.6)

    def draw(z: float) -> float:
        return refined_approx.draw_simplified_sigma_tau(cfg, pareto_045.params, accessor, gammas, z)

    position = (1000 / 1.6) ** 0.45
    expected = float(accessor(np.array([position]))[0])
    assert noise_variance(draw, 1000) == pytest.approx(expected, rel=1e-9)


def test_shifted_without_shift_matches_unified_exactly(pareto_045: DistributionSpec) -> None:
    gammas = gamma_ladder.sample_ladder(12, np.random.default_rng(21))
    shifted_cfg = ApproxConfig(n=5000, k=12, variant=Variant.SHIFTED)
    unified_cfg = ApproxConfig(n=5000, k=12, variant=Variant.UNIFIED)
    for z in (-1.3, 0.0, 0.4):
        shifted = refined_approx.draw_shifted(
            shifted_cfg, pareto_045.params, None, gammas, z, sigma_sq_at_un=1.9
        )
        unified = refined_approx.draw_unified(unified_cfg, pareto_045.params, 1.9, gammas, z)
        assert shifted == unified


def test_shift_term_is_added(make_pareto: Callable[..., DistributionSpec]) -> None:
    params = make_pareto(0.4, kappa=-5.0 / 3.0).params
    cfg = ApproxConfig(n=100, k=2, variant=Variant.SHIFTED)
    gammas = ladder(0.5, 1.5)
    shifted = refined_approx.draw_shifted(cfg, params, None, gammas, 0.7, sigma_sq_at_un=2.0)
    unified = refined_approx.draw_unified(cfg, params, 2.0, gammas, 0.7)
    assert shifted - unified == pytest.approx(-0.833333, abs=1e-6)


def test_shifted_shift_vanishes_when_last_arrival_equals_k(
    make_pareto: Callable[..., DistributionSpec],
) -> None:
    params = make_pareto(0.4, kappa=-5.0 / 3.0).params
    cfg = ApproxConfig(n=100, k=1, variant=Variant.SHIFTED)
    shifted = refined_approx.draw_shifted(cfg, params, None, ladder(1.0), 0.2, sigma_sq_at_un=2.0)
    unified = refined_approx.draw_unified(cfg, params, 2.0, ladder(1.0), 0.2)
    assert shifted == pytest.approx(unified, rel=1e-12)


def test_shifted_exact_mode_needs_accessor(pareto_045: DistributionSpec) -> None:
    cfg = ApproxConfig(n=100, k=1, variant=Variant.SHIFTED, sigma_mode=SigmaMode.EXACT)
    with pytest.raises(ConfigurationError):
        refined_approx.draw_shifted(cfg, pareto_045.params, None, ladder(1.0), 0.0)


def test_shifted_integral_anchor_includes_shift(
    make_pareto: Callable[..., DistributionSpec],
) -> None:
    spec = make_pareto(0.4, kappa=-5.0 / 3.0)
    params = spec.params
    n, k = 1000, 10
    integral_cfg = ApproxConfig(n=n, k=k, variant=Variant.SHIFTED)
    exact_cfg = ApproxConfig(n=n, k=k, variant=Variant.SHIFTED, sigma_mode=SigmaMode.EXACT)
    anchor = params.omega * refined_approx.truncation_index(n, k, params.xi) + params.kappa
    base = refined_approx.prepare_inputs(spec, integral_cfg).sigma_sq_at_un
    assert base == pytest.approx(tail_model.truncated_moments(spec, anchor).sigma_sq, rel=1e-12)

    accessor = refined_approx.prepare_inputs(spec, exact_cfg).sigma_fn
    gammas = GammaLadder(np.linspace(1.0, float(k), k))
    for z in (-0.5, 1.2):
        integral = refined_approx.draw_shifted(
            integral_cfg, params, None, gammas, z, sigma_sq_at_un=base
        )
        exact = refined_approx.draw_shifted(exact_cfg, params, accessor, gammas, z)
        assert integral == pytest.approx(exact, rel=1e-9)


# ============================================================================
# Two-Sided Form
# ============================================================================


def test_two_sided_identical_ladders_cancel(student_t25: DistributionSpec) -> None:
    cfg = refined_approx.two_sided_config(student_t25, 5)
    sigma2 = refined_approx.ComposedTwoSidedVariance(cfg, 10_000, 1.0)
    gammas = gamma_ladder.sample_ladder(5, np.random.default_rng(2))
    value = refined_approx.draw_two_sided(cfg, 10_000, sigma2, gammas, gammas, 0.0)
    assert value == 0.0


def test_two_sided_without_left_block_matches_unified(pareto_045: DistributionSpec) -> None:
    params = pareto_045.params
    cfg = TwoSidedConfig(right=params, k_right=4, left=params, k_left=0)
    sigma2 = refined_approx.ComposedTwoSidedVariance(cfg, 2000, 1.3)
    gammas = gamma_ladder.sample_ladder(4, np.random.default_rng(6))
    unified_cfg = ApproxConfig(n=2000, k=4, variant=Variant.UNIFIED)
    for z in (-0.8, 1.1):
        two_sided = refined_approx.draw_two_sided(cfg, 2000, sigma2, gammas, None, z)
        unified = refined_approx.draw_unified(unified_cfg, params, 1.3, gammas, z)
        assert two_sided == pytest.approx(unified, rel=1e-12)


def test_two_sided_needs_heavy_left_tail(pareto_045: DistributionSpec) -> None:
    with pytest.raises(UnsupportedVariantError):
        refined_approx.two_sided_config(pareto_045, 5)


def test_two_sided_ladder_lengths_are_checked(student_t25: DistributionSpec) -> None:
    cfg = refined_approx.two_sided_config(student_t25, 3, k_left=2)
    sigma2 = refined_approx.ComposedTwoSidedVariance(cfg, 100, 1.0)
    with pytest.raises(DomainError):
        refined_approx.draw_two_sided(cfg, 100, sigma2, ladder(1.0, 2.0, 3.0), None, 0.0)


def test_two_sided_bulk_draws(student_t25: DistributionSpec) -> None:
    cfg = ApproxConfig(n=10_000, k=30, variant=Variant.TWO_SIDED)
    inputs = refined_approx.prepare_inputs(student_t25, cfg)
    sample = refined_approx.sample_approx(
        cfg, student_t25.params, inputs, 2000, np.random.default_rng(3)
    )
    assert sample.values.shape == (2000,)
    assert np.all(np.isfinite(sample.values))


def test_two_sided_draws_are_symmetric(student_t25: DistributionSpec) -> None:
    cfg = ApproxConfig(n=10_000, k=30, variant=Variant.TWO_SIDED)
    inputs = refined_approx.prepare_inputs(student_t25, cfg)
    a, b = (
        refined_approx.sample_approx(
            cfg, student_t25.params, inputs, 50_000, np.random.default_rng(seed)
        ).values
        for seed in (61, 62)
    )
    result = mc_harness.ks_two_sample(EmpiricalCdf.from_samples(a), EmpiricalCdf.from_samples(-b))
    assert result.statistic < 3.0 * result.dkw_margin


# ============================================================================
# Baselines
# ============================================================================


def test_normal_baseline_value(pareto_04: DistributionSpec) -> None:
    cfg = ApproxConfig(n=100, k=1, variant=Variant.NORMAL_BASELINE)
    inputs = ApproxInputs(sigma0_sq=4.0)
    value = refined_approx.draw_baseline(
        cfg, pareto_04.params, inputs, np.random.default_rng(0), z=1.5
    )
    assert value == pytest.approx(30.0, rel=1e-12)


def test_baseline_domain(pareto_04: DistributionSpec, pareto_07: DistributionSpec) -> None:
    stream = np.random.default_rng(0)
    normal = ApproxConfig(n=100, k=1, variant=Variant.NORMAL_BASELINE)
    stable = ApproxConfig(n=100, k=1, variant=Variant.STABLE_BASELINE)
    with pytest.raises(UnsupportedVariantError):
        refined_approx.draw_baseline(normal, pareto_07.params, ApproxInputs(sigma0_sq=1.0), stream)
    with pytest.raises(UnsupportedVariantError):
        refined_approx.draw_baseline(stable, pareto_04.params, ApproxInputs(), stream)
    with pytest.raises(UnsupportedVariantError):
        refined_approx.prepare_inputs(
            pareto_07, ApproxConfig(n=100, k=1, variant=Variant.NORMAL_BASELINE)
        )


def test_stable_baseline_is_deterministic(pareto_07: DistributionSpec) -> None:
    cfg = ApproxConfig(n=100, k=1, variant=Variant.STABLE_BASELINE)
    inputs = ApproxInputs(truncation=500)
    a = refined_approx.draw_baseline(cfg, pareto_07.params, inputs, np.random.default_rng(12))
    b = refined_approx.draw_baseline(cfg, pareto_07.params, inputs, np.random.default_rng(12))
    assert a == b


@pytest.mark.slow
def test_normal_baseline_variance(pareto_04: DistributionSpec) -> None:
    cfg = ApproxConfig(n=100, k=1, variant=Variant.NORMAL_BASELINE, scaled=False)
    sample = refined_approx.sample_approx(
        cfg, pareto_04.params, ApproxInputs(sigma0_sq=4.0), 1_000_000, np.random.default_rng(1)
    )
    assert sample.values.var() == pytest.approx(400.0, rel=1e-2)


# ============================================================================
# Bulk Sampling
# ============================================================================


def test_single_replicate_matches_single_draw(pareto_045: DistributionSpec) -> None:
    cfg = ApproxConfig(n=1000, k=6, variant=Variant.FINITE_VARIANCE, scaled=False)
    inputs = refined_approx.prepare_inputs(pareto_045, cfg)
    assert inputs.sigma0_sq is not None
    bulk = refined_approx.sample_approx(cfg, pareto_045.params, inputs, 1, np.random.default_rng(4))

    stream = np.random.default_rng(4)
    gammas = gamma_ladder.sample_ladder(6, stream)
    z = float(stream.standard_normal())
    single = refined_approx.draw_finite_variance(
        cfg, pareto_045.params, inputs.sigma0_sq, gammas, z
    )
    assert bulk.values[0] == pytest.approx(single, rel=1e-12)


def test_scaled_draws_are_multiplied_by_a_n(pareto_045: DistributionSpec) -> None:
    raw_cfg = ApproxConfig(n=1000, k=6, variant=Variant.UNIFIED, scaled=False)
    scaled_cfg = ApproxConfig(n=1000, k=6, variant=Variant.UNIFIED)
    inputs = refined_approx.prepare_inputs(pareto_045, raw_cfg)
    raw = refined_approx.sample_approx(
        raw_cfg, pareto_045.params, inputs, 50, np.random.default_rng(8)
    )
    scaled = refined_approx.sample_approx(
        scaled_cfg, pareto_045.params, inputs, 50, np.random.default_rng(8)
    )
    a_n = refined_approx.scaling_a_n(1000, 0.45)
    np.testing.assert_allclose(scaled.values, raw.values * a_n, rtol=1e-14)


def test_sampling_is_deterministic(pareto_045: DistributionSpec) -> None:
    cfg = ApproxConfig(n=1000, k=5, variant=Variant.SIMPLIFIED_NO_INTEGRAL)
    whole = refined_approx.prepare_inputs(pareto_045, cfg)
    first = refined_approx.sample_approx(cfg, pareto_045.params, whole, 7, np.random.default_rng(5))
    again = refined_approx.sample_approx(cfg, pareto_045.params, whole, 7, np.random.default_rng(5))
    np.testing.assert_array_equal(first.values, again.values)


def test_sample_approx_rejects_bad_requests(pareto_045: DistributionSpec) -> None:
    cfg = ApproxConfig(n=1000, k=5, variant=Variant.UNIFIED)
    inputs = refined_approx.prepare_inputs(pareto_045, cfg)
    with pytest.raises(DomainError):
        refined_approx.sample_approx(cfg, pareto_045.params, inputs, 0, np.random.default_rng(0))
    with pytest.raises(ConfigurationError):
        refined_approx.sample_approx(
            cfg, pareto_045.params, ApproxInputs(), 3, np.random.default_rng(0)
        )


def test_clamp_counter_reports_small_n(pareto_045: DistributionSpec) -> None:
    cfg = ApproxConfig(n=4, k=3, variant=Variant.FINITE_VARIANCE)
    inputs = refined_approx.prepare_inputs(pareto_045, cfg)
    sample = refined_approx.sample_approx(
        cfg, pareto_045.params, inputs, 5000, np.random.default_rng(13)
    )
    assert 0 < sample.clamp_count <= 5000


def test_custom_family_needs_sigma_at_anchor() -> None:
    spec = tail_model.build_spec(DistributionConfig(family=Family.CUSTOM, xi=0.6, delta=0.5))
    cfg = ApproxConfig(n=1000, k=10, variant=Variant.UNIFIED)
    with pytest.raises(ConfigurationError):
        refined_approx.prepare_inputs(spec, cfg)
    inputs = refined_approx.prepare_inputs(spec, cfg, sigma_sq_at_un=3.0)
    assert inputs.sigma_sq_at_un == 3.0


@pytest.mark.slow
def test_scaled_finite_variance_mean_is_zero(pareto_045: DistributionSpec) -> None:
    cfg = ApproxConfig(n=1000, k=10, variant=Variant.FINITE_VARIANCE)
    inputs = refined_approx.prepare_inputs(pareto_045, cfg)
    values = refined_approx.sample_approx(
        cfg, pareto_045.params, inputs, 1_000_000, np.random.default_rng(31)
    ).values
    stderr = values.std() / math.sqrt(values.size)
    assert abs(values.mean()) < 4.0 * stderr


@pytest.mark.slow
def test_no_integral_stays_close_to_unified(pareto_07: DistributionSpec) -> None:
    n, k = 10_000, 100
    samples = []
    for variant, seed in ((Variant.UNIFIED, 41), (Variant.SIMPLIFIED_NO_INTEGRAL, 42)):
        cfg = ApproxConfig(n=n, k=k, variant=variant)
        inputs = refined_approx.prepare_inputs(pareto_07, cfg)
        sample = refined_approx.sample_approx(
            cfg, pareto_07.params, inputs, 100_000, np.random.default_rng(seed)
        )
        samples.append(EmpiricalCdf.from_samples(sample.values))
    result = mc_harness.ks_two_sample(samples[0], samples[1])
    assert result.statistic < 3.0 * result.dkw_margin + 0.02


@pytest.mark.slow
def test_unified_and_finite_variance_merge_as_n_grows(pareto_04: DistributionSpec) -> None:
    k, reps = 100, 200_000
    distances = []
    for n in (10_000, 100_000, 1_000_000):
        cdfs = []
        for variant, seed in ((Variant.UNIFIED, 71), (Variant.FINITE_VARIANCE, 72)):
            cfg = ApproxConfig(n=n, k=k, variant=variant)
            inputs = refined_approx.prepare_inputs(pareto_04, cfg)
            sample = refined_approx.sample_approx(
                cfg, pareto_04.params, inputs, reps, np.random.default_rng(seed)
            )
            if n == 1_000_000:
                assert sample.clamp_count / reps < 1e-3
            cdfs.append(EmpiricalCdf.from_samples(sample.values))
        distances.append(mc_harness.ks_two_sample(cdfs[0], cdfs[1]).statistic)
    assert distances[0] > distances[1] > distances[2]
