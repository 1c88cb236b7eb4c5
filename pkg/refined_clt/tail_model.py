"""Heavy-tailed families with Pareto-like right tails and their truncated moments.

Every family is mean zero. Truncated moments use closed forms where they exist
(centered Pareto, Student t up to second order, centered Frechet through the
incomplete gamma function) and adaptive quadrature otherwise, with tail pieces
taken in log x. ``quadrature_moments`` is the pure-quadrature path and
serves as the oracle for the closed forms.
"""

from __future__ import annotations

import functools
import logging
import math
import warnings
from abc import ABC, abstractmethod
from collections.abc import Callable
from typing import overload

import numpy as np
from scipy import integrate, optimize, special, stats
from scipy.interpolate import PchipInterpolator

from refined_clt.config import settings
from refined_clt.errors import (
    ConfigurationError,
    DomainError,
    NumericalError,
    UnsupportedVariantError,
)
from refined_clt.models import (
    DistributionConfig,
    DistributionSpec,
    DistributionSummary,
    Family,
    TailParams,
    TruncatedMoments,
)

logger = logging.getLogger(__name__)

# ============================================================================
# Configuration
# ============================================================================
QUAD_ABS_TOL = 1e-12
QUAD_LIMIT = 200
QUAD_ERR_SLACK = 10.0
LOG_X_MAX = 700.0
X0_SEARCH_DOUBLINGS = 80
CACHE_T_MIN_FACTOR = 1e-3
CACHE_T_MAX = 1e12


# ============================================================================
# Family Models
# ============================================================================


class _FamilyModel(ABC):
    """Density-level view of one family.

    Closed forms are written in native coordinates Y = X + shift.
    """

    shift: float = 0.0
    lower_edge: float = -math.inf

    def __init__(self, params: TailParams) -> None:
        self.params = params

    @abstractmethod
    def cdf(self, x: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def pdf(self, x: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray: ...

    @abstractmethod
    def raw_moment(self, j: int, lo: float, hi: float) -> float:
        """Integral of Y^j dF over lo < X <= hi."""

    @abstractmethod
    def upper_tail_mean(self, t: float) -> float:
        """Integral of x dF over x > t (finite t)."""

    @abstractmethod
    def variance(self) -> float: ...

    def left_moment_finite(self, j: int) -> bool:
        return True


class _CenteredPareto(_FamilyModel):
    """Pareto(scale omega, index 1/xi) minus its mean omega/(1-xi)."""

    def __init__(self, params: TailParams) -> None:
        super().__init__(params)
        self.index = 1.0 / params.xi
        self.shift = params.omega / (1.0 - params.xi)
        self.lower_edge = params.omega - self.shift

    def cdf(self, x: np.ndarray) -> np.ndarray:
        omega = self.params.omega
        y = np.asarray(x, dtype=np.float64) + self.shift
        with np.errstate(divide="ignore", invalid="ignore"):
            tail = np.exp(self.index * (math.log(omega) - np.log(y)))
        return np.where(y > omega, 1.0 - tail, 0.0)

    def pdf(self, x: np.ndarray) -> np.ndarray:
        omega = self.params.omega
        y = np.asarray(x, dtype=np.float64) + self.shift
        with np.errstate(divide="ignore", invalid="ignore"):
            log_ratio = math.log(omega) - np.log(y)
            dens = (self.index / omega) * np.exp((self.index + 1.0) * log_ratio)
        return np.where(y >= omega, dens, 0.0)

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        u = rng.random(count)
        y = self.params.omega * np.exp(-self.params.xi * np.log1p(-u))
        return y - self.shift

    def raw_moment(self, j: int, lo: float, hi: float) -> float:
        omega = self.params.omega
        y_lo = max(lo + self.shift, omega)
        y_hi = hi + self.shift
        if y_hi <= y_lo:
            return 0.0
        scale = self.index * omega**self.index
        power = j - self.index
        if abs(power) < 1e-12:
            return scale * (math.log(y_hi) - math.log(y_lo))
        if math.isinf(y_hi):
            if power >= 0.0:
                return math.inf
            return -scale * math.exp(power * math.log(y_lo)) / power
        upper = math.exp(power * math.log(y_hi))
        return scale * (upper - math.exp(power * math.log(y_lo))) / power

    def upper_tail_mean(self, t: float) -> float:
        omega = self.params.omega
        y = t + self.shift
        if y <= omega:
            return 0.0
        return math.exp(self.index * math.log(omega / y)) * (y - omega) / (1.0 - self.params.xi)

    def variance(self) -> float:
        xi, omega = self.params.xi, self.params.omega
        if xi >= 0.5:
            return math.inf
        return xi**2 * omega**2 / ((1.0 - xi) ** 2 * (1.0 - 2.0 * xi))


class _StudentT(_FamilyModel):
    """Standard Student t with ``nu`` degrees of freedom."""

    def __init__(self, params: TailParams, nu: float) -> None:
        super().__init__(params)
        self.nu = nu

    def cdf(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(stats.t.cdf(x, self.nu), dtype=np.float64)

    def pdf(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(stats.t.pdf(x, self.nu), dtype=np.float64)

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        return rng.standard_t(self.nu, size=count)

    def _g(self, x: float) -> float:
        # antiderivative of x f(x)
        if math.isinf(x):
            return 0.0
        return -(self.nu + x * x) / (self.nu - 1.0) * float(stats.t.pdf(x, self.nu))

    def _xg(self, x: float) -> float:
        if math.isinf(x):
            return 0.0
        return x * self._g(x)

    def _mass(self, lo: float, hi: float) -> float:
        if lo > 0.0:
            return float(stats.t.sf(lo, self.nu) - stats.t.sf(hi, self.nu))
        return float(stats.t.cdf(hi, self.nu) - stats.t.cdf(lo, self.nu))

    def raw_moment(self, j: int, lo: float, hi: float) -> float:
        if hi <= lo:
            return 0.0
        unbounded = math.isinf(lo) or math.isinf(hi)
        if unbounded and j >= self.nu:
            return math.inf
        if j == 0:
            return self._mass(lo, hi)
        if j == 1:
            return self._g(hi) - self._g(lo)
        if j == 2 and self.nu != 2.0:
            nu = self.nu
            return ((nu - 1.0) * (self._xg(hi) - self._xg(lo)) + nu * self._mass(lo, hi)) / (
                nu - 2.0
            )
        return _integrate(lambda x: x**j * float(stats.t.pdf(x, self.nu)), lo, hi, _split(self))

    def upper_tail_mean(self, t: float) -> float:
        return -self._g(t)

    def variance(self) -> float:
        return self.nu / (self.nu - 2.0) if self.nu > 2.0 else math.inf

    def left_moment_finite(self, j: int) -> bool:
        return j < self.nu


class _FrechetCentered(_FamilyModel):
    """Standard Frechet(alpha) minus its mean Gamma(1 - 1/alpha)."""

    def __init__(self, params: TailParams, alpha: float) -> None:
        super().__init__(params)
        self.alpha = alpha
        self.shift = float(special.gamma(1.0 - 1.0 / alpha))
        self.lower_edge = -self.shift

    def cdf(self, x: np.ndarray) -> np.ndarray:
        y = np.asarray(x, dtype=np.float64) + self.shift
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            value = np.exp(-np.exp(-self.alpha * np.log(y)))
        return np.where(y > 0.0, value, 0.0)

    def pdf(self, x: np.ndarray) -> np.ndarray:
        y = np.asarray(x, dtype=np.float64) + self.shift
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            log_y = np.log(y)
            dens = self.alpha * np.exp(-(self.alpha + 1.0) * log_y - np.exp(-self.alpha * log_y))
        return np.where(y > 0.0, dens, 0.0)

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        u = rng.random(count)
        with np.errstate(divide="ignore"):
            e = -np.log(u)
            y = np.exp(-self.params.xi * np.log(e))
        return y - self.shift

    def _partial(self, j: int, y: float) -> float:
        # integral of Y^j dF over Y <= y
        if y <= 0.0:
            return 0.0
        x = 0.0 if math.isinf(y) else math.exp(-self.alpha * math.log(y))
        return _upper_gamma(1.0 - j / self.alpha, x)

    def raw_moment(self, j: int, lo: float, hi: float) -> float:
        if hi <= lo:
            return 0.0
        upper = self._partial(j, hi + self.shift)
        if math.isinf(upper):
            return math.inf
        return upper - self._partial(j, lo + self.shift)

    def upper_tail_mean(self, t: float) -> float:
        y = t + self.shift
        if y <= 0.0:
            return 0.0
        x = math.exp(-self.alpha * math.log(y))
        s = 1.0 - 1.0 / self.alpha
        return float(special.gammainc(s, x) * special.gamma(s)) + self.shift * math.expm1(-x)

    def variance(self) -> float:
        if self.params.xi >= 0.5:
            return math.inf
        xi = self.params.xi
        return float(special.gamma(1.0 - 2.0 * xi) - special.gamma(1.0 - xi) ** 2)


def _upper_gamma(s: float, x: float) -> float:
    """Upper incomplete gamma Gamma(s, x), extended to s <= 0 by recurrence."""
    if math.isinf(x):
        return 0.0
    if x == 0.0:
        return float(special.gamma(s)) if s > 0.0 else math.inf
    if s > 0.0:
        return float(special.gammaincc(s, x) * special.gamma(s))
    if abs(s) < 1e-14:
        return float(special.exp1(x))
    return (_upper_gamma(s + 1.0, x) - math.exp(s * math.log(x) - x)) / s


def _family_model(spec: DistributionSpec) -> _FamilyModel:
    if spec.family is Family.CENTERED_PARETO:
        return _CenteredPareto(spec.params)
    if spec.family is Family.STUDENT_T:
        return _StudentT(spec.params, _shape(spec))
    if spec.family is Family.FRECHET_CENTERED:
        return _FrechetCentered(spec.params, _shape(spec))
    raise ConfigurationError("custom family has no distribution function; supply moments directly")


def _shape(spec: DistributionSpec) -> float:
    return spec.shape if spec.shape is not None else 1.0 / spec.params.xi


# ============================================================================
# Quadrature
# ============================================================================


def _split(model: _FamilyModel) -> float:
    return max(model.params.x0, model.params.omega, 1.0)


def _quad(
    fn: Callable[[float], float], a: float, b: float, abs_tol: float = QUAD_ABS_TOL
) -> float:
    """Adaptive quadrature; any QUADPACK complaint or unmet tolerance is a NumericalError."""
    rel_tol = settings.quad_rel_tol
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            value, abserr = integrate.quad(
                fn, a, b, epsabs=abs_tol, epsrel=rel_tol, limit=QUAD_LIMIT
            )
        except integrate.IntegrationWarning as exc:
            raise NumericalError(f"quadrature on [{a}, {b}] did not converge: {exc}") from exc
    if not math.isfinite(value):
        raise NumericalError(f"quadrature returned {value} on [{a}, {b}]")
    allowed = max(abs_tol, rel_tol * abs(value))
    if abserr > QUAD_ERR_SLACK * allowed:
        raise NumericalError(
            f"quadrature error estimate {abserr:.3g} on [{a}, {b}] exceeds {allowed:.3g}"
        )
    return float(value)


def _tail_piece(fn: Callable[[float], float], a: float, b: float) -> float:
    """Integral of fn over [a, b] (0 < a < b <= inf) in s = log x.

    fn keeps one sign out here, so the tolerance is purely relative.
    """

    def integrand(s: float) -> float:
        if s > LOG_X_MAX:
            return 0.0
        x = math.exp(s)
        return fn(x) * x

    upper = math.inf if math.isinf(b) else math.log(b)
    return _quad(integrand, math.log(a), upper, abs_tol=0.0)


def _integrate(fn: Callable[[float], float], lo: float, hi: float, split: float) -> float:
    """Integral of fn over [lo, hi]; pieces beyond +-split are taken in log x."""
    total = 0.0
    if lo < -split:
        left_hi = min(hi, -split)
        total += _tail_piece(lambda v: fn(-v), -left_hi, -lo)
    mid_lo, mid_hi = max(lo, -split), min(hi, split)
    if mid_hi > mid_lo:
        total += _quad(fn, mid_lo, mid_hi)
    if hi > split:
        total += _tail_piece(fn, max(lo, split), hi)
    return total


# ============================================================================
# Distribution Functions
# ============================================================================


@overload
def cdf(spec: DistributionSpec, x: float) -> float: ...


@overload
def cdf(spec: DistributionSpec, x: np.ndarray) -> np.ndarray: ...


def cdf(spec: DistributionSpec, x: float | np.ndarray) -> float | np.ndarray:
    """Distribution function of the family."""
    values = _family_model(spec).cdf(np.asarray(x, dtype=np.float64))
    return float(values) if np.ndim(x) == 0 else values


def sample_iid(spec: DistributionSpec, count: int, stream: np.random.Generator) -> np.ndarray:
    """Draw ``count`` i.i.d. values; deterministic given the stream state."""
    if count < 1:
        raise DomainError(f"count must be at least 1, got {count}")
    return _family_model(spec).sample(stream, count)


def support_lower_edge(spec: DistributionSpec) -> float:
    return _family_model(spec).lower_edge


# ============================================================================
# Truncated Moments
# ============================================================================


def _window_moments(
    model: _FamilyModel, lo: float, hi: float, with_abs3: bool = True
) -> TruncatedMoments:
    lo = max(lo, model.lower_edge)
    if hi <= lo:
        raise DomainError(f"empty truncation window ({lo}, {hi}]")
    mass = model.raw_moment(0, lo, hi)
    if not mass > 0.0:
        raise DomainError(f"truncation window ({lo}, {hi}] has zero probability")

    one_sided = lo <= model.lower_edge
    if one_sided and mass >= 0.5:
        tail = 0.0 if math.isinf(hi) else model.upper_tail_mean(hi)
        mu = -tail / mass
    else:
        mu = model.raw_moment(1, lo, hi) / mass - model.shift
    mean_y = mu + model.shift

    raw2 = model.raw_moment(2, lo, hi)
    sigma_sq = math.inf if math.isinf(raw2) else max(raw2 / mass - mean_y**2, 0.0)

    abs3 = 0.0
    if with_abs3:
        abs3 = _abs3(model, lo, hi, mean_y, mass)
    return TruncatedMoments(mu=mu, sigma_sq=sigma_sq, abs3=abs3)


def _abs3(model: _FamilyModel, lo: float, hi: float, mean_y: float, mass: float) -> float:
    if math.isinf(model.raw_moment(3, lo, hi)):
        return math.inf
    center = mean_y - model.shift

    def cubed(a: float, b: float) -> float:
        raws = [model.raw_moment(j, a, b) for j in range(4)]
        return raws[3] - 3.0 * mean_y * raws[2] + 3.0 * mean_y**2 * raws[1] - mean_y**3 * raws[0]

    value = (cubed(center, hi) - cubed(lo, center)) / mass
    return max(value, 0.0)


def truncated_moments(spec: DistributionSpec, t: float) -> TruncatedMoments:
    """Mean, variance and third absolute central moment of F conditioned on X <= t.

    Args:
        spec: Distribution specification (not custom).
        t: Truncation point; ``math.inf`` gives the unconditional moments.

    Returns:
        TruncatedMoments, with infinite entries where the left tail makes them diverge.

    Raises:
        DomainError: If F(t) = 0.
    """
    model = _family_model(spec)
    if t <= model.lower_edge:
        raise DomainError(f"F({t}) = 0: truncation at or below the support edge")
    moments = _window_moments(model, model.lower_edge, t)
    if math.isinf(moments.sigma_sq) or math.isinf(moments.abs3):
        logger.warning(f"⚠️ Divergent truncated moment for {spec.family.value} at t={t}")
    return moments


def truncated_moments_between(
    spec: DistributionSpec, lower: float, upper: float
) -> TruncatedMoments:
    """Moments of F conditioned on lower < X <= upper (two-sided truncation)."""
    return _window_moments(_family_model(spec), lower, upper)


def quadrature_moments(spec: DistributionSpec, t: float) -> TruncatedMoments:
    """Pure adaptive-quadrature evaluation of the truncated moments.

    Independent of the closed forms; the mean uses the mean-zero identity
    mu(t) = -int_t^inf x dF / F(t) once F(t) >= 1/2.
    """
    model = _family_model(spec)
    lo = model.lower_edge
    if t <= lo:
        raise DomainError(f"F({t}) = 0: truncation at or below the support edge")
    xi, split = spec.params.xi, _split(model)

    def density(x: float) -> float:
        return float(model.pdf(np.float64(x)))

    def integral(fn: Callable[[float], float], a: float, b: float) -> float:
        return _integrate(fn, a, b, split) if b > a else 0.0

    body = integral(density, lo, t)
    mass = body if body < 0.5 else 1.0 - integral(density, t, math.inf)
    if not mass > 0.0:
        raise DomainError(f"F({t}) = 0")
    if mass >= 0.5:
        mu = -integral(lambda x: x * density(x), t, math.inf) / mass
    else:
        mu = integral(lambda x: x * density(x), lo, t) / mass

    def central(j: int) -> float:
        if math.isinf(lo) and not model.left_moment_finite(j):
            return math.inf
        if math.isinf(t) and j * xi >= 1.0:
            return math.inf
        if j == 2:
            return integral(lambda x: (x - mu) ** 2 * density(x), lo, t) / mass
        below = integral(lambda x: (mu - x) ** 3 * density(x), lo, min(mu, t))
        above = integral(lambda x: (x - mu) ** 3 * density(x), mu, t)
        return (below + above) / mass

    return TruncatedMoments(mu=mu, sigma_sq=max(central(2), 0.0), abs3=max(central(3), 0.0))


def summarize(spec: DistributionSpec) -> DistributionSummary:
    """Unconditional variance (infinite when xi >= 1/2)."""
    return DistributionSummary(sigma0_sq=_family_model(spec).variance())


# ============================================================================
# Closed-Form Tail Approximations
# ============================================================================


def mu_tail_approx(params: TailParams, x: float) -> float:
    """Tail approximation of the truncated mean at x (x >= x0, x > omega)."""
    if x < params.x0:
        raise DomainError(f"x={x} lies below the tail onset x0={params.x0}")
    if x <= params.omega:
        raise DomainError(f"x={x} must exceed omega={params.omega}")
    xi, omega = params.xi, params.omega
    inv = 1.0 / xi
    numerator = math.exp(inv * math.log(omega) + (1.0 - inv) * math.log(x))
    survival = math.exp(-inv * math.log(x / omega))
    return -numerator / ((1.0 - xi) * (1.0 - survival))


def sigma_sq_tail_approx(params: TailParams, sigma0_sq: float, x: float) -> float:
    """Tail approximation of the truncated variance (finite-variance tails only).

    Not clamped; the draw operations apply the positive part.
    """
    if params.xi >= 0.5:
        raise UnsupportedVariantError(f"sigma_sq_tail_approx needs xi < 1/2, got {params.xi}")
    if x < params.x0:
        raise DomainError(f"x={x} lies below the tail onset x0={params.x0}")
    xi, omega = params.xi, params.omega
    inv = 1.0 / xi
    correction = math.exp(inv * math.log(omega) + (2.0 - inv) * math.log(x))
    return sigma0_sq - correction / (1.0 - 2.0 * xi)


def variance_increment(params: TailParams, x: float, y: float) -> float:
    """(omega^2/xi) times the integral of t^(1-1/xi) over [y, x]; antisymmetric in (x, y)."""
    if x <= 0.0 or y <= 0.0:
        raise DomainError(f"variance_increment needs positive arguments, got x={x}, y={y}")
    return float(variance_increment_array(params.xi, params.omega, np.float64(x), np.float64(y)))


def variance_increment_array(
    xi: float, omega: float, x: np.ndarray | np.float64, y: np.ndarray | np.float64
) -> np.ndarray:
    scale = omega * omega / xi
    if xi == 0.5:
        return scale * (np.log(x) - np.log(y))
    power = 2.0 - 1.0 / xi
    return scale * (np.exp(power * np.log(x)) - np.exp(power * np.log(y))) / power


# ============================================================================
# Tail Parameters
# ============================================================================


def default_delta(spec: DistributionSpec) -> float:
    """Family default for the Pareto-neighbourhood exponent."""
    if spec.family is Family.CUSTOM:
        raise ConfigurationError("custom family has no default delta; supply one")
    return _family_default_delta(spec.family, spec.params.xi, spec.shifted)


def _family_default_delta(family: Family, xi: float, shifted: bool) -> float:
    if family is Family.STUDENT_T:
        return 2.0 * xi
    if family is Family.FRECHET_CENTERED:
        return 1.0
    return settings.shifted_delta_cap if shifted else xi


def tail_deviation(spec: DistributionSpec, x: float) -> float:
    """h(x): density of F(. + kappa) relative to the Pareto density, minus one."""
    if x <= 0.0:
        raise DomainError(f"tail_deviation needs x > 0, got {x}")
    params = spec.params
    model = _family_model(spec)
    inv = 1.0 / params.xi
    log_pareto = -math.log(params.omega * params.xi) - (inv + 1.0) * math.log(x / params.omega)
    return float(model.pdf(np.float64(x + params.kappa))) / math.exp(log_pareto) - 1.0


def default_x0(spec: DistributionSpec) -> float:
    """Smallest x on the search path beyond which |h(x)| <= the configured bound."""
    model = _family_model(spec)
    bound = settings.x0_h_bound
    start = max(spec.params.omega, model.lower_edge - spec.params.kappa, 1e-9)

    def excess(x: float) -> float:
        return abs(tail_deviation(spec, x)) - bound

    if excess(start) <= 0.0:
        return start
    previous = start
    for _ in range(X0_SEARCH_DOUBLINGS):
        current = previous * 2.0
        if excess(current) <= 0.0:
            try:
                return float(optimize.brentq(excess, previous, current, xtol=1e-12))
            except (ValueError, RuntimeError) as e:
                raise NumericalError(f"x0 root bracketing failed: {e}") from e
        previous = current
    raise NumericalError(f"|h(x)| never drops below {bound} for {spec.family.value}")


def student_t_tail_scale(nu: float) -> float:
    """omega such that 1 - F(x) ~ (x/omega)^(-nu) for the t distribution."""
    log_const = (
        special.gammaln((nu + 1.0) / 2.0)
        + (nu / 2.0 - 1.0) * math.log(nu)
        - 0.5 * math.log(math.pi)
        - special.gammaln(nu / 2.0)
    )
    return math.exp(float(log_const) / nu)


def build_spec(config: DistributionConfig) -> DistributionSpec:
    """Turn a JSON/CLI distribution description into a validated spec.

    Fills xi, omega, delta, x0 and kappa from the family where they are not given.

    Raises:
        ConfigurationError: If required values are missing or contradict the family.
    """
    family = config.family
    extra = config.extra
    shape: float | None = None

    if family is Family.STUDENT_T:
        shape = extra.get("nu") or (1.0 / config.xi if config.xi else None)
        if shape is None or shape <= 1.0:
            raise ConfigurationError("student-t needs nu > 1 (extra.nu or xi)")
        xi, omega = 1.0 / shape, student_t_tail_scale(shape)
    elif family is Family.FRECHET_CENTERED:
        shape = extra.get("alpha") or (1.0 / config.xi if config.xi else None)
        if shape is None or shape <= 1.0:
            raise ConfigurationError("frechet-centered needs alpha > 1 (extra.alpha or xi)")
        xi, omega = 1.0 / shape, 1.0
    else:
        if config.xi is None:
            raise ConfigurationError(f"{family.value} needs xi")
        xi, omega = config.xi, config.omega if config.omega is not None else 1.0

    if config.xi is not None and not math.isclose(config.xi, xi, rel_tol=1e-12):
        raise ConfigurationError(f"xi={config.xi} contradicts the {family.value} shape ({xi})")
    if config.omega is not None and not math.isclose(config.omega, omega, rel_tol=1e-9):
        raise ConfigurationError(f"omega={config.omega} contradicts {family.value} ({omega})")

    kappa = _resolve_kappa(family, config.kappa, xi, omega)
    if family is Family.CUSTOM:
        if config.delta is None:
            raise ConfigurationError("custom family needs a user-supplied delta")
        delta = config.delta
    else:
        ceiling = _family_default_delta(family, xi, kappa != 0.0)
        delta = ceiling if config.delta is None else config.delta
        if delta > ceiling:
            raise ConfigurationError(
                f"delta={delta} exceeds what {family.value} satisfies ({ceiling})"
            )

    provisional = DistributionSpec(
        family=family,
        params=TailParams(xi=xi, omega=omega, delta=delta, x0=max(omega, 1.0), kappa=kappa),
        shape=shape,
    )
    if config.x0 is not None:
        x0 = config.x0
    elif family is Family.CUSTOM:
        x0 = omega
    else:
        x0 = default_x0(provisional)
    spec = DistributionSpec(
        family=family,
        params=TailParams(xi=xi, omega=omega, delta=delta, x0=x0, kappa=kappa),
        shape=shape,
    )
    logger.info(
        f"📐 {family.value}: xi={xi:.6g}, omega={omega:.6g}, delta={delta:.6g}, "
        f"x0={x0:.6g}, kappa={kappa:.6g}"
    )
    return spec


def _resolve_kappa(family: Family, kappa: float | str | None, xi: float, omega: float) -> float:
    if kappa is None:
        return 0.0
    if family not in (Family.CENTERED_PARETO, Family.CUSTOM):
        if kappa in ("auto", 0.0):
            return 0.0
        raise ConfigurationError(f"{family.value} does not support a tail shift")
    if kappa == "auto":
        return -omega / (1.0 - xi)
    return float(kappa)


# ============================================================================
# Truncated-Variance Accessors
# ============================================================================


class ParetoTruncatedVariance:
    """Vectorized closed-form sigma^2(t) for the centered Pareto family."""

    def __init__(self, params: TailParams) -> None:
        self.xi = params.xi
        self.omega = params.omega
        self.index = 1.0 / params.xi
        self.shift = params.omega / (1.0 - params.xi)

    def __call__(self, t: np.ndarray) -> np.ndarray:
        omega, a = self.omega, self.index
        y = np.asarray(t, dtype=np.float64) + self.shift
        inside = y > omega
        y_safe = np.where(inside, y, 2.0 * omega)
        log_ratio = np.log(y_safe) - math.log(omega)
        mass = -np.expm1(-a * log_ratio)
        first = a * omega * np.expm1((1.0 - a) * log_ratio) / (1.0 - a)
        if abs(2.0 - a) < 1e-12:
            second = a * omega**2 * log_ratio
        else:
            second = a * omega**2 * np.expm1((2.0 - a) * log_ratio) / (2.0 - a)
        mean = first / mass
        variance = np.maximum(second / mass - mean * mean, 0.0)
        return np.where(inside, variance, 0.0)


class MomentCache:
    """sigma^2(t) memoized on a log-spaced grid and interpolated with PCHIP.

    Points outside the grid are evaluated directly.
    """

    def __init__(self, spec: DistributionSpec, points: int | None = None) -> None:
        model = _family_model(spec)
        if math.isinf(model.lower_edge) and not model.left_moment_finite(2):
            raise UnsupportedVariantError(
                f"one-sided truncated variance of {spec.family.value} is infinite; "
                "use the two-sided variant"
            )
        self.spec = spec
        self.t_min = max(model.lower_edge, 0.0) + CACHE_T_MIN_FACTOR * spec.params.omega
        self.t_max = CACHE_T_MAX
        grid = np.geomspace(self.t_min, self.t_max, points or settings.moment_cache_points)
        values = np.array([self._direct(float(t)) for t in grid])
        self._interp = PchipInterpolator(np.log(grid), values)
        logger.debug(f"moment cache built on [{self.t_min:.3g}, {self.t_max:.3g}]")

    def _direct(self, t: float) -> float:
        model = _family_model(self.spec)
        if t <= model.lower_edge:
            return 0.0
        return _window_moments(model, model.lower_edge, t, with_abs3=False).sigma_sq

    def __call__(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=np.float64)
        out = np.empty_like(t)
        inside = (t >= self.t_min) & (t <= self.t_max)
        out[inside] = self._interp(np.log(t[inside]))
        for idx in np.flatnonzero(~inside.ravel()):
            out.flat[idx] = self._direct(float(t.flat[idx]))
        return out


@functools.lru_cache(maxsize=16)
def truncated_variance_fn(spec: DistributionSpec) -> Callable[[np.ndarray], np.ndarray]:
    """Picklable sigma^2(t) accessor for use inside bulk samplers (memoized per spec)."""
    if spec.family is Family.CENTERED_PARETO:
        return ParetoTruncatedVariance(spec.params)
    return MomentCache(spec)
