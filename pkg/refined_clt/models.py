"""Data models for the refined approximation library and its CLI.

Internal values are frozen dataclasses; everything that is read from or written
to disk (distribution JSON, run configuration, run manifest) is a pydantic model.
"""

from __future__ import annotations

import math
from collections.abc import Callable
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Literal

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, field_validator, model_validator

from refined_clt.errors import ConfigurationError, DomainError

THEORY_XI_LOWER = 1.0 / 3.0


# ============================================================================
# Enums
# ============================================================================


class Family(str, Enum):
    """Concrete heavy-tailed families."""

    CENTERED_PARETO = "centered-pareto"
    STUDENT_T = "student-t"
    FRECHET_CENTERED = "frechet-centered"
    CUSTOM = "custom"


class Variant(str, Enum):
    """Approximation variants, plus the true-sum sampler used for self-comparison."""

    FINITE_VARIANCE = "finite-variance"
    UNIFIED = "unified"
    SIMPLIFIED_SIGMA_TAU = "simplified-sigma-tau"
    SIMPLIFIED_NO_INTEGRAL = "simplified-no-integral"
    SHIFTED = "shifted"
    TWO_SIDED = "two-sided"
    NORMAL_BASELINE = "normal-baseline"
    STABLE_BASELINE = "stable-baseline"
    TRUE_SUMS = "true-sums"

    @property
    def is_baseline(self) -> bool:
        return self in (Variant.NORMAL_BASELINE, Variant.STABLE_BASELINE)

    @property
    def is_refined(self) -> bool:
        return not self.is_baseline and self is not Variant.TRUE_SUMS

    @property
    def label(self) -> str:
        """Name used in tables and on the command line."""
        return f"refined-{self.value}" if self.is_refined else self.value

    @classmethod
    def parse(cls, name: str) -> Variant:
        """Resolve a variant from its value or its ``refined-`` label."""
        key = name.strip().lower()
        if key.startswith("refined-"):
            key = key[len("refined-") :]
        for variant in cls:
            if variant.value == key:
                return variant
        valid = ", ".join(v.label for v in cls)
        raise ConfigurationError(f"Unknown variant: {name!r}. Must be one of: {valid}")


class SigmaMode(str, Enum):
    """How the shifted variant evaluates the conditional standard deviation."""

    INTEGRAL = "integral"  # sigma^2(omega u_n) plus the closed-form increment
    EXACT = "exact"  # truncated-variance accessor at omega (n/Gamma_k)^xi + kappa


class RateRegime(str, Enum):
    """Piece of the optimal-k rule that determines the error exponent."""

    DELTA_LIMITED = "delta-limited"
    BALANCED = "balanced"
    BERRY_ESSEEN_LIMITED = "berry-esseen-limited"
    EXTREME_VALUE_LIMITED = "extreme-value-limited"
    NORMAL_PREFERRED = "normal-preferred"


# ============================================================================
# Tail Models
# ============================================================================


@dataclass(frozen=True)
class TailParams:
    """Pareto-like tail description.

    Attributes:
        xi: Tail shape (reciprocal Pareto index). The refined approximation is
            defined for 1/3 < xi < 1; families with xi <= 1/3 are still accepted
            for moment computations.
        omega: Tail scale.
        delta: Exponent of the Pareto neighbourhood.
        x0: Point beyond which the tail condition holds.
        kappa: Tail shift (0 means unshifted).
    """

    xi: float
    omega: float
    delta: float
    x0: float
    kappa: float = 0.0

    def __post_init__(self) -> None:
        for name in ("xi", "omega", "delta", "x0", "kappa"):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"TailParams.{name} must be finite")
        if not 0.0 < self.xi < 1.0:
            raise DomainError(f"xi must lie in (0, 1), got {self.xi}")
        if self.omega <= 0.0:
            raise DomainError(f"omega must be positive, got {self.omega}")
        if self.delta <= 0.0:
            raise DomainError(f"delta must be positive, got {self.delta}")
        if self.x0 <= 0.0:
            raise DomainError(f"x0 must be positive, got {self.x0}")

    @property
    def in_theory_range(self) -> bool:
        return THEORY_XI_LOWER < self.xi < 1.0

    def require_theory_range(self) -> None:
        if not self.in_theory_range:
            raise DomainError(
                f"xi must lie in (1/3, 1) for the refined approximation, got {self.xi}"
            )


@dataclass(frozen=True)
class DistributionSpec:
    """A sampleable mean-zero family together with its tail parameters.

    ``shape`` holds the degrees of freedom for student-t and the Frechet index
    for frechet-centered; it is None otherwise.
    """

    family: Family
    params: TailParams
    shape: float | None = None

    @property
    def shifted(self) -> bool:
        return self.params.kappa != 0.0

    def to_config(self) -> DistributionConfig:
        extra: dict[str, float] = {}
        if self.family is Family.STUDENT_T and self.shape is not None:
            extra["nu"] = self.shape
        if self.family is Family.FRECHET_CENTERED and self.shape is not None:
            extra["alpha"] = self.shape
        return DistributionConfig(
            family=self.family,
            xi=self.params.xi,
            omega=self.params.omega,
            delta=self.params.delta,
            x0=self.params.x0,
            kappa=self.params.kappa,
            extra=extra,
        )


@dataclass(frozen=True)
class TruncatedMoments:
    """Moments of F conditioned on X <= t (or on a two-sided window).

    ``sigma_sq`` and ``abs3`` are +inf when the untruncated tail makes them diverge.
    """

    mu: float
    sigma_sq: float
    abs3: float

    def __post_init__(self) -> None:
        if not self.sigma_sq >= 0.0:
            raise DomainError(f"sigma_sq must be non-negative, got {self.sigma_sq}")
        if not self.abs3 >= 0.0:
            raise DomainError(f"abs3 must be non-negative, got {self.abs3}")


@dataclass(frozen=True)
class DistributionSummary:
    """Unconditional moments (the mean is zero by construction)."""

    sigma0_sq: float
    mean: float = 0.0

    @property
    def finite_variance(self) -> bool:
        return math.isfinite(self.sigma0_sq)


# ============================================================================
# Ladders and Approximation Models
# ============================================================================


@dataclass(frozen=True, eq=False)
class GammaLadder:
    """Arrival times Gamma_1 < ... < Gamma_k of a unit-rate Poisson process."""

    gammas: np.ndarray

    def __post_init__(self) -> None:
        gammas = np.asarray(self.gammas, dtype=np.float64)
        if gammas.ndim != 1 or gammas.size < 1:
            raise DomainError("A ladder needs at least one arrival time")
        if not np.all(gammas > 0.0):
            raise DomainError("Ladder arrival times must be positive")
        if gammas.size > 1 and not np.all(np.diff(gammas) > 0.0):
            raise DomainError("Ladder arrival times must be strictly increasing")
        object.__setattr__(self, "gammas", gammas)

    @property
    def k(self) -> int:
        return int(self.gammas.size)


@dataclass(frozen=True)
class ApproxConfig:
    """Selects one approximand for a sum of n terms.

    Attributes:
        n: Number of summands.
        k: Number of upper order statistics kept (ignored by the baselines).
        variant: Which approximand to draw.
        scaled: Multiply draws by a_n when True (comparison scale).
        sigma_mode: Conditional variance source for the shifted variant.
    """

    n: int
    k: int
    variant: Variant
    scaled: bool = True
    sigma_mode: SigmaMode = SigmaMode.INTEGRAL

    def __post_init__(self) -> None:
        if self.variant is Variant.TRUE_SUMS:
            raise ConfigurationError("true-sums is a harness sampler, not an approximation")
        if self.n < 2:
            raise DomainError(f"n must be at least 2, got {self.n}")
        if not self.variant.is_baseline and not 1 <= self.k < self.n:
            raise DomainError(f"k must satisfy 1 <= k < n, got k={self.k}, n={self.n}")


@dataclass(frozen=True)
class ScalingTerms:
    """Comparison scale a_n and truncation index u_n = (n/k)^xi."""

    a_n: float
    u_n: float


@dataclass(frozen=True)
class TwoSidedConfig:
    """Tail descriptions and ladder lengths for both tails.

    ``k_left = 0`` drops the left block entirely.
    """

    right: TailParams
    k_right: int
    left: TailParams
    k_left: int

    def __post_init__(self) -> None:
        self.right.require_theory_range()
        self.left.require_theory_range()
        if self.k_right < 1 or self.k_left < 0:
            raise DomainError("two-sided configs need k_right >= 1 and k_left >= 0")


@dataclass
class ApproxInputs:
    """Auxiliary inputs the draw operations need beyond the ladder and z.

    Only the entries relevant for the configured variant must be filled.
    """

    sigma0_sq: float | None = None
    sigma_sq_at_un: float | None = None
    sigma_fn: Callable[[np.ndarray], np.ndarray] | None = None
    two_sided: TwoSidedConfig | None = None
    sigma2_fn: Callable[[np.ndarray | None, np.ndarray], np.ndarray] | None = None
    truncation: int = 20_000
    max_block_elements: int = 4_194_304


@dataclass(frozen=True)
class ApproxSample:
    """Bulk draws together with the number of variance clamp activations."""

    values: np.ndarray
    clamp_count: int = 0


# ============================================================================
# Rates
# ============================================================================


@dataclass(frozen=True)
class BenchmarkRate:
    """Error exponent of the plain limit law; logarithmic at xi = 1/2."""

    exponent: float | None
    logarithmic: bool = False


@dataclass(frozen=True)
class RateSpec:
    """Optimal growth exponent, error exponent and concrete k for one n.

    ``k_star = 0`` means the normal baseline is preferred.
    """

    alpha_star: float
    beta_star: float
    k_star: int
    regime: RateRegime


# ============================================================================
# Monte Carlo Harness Models
# ============================================================================


@dataclass(frozen=True, eq=False)
class EmpiricalCdf:
    """Sorted sample viewed as a step CDF."""

    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1 or values.size < 1:
            raise DomainError("An empirical CDF needs at least one value")
        if values.size > 1 and np.any(np.diff(values) < 0.0):
            raise DomainError("EmpiricalCdf values must be sorted")
        object.__setattr__(self, "values", values)

    @classmethod
    def from_samples(cls, samples: np.ndarray) -> EmpiricalCdf:
        return cls(np.sort(np.asarray(samples, dtype=np.float64)))

    @property
    def count(self) -> int:
        return int(self.values.size)

    def evaluate(self, x: np.ndarray | float) -> np.ndarray:
        return np.searchsorted(self.values, x, side="right") / self.count


@dataclass(frozen=True)
class KsResult:
    """Two-sample Kolmogorov distance with its DKW error bar."""

    statistic: float
    dkw_margin: float
    reps_a: int
    reps_b: int
    confidence: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.statistic <= 1.0:
            raise DomainError(f"KS statistic out of range: {self.statistic}")
        if self.dkw_margin <= 0.0:
            raise DomainError("dkw_margin must be positive")


@dataclass(frozen=True)
class StudyVariant:
    """One approximation requested in a study; ``k=None`` resolves via k_star."""

    variant: Variant
    k: int | None = None
    multiplier: float = 1.0
    sigma_mode: SigmaMode = SigmaMode.INTEGRAL


@dataclass
class StudyTable:
    """Per-cell KS rows and per-variant fitted slopes."""

    cells: pd.DataFrame
    slopes: pd.DataFrame
    clamp_counts: dict[str, int] = field(default_factory=dict)
    replicate_counts: dict[str, int] = field(default_factory=dict)


# ============================================================================
# Serialized Models (JSON config, run manifest)
# ============================================================================


class DistributionConfig(BaseModel):
    """JSON form of a distribution: {family, xi, omega, delta, x0, kappa, extra}."""

    family: Family = Field(..., description="Family tag")
    xi: float | None = Field(None, description="Tail shape; derived from extra for t/Frechet")
    omega: float | None = Field(None, description="Tail scale")
    delta: float | None = Field(None, description="Pareto-neighbourhood exponent")
    x0: float | None = Field(None, description="Tail onset threshold")
    kappa: float | Literal["auto"] | None = Field(None, description="Tail shift or 'auto'")
    extra: dict[str, float] = Field(default_factory=dict, description="nu / alpha / ...")


class RunConfig(BaseModel):
    """Validated parameters of one CLI invocation."""

    command: str
    family: Family = Family.CENTERED_PARETO
    xi: float | None = None
    omega: float | None = None
    delta: float | None = None
    kappa: float | Literal["auto"] | None = None
    x0: float | None = None
    nu: float | None = None
    alpha: float | None = None
    extra: dict[str, float] = Field(default_factory=dict)
    n: int | None = Field(None, ge=1)
    k: int | Literal["auto"] = "auto"
    multiplier: float = Field(1.0, gt=0.0)
    variants: list[str] = Field(default_factory=list)
    sigma_mode: SigmaMode = SigmaMode.INTEGRAL
    sigma_sq_at_un: float | None = None
    reps: int = Field(..., ge=1)
    seed: int = Field(..., ge=0)
    n_grid: list[int] = Field(default_factory=list)
    xi_grid: list[float] = Field(default_factory=list)
    delta_grid: list[float] = Field(default_factory=list)
    t_grid: list[float] = Field(default_factory=list)
    confidence: float = Field(..., gt=0.0, lt=1.0)
    workers: int = Field(..., ge=1)
    out_dir: str
    svg: bool = False

    @field_validator("n_grid")
    @classmethod
    def _n_grid_increasing(cls, value: list[int]) -> list[int]:
        if any(b <= a for a, b in zip(value, value[1:], strict=False)):
            raise ValueError("n-grid must be strictly increasing")
        if any(v < 1 for v in value):
            raise ValueError("n-grid entries must be positive")
        return value

    @model_validator(mode="after")
    def _k_below_n(self) -> RunConfig:
        if isinstance(self.k, int) and self.k < 1:
            raise ValueError("k must be a positive integer or 'auto'")
        return self

    def distribution(self) -> DistributionConfig:
        """Top-level nu and alpha win over the same keys in ``extra``."""
        extra = dict(self.extra)
        if self.nu is not None:
            extra["nu"] = self.nu
        if self.alpha is not None:
            extra["alpha"] = self.alpha
        return DistributionConfig(
            family=self.family,
            xi=self.xi,
            omega=self.omega,
            delta=self.delta,
            x0=self.x0,
            kappa=self.kappa,
            extra=extra,
        )


class RunManifest(BaseModel):
    """Written next to every output set; digests match the emitted files."""

    command: str
    app_version: str
    config: dict[str, Any]
    seed: int | None = None
    replicate_counts: dict[str, int] = Field(default_factory=dict)
    clamp_counts: dict[str, int] = Field(default_factory=dict)
    started_at: str
    finished_at: str
    wall_time_s: float
    outputs: dict[str, str] = Field(default_factory=dict, description="file name -> sha256")


@dataclass
class CommandOutcome:
    """What a CLI command hands to the manifest hook."""

    config: RunConfig
    outputs: list[Path] = field(default_factory=list)
    replicate_counts: dict[str, int] = field(default_factory=dict)
    clamp_counts: dict[str, int] = field(default_factory=dict)
