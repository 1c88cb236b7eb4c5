"""Command-line front end: ``refined-clt <command> [flags]``.

Precedence of values: flags > ``--config`` JSON file > settings. Every command
validates its whole configuration before sampling and writes CSV outputs plus a
``<command>_manifest.json`` into ``--out-dir``.

Exit codes: 0 success, 2 validation, 3 budget refusal, 4 numerical or internal failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path
from typing import Any

import pandas as pd
from pydantic import ValidationError

from refined_clt import error_rates, mc_harness, plotting, refined_approx, tail_model
from refined_clt.config import settings
from refined_clt.errors import ConfigurationError, DomainError, RefinedCltError
from refined_clt.hooks import write_manifest_on_complete
from refined_clt.models import (
    THEORY_XI_LOWER,
    CommandOutcome,
    DistributionSpec,
    RunConfig,
    StudyVariant,
    Variant,
)
from refined_clt.workflows import CompareParams, CompareWorkflow, SweepParams, SweepWorkflow

logger = logging.getLogger(__name__)

DEFAULT_T_GRID = [1.0, 10.0, 100.0, 1000.0]
DEFAULT_N_GRID = [100, 1000, 10000]
DEFAULT_XI_GRID = "0.35:0.95:0.05"

# flag name -> RunConfig field, for flags whose names differ
FLAG_FIELDS = {"variant": "variants"}


# ============================================================================
# Argument Parsing
# ============================================================================


def parse_grid(text: str) -> list[float]:
    """Comma list ("0.4,0.45") or inclusive range "start:stop:step"."""
    text = text.strip()
    if ":" in text:
        try:
            start, stop, step = (float(part) for part in text.split(":"))
        except ValueError as e:
            raise argparse.ArgumentTypeError(f"bad range {text!r}: {e}") from e
        if step <= 0.0 or stop < start:
            raise argparse.ArgumentTypeError(f"bad range {text!r}")
        count = int(round((stop - start) / step)) + 1
        return [round(start + i * step, 12) for i in range(count)]
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}: {e}") from e


def parse_int_grid(text: str) -> list[int]:
    values = parse_grid(text)
    if any(v != int(v) for v in values):
        raise argparse.ArgumentTypeError(f"grid {text!r} must hold integers")
    return [int(v) for v in values]


def parse_int(text: str) -> int:
    value = float(text)
    if value != int(value):
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer")
    return int(value)


def parse_k(text: str) -> int | str:
    return "auto" if text.strip().lower() == "auto" else parse_int(text)


def parse_kappa(text: str) -> float | str:
    return "auto" if text.strip().lower() == "auto" else float(text)


def parse_variants(text: str) -> list[str]:
    return [part.strip() for part in text.split(",") if part.strip()]


def _common_flags() -> argparse.ArgumentParser:
    """Flags shared by every subcommand; all default to None so unset flags are detectable."""
    common = argparse.ArgumentParser(add_help=False)
    dist = common.add_argument_group("distribution")
    dist.add_argument("--family", help="centered-pareto | student-t | frechet-centered | custom")
    dist.add_argument("--xi", type=float, help="Tail shape xi")
    dist.add_argument("--omega", type=float, help="Tail scale omega")
    dist.add_argument("--delta", type=float, help="Pareto-neighbourhood exponent delta")
    dist.add_argument("--kappa", type=parse_kappa, help="Tail shift (number or 'auto')")
    dist.add_argument("--x0", type=float, help="Tail onset threshold")
    dist.add_argument("--nu", type=float, help="Student-t degrees of freedom")
    dist.add_argument("--alpha", type=float, help="Frechet index")

    approx = common.add_argument_group("approximation")
    approx.add_argument("--n", type=parse_int, help="Number of summands")
    approx.add_argument("--k", type=parse_k, help="Kept order statistics (integer or 'auto')")
    approx.add_argument("--multiplier", type=float, help="Constant in k* = m n^alpha*")
    approx.add_argument("--variant", type=parse_variants, help="Comma list of variants")
    approx.add_argument("--sigma-mode", help="Shifted variant variance: integral | exact")
    approx.add_argument("--sigma-sq-at-un", type=float, help="sigma^2(omega u_n) (custom family)")

    run = common.add_argument_group("run")
    run.add_argument("--reps", type=parse_int, help="Replicates per ensemble")
    run.add_argument("--seed", type=parse_int, help="Master seed")
    run.add_argument("--n-grid", type=parse_int_grid, help="Comma list or start:stop:step")
    run.add_argument("--xi-grid", type=parse_grid, help="Comma list or start:stop:step")
    run.add_argument("--delta-grid", type=parse_grid, help="Comma list of delta values")
    run.add_argument("--t-grid", type=parse_grid, help="Truncation points for moments")
    run.add_argument("--confidence", type=float, help="DKW confidence level")
    run.add_argument("--workers", type=parse_int, help="Worker processes")
    run.add_argument("--out-dir", help="Output directory")
    run.add_argument("--config", type=Path, help="JSON file with any of the flags above")
    run.add_argument("--svg", action="store_true", default=None, help="Also render an SVG")
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="refined-clt",
        description="Refined approximations to heavy-tailed sums",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Truncated moments next to their tail approximations
  refined-clt moments --family centered-pareto --xi 0.4 --t-grid 1,10,100,1000

  # Shifted refinement against the normal limit at n = 1000
  refined-clt compare --family centered-pareto --xi 0.45 --kappa auto --n 1000 \\
      --variant refined-shifted,normal-baseline --reps 200000 --seed 7

  # Convergence slopes over an n-grid
  refined-clt sweep --xi 0.7 --variant refined-unified,stable-baseline --n-grid 100,1000,10000
        """,
    )
    common = _common_flags()
    subparsers = parser.add_subparsers(dest="command", help="Command to run")
    subparsers.add_parser("moments", parents=[common], help="Truncated moments table")
    subparsers.add_parser("sample", parents=[common], help="Ensemble of one variant")
    subparsers.add_parser("compare", parents=[common], help="KS of variants vs true sums")
    subparsers.add_parser("rates", parents=[common], help="Optimal exponents over a xi-grid")
    subparsers.add_parser("sweep", parents=[common], help="Convergence study over an n-grid")
    subparsers.add_parser("kstar", parents=[common], help="k* over an n-grid")
    return parser


# ============================================================================
# Configuration
# ============================================================================


def load_config_file(path: Path) -> dict[str, Any]:
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigurationError(f"cannot read config file {path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigurationError(f"config file {path} must hold a JSON object")
    normalized = {key.replace("-", "_"): value for key, value in data.items()}
    if isinstance(normalized.get("variant"), str):
        normalized["variant"] = parse_variants(normalized["variant"])
    return {FLAG_FIELDS.get(key, key): value for key, value in normalized.items()}


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Merge settings defaults, the JSON config file and explicit flags."""
    values: dict[str, Any] = {
        "command": args.command,
        "reps": settings.default_reps,
        "seed": settings.default_seed,
        "confidence": settings.confidence,
        "workers": settings.workers,
        "out_dir": settings.output_dir,
    }
    if args.config is not None:
        values.update(load_config_file(args.config))
    for key, value in vars(args).items():
        if key in ("command", "config") or value is None:
            continue
        values[FLAG_FIELDS.get(key, key)] = value
    values["command"] = args.command
    return RunConfig(**values)


def build_distribution(config: RunConfig) -> DistributionSpec:
    return tail_model.build_spec(config.distribution())


def study_variants(config: RunConfig, spec: DistributionSpec) -> list[StudyVariant]:
    names = config.variants or default_variants(spec)
    k = None if config.k == "auto" else int(config.k)
    return [
        StudyVariant(
            variant=Variant.parse(name),
            k=k,
            multiplier=config.multiplier,
            sigma_mode=config.sigma_mode,
        )
        for name in names
    ]


def default_variants(spec: DistributionSpec) -> list[str]:
    refined = Variant.SHIFTED if spec.shifted else Variant.UNIFIED
    xi = spec.params.xi
    baseline = Variant.NORMAL_BASELINE if xi < 0.5 else Variant.STABLE_BASELINE
    return [refined.label, baseline.label] if xi != 0.5 else [refined.label]


def _require_n(config: RunConfig) -> int:
    if config.n is None:
        raise ConfigurationError(f"{config.command} needs --n")
    return config.n


def _out_dir(config: RunConfig) -> Path:
    path = Path(config.out_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


# ============================================================================
# Commands
# ============================================================================


@write_manifest_on_complete("moments")
def cmd_moments(config: RunConfig) -> CommandOutcome:
    """t, exact truncated moments and their tail approximations side by side."""
    spec = build_distribution(config)
    params = spec.params
    sigma0_sq = tail_model.summarize(spec).sigma0_sq
    rows = []
    for t in config.t_grid or DEFAULT_T_GRID:
        moments = tail_model.truncated_moments(spec, t)
        in_tail = t >= params.x0 and t > params.omega
        mu_approx = tail_model.mu_tail_approx(params, t) if in_tail else math.nan
        sigma_approx = math.nan
        if in_tail and params.xi < 0.5:
            sigma_approx = tail_model.sigma_sq_tail_approx(params, sigma0_sq, t)
        rows.append(
            {
                "t": t,
                "mu": moments.mu,
                "sigma_sq": moments.sigma_sq,
                "abs3": moments.abs3,
                "mu_tail_approx": mu_approx,
                "sigma_sq_tail_approx": sigma_approx,
            }
        )
    path = _out_dir(config) / "moments.csv"
    pd.DataFrame(rows).to_csv(path, index=False)
    logger.info(f"💾 Wrote {path}")
    return CommandOutcome(config=config, outputs=[path])


@write_manifest_on_complete("sample")
def cmd_sample(config: RunConfig) -> CommandOutcome:
    """Ensemble of one variant (or of the true sums) as (replicate, value) rows."""
    spec = build_distribution(config)
    n = _require_n(config)
    variants = study_variants(config, spec)
    if len(variants) != 1:
        raise ConfigurationError("sample takes exactly one --variant")
    variant = variants[0]
    mc_harness.check_budget(n, config.reps)

    cfg = mc_harness.resolve_config(spec, variant, n)
    clamp_counts: dict[str, int] = {}
    if cfg is None:
        values = mc_harness.simulate_true_sums(spec, n, config.reps, config.seed)
    else:
        inputs = refined_approx.prepare_inputs(spec, cfg, config.sigma_sq_at_un)
        sample = mc_harness.simulate_approx(cfg, spec.params, inputs, config.reps, config.seed)
        values = sample.values
        clamp_counts[variant.variant.label] = sample.clamp_count
    path = _out_dir(config) / "sample.csv"
    pd.DataFrame({"replicate": range(len(values)), "value": values}).to_csv(path, index=False)
    logger.info(f"💾 Wrote {path}")
    return CommandOutcome(
        config=config,
        outputs=[path],
        replicate_counts={variant.variant.label: config.reps},
        clamp_counts=clamp_counts,
    )


@write_manifest_on_complete("compare")
def cmd_compare(config: RunConfig) -> CommandOutcome:
    spec = build_distribution(config)
    params = CompareParams(
        spec=spec,
        variants=study_variants(config, spec),
        n=_require_n(config),
        reps=config.reps,
        seed=config.seed,
        confidence=config.confidence,
        out_dir=_out_dir(config),
        workers=config.workers,
        sigma_sq_at_un=config.sigma_sq_at_un,
    )
    result = CompareWorkflow().run(params)
    return CommandOutcome(
        config=config,
        outputs=result.outputs,
        replicate_counts=result.replicate_counts,
        clamp_counts=result.clamp_counts,
    )


@write_manifest_on_complete("rates")
def cmd_rates(config: RunConfig) -> CommandOutcome:
    """rate_curves for every delta in the delta-grid (or the single --delta)."""
    xi_grid = config.xi_grid or parse_grid(DEFAULT_XI_GRID)
    deltas = config.delta_grid or [config.delta if config.delta is not None else 1.0]
    for xi in xi_grid:
        if not THEORY_XI_LOWER < xi < 1.0:
            raise DomainError(f"xi-grid value {xi} lies outside (1/3, 1)")
    curves = pd.concat([error_rates.rate_curves(xi_grid, d) for d in deltas], ignore_index=True)
    out_dir = _out_dir(config)
    path = out_dir / "rates.csv"
    curves.to_csv(path, index=False)
    logger.info(f"💾 Wrote {path}")
    outputs = [path]
    if config.svg:
        outputs.append(plotting.render_rate_curves(curves, out_dir / "rates.svg"))
    return CommandOutcome(config=config, outputs=outputs)


@write_manifest_on_complete("sweep")
def cmd_sweep(config: RunConfig) -> CommandOutcome:
    spec = build_distribution(config)
    params = SweepParams(
        spec=spec,
        variants=study_variants(config, spec),
        n_grid=config.n_grid or DEFAULT_N_GRID,
        reps=config.reps,
        seed=config.seed,
        confidence=config.confidence,
        out_dir=_out_dir(config),
        workers=config.workers,
        svg=config.svg,
        sigma_sq_at_un=config.sigma_sq_at_un,
    )
    result = SweepWorkflow().run(params)
    return CommandOutcome(
        config=config,
        outputs=result.outputs,
        replicate_counts=result.study.replicate_counts,
        clamp_counts=result.study.clamp_counts,
    )


@write_manifest_on_complete("kstar")
def cmd_kstar(config: RunConfig) -> CommandOutcome:
    spec = build_distribution(config)
    table = error_rates.kstar_table(
        config.n_grid or DEFAULT_N_GRID, spec.params.xi, spec.params.delta, config.multiplier
    )
    path = _out_dir(config) / "kstar.csv"
    table.to_csv(path, index=False)
    logger.info(f"💾 Wrote {path}")
    return CommandOutcome(config=config, outputs=[path])


HANDLERS = {
    "moments": cmd_moments,
    "sample": cmd_sample,
    "compare": cmd_compare,
    "rates": cmd_rates,
    "sweep": cmd_sweep,
    "kstar": cmd_kstar,
}


# ============================================================================
# Entry Point
# ============================================================================


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        level=settings.log_level,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.command:
        parser.print_help()
        return 2

    try:
        config = resolve_config(args)
        HANDLERS[config.command](config)
    except ValidationError as e:
        logger.error(f"❌ Invalid configuration: {e}")
        print(f"error: invalid configuration\n{e}", file=sys.stderr)
        return 2
    except RefinedCltError as e:
        logger.error(f"❌ {type(e).__name__}: {e.message}")
        print(f"error: {e.message}", file=sys.stderr)
        return e.exit_code
    except Exception as e:
        logger.exception(f"❌ Unexpected failure: {e}")
        print(f"error: {e}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
