"""End-to-end runs of the ``refined-clt`` commands against a temporary output directory."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import pandas as pd
import pytest

from refined_clt.cli import main, parse_grid, parse_int_grid
from refined_clt.hooks import file_digest

FIXTURES_DIR = Path(__file__).resolve().parent.parent / "fixtures"

PARETO_045 = ["--family", "centered-pareto", "--xi", "0.45"]


def run(command: str, out_dir: Path, *flags: str) -> int:
    return main([command, *flags, "--out-dir", str(out_dir)])


def read_manifest(out_dir: Path, command: str) -> dict[str, Any]:
    return json.loads((out_dir / f"{command}_manifest.json").read_text(encoding="utf-8"))


# ============================================================================
# Argument Parsing
# ============================================================================


def test_parse_grid_forms() -> None:
    assert parse_grid("0.4, 0.45") == [0.4, 0.45]
    grid = parse_grid("0.35:0.95:0.05")
    assert len(grid) == 13
    assert grid[3] == 0.5
    assert parse_int_grid("100:300:100") == [100, 200, 300]


def test_no_command_is_a_usage_error() -> None:
    assert main([]) == 2


# ============================================================================
# moments
# ============================================================================


def test_moments_table(tmp_path: Path) -> None:
    code = run(
        "moments", tmp_path, "--family", "centered-pareto", "--xi", "0.4", "--t-grid", "1,10,100"
    )
    assert code == 0
    table = pd.read_csv(tmp_path / "moments.csv")
    assert table["t"].tolist() == [1.0, 10.0, 100.0]
    assert table["mu"].iloc[0] == pytest.approx(-0.26175, abs=1e-4)
    assert table["mu_tail_approx"].isna().iloc[0]
    assert table["sigma_sq_tail_approx"].notna().iloc[2]

    manifest = read_manifest(tmp_path, "moments")
    assert manifest["command"] == "moments"
    assert manifest["outputs"] == {"moments.csv": file_digest(tmp_path / "moments.csv")}


def test_moments_below_support_is_rejected(tmp_path: Path) -> None:
    code = run("moments", tmp_path, "--family", "centered-pareto", "--xi", "0.4", "--t-grid=-1")
    assert code == 2


def test_inconsistent_distribution_is_rejected(tmp_path: Path) -> None:
    assert run("moments", tmp_path, *PARETO_045, "--delta", "0.9") == 2


def test_moments_reads_family_parameters_from_extra(tmp_path: Path) -> None:
    config = str(FIXTURES_DIR / "moments_student_t.json")
    assert run("moments", tmp_path / "file", "--config", config) == 0
    flags = ["--family", "student-t", "--nu", "3", "--t-grid", "1,10,100"]
    assert run("moments", tmp_path / "flag", *flags) == 0
    from_file = pd.read_csv(tmp_path / "file" / "moments.csv")
    from_flag = pd.read_csv(tmp_path / "flag" / "moments.csv")
    pd.testing.assert_frame_equal(from_file, from_flag)
    assert from_file["sigma_sq"].iloc[2] < 3.0

    assert run("moments", tmp_path / "override", "--config", config, "--nu", "4") == 0
    overridden = pd.read_csv(tmp_path / "override" / "moments.csv")
    assert overridden["sigma_sq"].iloc[2] < 2.0


# ============================================================================
# sample / compare
# ============================================================================


def test_sample_writes_one_row_per_replicate(tmp_path: Path) -> None:
    code = run(
        "sample",
        tmp_path,
        *PARETO_045,
        "--n",
        "100",
        "--variant",
        "refined-unified",
        "--reps",
        "50",
        "--seed",
        "3",
    )
    assert code == 0
    table = pd.read_csv(tmp_path / "sample.csv")
    assert len(table) == 50
    assert list(table.columns) == ["replicate", "value"]
    manifest = read_manifest(tmp_path, "sample")
    assert manifest["replicate_counts"] == {"refined-unified": 50}


def test_compare_from_config_file(tmp_path: Path) -> None:
    code = run("compare", tmp_path, "--config", str(FIXTURES_DIR / "compare_pareto.json"))
    assert code == 0
    table = pd.read_csv(tmp_path / "compare.csv")
    assert table["variant"].tolist() == ["refined-shifted", "normal-baseline"]
    assert (table["reps"] == 3000).all()
    assert table["ks"].between(0.0, 1.0).all()

    manifest = read_manifest(tmp_path, "compare")
    assert manifest["seed"] == 7
    assert manifest["outputs"]["compare.csv"] == file_digest(tmp_path / "compare.csv")
    assert manifest["replicate_counts"]["reference-true-sums"] == 3000


def test_flags_override_config_file(tmp_path: Path) -> None:
    code = run(
        "compare",
        tmp_path,
        "--config",
        str(FIXTURES_DIR / "compare_pareto.json"),
        "--reps",
        "1000",
        "--variant",
        "normal-baseline",
    )
    assert code == 0
    table = pd.read_csv(tmp_path / "compare.csv")
    assert table["variant"].tolist() == ["normal-baseline"]
    assert table["reps"].tolist() == [1000]


def test_compare_is_reproducible(tmp_path: Path) -> None:
    config = str(FIXTURES_DIR / "compare_pareto.json")
    assert run("compare", tmp_path / "a", "--config", config) == 0
    assert run("compare", tmp_path / "b", "--config", config) == 0
    first = (tmp_path / "a" / "compare.csv").read_bytes()
    assert first == (tmp_path / "b" / "compare.csv").read_bytes()


def test_compare_workers_do_not_change_output(tmp_path: Path) -> None:
    config = str(FIXTURES_DIR / "compare_pareto.json")
    assert run("compare", tmp_path / "serial", "--config", config, "--workers", "1") == 0
    assert run("compare", tmp_path / "pool", "--config", config, "--workers", "8") == 0
    serial = (tmp_path / "serial" / "compare.csv").read_bytes()
    assert serial == (tmp_path / "pool" / "compare.csv").read_bytes()


def test_compare_rejects_unknown_variant(tmp_path: Path) -> None:
    code = run("compare", tmp_path, *PARETO_045, "--n", "100", "--variant", "refined-magic")
    assert code == 2
    assert not (tmp_path / "compare.csv").exists()


def test_compare_refuses_oversized_runs(tmp_path: Path) -> None:
    code = run("compare", tmp_path, *PARETO_045, "--n", "100000", "--reps", "200000")
    assert code == 3
    assert not (tmp_path / "compare.csv").exists()


def test_compare_needs_n(tmp_path: Path) -> None:
    assert run("compare", tmp_path, *PARETO_045, "--reps", "100") == 2


# ============================================================================
# rates / kstar
# ============================================================================


def test_rates_default_grid(tmp_path: Path) -> None:
    assert run("rates", tmp_path, "--delta", "1") == 0
    table = pd.read_csv(tmp_path / "rates.csv")
    assert len(table) == 13
    assert {"xi", "beta_star", "alpha_star", "benchmark", "regime"} <= set(table.columns)


def test_rates_with_svg(tmp_path: Path) -> None:
    assert run("rates", tmp_path, "--xi-grid", "0.4,0.6", "--delta-grid", "0.5,1", "--svg") == 0
    assert len(pd.read_csv(tmp_path / "rates.csv")) == 4
    assert (tmp_path / "rates.svg").read_text(encoding="utf-8").lstrip().startswith("<?xml")
    assert set(read_manifest(tmp_path, "rates")["outputs"]) == {"rates.csv", "rates.svg"}


def test_rates_outside_domain(tmp_path: Path) -> None:
    assert run("rates", tmp_path, "--xi-grid", "0.2,0.5") == 2


def test_kstar_table(tmp_path: Path) -> None:
    code = run(
        "kstar", tmp_path, *PARETO_045, "--kappa", "auto", "--delta", "1", "--n-grid", "2,10000"
    )
    assert code == 0
    assert pd.read_csv(tmp_path / "kstar.csv")["k_star"].tolist() == [1, 69]


# ============================================================================
# sweep
# ============================================================================


def test_sweep_writes_cells_slopes_and_plot(tmp_path: Path) -> None:
    code = run("sweep", tmp_path, "--config", str(FIXTURES_DIR / "sweep_heavy.json"), "--svg")
    assert code == 0
    table = pd.read_csv(tmp_path / "sweep.csv")
    assert table["row_type"].tolist() == ["cell"] * 6 + ["slope"] * 2
    slopes = table[table["row_type"] == "slope"]
    assert slopes["variant"].tolist() == ["refined-unified", "stable-baseline"]
    plot = pd.read_csv(tmp_path / "sweep_plot.csv")
    assert list(plot.columns) == ["variant", "n", "ks"]
    assert (tmp_path / "sweep.svg").exists()
    manifest = read_manifest(tmp_path, "sweep")
    assert set(manifest["outputs"]) == {"sweep.csv", "sweep_plot.csv", "sweep.svg"}


def test_sweep_needs_three_sample_sizes(tmp_path: Path) -> None:
    assert run("sweep", tmp_path, *PARETO_045, "--n-grid", "1000", "--reps", "100") == 2


def test_sweep_rejects_decreasing_grid(tmp_path: Path) -> None:
    assert run("sweep", tmp_path, *PARETO_045, "--n-grid", "100,50,200", "--reps", "100") == 2
