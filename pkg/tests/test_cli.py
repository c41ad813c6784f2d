"""
Tests for the command-line front end.

Each test runs ``main`` in-process against a temporary output directory and
checks the exit code, the files written and the run manifest.
"""

import csv
import hashlib
import json
import math
from pathlib import Path
from typing import List

import pytest

from ebm_lab.cli import EXIT_CONFIG, EXIT_OK, EXIT_REFERENCE, main
from ebm_lab.io import read_profile_csv


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------

def _run(out: Path, *args: str) -> int:
    return main(["--out-dir", str(out), *args])


def _manifest(out: Path) -> dict:
    return json.loads((out / "manifest.json").read_text())


def _write(path: Path, text: str) -> Path:
    path.write_text(text)
    return path


# ---------------------------------------------------------------------------
# greenfn-table
# ---------------------------------------------------------------------------

def test_greenfn_table(tmp_path: Path) -> None:
    """One row per interior (θ, ξ) pair, checksummed in the manifest."""
    out = tmp_path / "g"
    assert _run(out, "greenfn-table", "--points", "11") == EXIT_OK
    table = out / "greenfn.csv"
    lines = table.read_text().splitlines()
    assert lines[0] == "theta_rad,xi_rad,K,dK_left,dK_right"
    assert len(lines) == 1 + 9 * 9

    manifest = _manifest(out)
    assert manifest["command"] == "greenfn-table"
    (entry,) = manifest["outputs"]
    assert entry["path"] == "greenfn.csv"
    assert entry["sha256"] == hashlib.sha256(table.read_bytes()).hexdigest()
    assert any(note.startswith("beta=") for note in manifest["notes"])


def test_greenfn_table_derivative_jumps_on_the_diagonal(tmp_path: Path) -> None:
    """Where θ = ξ the right derivative sits 1/sin ξ below the left one; elsewhere they agree."""
    out = tmp_path / "g"
    assert _run(out, "greenfn-table", "--points", "13") == EXIT_OK
    with (out / "greenfn.csv").open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    diagonal = [r for r in rows if r["theta_rad"] == r["xi_rad"]]
    assert len(diagonal) == 11
    for r in rows:
        jump = float(r["dK_right"]) - float(r["dK_left"])
        expected = -1.0 / math.sin(float(r["xi_rad"])) if r in diagonal else 0.0
        assert jump == pytest.approx(expected, abs=1e-6)


def test_greenfn_table_is_deterministic(tmp_path: Path) -> None:
    """Two identical runs write byte-identical tables."""
    assert _run(tmp_path / "a", "greenfn-table") == EXIT_OK
    assert _run(tmp_path / "b", "greenfn-table") == EXIT_OK
    assert (tmp_path / "a" / "greenfn.csv").read_bytes() == (tmp_path / "b" / "greenfn.csv").read_bytes()


# ---------------------------------------------------------------------------
# Configuration errors
# ---------------------------------------------------------------------------

def test_invalid_config_exits_2(tmp_path: Path) -> None:
    """A negative diffusivity is a configuration error."""
    config = _write(tmp_path / "bad.json", '{"D": -1.0}')
    assert _run(tmp_path / "o", "--config", str(config), "greenfn-table") == EXIT_CONFIG
    assert not (tmp_path / "o" / "manifest.json").exists()


def test_non_integer_thread_count_exits_2(
    tmp_path: Path, monkeypatch: pytest.MonkeyPatch, capsys: pytest.CaptureFixture
) -> None:
    """A malformed EBM_THREADS is a configuration error naming the variable."""
    monkeypatch.setenv("EBM_THREADS", "four")
    assert _run(tmp_path / "o", "greenfn-table", "--points", "5") == EXIT_CONFIG
    assert "EBM_THREADS" in capsys.readouterr().err
    assert not (tmp_path / "o" / "manifest.json").exists()


def test_thread_flag_overrides_environment(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.setenv("EBM_THREADS", "four")
    assert _run(tmp_path / "o", "--threads", "2", "greenfn-table", "--points", "5") == EXIT_OK


def test_malformed_json_exits_2(tmp_path: Path, capsys: pytest.CaptureFixture) -> None:
    """JSON syntax errors report line and column."""
    config = _write(tmp_path / "broken.json", '{\n  "Q": 250,\n}')
    assert _run(tmp_path / "o", "--config", str(config), "greenfn-table") == EXIT_CONFIG
    assert "broken.json:3:" in capsys.readouterr().err


def test_config_and_preset_together_exit_2(tmp_path: Path) -> None:
    config = _write(tmp_path / "c.json", '{"Q": 250}')
    code = _run(tmp_path / "o", "--config", str(config), "--preset", "symmetric", "greenfn-table")
    assert code == EXIT_CONFIG


def test_unknown_config_key_exits_2(tmp_path: Path) -> None:
    config = _write(tmp_path / "c.json", '{"continent": {"width": 2}}')
    assert _run(tmp_path / "o", "--config", str(config), "greenfn-table") == EXIT_CONFIG


def test_continent_outside_domain_exits_2(tmp_path: Path) -> None:
    config = _write(tmp_path / "c.json", '{"continent.epsilon": 1.5}')
    assert _run(tmp_path / "o", "--config", str(config), "greenfn-table") == EXIT_CONFIG


# ---------------------------------------------------------------------------
# Unresolved references
# ---------------------------------------------------------------------------

def test_unknown_solution_id_exits_3(tmp_path: Path) -> None:
    assert _run(tmp_path, "stability", "--Q", "247", "--solution-id", "all-ice-7") == EXIT_REFERENCE


def test_missing_ic_file_exits_3(tmp_path: Path) -> None:
    code = _run(tmp_path / "o", "simulate", "--ic", str(tmp_path / "nowhere.csv"), "--t-end", "0")
    assert code == EXIT_REFERENCE


def test_unknown_case_exits_3(tmp_path: Path) -> None:
    """Continent pattern names do not exist on an aquaplanet."""
    assert _run(tmp_path, "solve", "--Q", "247", "--case", "one-crit-continent") == EXIT_REFERENCE


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def test_simulate_zero_length_run(tmp_path: Path) -> None:
    """t_end = 0 writes the initial profile only."""
    out = tmp_path / "s"
    assert _run(out, "simulate", "--ic", "uniform:-3", "--t-end", "0", "--N", "64") == EXIT_OK
    columns = read_profile_csv(out / "trajectory.csv")
    assert set(columns) == {"t", "theta_rad", "T"}
    assert columns["T"].size == 65
    assert (columns["T"] == -3.0).all()
    assert (columns["t"] == 0.0).all()


def test_simulate_from_profile_file(tmp_path: Path) -> None:
    """A CSV with theta_rad and T_dimensionless columns is interpolated onto the grid."""
    ic = _write(tmp_path / "ic.csv", "theta_rad,T_dimensionless\n0,-2\n3.141592653589793,-2\n")
    out = tmp_path / "s"
    assert _run(out, "simulate", "--ic", f"file:{ic}", "--t-end", "0.5", "--N", "64", "--samples", "3") == EXIT_OK
    columns = read_profile_csv(out / "trajectory.csv")
    assert sorted(set(columns["t"].tolist())) == [0.0, 0.25, 0.5]


def test_simulate_bad_uniform_value_exits_2(tmp_path: Path) -> None:
    assert _run(tmp_path, "simulate", "--ic", "uniform:cold", "--t-end", "0") == EXIT_CONFIG


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------

def test_verify_single_resolution(tmp_path: Path) -> None:
    """With one N the order estimate is null and the run still succeeds."""
    out = tmp_path / "v"
    assert _run(out, "verify", "--N", "64", "--t-end", "0.2") == EXIT_OK
    report = json.loads((out / "verify.json").read_text())
    assert report["t_end"] == 0.2
    assert set(report["sources"]) == {"gauss_pulse", "moving_gauss"}
    for source in report["sources"].values():
        assert source["order_estimate"] is None
        assert [row["N"] for row in source["rows"]] == [64]


# ---------------------------------------------------------------------------
# solve and stability
# ---------------------------------------------------------------------------

def test_solve_at_247(tmp_path: Path) -> None:
    """Six aquaplanet equilibria with a profile and sidecar each."""
    out = tmp_path / "e"
    assert _run(out, "solve", "--Q", "247") == EXIT_OK
    summary = json.loads((out / "equilibria.json").read_text())
    ids: List[str] = [e["id"] for e in summary["equilibria"]]
    assert ids == ["all-water-0", "all-ice-0"] + [f"two-edges-{i}" for i in range(4)]
    for sid in ids:
        sidecar = json.loads((out / f"profile-{sid}.json").read_text())
        assert sidecar["residual_norm"] < 1e-6
        assert (out / f"profile-{sid}.csv").is_file()
    outputs = {entry["path"] for entry in _manifest(out)["outputs"]}
    assert "equilibria.json" in outputs
    assert len(outputs) == 2 * len(ids) + 1


def test_solve_with_case_filter(tmp_path: Path) -> None:
    out = tmp_path / "e"
    assert _run(out, "solve", "--Q", "247", "--case", "all-ice") == EXIT_OK
    summary = json.loads((out / "equilibria.json").read_text())
    assert [e["id"] for e in summary["equilibria"]] == ["all-ice-0"]


def test_stability_eigen_on_snowball(tmp_path: Path) -> None:
    """The all-ice state is stable and its spectrum is written."""
    out = tmp_path / "st"
    code = _run(out, "stability", "--Q", "247", "--solution-id", "all-ice-0", "--N", "100")
    assert code == EXIT_OK
    report = json.loads((out / "stability.json").read_text())
    assert report["method"] == "eigen"
    assert report["verdict"] == "stable"
    spectrum = read_profile_csv(out / "spectrum.csv")
    assert spectrum["re"].size == 99


# ---------------------------------------------------------------------------
# bifurcate
# ---------------------------------------------------------------------------

def test_bifurcate_short_range(tmp_path: Path) -> None:
    """Two Q values give a diagram table and a (possibly empty) fold table."""
    out = tmp_path / "b"
    code = _run(out, "bifurcate", "--Q-min", "246", "--Q-max", "247", "--step", "1", "--N", "64")
    assert code == EXIT_OK
    lines = (out / "diagram.csv").read_text().splitlines()
    assert lines[0] == "Q,T_mean_C,case,stability,n_critical_latitudes"
    assert {float(row.split(",")[0]) for row in lines[1:]} == {246.0, 247.0}
    assert (out / "folds.csv").read_text().splitlines()[0] == "branch_id,Q_fold,T_mean_fold"
    outputs = {entry["path"] for entry in _manifest(out)["outputs"]}
    assert outputs == {"diagram.csv", "folds.csv"}
