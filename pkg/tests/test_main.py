from __future__ import annotations

import json
from pathlib import Path

import pytest

from quasidet.main import EXIT_IDENTITY_FAILURE, EXIT_INPUT_ERROR, EXIT_OK, main, parse_couplings
from quasidet.errors import ParameterError
from quasidet.report_store import read_csv_table
from quasidet.weak import DecompositionCheck


SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"


def _rows(path: Path) -> list[dict[str, str]]:
    header, rows = read_csv_table(path)
    return [dict(zip(header, r)) for r in rows]


def test_analyze_demo_writes_weak_value_two(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["analyze", "pauli_demo", "--out", str(out)]) == EXIT_OK
    rows = {(r["observable"], r["final_label"]): r for r in _rows(out / "weak_values.csv")}
    assert abs(float(rows[("X+Y", "y+")]["weak_value_re"]) - 2.0) <= 1e-12
    assert rows[("X+Y", "y+")]["anomalous"] == "true"
    assert all(r["passed"] == "true" for r in _rows(out / "identity_checks.csv"))
    manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
    assert manifest["identity_checks_passed"] is True
    assert len(manifest["metadata"]["scenario_sha256"]) == 64
    assert "all identity checks passed" in capsys.readouterr().out


def test_analyze_qutrit_eigenbasis_gives_indicator_rows(tmp_path):
    out = tmp_path / "out"
    assert main(["analyze", str(SCENARIOS / "qutrit_eigenbasis.yaml"), "--out", str(out), "--quiet"]) == EXIT_OK
    by_final: dict[str, list[float]] = {}
    for r in _rows(out / "quasi_probabilities.csv"):
        if r["observable"] == "A":
            by_final.setdefault(r["final_label"], []).append(float(r["q_re"]))
    assert sorted(by_final) == ["A[0]", "A[1]", "A[2]"]
    for values in by_final.values():
        assert sorted(round(v, 9) for v in values) == [0.0, 0.0, 1.0]


def test_json_format(tmp_path):
    out = tmp_path / "out"
    assert main(["analyze", "pauli_demo", "--out", str(out), "--format", "json", "--quiet"]) == EXIT_OK
    doc = json.loads((out / "uncertainty_budget.json").read_text(encoding="utf-8"))
    assert doc["columns"][0] == "observable"
    assert len(doc["rows"]) == 3


def test_malformed_amplitude_exits_with_input_error(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text(
        "dim: 2\n"
        "initial:\n  amplitudes: [[1, 0], [oops, 0]]\n"
        "final_basis:\n  preset: z\n"
        "observables:\n  - name: X\n    pauli_string: X\n",
        encoding="utf-8",
    )
    assert main(["analyze", str(bad), "--out", str(tmp_path / "out")]) == EXIT_INPUT_ERROR
    assert "initial.amplitudes.1" in capsys.readouterr().err
    assert not (tmp_path / "out").exists()


@pytest.mark.parametrize(
    "argv",
    [
        ["simulate", "pauli_demo", "--shots", "0"],
        ["simulate", "pauli_demo", "--couplings", "0.05,-0.1,0.2"],
        ["analyze", "does_not_exist.yaml"],
        ["frobnicate"],
        ["tomography", "pauli_demo", "--mode", "sideways"],
    ],
)
def test_bad_invocations_exit_with_input_error(argv, capsys):
    assert main(argv) == EXIT_INPUT_ERROR
    assert "error: " in capsys.readouterr().err


def test_failed_identity_check_exits_two(tmp_path, monkeypatch):
    monkeypatch.setattr(
        "quasidet.commands.verify_decomposition", lambda *args, **kwargs: DecompositionCheck(residual=1.0)
    )
    out = tmp_path / "out"
    assert main(["analyze", "pauli_demo", "--out", str(out), "--quiet"]) == EXIT_IDENTITY_FAILURE
    failed = [r for r in _rows(out / "identity_checks.csv") if r["passed"] == "false"]
    assert [r["check"] for r in failed] == ["mixture_decomposition"]


def test_same_seed_gives_identical_files(tmp_path):
    args = ["simulate", "pauli_demo", "--shots", "4000", "--seed", "17", "--quiet"]
    assert main(args + ["--out", str(tmp_path / "a")]) == EXIT_OK
    assert main(args + ["--out", str(tmp_path / "b")]) == EXIT_OK
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert "pointer_records.csv" in names and "extrapolation.csv" in names
    for name in names:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_exact_tomography(tmp_path):
    out = tmp_path / "out"
    assert main(["tomography", "pauli_demo", "--mode", "complex", "--out", str(out), "--quiet"]) == EXIT_OK
    rows = _rows(out / "reconstruction.csv")
    assert [r["final_label"] for r in rows] == ["y+", "y-"]
    assert all(float(r["max_abs_error"]) <= 1e-12 for r in rows)
    assert len(_rows(out / "basis_weak_values.csv")) == 8


def test_config_file_tolerance_and_cli_override(tmp_path):
    cfg = tmp_path / "quasidet.yaml"
    cfg.write_text("tolerances:\n  identity: 1.0e-9\noutput:\n  format: csv\n", encoding="utf-8")
    out = tmp_path / "out"
    assert main(["analyze", "pauli_demo", "--config", str(cfg), "--tol-identity", "1e-8", "--out", str(out), "--quiet"]) == EXIT_OK
    assert {float(r["tolerance"]) for r in _rows(out / "identity_checks.csv")} == {1e-8}


def test_parse_couplings():
    assert parse_couplings("0.05, 0.1,0.2") == [0.05, 0.1, 0.2]
    with pytest.raises(ParameterError):
        parse_couplings("a,b")


@pytest.mark.slow
def test_demo_prints_paradox_summary(tmp_path, capsys):
    assert main(["demo", "--shots", "20000", "--seed", "3", "--out", str(tmp_path / "out")]) == EXIT_OK
    text = capsys.readouterr().out
    assert "paradox summary" in text
    assert "outside the spectrum" in text
    assert "[demo] all identity checks passed" in text


def test_config_simulation_section_applies_to_builtin_demo(tmp_path):
    cfg = tmp_path / "quasidet.yaml"
    cfg.write_text("simulation:\n  shots: 3000\n  seed: 5\n", encoding="utf-8")
    out = tmp_path / "out"
    assert main(["simulate", "pauli_demo", "--config", str(cfg), "--out", str(out), "--quiet"]) == EXIT_OK
    kept: dict[str, int] = {}
    for r in _rows(out / "pointer_records.csv"):
        kept[r["observable"]] = kept.get(r["observable"], 0) + int(r["kept_shots"])
    assert kept == {"X": 3000, "Y": 3000, "X+Y": 3000}


def test_orthogonal_outcome_is_marked_skipped(tmp_path):
    scenario = tmp_path / "z.yaml"
    scenario.write_text(
        "dim: 2\n"
        "initial:\n  preset: z+\n"
        "final_basis:\n  preset: z\n"
        "observables:\n  - name: X\n    pauli_string: X\n",
        encoding="utf-8",
    )
    out = tmp_path / "out"
    assert main(["analyze", str(scenario), "--out", str(out), "--quiet"]) == EXIT_OK
    rows = {r["final_label"]: r for r in _rows(out / "weak_values.csv")}
    assert rows["z-"]["skipped"] == "true"
    assert rows["z-"]["weak_value_re"] == "nan"
    assert rows["z+"]["skipped"] == "false"
    assert float(rows["z+"]["weak_value_re"]) == 0.0
