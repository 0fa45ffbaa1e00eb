# tests/test_cli.py
from __future__ import annotations

import json
from fractions import Fraction

import pytest

from cmlimits.cli import EXIT_INVALID, EXIT_OK, main
from cmlimits.degseq import DegreeModel
from cmlimits.limits import NU0_REFERENCE


@pytest.fixture
def model_file(tmp_path):
    path = tmp_path / "model.json"
    model = DegreeModel({1: Fraction(2, 11), 2: Fraction(9, 11)})  # nu = 0.9
    path.write_text(json.dumps(model.to_json()), encoding="utf-8")
    return str(path)


@pytest.fixture
def triangle_file(tmp_path):
    path = tmp_path / "tri.txt"
    path.write_text("2\n2\n2\n", encoding="utf-8")
    return str(path)


def _json_out(capsys):
    return json.loads(capsys.readouterr().out)


def test_nu0(capsys):
    assert main(["nu0", "--tol", "1e-9"]) == EXIT_OK
    data = _json_out(capsys)
    assert abs(data["nu0"] - NU0_REFERENCE) < 1e-6


def test_sample_edge_list(capsys, triangle_file):
    assert main(["sample", "--degrees", triangle_file, "--seed", "0x10"]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines[:3] == ["# n=3", "# m_n=6", "# seed=16"]
    assert sum(int(ln.split()[2]) for ln in lines[3:]) == 3


def test_sample_simple_reports_attempts(capsys, triangle_file):
    assert main(["sample", "--degrees", triangle_file, "--seed", "5", "--simple"]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines[3].startswith("# attempts=")
    assert lines[4:] == ["1 2 1", "1 3 1", "2 3 1"]


def test_sample_needs_a_seed(triangle_file):
    with pytest.raises(SystemExit):
        main(["sample", "--degrees", triangle_file])
    with pytest.raises(SystemExit):
        main(["sample", "--degrees", triangle_file, "--seed", "-1"])


def test_odd_degree_sum_exits_invalid(capsys, tmp_path):
    path = tmp_path / "odd.txt"
    path.write_text("1\n1\n1\n", encoding="utf-8")
    assert main(["sample", "--degrees", str(path), "--seed", "1"]) == EXIT_INVALID
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["error"] == "DegreeSequenceError"


def test_model_sampling_needs_n(capsys, model_file):
    assert main(["sample", "--model", model_file, "--seed", "1"]) == EXIT_INVALID
    assert main(["sample", "--model", model_file, "--seed", "1", "--n", "50"]) == EXIT_OK
    assert "# n=50" in capsys.readouterr().out


def test_cycles_csv(capsys, model_file):
    argv = ["cycles", "--model", model_file, "--n", "200", "--seed", "2", "--format", "csv"]
    assert main(argv) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "k,X,xi"
    assert len(lines) == 5


def test_fragment_from_limit(capsys, model_file):
    assert main(["fragment", "--model", model_file, "--seed", "3", "--limit"]) == EXIT_OK
    data = _json_out(capsys)
    assert data["source"] == "limit"
    assert isinstance(data["fragment"], str)


def test_limits(capsys, model_file):
    assert main(["limits", "--model", model_file]) == EXIT_OK
    data = _json_out(capsys)
    assert data["nu"] == pytest.approx(0.9)
    assert data["Q"] == pytest.approx(data["Q_series"], rel=1e-9)
    assert data["threshold"]["verdict"] == "gap"
    assert set(data["xi"]) == {"1", "2", "3", "4"}


def test_kakeya_threshold_only(capsys, model_file):
    assert main(["kakeya", "--model", model_file, "--threshold-only"]) == EXIT_OK
    assert _json_out(capsys)["verdict"] == "gap"


def test_kakeya_rejects_supercritical(capsys, tmp_path):
    path = tmp_path / "hot.json"
    path.write_text(json.dumps({"lambdas": {"1": 0.5, "3": 0.5}}), encoding="utf-8")
    assert main(["kakeya", "--model", str(path)]) == EXIT_INVALID
    assert json.loads(capsys.readouterr().err.splitlines()[-1])["error"] == "SupercriticalError"


def test_catalogue(capsys, model_file, tmp_path):
    assert main(["catalogue", "--model", model_file, "--floor", "1e-3", "--top", "5"]) == EXIT_OK
    data = _json_out(capsys)
    assert data["entries"][0]["code"] == "-"
    assert len(data["entries"]) == 5
    out = tmp_path / "cat.jsonl"
    assert main(["catalogue", "--model", model_file, "--floor", "1e-3", "--out", str(out)]) == 0
    assert _json_out(capsys)["entries"] > 5
    assert out.read_text(encoding="utf-8").startswith('{"catalogue"')


def test_verify_writes_report(capsys, triangle_file, tmp_path):
    argv = [
        "verify",
        "--experiment",
        "oracle_equivalence",
        "--degrees",
        triangle_file,
        "--trials",
        "300",
        "--seed",
        "9",
        "--out",
        str(tmp_path / "reports"),
    ]
    code = main(argv)
    data = _json_out(capsys)
    assert code == (EXIT_OK if data["passed"] else 1)
    assert (tmp_path / "reports" / "oracle_equivalence_report.json").exists()
    assert (tmp_path / "reports" / "oracle_equivalence_report.csv").exists()


def test_verify_needs_an_experiment(capsys):
    assert main(["verify"]) == EXIT_INVALID
    assert "ValidationError" in capsys.readouterr().err
