# tests/test_harness.py
from __future__ import annotations

import json
import math
from fractions import Fraction
from pathlib import Path

import pytest

from cmlimits.degseq import DegreeModel
from cmlimits.harness import (
    REPORT_SCHEMA,
    ExperimentSpec,
    Report,
    ReportRow,
    run_cycle_law,
    run_experiment,
    run_fragment_law,
    run_loop_divergence,
    run_oracle_equivalence,
    save_report,
)
from cmlimits.limits import prob_simple_limit, xi
from cmlimits.models import SupercriticalError, ValidationError

HALF = DegreeModel({1: Fraction(2, 3), 2: Fraction(1, 3)})  # nu = 1/2
MIXED = DegreeModel({1: Fraction(6, 10), 2: Fraction(3, 10), 3: Fraction(1, 10)})  # nu = 0.8
CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def test_spec_validation():
    with pytest.raises(ValidationError):
        ExperimentSpec("no_such_experiment", model=HALF)
    with pytest.raises(ValidationError):
        ExperimentSpec("cycle_law", model=HALF, trials=0)
    with pytest.raises(ValidationError):
        ExperimentSpec("cycle_law", model=HALF, degrees=[1, 1])
    with pytest.raises(ValidationError):
        ExperimentSpec("cycle_law")
    with pytest.raises(ValidationError):
        ExperimentSpec("oracle_equivalence", degrees=[2, 2], statistics=["bogus"])
    with pytest.raises(ValidationError):
        ExperimentSpec("cycle_law", model=HALF, ns=[])
    spec = ExperimentSpec("cycle_law", model=HALF)
    assert spec.experiment_id == "cycle_law"


def test_spec_from_json(tmp_path):
    (tmp_path / "model.json").write_text(json.dumps(HALF.to_json()), encoding="utf-8")
    path = tmp_path / "exp.json"
    path.write_text(
        json.dumps({"experiment": "cycle_law", "model": "model.json", "ns": [100], "trials": 5}),
        encoding="utf-8",
    )
    spec = ExperimentSpec.from_json(path)
    assert spec.model is not None and spec.model.lambdas == HALF.lambdas
    assert spec.ns == [100]
    inline = tmp_path / "inline.json"
    inline.write_text(
        json.dumps({"experiment": "cycle_law", "model": {"lambdas": {"1": 0.5, "3": 0.5}}}),
        encoding="utf-8",
    )
    assert math.isclose(ExperimentSpec.from_json(inline).model.nu, 1.5)
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"experiment": "cycle_law", "colour": "red"}), encoding="utf-8")
    with pytest.raises(ValidationError):
        ExperimentSpec.from_json(bad)


def test_report_pass_logic_and_json():
    spec = ExperimentSpec("cycle_law", model=HALF)
    report = Report("cycle_law", spec)
    report.add(ReportRow("descriptive", 0.1, None, "none"))
    assert report.passed
    report.add(ReportRow("z", 1.0, 0.0, "anchor", 0.0, math.inf, False, 10))
    assert not report.passed
    payload = report.to_json()
    assert payload["schema"] == REPORT_SCHEMA
    assert payload["rows"][1]["z"] is None
    assert report.row("z", 10).empirical == 1.0
    with pytest.raises(KeyError):
        report.row("missing")


def test_oracle_equivalence_on_a_triangle():
    spec = ExperimentSpec(
        "oracle_equivalence",
        degrees=[2, 2, 2],
        statistics=["is_simple", "loops"],
        trials=3000,
        seed=1,
        z_bound=4.0,
    )
    report = run_oracle_equivalence(spec)
    assert math.isclose(report.row("is_simple=True").theoretical, 8 / 15)
    assert math.isclose(report.row("E[X_1]").theoretical, 0.6)
    assert report.passed, report.to_frame()


def test_oracle_needs_explicit_degrees():
    with pytest.raises(ValidationError):
        run_oracle_equivalence(ExperimentSpec("oracle_equivalence", model=HALF))


def test_cycle_law_rows_and_reproducibility():
    spec = ExperimentSpec("cycle_law", model=HALF, ns=[300], trials=40, K=3, seed=4)
    report = run_cycle_law(spec)
    assert math.isclose(report.row("E[X_2]").theoretical, xi(2, 0.5))
    assert math.isclose(report.row("P(simple)").theoretical, prob_simple_limit(0.5))
    assert report.row("P(acyclic)").theoretical == pytest.approx(math.sqrt(0.5))
    assert report.row("cov(X_1,X_3)").theoretical == 0.0
    again = run_experiment(spec)
    assert again.to_frame().equals(report.to_frame())


def test_worker_pool_matches_inline_run():
    inline = ExperimentSpec("cycle_law", model=HALF, ns=[200], trials=24, K=2, seed=8)
    pooled = ExperimentSpec("cycle_law", model=HALF, ns=[200], trials=24, K=2, seed=8, workers=2)
    a, b = run_cycle_law(inline), run_cycle_law(pooled)
    assert a.to_frame().equals(b.to_frame())


def test_fragment_law_rows():
    spec = ExperimentSpec(
        "fragment_law", model=MIXED, ns=[400], trials=30, seed=2, catalogue_floor=1e-4
    )
    report = run_fragment_law(spec)
    assert report.row("P(empty fragment)").theoretical == pytest.approx(math.sqrt(0.2))
    assert report.row("E[|C(v)|]").theoretical == pytest.approx(1 + 1.5 / 0.2)
    tv = report.row("TV(fragment, top 20)").empirical
    assert 0.0 <= tv <= 1.0


def test_fragment_law_rejects_supercritical():
    hot = DegreeModel({1: Fraction(1, 2), 3: Fraction(1, 2)})
    with pytest.raises(SupercriticalError):
        run_fragment_law(ExperimentSpec("fragment_law", model=hot, trials=1))


def test_save_report(tmp_path):
    spec = ExperimentSpec(
        "oracle_equivalence", degrees=[2, 1, 1], statistics=["loops"], trials=50
    )
    paths = save_report(run_oracle_equivalence(spec), tmp_path / "out")
    data = json.loads(Path(paths["report_json"]).read_text(encoding="utf-8"))
    assert data["experiment"] == "oracle_equivalence"
    assert data["spec"]["degrees"] == [2, 1, 1]
    header = Path(paths["report_csv"]).read_text(encoding="utf-8").splitlines()[0]
    assert header.startswith("statistic,")


@pytest.mark.slow
def test_cycle_law_matches_poisson_limits():
    spec = ExperimentSpec("cycle_law", model=MIXED, ns=[5000], trials=2000, K=4, seed=11)
    report = run_cycle_law(spec)
    for k in range(1, 5):
        assert abs(report.row(f"E[X_{k}]").z) <= 3.0
        assert 0.8 <= report.row(f"Var[X_{k}]/E[X_{k}]").empirical <= 1.2
    covariances = [r for r in report.rows if r.statistic.startswith("cov(")]
    assert len(covariances) == 6
    assert all(abs(r.z) <= 3.0 for r in covariances)
    assert report.row("P(simple)").passed
    assert report.row("P(acyclic | simple)").passed


@pytest.mark.slow
def test_fragment_law_matches_catalogue():
    spec = ExperimentSpec(
        "fragment_law", model=HALF, ns=[10_000], trials=5000, seed=12, catalogue_floor=1e-6
    )
    report = run_fragment_law(spec)
    assert report.row("TV(fragment, top 20)").passed
    assert report.row("P(complex component)").passed


@pytest.mark.slow
def test_loop_probability_diverges_for_hubs():
    spec = ExperimentSpec(
        "loop_divergence", model=MIXED, ns=[1000, 10_000, 100_000], trials=400, seed=13
    )
    report = run_loop_divergence(spec)
    assert report.row("P(loop) increasing in n").passed
    assert report.row("P(loop), bounded control").passed


@pytest.mark.parametrize("name", sorted(p.name for p in (CONFIGS / "experiments").glob("*.json")))
def test_shipped_experiment_specs_load(name):
    spec = ExperimentSpec.from_json(CONFIGS / "experiments" / name)
    assert spec.trials >= 1
    assert (spec.model is None) != (spec.degrees is None)
