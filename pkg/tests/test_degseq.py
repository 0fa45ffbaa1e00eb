# tests/test_degseq.py
from __future__ import annotations

import itertools
import json
import math
from fractions import Fraction

import numpy as np
import pytest

from cmlimits.degseq import (
    DegreeModel,
    DegreeSequence,
    factorial_moment,
    heavy_tail_sequence,
    is_feasible,
    load_degree_sequence,
    moments,
    realize,
)
from cmlimits.models import DegreeSequenceError, ModelError, RoundingPolicy


def test_odd_sum_rejected():
    with pytest.raises(DegreeSequenceError):
        DegreeSequence(np.array([1, 1, 1]))


def test_negative_and_empty_rejected():
    with pytest.raises(DegreeSequenceError):
        DegreeSequence(np.array([2, -2]))
    with pytest.raises(DegreeSequenceError):
        DegreeSequence(np.array([], dtype=np.int64))


def test_sequence_basics():
    d = DegreeSequence(np.array([3, 1, 2, 2]))
    assert d.n == 4
    assert d.half_edges == 8
    assert d.counts == {1: 1, 2: 2, 3: 1}
    assert d.owners().tolist() == [0, 0, 0, 1, 2, 2, 3, 3]
    assert d.offsets().tolist() == [0, 3, 4, 6, 8]
    assert d.degrees.dtype == np.int32
    assert DegreeSequence.from_counts({1: 1, 2: 2, 3: 1}).counts == d.counts


def test_moments_regular():
    m = moments(DegreeSequence(np.array([3, 3, 3, 3])))
    assert m.rho1_n == 3
    assert m.rho2_n == 6
    assert m.nu_n == 2
    assert m.max_degree == 3


def test_moments_degenerate():
    m = moments(DegreeSequence(np.array([0, 0])))
    assert m.rho1_n == 0
    assert m.nu_n is None


def test_moments_small_path():
    d = DegreeSequence(np.array([2, 1, 1]))
    m = moments(d)
    assert math.isclose(m.rho1_n, 4 / 3)
    assert math.isclose(m.rho2_n, 2 / 3)
    assert math.isclose(m.nu_n, 0.5)
    assert factorial_moment(d, 2, exact=True) == Fraction(2, 3)


def test_moments_match_naive_loop():
    rng = np.random.default_rng(7)
    for _ in range(20):
        deg = rng.integers(0, 8, size=rng.integers(1, 100))
        if deg.sum() % 2:
            deg[0] += 1
        d = DegreeSequence(deg)
        n = len(deg)
        rho1 = sum(int(x) for x in deg) / n
        rho2 = sum(int(x) * (int(x) - 1) for x in deg) / n
        m = moments(d)
        assert math.isclose(m.rho1_n, rho1)
        assert math.isclose(m.rho2_n, rho2)
        assert math.isclose(factorial_moment(d, 3), sum(math.perm(int(x), 3) for x in deg) / n)


def _brute_feasible(deg):
    n = len(deg)
    pairs = list(itertools.combinations(range(n), 2))
    for mask in range(1 << len(pairs)):
        got = [0] * n
        for i, (a, b) in enumerate(pairs):
            if mask >> i & 1:
                got[a] += 1
                got[b] += 1
        if got == list(deg):
            return True
    return False


def test_feasibility_examples():
    assert is_feasible([1, 1])
    assert not is_feasible([3, 1, 1])
    assert is_feasible([2, 2, 2])
    assert not is_feasible([1, 1, 1])


def test_feasibility_matches_exhaustive_search():
    for n in range(1, 5):
        for deg in itertools.product(range(n), repeat=n):
            assert is_feasible(list(deg)) == _brute_feasible(deg), deg


def test_model_validation():
    with pytest.raises(ModelError):
        DegreeModel({1: Fraction(1, 2), 2: Fraction(1, 3)})
    with pytest.raises(ModelError):
        DegreeModel({1: Fraction(3, 2), 2: Fraction(-1, 2)})
    m = DegreeModel({1: Fraction(1, 2), 3: Fraction(1, 2)})
    assert m.rho1 == 2
    assert m.rho2 == 3
    assert m.nu_exact == Fraction(3, 2)
    assert m.lambda_hat == Fraction(1, 2)


def test_nu_undefined_without_edges():
    with pytest.raises(ModelError):
        DegreeModel.regular(0).nu


def test_truncation_renormalizes():
    m = DegreeModel({1: Fraction(1, 2), 2: Fraction(1, 4), 5: Fraction(1, 4)}, truncation=2)
    assert m.lambdas == {1: Fraction(2, 3), 2: Fraction(1, 3)}
    assert DegreeModel({1: Fraction(1, 2), 2: Fraction(1, 4), 5: Fraction(1, 4)}).truncate(2) == m


def test_poisson_model_nu_close_to_mean():
    m = DegreeModel.poisson(0.8)
    assert m.truncation is not None
    assert math.isclose(m.nu, 0.8, abs_tol=1e-7)


def test_realize_regular():
    assert realize(DegreeModel.regular(3), 4).tolist() == [3, 3, 3, 3]


def test_realize_parity_fix():
    model = DegreeModel({1: Fraction(1, 2), 2: Fraction(1, 2)})
    d = realize(model, 5)
    assert d.n == 5
    assert d.half_edges % 2 == 0
    assert (d.counts.get(1, 0), d.counts.get(2, 0)) in {(2, 3), (4, 1)}


def test_realize_all_isolated():
    assert realize(DegreeModel.regular(0), 7).tolist() == [0] * 7


def test_realize_stays_on_support():
    model = DegreeModel({1: Fraction(1, 3), 3: Fraction(1, 3), 4: Fraction(1, 3)})
    for n in (10, 11, 101, 1003):
        for policy in RoundingPolicy:
            d = realize(model, n, policy)
            assert d.n == n
            assert set(d.counts) <= set(model.support)


def test_realize_nu_converges():
    model = DegreeModel({1: Fraction(6, 10), 2: Fraction(3, 10), 3: Fraction(1, 10)})
    for n in (101, 1001, 10001):
        err = abs(moments(realize(model, n)).nu_n - model.nu)
        assert err <= 9 / n


def test_heavy_tail_sequence_has_hubs():
    base = DegreeModel({1: Fraction(6, 10), 2: Fraction(3, 10), 3: Fraction(1, 10)})
    d = heavy_tail_sequence(10_000, base)
    assert d.n == 10_000
    assert d.max_degree >= 39
    assert moments(d).nu_n > base.nu


def test_load_text_and_json(tmp_path):
    txt = tmp_path / "d.txt"
    txt.write_text("# a path\n2\n1\n\n1\n", encoding="utf-8")
    assert load_degree_sequence(txt).tolist() == [2, 1, 1]
    js = tmp_path / "d.json"
    js.write_text(json.dumps({"counts": {"1": 2, "2": 1}}), encoding="utf-8")
    assert load_degree_sequence(js).counts == {1: 2, 2: 1}
    listed = tmp_path / "l.json"
    listed.write_text(json.dumps({"degrees": [3, 1, 1, 1]}), encoding="utf-8")
    assert load_degree_sequence(listed).tolist() == [3, 1, 1, 1]
    bad = tmp_path / "bad.txt"
    bad.write_text("2\nx\n", encoding="utf-8")
    with pytest.raises(DegreeSequenceError):
        load_degree_sequence(bad)


def test_model_json_roundtrip(tmp_path):
    m = DegreeModel({1: Fraction(1, 2), 3: Fraction(1, 2)})
    path = tmp_path / "m.json"
    path.write_text(json.dumps(m.to_json()), encoding="utf-8")
    again = DegreeModel.from_json(path)
    assert again.lambdas == m.lambdas
    assert again.is_rational


def test_poisson_model_file(tmp_path):
    path = tmp_path / "p.json"
    path.write_text(json.dumps({"poisson": 0.7}), encoding="utf-8")
    assert math.isclose(DegreeModel.from_json(path).nu, 0.7, abs_tol=1e-7)
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"lambda": {}}), encoding="utf-8")
    with pytest.raises(ModelError):
        DegreeModel.from_json(bad)
