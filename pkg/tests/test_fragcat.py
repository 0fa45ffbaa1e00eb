# tests/test_fragcat.py
from __future__ import annotations

import math
from fractions import Fraction

import pytest

from cmlimits.branching import sample_limit_fragment
from cmlimits.cm import make_rng
from cmlimits.degseq import DegreeModel
from cmlimits.fragcat import (
    CatalogueConfig,
    FragmentCatalogue,
    class_sum,
    enumerate_fragments,
    gamma,
    p_simple,
    pstar,
    sandwich_index,
    tree_weight,
    type_counts,
)
from cmlimits.limits import joint_cycle_prob, q_value, total_class_mass
from cmlimits.models import CatalogueBudgetExceeded, SupercriticalError, ValidationError, Variant
from cmlimits.multigraph import EMPTY_FRAGMENT_CODE, Fragment

CYCLES = DegreeModel({1: Fraction(2, 3), 2: Fraction(1, 3)})  # nu = 1/2, fragments are bare cycles
MIXED = DegreeModel({1: Fraction(6, 10), 2: Fraction(3, 10), 3: Fraction(1, 10)})  # nu = 0.8


def test_pstar_of_bare_cycles():
    root = math.sqrt(0.5)
    assert math.isclose(pstar(Fragment.empty(), CYCLES), root)
    assert math.isclose(pstar(Fragment.from_code("1:()"), CYCLES), root * 0.25)
    two = Fragment.from_code("1:()+1:()+3:()()()")
    assert math.isclose(pstar(two, CYCLES), joint_cycle_prob({1: 2, 3: 1}, 0.5))


def test_p_simple():
    assert math.isclose(p_simple(Fragment.empty(), MIXED), q_value(0.8))
    tri = Fragment.from_code("3:()()()")
    assert math.isclose(p_simple(tri, CYCLES), q_value(0.5) * 0.5**3 / 6)
    with pytest.raises(ValidationError):
        p_simple(Fragment.from_code("1:()"), MIXED)


def test_supercritical_models_rejected():
    hot = DegreeModel({1: Fraction(1, 2), 3: Fraction(1, 2)})
    with pytest.raises(SupercriticalError):
        pstar(Fragment.empty(), hot)
    with pytest.raises(SupercriticalError):
        enumerate_fragments(hot, 1e-3)


@pytest.mark.parametrize(
    "code",
    ["1:()", "1:(())", "1:((()))", "2:(())()", "3:(())()()", "1:()+2:()()", "1:(())+1:(())"],
)
def test_pstar_factors_through_cycle_type(code):
    H = Fragment.from_code(code)
    via_trees = class_sum(H.cycle_type, MIXED) * gamma(H) * tree_weight(H, MIXED)
    assert math.isclose(pstar(H, MIXED), via_trees, rel_tol=1e-12)


def test_gamma_of_cycles():
    assert gamma(Fragment.from_code("1:()")) == 1
    assert gamma(Fragment.from_code("3:()()()+3:()()()")) == 1
    # a loop vertex with two leaves: the two leaf labels are interchangeable
    assert gamma(Fragment.from_code("1:(()())")) == 1


def test_catalogue_is_sorted_and_above_floor():
    floor = 1e-4
    cat = enumerate_fragments(MIXED, floor)
    probs = cat.probabilities
    assert len(cat) > 10
    assert cat.entries[0].code == EMPTY_FRAGMENT_CODE
    assert math.isclose(cat.probability_of(EMPTY_FRAGMENT_CODE), math.sqrt(0.2))
    assert all(p >= floor for p in probs)
    assert all(a >= b * (1 - 1e-10) for a, b in zip(probs, probs[1:]))
    for e in cat.entries:
        assert math.isclose(e.pstar, pstar(e.fragment, MIXED), rel_tol=1e-9)
    assert 0 < cat.tail_mass < 1


def test_catalogue_is_complete_against_samples():
    floor = 1e-4
    cat = enumerate_fragments(MIXED, floor)
    listed = set(cat.codes())
    rng = make_rng(21)
    for _ in range(3000):
        H = sample_limit_fragment(MIXED, rng)
        if pstar(H, MIXED) >= floor * (1 + 1e-9):
            assert H.code in listed, H.code


def test_bare_cycle_catalogue_has_zero_residuals():
    cat = enumerate_fragments(CYCLES, 1e-6)
    for e in cat.entries:
        assert set(e.fragment.degree_census) <= {2}
    assert all(abs(r) < 1e-12 for r in cat.residuals.values())
    assert all(c == 1 for c in type_counts(cat).values())


def test_residuals_are_non_negative():
    cat = enumerate_fragments(MIXED, 1e-5)
    assert cat.residuals
    assert all(r >= -1e-12 for r in cat.residuals.values())
    assert cat.unseen_type_mass >= -1e-12


def test_tail_mass_shrinks_with_floor():
    coarse = enumerate_fragments(MIXED, 1e-3)
    fine = enumerate_fragments(MIXED, 1e-5)
    assert fine.tail_mass < coarse.tail_mass
    assert set(coarse.codes()) <= set(fine.codes())


def test_simple_catalogue():
    cat = enumerate_fragments(MIXED, 1e-5, Variant.SIMPLE)
    assert cat.entries[0].code == EMPTY_FRAGMENT_CODE
    assert math.isclose(cat.entries[0].p(Variant.SIMPLE), q_value(0.8))
    for e in cat.entries:
        assert e.fragment.is_simple()
        assert math.isclose(e.p(Variant.SIMPLE), p_simple(e.fragment, MIXED), rel_tol=1e-9)


def test_floor_above_everything():
    cat = enumerate_fragments(MIXED, 0.9)
    assert len(cat) == 0
    assert cat.tail_mass == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValidationError):
        enumerate_fragments(MIXED, 0.0)


def test_entry_budget():
    with pytest.raises(CatalogueBudgetExceeded):
        enumerate_fragments(MIXED, 1e-6, config=CatalogueConfig(max_entries=5))
    with pytest.raises(ValidationError):
        CatalogueConfig(max_trees=0)
    with pytest.raises(ValidationError):
        CatalogueConfig(refine_factor=1.0)
    with pytest.raises(ValidationError):
        CatalogueConfig(max_refinements=-1)


def test_jsonl_roundtrip(tmp_path):
    cat = enumerate_fragments(MIXED, 1e-4)
    path = cat.to_jsonl(tmp_path / "cat" / "mixed.jsonl")
    again = FragmentCatalogue.from_jsonl(path)
    assert again.codes() == cat.codes()
    assert again.variant is cat.variant
    assert again.floor == cat.floor
    assert set(again.residuals) == set(cat.residuals)
    assert all(math.isclose(a, b) for a, b in zip(again.probabilities, cat.probabilities))
    empty = tmp_path / "empty.jsonl"
    empty.write_text("", encoding="utf-8")
    with pytest.raises(ValidationError):
        FragmentCatalogue.from_jsonl(empty)


def test_to_frame():
    cat = enumerate_fragments(MIXED, 1e-3)
    frame = cat.to_frame()
    assert list(frame["rank"]) == list(range(1, len(cat) + 1))
    assert frame["code"].iloc[0] == EMPTY_FRAGMENT_CODE
    assert {"p", "pstar", "psimple", "cycle_type", "vertices", "sandwich_k"} <= set(frame.columns)


def test_sandwich_index():
    nu = 0.5
    q = q_value(nu)
    assert sandwich_index(q * nu**3 / 6, nu) == 3
    assert sandwich_index(q, nu) is None
    p = 1e-9
    k = sandwich_index(p, nu)
    assert k is not None
    assert q * nu**k / (2 * k) >= p > q * nu ** (k + 1) / (2 * (k + 1))
    assert sandwich_index(math.sqrt(0.5) * 0.25, nu, Variant.MULTIGRAPH) == 1
    with pytest.raises(ValidationError):
        sandwich_index(0.0, nu)
    with pytest.raises(ValidationError):
        sandwich_index(0.1, 1.0)


def _type_residuals(cat):
    mass = {}
    for e in cat.entries:
        key = tuple(sorted(e.fragment.cycle_type.items()))
        mass[key] = mass.get(key, 0.0) + e.p(cat.variant)
    return {t: class_sum(dict(t), cat.nu, cat.variant) - s for t, s in mass.items()}


def test_residuals_refined_below_the_floor():
    cfg = CatalogueConfig(residual_tol=0.03, max_refinements=3)
    cat = enumerate_fragments(MIXED, 1e-2, config=cfg)
    assert max(_type_residuals(cat).values()) > 0.03
    assert all(-1e-12 <= r < 0.03 for r in cat.residuals.values())
    assert set(cat.residuals) == set(_type_residuals(cat))
    assert all(p >= 1e-2 for p in cat.probabilities)


def test_residual_out_of_reach_raises():
    cfg = CatalogueConfig(residual_tol=1e-3, max_refinements=1)
    with pytest.raises(CatalogueBudgetExceeded, match="residual"):
        enumerate_fragments(MIXED, 1e-2, config=cfg)


def test_class_sums_add_up_to_one():
    for nu in (0.1, 0.5, 0.8, 0.95):
        assert total_class_mass(nu) == pytest.approx(1.0, abs=1e-12)
        assert total_class_mass(nu, Variant.SIMPLE) == pytest.approx(1.0, abs=1e-12)


def test_catalogue_completeness_at_small_floor():
    cat = enumerate_fragments(CYCLES, 1e-8)
    listed = math.fsum(cat.probabilities.tolist())
    assert 0 < cat.tail_mass < 1e-4
    assert 1 - 1e-6 <= listed + cat.tail_mass <= 1 + 1e-6
    assert cat.unseen_type_mass == pytest.approx(cat.tail_mass, abs=1e-12)


@pytest.mark.slow
def test_catalogue_completeness_with_trees_at_small_floor():
    cat = enumerate_fragments(MIXED, 1e-8)
    listed = math.fsum(cat.probabilities.tolist())
    assert 1 - 1e-6 <= listed + cat.tail_mass <= 1 + 1e-6
    assert all(-1e-12 <= r < CatalogueConfig().residual_tol for r in cat.residuals.values())


def test_gamma_is_a_positive_integer_across_a_catalogue():
    cat = enumerate_fragments(MIXED, 1e-6)
    assert len(cat) >= 500
    step = len(cat) // 500
    for e in cat.entries[::step][:500]:
        g = gamma(e.fragment)
        assert isinstance(g, int) and g >= 1, e.code
