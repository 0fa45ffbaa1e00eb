# tests/test_properties.py
from __future__ import annotations

import hypothesis.strategies as st
import numpy as np
from hypothesis import given, settings

from cmlimits.cm import sample_cm
from cmlimits.degseq import DegreeSequence, moments
from cmlimits.kakeya import IntervalUnion, partial_sum_union
from cmlimits.multigraph import Multigraph, count_cycles, extract_fragment


@st.composite
def degree_sequences(draw, max_n=30, max_degree=6):
    deg = draw(st.lists(st.integers(min_value=0, max_value=max_degree), min_size=1, max_size=max_n))
    if sum(deg) % 2:
        deg[0] += 1
    return DegreeSequence(np.array(deg))


@st.composite
def multigraphs(draw, max_n=8, max_edges=12):
    n = draw(st.integers(min_value=1, max_value=max_n))
    vertex = st.integers(min_value=0, max_value=n - 1)
    edges = draw(st.lists(st.tuples(vertex, vertex), max_size=max_edges))
    return Multigraph.from_edges(n, edges)


@given(degree_sequences(), st.integers(min_value=0, max_value=2**32))
@settings(deadline=None, max_examples=50)
def test_sampler_preserves_degrees(d, seed):
    g = sample_cm(d, seed)
    assert g.degrees().tolist() == d.tolist()
    assert 2 * g.edge_count == d.half_edges


@given(degree_sequences())
@settings(deadline=None, max_examples=50)
def test_moment_relations(d):
    m = moments(d)
    assert m.rho2_n >= 0
    assert m.rho2_n <= (m.max_degree - 1) * m.rho1_n + 1e-12


@given(multigraphs(), st.randoms(use_true_random=False))
@settings(deadline=None, max_examples=50)
def test_fragment_and_cycles_ignore_labels(g, rnd):
    perm = list(range(g.n))
    rnd.shuffle(perm)
    edges = [(perm[v], perm[v]) for v, c in g.loops.items() for _ in range(c)]
    edges += [(perm[u], perm[v]) for (u, v), c in g.mult.items() for _ in range(c)]
    h = Multigraph.from_edges(g.n, edges)
    assert extract_fragment(h) == extract_fragment(g)
    assert count_cycles(h, 5).counts == count_cycles(g, 5).counts


@given(multigraphs())
@settings(deadline=None, max_examples=50)
def test_fragment_decodes_to_itself(g):
    frag = extract_fragment(g)
    assert extract_fragment(frag.to_multigraph()) == frag
    assert frag.vertex_count <= g.n


@st.composite
def intervals(draw):
    a = draw(st.floats(min_value=0.0, max_value=1.0))
    width = draw(st.floats(min_value=0.0, max_value=0.3))
    return (a, min(1.0, a + width))


@given(st.lists(intervals(), max_size=30))
@settings(deadline=None, max_examples=50)
def test_union_is_sorted_disjoint_and_covers_inputs(pairs):
    u = IntervalUnion.from_pairs(pairs)
    bounds = [x for iv in u.intervals for x in iv]
    assert bounds == sorted(bounds)
    assert u.measure <= sum(b - a for a, b in pairs) + 1e-9
    for a, b in pairs:
        assert u.contains(a, 1e-12) and u.contains(b, 1e-12)
        assert u.contains((a + b) / 2, 1e-12)


@given(
    st.lists(st.floats(min_value=1e-4, max_value=1.0), min_size=1, max_size=10),
    st.floats(min_value=0.0, max_value=1.0),
)
@settings(deadline=None, max_examples=50)
def test_partial_sums_are_symmetric(weights, tail_share):
    total = sum(weights) / (1 - 0.5 * tail_share)
    head = [w / total for w in weights]
    tail = 1.0 - sum(head)
    u = partial_sum_union(head, tail)
    assert u.is_symmetric(1e-9)
    assert u.contains(0.0) and u.contains(1.0, 1e-9)
