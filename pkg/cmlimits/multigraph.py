# cmlimits/multigraph.py
"""
Multigraphs built from half-edge matchings, with cycle counts, component
classification, fragment extraction and canonical codes.

Canonical codes are ASCII strings:

    fragment  := "-" | component ("+" component)*   components sorted ascending
    component := k ":" tree{k}                        k = cycle length
    tree      := "(" tree* ")"                        children sorted ascending

A component code lists the rooted trees hanging at consecutive cycle vertices,
minimized over rotations and reflections of the cycle. Loops are 1-cycles and
double edges are 2-cycles, so k starts at 1.
"""
from __future__ import annotations

import logging
import math
import re
from collections import Counter, deque
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Deque, Dict, Iterable, List, Optional, Sequence, Set, Tuple

import networkx as nx
import numpy as np
from networkx.algorithms.isomorphism import MultiGraphMatcher
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .degseq import DegreeSequence
from .models import ComponentClass, CycleBudgetExceeded, MatchingError, ValidationError

logger = logging.getLogger(__name__)

DEFAULT_CYCLE_BUDGET = 5_000_000
EMPTY_FRAGMENT_CODE = "-"

_COMPONENT_RE = re.compile(r"^([1-9][0-9]*):([()]+)$")

EdgeArrays = Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]


@dataclass(frozen=True, slots=True)
class Multigraph:
    """
    Labeled multigraph on vertices 0..n-1.
    - loops: v -> number of loops at v
    - mult: (u, v) with u < v -> number of parallel edges
    A loop contributes 2 to the degree of its vertex.
    """

    n: int
    loops: Dict[int, int]
    mult: Dict[Tuple[int, int], int]
    _arrays: Optional[EdgeArrays] = field(default=None, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.n < 0:
            raise ValidationError("vertex count must be non-negative")

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[Tuple[int, int]]) -> "Multigraph":
        loops: Dict[int, int] = {}
        mult: Dict[Tuple[int, int], int] = {}
        for u, v in edges:
            if not (0 <= u < n and 0 <= v < n):
                raise ValidationError(f"edge ({u}, {v}) outside 0..{n - 1}")
            if u == v:
                loops[u] = loops.get(u, 0) + 1
            else:
                key = (u, v) if u < v else (v, u)
                mult[key] = mult.get(key, 0) + 1
        return cls(n=n, loops=loops, mult=mult)

    def edge_arrays(self) -> EdgeArrays:
        """(u, v, mult, loop_vertex, loop_count) as int64 arrays."""
        if self._arrays is None:
            keys = list(self.mult)
            u = np.fromiter((a for a, _ in keys), dtype=np.int64, count=len(keys))
            v = np.fromiter((b for _, b in keys), dtype=np.int64, count=len(keys))
            c = np.fromiter(self.mult.values(), dtype=np.int64, count=len(keys))
            lv = np.fromiter(self.loops, dtype=np.int64, count=len(self.loops))
            lc = np.fromiter(self.loops.values(), dtype=np.int64, count=len(self.loops))
            object.__setattr__(self, "_arrays", (u, v, c, lv, lc))
        assert self._arrays is not None
        return self._arrays

    def degrees(self) -> np.ndarray:
        u, v, c, lv, lc = self.edge_arrays()
        deg = np.zeros(self.n, dtype=np.int64)
        np.add.at(deg, u, c)
        np.add.at(deg, v, c)
        np.add.at(deg, lv, 2 * lc)
        return deg

    def degree(self, v: int) -> int:
        total = 2 * self.loops.get(v, 0)
        total += sum(c for (a, b), c in self.mult.items() if a == v or b == v)
        return total

    @property
    def loop_count(self) -> int:
        return sum(self.loops.values())

    @property
    def edge_count(self) -> int:
        return self.loop_count + sum(self.mult.values())

    def is_simple(self) -> bool:
        return not self.loops and all(c == 1 for c in self.mult.values())

    def adjacency(self) -> Dict[int, Dict[int, int]]:
        adj: Dict[int, Dict[int, int]] = {}
        for (a, b), c in self.mult.items():
            adj.setdefault(a, {})[b] = c
            adj.setdefault(b, {})[a] = c
        return adj

    def subgraph(self, vertices: Sequence[int]) -> "Multigraph":
        """Induced subgraph, relabeled 0..len(vertices)-1 in the given order."""
        index = {v: i for i, v in enumerate(vertices)}
        loops = {index[v]: c for v, c in self.loops.items() if v in index}
        mult: Dict[Tuple[int, int], int] = {}
        for (a, b), c in self.mult.items():
            if a in index and b in index:
                x, y = index[a], index[b]
                mult[(x, y) if x < y else (y, x)] = c
        return Multigraph(n=len(vertices), loops=loops, mult=mult)

    def to_networkx(self) -> nx.MultiGraph:
        g = nx.MultiGraph()
        g.add_nodes_from(range(self.n))
        for v, c in self.loops.items():
            g.add_edges_from([(v, v)] * c)
        for (a, b), c in self.mult.items():
            g.add_edges_from([(a, b)] * c)
        return g

    def edge_lines(self) -> List[str]:
        """`u v mult` per vertex pair and `v v loops` per looped vertex, 1-based."""
        rows = [(a, b, c) for (a, b), c in self.mult.items()]
        rows += [(v, v, c) for v, c in self.loops.items()]
        rows.sort()
        return [f"{a + 1} {b + 1} {c}" for a, b, c in rows]


def from_matching(
    d: DegreeSequence, matching: Iterable[Tuple[int, int]], one_based: bool = True
) -> Multigraph:
    """
    Underlying multigraph of a perfect matching of the m_n half-edges.
    Half-edge e belongs to v iff Σ_{u<v} d_u < e <= Σ_{u<=v} d_u (1-based labels).
    """
    m = d.half_edges
    pairs = np.asarray(matching if isinstance(matching, np.ndarray) else list(matching),
                       dtype=np.int64).reshape(-1, 2)
    if one_based:
        pairs = pairs - 1
    if 2 * pairs.shape[0] != m:
        raise MatchingError(f"matching has {pairs.shape[0]} pairs, expected {m // 2}")
    if m:
        flat = pairs.ravel()
        if flat.min() < 0 or flat.max() >= m:
            raise MatchingError("matching uses a half-edge label outside the sequence")
        if np.bincount(flat, minlength=m).max() != 1:
            raise MatchingError("matching repeats a half-edge")
    owners = d.owners()
    return _from_endpoints(d.n, owners[pairs[:, 0]], owners[pairs[:, 1]])


def _from_endpoints(n: int, a: np.ndarray, b: np.ndarray) -> Multigraph:
    is_loop = a == b
    lv, lc = np.unique(a[is_loop], return_counts=True)
    lo = np.minimum(a[~is_loop], b[~is_loop])
    hi = np.maximum(a[~is_loop], b[~is_loop])
    keys, kc = np.unique(lo * max(n, 1) + hi, return_counts=True)
    u, v = np.divmod(keys, max(n, 1))
    loops = dict(zip(lv.tolist(), lc.tolist()))
    mult = dict(zip(zip(u.tolist(), v.tolist()), kc.tolist()))
    arrays = (u, v, kc.astype(np.int64), lv.astype(np.int64), lc.astype(np.int64))
    return Multigraph(n=n, loops=loops, mult=mult, _arrays=arrays)


@dataclass(frozen=True, slots=True)
class CycleCounts:
    """X_1..X_K, counting sub-multigraph copies of C_k."""

    counts: Tuple[int, ...]

    def __getitem__(self, k: int) -> int:
        if not 1 <= k <= len(self.counts):
            raise IndexError(f"cycle length {k} outside 1..{len(self.counts)}")
        return self.counts[k - 1]

    @property
    def K(self) -> int:
        return len(self.counts)

    @property
    def total(self) -> int:
        return sum(self.counts)

    def as_dict(self) -> Dict[int, int]:
        return {k: x for k, x in enumerate(self.counts, start=1)}


def count_cycles(G: Multigraph, K: int, budget: int = DEFAULT_CYCLE_BUDGET) -> CycleCounts:
    """
    X_1 = loops, X_2 = Σ C(mult, 2), and for 3 <= k <= K the number of k-cycles
    weighted by the product of multiplicities along them.
    """
    if K < 1:
        raise ValidationError("K must be >= 1")
    counts = [0] * K
    counts[0] = G.loop_count
    if K >= 2:
        counts[1] = sum(c * (c - 1) // 2 for c in G.mult.values())
    if K >= 3:
        core = _two_core(G.adjacency())
        steps = [0]
        for start in sorted(core):
            _close_cycles(core, start, [start], {start}, 1, K, counts, steps, budget)
    return CycleCounts(tuple(counts))


def _two_core(adj: Dict[int, Dict[int, int]]) -> Dict[int, Dict[int, int]]:
    """Prune vertices with at most one distinct neighbour until none remain."""
    core = {v: dict(nbrs) for v, nbrs in adj.items()}
    queue: Deque[int] = deque(v for v, nbrs in core.items() if len(nbrs) <= 1)
    while queue:
        v = queue.popleft()
        if v not in core:
            continue
        for w in core.pop(v):
            nbrs = core.get(w)
            if nbrs is None:
                continue
            del nbrs[v]
            if len(nbrs) == 1:
                queue.append(w)
            elif not nbrs:
                del core[w]
    return core


def _close_cycles(
    adj: Dict[int, Dict[int, int]],
    start: int,
    path: List[int],
    on_path: Set[int],
    weight: int,
    K: int,
    counts: List[int],
    steps: List[int],
    budget: int,
) -> None:
    # start is the smallest vertex of the cycle; path[1] < path[-1] fixes the direction
    last = path[-1]
    for w, c in adj[last].items():
        if w == start:
            if len(path) >= 3 and path[1] < last:
                counts[len(path) - 1] += weight * c
        elif w > start and w not in on_path and len(path) < K:
            steps[0] += 1
            if steps[0] > budget:
                raise CycleBudgetExceeded(f"cycle search exceeded {budget} steps")
            path.append(w)
            on_path.add(w)
            _close_cycles(adj, start, path, on_path, weight * c, K, counts, steps, budget)
            path.pop()
            on_path.remove(w)


@dataclass(frozen=True, slots=True)
class ComponentInfo:
    vertices: int
    edges: int

    @property
    def excess(self) -> int:
        return self.edges - self.vertices

    @property
    def cls(self) -> ComponentClass:
        return ComponentClass.from_excess(self.excess)


@dataclass(frozen=True, slots=True)
class ComponentReport:
    components: Tuple[ComponentInfo, ...]
    labels: np.ndarray = field(repr=False, compare=False)

    def count(self, cls: ComponentClass) -> int:
        return sum(1 for comp in self.components if comp.cls is cls)

    @property
    def complex_count(self) -> int:
        return self.count(ComponentClass.COMPLEX)

    def indices(self, cls: ComponentClass) -> List[int]:
        return [i for i, comp in enumerate(self.components) if comp.cls is cls]

    def members(self) -> List[np.ndarray]:
        order = np.argsort(self.labels, kind="stable")
        bounds = np.searchsorted(self.labels[order], np.arange(len(self.components) + 1))
        return [order[bounds[i] : bounds[i + 1]] for i in range(len(self.components))]


def classify_components(G: Multigraph) -> ComponentReport:
    if G.n == 0:
        return ComponentReport(components=(), labels=np.zeros(0, dtype=np.int64))
    u, v, c, lv, lc = G.edge_arrays()
    graph = coo_matrix((np.ones(u.size), (u, v)), shape=(G.n, G.n))
    ncomp, labels = connected_components(graph, directed=False)
    vcount = np.bincount(labels, minlength=ncomp)
    ecount = np.bincount(labels[u], weights=c, minlength=ncomp)
    ecount += np.bincount(labels[lv], weights=lc, minlength=ncomp)
    comps = tuple(
        ComponentInfo(vertices=int(nv), edges=int(ne)) for nv, ne in zip(vcount, ecount)
    )
    return ComponentReport(components=comps, labels=labels.astype(np.int64))


def extract_fragment(G: Multigraph) -> "Fragment":
    """Canonical fragment of the unicyclic components; trees and complex parts dropped."""
    report = classify_components(G)
    wanted = report.indices(ComponentClass.UNICYCLIC)
    if not wanted:
        return Fragment.empty()
    members = report.members()
    codes = [canonicalize(_restrict(G, members[i])) for i in wanted]
    return Fragment.from_components(codes)


def _restrict(G: Multigraph, vertices: np.ndarray) -> Multigraph:
    index = {int(x): i for i, x in enumerate(vertices.tolist())}
    loops = {index[x]: G.loops[x] for x in index if x in G.loops}
    edges: Dict[Tuple[int, int], int] = {}
    adj_pairs = ((a, b, c) for (a, b), c in G.mult.items() if a in index)
    for a, b, c in adj_pairs:
        x, y = index[a], index[b]
        edges[(x, y) if x < y else (y, x)] = c
    return Multigraph(n=len(index), loops=loops, mult=edges)


def tree_code(children: Iterable[str]) -> str:
    return "(" + "".join(sorted(children)) + ")"


def component_code(k: int, trees: Sequence[str]) -> str:
    """Code of a k-cycle carrying the given rooted trees in cycle order."""
    if k < 1 or len(trees) != k:
        raise ValidationError(f"need exactly {k} trees for a {k}-cycle")
    seq = list(trees)
    best: Optional[str] = None
    for order in (seq, seq[::-1]):
        for r in range(k):
            cand = "".join(order[r:] + order[:r])
            if best is None or cand < best:
                best = cand
    return f"{k}:{best}"


def canonicalize(component: Multigraph) -> str:
    """Code of a connected multigraph with excess 0."""
    if component.n == 0 or component.edge_count != component.n:
        raise ValidationError("canonicalize needs a unicyclic component (excess 0)")
    adj = component.adjacency()
    deg = component.degrees()
    removed = np.zeros(component.n, dtype=bool)
    children: Dict[int, List[str]] = {v: [] for v in range(component.n)}
    queue: Deque[int] = deque(int(v) for v in np.flatnonzero(deg == 1))
    pruned = 0
    while queue:
        leaf = queue.popleft()
        removed[leaf] = True
        pruned += 1
        code = tree_code(children[leaf])
        for w in adj.get(leaf, {}):
            if not removed[w]:
                children[w].append(code)
                deg[w] -= 1
                if deg[w] == 1:
                    queue.append(w)
    cycle = [v for v in range(component.n) if not removed[v]]
    if not cycle or np.any(deg[cycle] != 2):
        raise ValidationError("component is not connected with exactly one cycle")
    k = len(cycle)
    if k == 1 and component.loops.get(cycle[0], 0) != 1:
        raise ValidationError("component is not connected with exactly one cycle")
    if k == 2 and component.mult.get((cycle[0], cycle[1]), 0) != 2:
        raise ValidationError("component is not connected with exactly one cycle")
    ordered = _cycle_order(cycle, adj) if k >= 3 else cycle
    return component_code(k, [tree_code(children[v]) for v in ordered])


def _cycle_order(cycle: List[int], adj: Dict[int, Dict[int, int]]) -> List[int]:
    on_cycle = set(cycle)
    order = [cycle[0]]
    prev: Optional[int] = None
    cur = cycle[0]
    for _ in range(len(cycle) - 1):
        nxt = next((w for w in adj.get(cur, {}) if w in on_cycle and w != prev), None)
        if nxt is None or nxt == order[0]:
            raise ValidationError("component is not connected with exactly one cycle")
        order.append(nxt)
        prev, cur = cur, nxt
    if order[0] not in adj.get(cur, {}) or len(set(order)) != len(cycle):
        raise ValidationError("component is not connected with exactly one cycle")
    return order


def _split_trees(s: str) -> List[str]:
    out: List[str] = []
    depth = 0
    start = 0
    for i, ch in enumerate(s):
        depth += 1 if ch == "(" else -1
        if depth < 0:
            raise ValidationError(f"unbalanced tree code {s!r}")
        if depth == 0:
            out.append(s[start : i + 1])
            start = i + 1
    if depth != 0:
        raise ValidationError(f"unbalanced tree code {s!r}")
    return out


def _children(tree: str) -> List[str]:
    return _split_trees(tree[1:-1])


@lru_cache(maxsize=None)
def tree_aut(tree: str) -> int:
    """Automorphisms of a rooted tree fixing the root."""
    total = 1
    for child, mult in Counter(_children(tree)).items():
        total *= math.factorial(mult) * tree_aut(child) ** mult
    return total


@dataclass(frozen=True, slots=True)
class _ComponentProfile:
    k: int
    trees: Tuple[str, ...]
    cycle_census: Tuple[Tuple[int, int], ...]
    tree_census: Tuple[Tuple[int, int], ...]
    aut: int


@lru_cache(maxsize=None)
def _profile(code: str) -> _ComponentProfile:
    match = _COMPONENT_RE.match(code)
    if match is None:
        raise ValidationError(f"malformed component code {code!r}")
    k = int(match.group(1))
    trees = tuple(_split_trees(match.group(2)))
    if len(trees) != k:
        raise ValidationError(f"component code {code!r} has {len(trees)} trees for k={k}")
    if component_code(k, trees) != code:
        raise ValidationError(f"component code {code!r} is not canonical")
    cycle_census: Counter[int] = Counter()
    tree_census: Counter[int] = Counter()
    for root in trees:
        kids = _children(root)
        cycle_census[len(kids) + 2] += 1
        stack = list(kids)
        while stack:
            node = stack.pop()
            grand = _children(node)
            tree_census[len(grand) + 1] += 1
            stack.extend(grand)
    symmetry = cycle_symmetry(list(trees))
    aut = symmetry * math.prod(tree_aut(t) for t in trees)
    return _ComponentProfile(
        k=k,
        trees=trees,
        cycle_census=tuple(sorted(cycle_census.items())),
        tree_census=tuple(sorted(tree_census.items())),
        aut=aut,
    )


def cycle_symmetry(seq: List[str]) -> int:
    """Vertex permutations of the cycle preserving the tree sequence."""
    k = len(seq)
    if k == 1:
        return 1
    if k == 2:
        return 2 if seq[0] == seq[1] else 1
    hits = 0
    for order in (seq, seq[::-1]):
        for r in range(k):
            if order[r:] + order[:r] == seq:
                hits += 1
    return hits


@dataclass(frozen=True, slots=True)
class Fragment:
    """
    Disjoint union of unicyclic components, stored as sorted component codes.
    A simple fragment has no 1- or 2-cycles.
    """

    components: Tuple[str, ...] = ()

    def __post_init__(self) -> None:
        comps = tuple(sorted(self.components))
        for code in comps:
            _profile(code)
        object.__setattr__(self, "components", comps)

    @classmethod
    def empty(cls) -> "Fragment":
        return cls(())

    @classmethod
    def from_components(cls, codes: Iterable[str]) -> "Fragment":
        return cls(tuple(codes))

    @classmethod
    def from_code(cls, code: str) -> "Fragment":
        code = code.strip()
        if code == EMPTY_FRAGMENT_CODE:
            return cls.empty()
        return cls(tuple(code.split("+")))

    @property
    def code(self) -> str:
        return "+".join(self.components) if self.components else EMPTY_FRAGMENT_CODE

    def __str__(self) -> str:
        return self.code

    @property
    def cycle_type(self) -> Dict[int, int]:
        return dict(sorted(Counter(_profile(c).k for c in self.components).items()))

    @property
    def cycle_degree_census(self) -> Dict[int, int]:
        """h_i^r: cycle vertices by degree."""
        return self._census("cycle_census")

    @property
    def tree_degree_census(self) -> Dict[int, int]:
        """h_i^t: non-cycle vertices by degree."""
        return self._census("tree_census")

    @property
    def degree_census(self) -> Dict[int, int]:
        total = Counter(self.cycle_degree_census)
        total.update(self.tree_degree_census)
        return dict(sorted(total.items()))

    def _census(self, attr: str) -> Dict[int, int]:
        total: Counter[int] = Counter()
        for code in self.components:
            for deg, cnt in getattr(_profile(code), attr):
                total[deg] += cnt
        return dict(sorted(total.items()))

    @property
    def vertex_count(self) -> int:
        return sum(self.degree_census.values())

    def is_simple(self) -> bool:
        return all(_profile(c).k >= 3 for c in self.components)

    def aut(self) -> int:
        total = 1
        for code, mult in Counter(self.components).items():
            total *= math.factorial(mult) * _profile(code).aut ** mult
        return total

    def authe(self) -> int:
        a = self.cycle_type
        return self.aut() * 2 ** a.get(1, 0) * 2 ** a.get(2, 0)

    def to_multigraph(self) -> Multigraph:
        edges: List[Tuple[int, int]] = []
        offset = 0
        for code in self.components:
            offset = _decode_into(code, offset, edges)
        return Multigraph.from_edges(offset, edges)


def aut(H: Fragment) -> int:
    return H.aut()


def authe(H: Fragment) -> int:
    return H.authe()


def decode(code: str) -> Multigraph:
    if _COMPONENT_RE.match(code):
        return Fragment.from_components([code]).to_multigraph()
    return Fragment.from_code(code).to_multigraph()


def _decode_into(code: str, offset: int, edges: List[Tuple[int, int]]) -> int:
    prof = _profile(code)
    k = prof.k
    cycle = list(range(offset, offset + k))
    if k == 1:
        edges.append((cycle[0], cycle[0]))
    elif k == 2:
        edges.extend([(cycle[0], cycle[1])] * 2)
    else:
        edges.extend((cycle[i], cycle[(i + 1) % k]) for i in range(k))
    nxt = offset + k
    for root, tree in zip(cycle, prof.trees):
        stack = [(root, tree)]
        while stack:
            parent, node = stack.pop()
            for child in _children(node):
                edges.append((parent, nxt))
                stack.append((nxt, child))
                nxt += 1
    return nxt


def count_automorphisms(G: Multigraph) -> int:
    g = G.to_networkx()
    matcher = MultiGraphMatcher(g, g)
    return sum(1 for _ in matcher.isomorphisms_iter())


def authe_of(G: Multigraph) -> int:
    """aut(G) · 2^loops · Π m(u,v)!, with loop multiplicities included in the product."""
    total = count_automorphisms(G) * 2**G.loop_count
    for c in G.loops.values():
        total *= math.factorial(c)
    for c in G.mult.values():
        total *= math.factorial(c)
    return total
