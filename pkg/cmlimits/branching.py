# cmlimits/branching.py
"""
Galton–Watson offspring laws of a degree model and the forests they generate.

    D   root law               P(D = k)     = λ_k
    D̂   size-biased minus one  P(D̂ = i−1)  = i λ_i / ρ₁
    D̃   cycle-root law         P(D̃ = i−2)  = i (i−1) λ_i / ρ₂

Trees hanging off a cycle vertex have root offspring D̃ and every other
vertex has offspring D̂, so a tree vertex of degree i arises with weight
P(D̂ = i−1) and a cycle vertex of degree i with weight P(D̃ = i−2).
"""
from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Tuple, Union

import numpy as np

from .cm import Seed, as_rng
from .degseq import DegreeModel
from .models import BranchingOverflow, Law, ModelError, Real, SupercriticalError, ValidationError
from .multigraph import Fragment, component_code, tree_code

logger = logging.getLogger(__name__)

DEFAULT_BRANCHING_CAP = 10**6
XI_CUTOFF = 1e-15

Label = Tuple[int, ...]


@dataclass(frozen=True, slots=True)
class OffspringModel:
    root: Dict[int, Real]
    dhat: Dict[int, Real]
    dtilde: Optional[Dict[int, Real]]  # None when ρ₂ = 0
    nu: Real
    _pmf: Dict[Law, Tuple[np.ndarray, np.ndarray]] = field(
        default_factory=dict, repr=False, compare=False
    )

    @classmethod
    def from_model(cls, model: DegreeModel) -> "OffspringModel":
        rho1 = model.rho1
        if rho1 <= 0:
            raise ModelError("offspring laws need rho1 > 0")
        rho2 = model.rho2
        dhat = {i - 1: i * lam / rho1 for i, lam in model.lambdas.items() if i >= 1}
        dtilde = None
        if rho2 > 0:
            dtilde = {i - 2: i * (i - 1) * lam / rho2 for i, lam in model.lambdas.items() if i >= 2}
        return cls(root=dict(model.lambdas), dhat=dhat, dtilde=dtilde, nu=rho2 / rho1)

    def law(self, which: Law) -> Dict[int, Real]:
        if which is Law.ROOT:
            return self.root
        if which is Law.SIZE_BIASED:
            return self.dhat
        if self.dtilde is None:
            raise ModelError("cycle-root law is undefined when rho2 = 0")
        return self.dtilde

    def prob(self, which: Law, j: int) -> Real:
        return self.law(which).get(j, 0)

    def mean(self, which: Law) -> Real:
        return sum(j * p for j, p in self.law(which).items())

    def pmf(self, which: Law) -> Tuple[np.ndarray, np.ndarray]:
        """(values, probabilities) as float arrays, renormalized for sampling."""
        cached = self._pmf.get(which)
        if cached is None:
            law = self.law(which)
            values = np.fromiter(law, dtype=np.int64, count=len(law))
            probs = np.fromiter((float(p) for p in law.values()), dtype=np.float64, count=len(law))
            cached = (values, probs / probs.sum())
            self._pmf[which] = cached
        return cached


def _offspring(model: Union[OffspringModel, DegreeModel]) -> OffspringModel:
    return model if isinstance(model, OffspringModel) else OffspringModel.from_model(model)


@dataclass(frozen=True, slots=True)
class LLForest:
    """
    Lexicographically labeled forest: roots are (1,), (2,), ... and the
    children of ℓ are ℓ+(1,), ..., ℓ+(j,). offspring maps every label to j.
    """

    roots: int
    offspring: Dict[Label, int]

    def __post_init__(self) -> None:
        if self.roots < 0:
            raise ValidationError("root count must be non-negative")
        expected = sum(1 for _ in self._walk())
        if expected != len(self.offspring):
            raise ValidationError("offspring map is not a lexicographically labeled forest")

    def _walk(self) -> Iterator[Label]:
        stack: List[Label] = [(r,) for r in range(self.roots, 0, -1)]
        while stack:
            label = stack.pop()
            j = self.offspring.get(label)
            if j is None or j < 0:
                raise ValidationError(f"label {label} missing or negative")
            yield label
            stack.extend(label + (i,) for i in range(j, 0, -1))

    @classmethod
    def from_bfs(cls, roots: int, counts: List[int]) -> "LLForest":
        """Build from child counts listed in breadth-first (label) order."""
        queue: List[Label] = [(r,) for r in range(1, roots + 1)]
        offspring: Dict[Label, int] = {}
        head = 0
        for c in counts:
            if head >= len(queue):
                raise ValidationError("more counts than vertices")
            label = queue[head]
            head += 1
            offspring[label] = c
            queue.extend(label + (i,) for i in range(1, c + 1))
        if head != len(queue):
            raise ValidationError("counts end before every vertex is assigned")
        return cls(roots=roots, offspring=offspring)

    def labels(self) -> List[Label]:
        return list(self._walk())

    @property
    def vertex_count(self) -> int:
        return len(self.offspring)

    def root_census(self) -> Dict[int, int]:
        return dict(Counter(j for label, j in self.offspring.items() if len(label) == 1))

    def census(self) -> Dict[int, int]:
        return dict(Counter(j for label, j in self.offspring.items() if len(label) > 1))


def p_tree(
    F: LLForest,
    model: Union[OffspringModel, DegreeModel],
    root_law: Law = Law.CYCLE_ROOT,
) -> Real:
    """∏ P(D_r = j)^{f_j^r} ∏ P(D̂ = j)^{f_j} over root and non-root child counts."""
    off = _offspring(model)
    total: Real = 1
    for j, cnt in F.root_census().items():
        total *= off.prob(root_law, j) ** cnt
    for j, cnt in F.census().items():
        total *= off.prob(Law.SIZE_BIASED, j) ** cnt
    return total


def iter_forests(roots: int, max_vertices: int) -> Iterator[LLForest]:
    """Every LLFo with the given roots and at most max_vertices vertices."""
    if roots < 0 or max_vertices < roots:
        return

    def rec(pending: int, total: int, counts: List[int]) -> Iterator[List[int]]:
        if pending == 0:
            yield list(counts)
            return
        for c in range(0, max_vertices - total + 1):
            counts.append(c)
            yield from rec(pending - 1 + c, total + c, counts)
            counts.pop()

    for counts in rec(roots, roots, []):
        yield LLForest.from_bfs(roots, counts)


def forest_codes(F: LLForest) -> List[str]:
    codes: Dict[Label, str] = {}
    for label in sorted(F.offspring, key=len, reverse=True):
        j = F.offspring[label]
        codes[label] = tree_code(codes[label + (i,)] for i in range(1, j + 1))
    return [codes[(r,)] for r in range(1, F.roots + 1)]


def _grow(
    roots: int,
    off: OffspringModel,
    root_law: Law,
    rng: np.random.Generator,
    cap: int,
) -> List[np.ndarray]:
    """Child counts generation by generation, each in label order."""
    if cap < 1:
        raise ValidationError("cap must be positive")
    if roots > cap:
        raise BranchingOverflow(cap)
    values, probs = off.pmf(root_law)
    gen = values[rng.choice(values.size, size=roots, p=probs)] if roots else np.zeros(0, np.int64)
    generations = [gen]
    total = roots
    hv, hp = off.pmf(Law.SIZE_BIASED)
    while True:
        size = int(gen.sum())
        if size == 0:
            return generations
        total += size
        if total > cap:
            logger.warning("branching overflow at %d vertices", total)
            raise BranchingOverflow(cap)
        gen = hv[rng.choice(hv.size, size=size, p=hp)]
        generations.append(gen)


def _from_generations(roots: int, generations: List[np.ndarray]) -> LLForest:
    offspring: Dict[Label, int] = {}
    labels: List[Label] = [(r,) for r in range(1, roots + 1)]
    for gen in generations:
        nxt: List[Label] = []
        for label, j in zip(labels, gen.tolist()):
            offspring[label] = j
            nxt.extend(label + (i,) for i in range(1, j + 1))
        labels = nxt
    return LLForest(roots=roots, offspring=offspring)


def sample_forest(
    roots: int,
    model: Union[OffspringModel, DegreeModel],
    root_law: Law,
    seed: Seed,
    cap: int = DEFAULT_BRANCHING_CAP,
) -> LLForest:
    """k independent trees: roots draw from root_law, everyone else from D̂."""
    if roots < 0:
        raise ValidationError("root count must be non-negative")
    off = _offspring(model)
    generations = _grow(roots, off, root_law, as_rng(seed), cap)
    return _from_generations(roots, generations)


def _tree_codes(generations: List[np.ndarray]) -> List[str]:
    below: List[str] = []
    for gen in reversed(generations):
        counts = gen.tolist()
        codes: List[str] = []
        pos = 0
        for j in counts:
            codes.append(tree_code(below[pos : pos + j]))
            pos += j
        below = codes
    return below


def cycle_cutoff(nu: float, min_cycle: int = 1, tol: float = XI_CUTOFF) -> int:
    """Largest k with ξ_k >= tol (0 when none)."""
    k = min_cycle
    last = 0
    while nu**k / (2 * k) >= tol:
        last = k
        k += 1
    return last


def sample_limit_fragment(
    model: DegreeModel,
    seed: Seed,
    cap: int = DEFAULT_BRANCHING_CAP,
    simple: bool = False,
) -> Fragment:
    """
    One draw from the limiting fragment law: a_k ~ Poisson(ξ_k) independent
    k-cycles, each cycle vertex rooting a D̃/D̂ tree. simple keeps k >= 3 only.
    """
    nu = model.nu
    if nu >= 1:
        raise SupercriticalError(nu, "limit fragment sampling")
    rng = as_rng(seed)
    min_cycle = 3 if simple else 1
    K = cycle_cutoff(nu, min_cycle)
    if K < min_cycle:
        return Fragment.empty()
    ks = np.arange(min_cycle, K + 1)
    counts = rng.poisson(nu**ks / (2.0 * ks))
    if not counts.any():
        return Fragment.empty()
    off = _offspring(model)
    lengths = np.repeat(ks, counts).tolist()
    generations = _grow(int(sum(lengths)), off, Law.CYCLE_ROOT, rng, cap)
    trees = _tree_codes(generations)
    codes: List[str] = []
    pos = 0
    for k in lengths:
        codes.append(component_code(k, trees[pos : pos + k]))
        pos += k
    return Fragment.from_components(codes)


def expected_component_size(model: DegreeModel) -> float:
    """Mean size of the component of a uniform vertex: 1 + ρ₁/(1 − ν)."""
    nu = model.nu
    if nu >= 1:
        raise SupercriticalError(nu, "expected component size")
    return 1 + float(model.rho1) / (1 - nu)


def extinction_rate(
    model: Union[OffspringModel, DegreeModel],
    draws: int,
    seed: Seed,
    root_law: Law = Law.SIZE_BIASED,
    cap: int = 10_000,
) -> float:
    """Share of single-root trees that die out before reaching cap vertices."""
    off = _offspring(model)
    rng = as_rng(seed)
    extinct = 0
    for _ in range(draws):
        try:
            _grow(1, off, root_law, rng, cap)
        except BranchingOverflow:
            continue
        extinct += 1
    return extinct / draws if draws else math.nan
