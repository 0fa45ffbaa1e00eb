# cmlimits/cm.py
from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, Hashable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from .degseq import DegreeSequence
from .models import OracleBoundExceeded, Real, ValidationError
from .multigraph import Multigraph, _from_endpoints, count_cycles, extract_fragment

logger = logging.getLogger(__name__)

DEFAULT_ORACLE_BOUND = 14
DEFAULT_MAX_TRIES = 1000

Seed = Union[int, np.random.Generator, None]
Pairs = Tuple[Tuple[int, int], ...]


def _key_int(key: Union[int, str]) -> int:
    if isinstance(key, int):
        if key < 0:
            raise ValidationError("stream keys must be non-negative")
        return key
    return int.from_bytes(hashlib.sha256(key.encode("utf-8")).digest()[:8], "big")


def make_rng(master_seed: int, *keys: Union[int, str]) -> np.random.Generator:
    """Independent stream for (master_seed, *keys), e.g. (seed, experiment, trial)."""
    entropy = [_key_int(master_seed), *(_key_int(k) for k in keys)]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def as_rng(seed: Seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None:
        raise ValidationError("a seed is required for sampling")
    return make_rng(seed)


def _as_sequence(d: Union[DegreeSequence, Sequence[int]]) -> DegreeSequence:
    return d if isinstance(d, DegreeSequence) else DegreeSequence(np.asarray(list(d)))


@dataclass(frozen=True, slots=True)
class Configuration:
    """A perfect matching (0-based half-edge pairs, a < b, sorted) and its multigraph."""

    pairs: Pairs
    graph: Multigraph


@dataclass(slots=True)
class MatchingSampler:
    """
    Uniform perfect matchings of the half-edges of d: shuffle the m_n labels
    (Fisher–Yates via Generator.permutation) and pair consecutive positions.
    """

    d: DegreeSequence
    rng: np.random.Generator
    _owners: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self._owners = self.d.owners()

    def sample_pairs(self) -> np.ndarray:
        return self.rng.permutation(self.d.half_edges).reshape(-1, 2)

    def sample(self) -> Multigraph:
        pairs = self.sample_pairs()
        return _from_endpoints(self.d.n, self._owners[pairs[:, 0]], self._owners[pairs[:, 1]])

    def sample_configuration(self) -> Configuration:
        raw = self.sample_pairs()
        graph = _from_endpoints(self.d.n, self._owners[raw[:, 0]], self._owners[raw[:, 1]])
        pairs = tuple(sorted((int(min(a, b)), int(max(a, b))) for a, b in raw.tolist()))
        return Configuration(pairs=pairs, graph=graph)


def sample_cm(d: Union[DegreeSequence, Sequence[int]], seed: Seed) -> Multigraph:
    return MatchingSampler(_as_sequence(d), as_rng(seed)).sample()


@dataclass(frozen=True, slots=True)
class SimpleSample:
    graph: Optional[Multigraph]
    attempts: int

    @property
    def success(self) -> bool:
        return self.graph is not None


def sample_simple(
    d: Union[DegreeSequence, Sequence[int]], seed: Seed, max_tries: int = DEFAULT_MAX_TRIES
) -> SimpleSample:
    """Rejection sampling: redraw until the multigraph is simple, at most max_tries times."""
    if max_tries < 1:
        raise ValidationError("max_tries must be >= 1")
    sampler = MatchingSampler(_as_sequence(d), as_rng(seed))
    for attempt in range(1, max_tries + 1):
        g = sampler.sample()
        if g.is_simple():
            return SimpleSample(graph=g, attempts=attempt)
    logger.warning("no simple graph after %d tries", max_tries)
    return SimpleSample(graph=None, attempts=max_tries)


def iter_matchings(m: int) -> Iterator[Pairs]:
    """All (m-1)!! perfect matchings of 0..m-1, each as sorted pairs."""
    if m % 2:
        raise ValidationError("cannot match an odd number of half-edges")

    def rec(remaining: Tuple[int, ...]) -> Iterator[List[Tuple[int, int]]]:
        if not remaining:
            yield []
            return
        first, rest = remaining[0], remaining[1:]
        for i, partner in enumerate(rest):
            for tail in rec(rest[:i] + rest[i + 1 :]):
                yield [(first, partner), *tail]

    for pairs in rec(tuple(range(m))):
        yield tuple(pairs)


Statistic = Callable[[Configuration], Hashable]


def multigraph_key(G: Multigraph) -> Hashable:
    return (tuple(sorted(G.loops.items())), tuple(sorted(G.mult.items())))


STATISTICS: Dict[str, Statistic] = {
    "matching": lambda c: c.pairs,
    "multigraph": lambda c: multigraph_key(c.graph),
    "is_simple": lambda c: c.graph.is_simple(),
    "loops": lambda c: c.graph.loop_count,
    "cycles": lambda c: count_cycles(c.graph, 4).counts,
    "fragment": lambda c: extract_fragment(c.graph).code,
}


def get_statistic(name: str) -> Statistic:
    try:
        return STATISTICS[name]
    except KeyError:
        raise ValidationError(
            f"unknown statistic {name!r}; choose from {sorted(STATISTICS)}"
        ) from None


@dataclass(frozen=True, slots=True)
class ExactDistribution:
    probs: Dict[Hashable, Fraction]
    outcomes: int

    def __post_init__(self) -> None:
        assert sum(self.probs.values()) == 1, "exact probabilities must sum to 1"

    def probability(self, value: Hashable) -> Fraction:
        return self.probs.get(value, Fraction(0))

    def expectation(self, f: Optional[Callable[[Hashable], Real]] = None) -> Fraction:
        total = Fraction(0)
        for value, p in self.probs.items():
            total += p * Fraction(f(value) if f is not None else value)  # type: ignore[arg-type]
        return total

    def conditional(self, predicate: Callable[[Hashable], bool]) -> "ExactDistribution":
        kept = {v: p for v, p in self.probs.items() if predicate(v)}
        mass = sum(kept.values())
        if mass == 0:
            raise ValidationError("conditioning on an event of probability 0")
        return ExactDistribution({v: p / mass for v, p in kept.items()}, self.outcomes)


def enumerate_matchings(
    d: Union[DegreeSequence, Sequence[int]],
    statistic: Union[str, Statistic],
    bound: int = DEFAULT_ORACLE_BOUND,
) -> ExactDistribution:
    """Exact law of a statistic over all perfect matchings of d's half-edges."""
    seq = _as_sequence(d)
    m = seq.half_edges
    if m > bound:
        raise OracleBoundExceeded(f"m_n={m} exceeds the oracle bound {bound}")
    stat = get_statistic(statistic) if isinstance(statistic, str) else statistic
    owners = seq.owners().tolist()
    counts: Dict[Hashable, int] = {}
    total = 0
    for pairs in iter_matchings(m):
        graph = Multigraph.from_edges(seq.n, ((owners[a], owners[b]) for a, b in pairs))
        value = stat(Configuration(pairs=pairs, graph=graph))
        counts[value] = counts.get(value, 0) + 1
        total += 1
    logger.debug("enumerated %d matchings for m=%d", total, m)
    return ExactDistribution({v: Fraction(c, total) for v, c in counts.items()}, total)
