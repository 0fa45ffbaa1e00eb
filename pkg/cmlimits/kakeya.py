# cmlimits/kakeya.py
"""
Partial-sum sets of fragment probabilities.

A non-increasing summable sequence p_1 >= p_2 >= ... has [0, Σp] as its set
of subset sums iff p_i <= t_i = Σ_{j>i} p_j for every i. If the condition
only holds past some head, the set is the union over head subsets A of
[σ_A, σ_A + T], T the tail mass. analyze() builds the head from the simple
fragment catalogue down to a floor below which the condition is certified.
"""
from __future__ import annotations

import bisect
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import digamma

from .degseq import DegreeModel
from .fragcat import CatalogueConfig, enumerate_fragments
from .limits import q_value, scaled_length_series, solve_nu0
from .models import IntervalBudgetExceeded, SupercriticalError, ValidationError, Variant, Verdict

logger = logging.getLogger(__name__)

MERGE_TOL = 1e-12
MAX_HEAD_INTERVALS = 2**25
DEFAULT_RESOLUTION = 1e-9
CERTIFICATE_WINDOW = 64
NU0_TOL = 1e-12

Interval = Tuple[float, float]


def _merge(starts: np.ndarray, ends: np.ndarray, tol: float) -> Tuple[np.ndarray, np.ndarray]:
    if starts.size == 0:
        return starts, ends
    order = np.argsort(starts, kind="stable")
    s, e = starts[order], ends[order]
    reach = np.maximum.accumulate(e)
    new = np.empty(s.size, dtype=bool)
    new[0] = True
    new[1:] = s[1:] > reach[:-1] + tol
    group = np.cumsum(new) - 1
    out_s = s[new]
    out_e = np.full(out_s.size, -np.inf)
    np.maximum.at(out_e, group, e)
    return out_s, out_e


@dataclass(frozen=True, slots=True)
class IntervalUnion:
    """Sorted, disjoint closed intervals inside [0, 1]."""

    intervals: Tuple[Interval, ...]
    resolution: float = MERGE_TOL

    def __post_init__(self) -> None:
        prev = -math.inf
        for a, b in self.intervals:
            if a > b:
                raise ValidationError(f"interval [{a}, {b}] is reversed")
            if a < -self.resolution or b > 1 + self.resolution:
                raise ValidationError(f"interval [{a}, {b}] leaves [0, 1]")
            if a <= prev:
                raise ValidationError("intervals must be sorted and disjoint")
            prev = b

    @classmethod
    def from_pairs(
        cls, pairs: Sequence[Interval], resolution: float = MERGE_TOL
    ) -> "IntervalUnion":
        if not pairs:
            return cls((), resolution)
        arr = np.asarray(pairs, dtype=np.float64).reshape(-1, 2)
        s, e = _merge(arr[:, 0], arr[:, 1], resolution)
        s = np.clip(s, 0.0, 1.0)
        e = np.clip(e, 0.0, 1.0)
        return cls(tuple(zip(s.tolist(), e.tolist())), resolution)

    def __len__(self) -> int:
        return len(self.intervals)

    @property
    def measure(self) -> float:
        return math.fsum(b - a for a, b in self.intervals)

    def contains(self, x: float, eps: float = 0.0) -> bool:
        i = bisect.bisect_right([a for a, _ in self.intervals], x + eps) - 1
        return i >= 0 and x <= self.intervals[i][1] + eps

    def gaps(self) -> List[Interval]:
        out: List[Interval] = []
        cursor = 0.0
        for a, b in self.intervals:
            if a > cursor + self.resolution:
                out.append((cursor, a))
            cursor = max(cursor, b)
        if cursor < 1 - self.resolution:
            out.append((cursor, 1.0))
        return out

    @property
    def is_full(self) -> bool:
        return not self.gaps()

    def fattened(self, eps: float) -> "IntervalUnion":
        return IntervalUnion.from_pairs(
            [(a - eps, b + eps) for a, b in self.intervals], self.resolution
        )

    def is_symmetric(self, eps: Optional[float] = None) -> bool:
        tol = self.resolution if eps is None else eps
        mirrored = sorted((1 - b, 1 - a) for a, b in self.intervals)
        if len(mirrored) != len(self.intervals):
            return False
        return all(
            abs(a - c) <= tol and abs(b - d) <= tol
            for (a, b), (c, d) in zip(self.intervals, mirrored)
        )

    def covers(self, other: "IntervalUnion", eps: float = 0.0) -> bool:
        """Every interval of other lies inside one interval of self, up to eps."""
        starts = [a for a, _ in self.intervals]
        for a, b in other.intervals:
            i = bisect.bisect_right(starts, a + eps) - 1
            if i < 0 or b > self.intervals[i][1] + eps:
                return False
        return True

    def to_json(self) -> List[List[float]]:
        return [[a, b] for a, b in self.intervals]


@dataclass(frozen=True, slots=True)
class GapCertificate:
    """p_i > t_i, so no partial sum lies in (t_i + σ, p_i + σ) for any head sum σ."""

    index: int  # 1-based position in the probability order
    p: float
    tail: float

    def __post_init__(self) -> None:
        if not self.p > self.tail:
            raise ValidationError(f"no gap at index {self.index}: p={self.p} <= tail={self.tail}")

    def gap(self, sigma: float = 0.0) -> Interval:
        return (self.tail + sigma, self.p + sigma)

    @property
    def width(self) -> float:
        return self.p - self.tail

    def to_json(self) -> Dict[str, float]:
        return {"i": self.index, "p_i": self.p, "tail": self.tail}


@dataclass(frozen=True, slots=True)
class KakeyaResult:
    full: bool
    first_violation: Optional[int] = None  # 1-based


def kakeya_check(
    ps: Sequence[float],
    tails: Optional[Sequence[float]] = None,
    remainder: float = 0.0,
    tol: float = MERGE_TOL,
) -> KakeyaResult:
    """
    Test p_i <= t_i for a non-increasing sequence. Without tails, t_i is the sum
    of the later terms plus remainder (the mass beyond the listed terms).
    """
    p = np.asarray(ps, dtype=np.float64)
    if p.size and (np.any(p < 0) or np.any(np.diff(p) > tol)):
        raise ValidationError("probabilities must be non-negative and sorted descending")
    if tails is None:
        suffix = np.cumsum(p[::-1])[::-1]
        t = suffix - p + remainder
    else:
        t = np.asarray(tails, dtype=np.float64)
        if t.shape != p.shape:
            raise ValidationError("tails must match ps in length")
        if t.size > 1 and np.any(np.abs(t[:-1] - p[1:] - t[1:]) > 1e-9):
            raise ValidationError("tails are inconsistent: need t_i = t_{i-1} - p_i")
    bad = np.flatnonzero(p > t + tol)
    if bad.size:
        return KakeyaResult(full=False, first_violation=int(bad[0]) + 1)
    return KakeyaResult(full=True)


def _harmonic(n: int) -> float:
    return float(digamma(n + 1)) + np.euler_gamma


def safe_tail_index(nu: float) -> int:
    """Smallest K with Σ_{j=3}^{K−2} 1/j >= 4/ν."""
    if not 0 < nu <= 1:
        raise ValidationError("safe tail index needs 0 < nu <= 1")
    target = 4.0 / nu + 1.5  # H(K−2) − H(2) >= 4/ν
    if target > 700:
        raise ValidationError(f"harmonic tail index overflows for nu={nu:.3g}")
    lo, hi = 2, int(math.exp(target - np.euler_gamma)) + 2
    while _harmonic(hi) < target:
        hi *= 2
    while lo < hi:
        mid = (lo + hi) // 2
        if _harmonic(mid) >= target:
            hi = mid
        else:
            lo = mid + 1
    return lo + 2


def certified_tail_index(nu: float, window: int = CERTIFICATE_WINDOW) -> int:
    """
    Smallest k >= 3 such that every simple fragment with p <= Qν^k/2k satisfies
    p_i <= t_i. Band k is checked numerically against P(L >= k+1); a closed
    bound certifies all bands from the first k where it holds.
    """
    if not 0 < nu < 1:
        raise ValidationError("certified tail index needs 0 < nu < 1")
    q = q_value(nu)
    log_term = -math.log1p(-nu)
    length = 256
    while True:
        u = scaled_length_series(nu, length + window + 2, Variant.SIMPLE)
        partial = np.cumsum(u)
        closure: Optional[int] = None
        for k in range(3, length):
            if partial[k - 2] * log_term * k / (k + 1) >= q:
                closure = k
                break
        if closure is not None:
            break
        length *= 2
    k_s = closure
    ratios = nu ** np.arange(1, window + 1, dtype=np.float64)
    for k in range(closure - 1, 2, -1):
        lower = float(np.dot(ratios, u[k + 1 : k + 1 + window]))
        if q / (2 * k) > lower:
            break
        k_s = k
    logger.debug("nu=%.6g: closure at k=%d, certified k=%d", nu, closure, k_s)
    return k_s


def certified_floor(nu: float) -> float:
    k = certified_tail_index(nu)
    return q_value(nu) * nu**k / (2 * k)


def _verdict(nu: float, q: float) -> Verdict:
    return Verdict.FULL if nu >= 1 or q <= 0.5 else Verdict.GAP


@dataclass(frozen=True, slots=True)
class ThresholdReport:
    nu: float
    nu0: float
    Q: float
    verdict: Verdict

    def to_json(self) -> Dict[str, object]:
        return {"nu": self.nu, "nu0": self.nu0, "Q": self.Q, "verdict": self.verdict.value}


def threshold_report(model: Union[DegreeModel, float]) -> ThresholdReport:
    """Full interval iff Q(ν) <= 1/2, i.e. ν >= ν₀; supercritical models are full."""
    nu = model.nu if isinstance(model, DegreeModel) else float(model)
    if nu < 0:
        raise ValidationError("nu must be non-negative")
    q = q_value(nu)
    return ThresholdReport(nu=nu, nu0=solve_nu0(NU0_TOL), Q=q, verdict=_verdict(nu, q))


@dataclass(slots=True)
class KakeyaAnalysis:
    nu: float
    nu0: float
    Q: float
    union: IntervalUnion
    gaps: List[GapCertificate]
    floor: float
    k_certified: int
    K_star: Optional[int]
    exact: bool
    head: List[float] = field(default_factory=list)
    tail_mass: float = 0.0

    @property
    def verdict(self) -> Verdict:
        return Verdict.FULL if self.union.is_full else Verdict.GAP

    def to_json(self) -> Dict[str, object]:
        return {
            "nu": self.nu,
            "nu0": self.nu0,
            "Q": self.Q,
            "verdict": self.verdict.value,
            "intervals": self.union.to_json(),
            "gaps": [g.to_json() for g in self.gaps],
            "floor": self.floor,
            "K_star": self.K_star,
            "k_certified": self.k_certified,
            "exact": self.exact,
            "head_size": len(self.head),
            "tail_mass": self.tail_mass,
        }


def partial_sum_union(head: Sequence[float], tail: float, tol: float = MERGE_TOL) -> IntervalUnion:
    """∪_A [σ_A, σ_A + tail] over subsets A of head."""
    starts = np.array([0.0])
    ends = np.array([max(tail, 0.0)])
    for p in sorted(head):
        starts, ends = _merge(
            np.concatenate([starts, starts + p]), np.concatenate([ends, ends + p]), tol
        )
        if starts.size > MAX_HEAD_INTERVALS:
            raise IntervalBudgetExceeded(
                f"more than {MAX_HEAD_INTERVALS} intervals; raise the resolution"
            )
    return IntervalUnion.from_pairs(list(zip(starts.tolist(), ends.tolist())), tol)


def analyze(
    model: DegreeModel,
    resolution: float = DEFAULT_RESOLUTION,
    config: Optional[CatalogueConfig] = None,
) -> KakeyaAnalysis:
    """Partial-sum set of the simple fragment law with its gap certificates."""
    nu = model.nu
    if nu >= 1:
        raise SupercriticalError(nu, "Kakeya analysis")
    if nu <= 0:
        raise ValidationError("Kakeya analysis needs nu > 0")
    if not resolution > 0:
        raise ValidationError("resolution must be positive")
    q = q_value(nu)
    k_cert = certified_tail_index(nu)
    floor = q * nu**k_cert / (2 * k_cert)
    exact = floor >= resolution
    if not exact:
        logger.warning(
            "certified floor %.3g is below resolution %.3g; result is an outer bound",
            floor,
            resolution,
        )
        floor = resolution
    catalogue = enumerate_fragments(model, floor, Variant.SIMPLE, config)
    head = catalogue.probabilities.tolist()
    tail = catalogue.tail_mass
    union = partial_sum_union(head, tail)

    gaps: List[GapCertificate] = []
    running = 0.0
    for i, p in enumerate(head, start=1):
        running += p
        t_i = 1.0 - running
        if p > t_i + MERGE_TOL:
            gaps.append(GapCertificate(index=i, p=p, tail=t_i))

    try:
        k_star: Optional[int] = safe_tail_index(nu)
    except ValidationError:
        k_star = None
    logger.info(
        "kakeya nu=%.6g: head=%d intervals=%d gaps=%d", nu, len(head), len(union), len(gaps)
    )
    return KakeyaAnalysis(
        nu=nu,
        nu0=solve_nu0(NU0_TOL),
        Q=q,
        union=union,
        gaps=gaps,
        floor=floor,
        k_certified=k_cert,
        K_star=k_star,
        exact=exact,
        head=head,
        tail_mass=tail,
    )
