# cmlimits/degseq.py
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import TYPE_CHECKING, Dict, Iterable, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import stats

from .models import DegreeSequenceError, ModelError, Real, RoundingPolicy

if TYPE_CHECKING:
    from .branching import OffspringModel

logger = logging.getLogger(__name__)

LAMBDA_TOL = 1e-12
POISSON_RHO2_TAIL = 1e-9


@dataclass(frozen=True, slots=True, eq=False)
class DegreeSequence:
    """
    A finite degree sequence d_1..d_n.
    - degrees are stored as a read-only int32 array
    - the half-edge count m_n = Σ d_v is even (checked here)
    Vertex v owns half-edges offsets[v] .. offsets[v+1]-1 (0-based).
    """

    degrees: np.ndarray

    def __post_init__(self) -> None:
        raw = np.asarray(self.degrees)
        if raw.ndim != 1 or raw.size == 0:
            raise DegreeSequenceError("degree sequence must be a non-empty flat sequence")
        if raw.dtype.kind not in "iu":
            if raw.dtype.kind != "f" or not np.all(raw == np.floor(raw)):
                raise DegreeSequenceError("degrees must be integers")
        if raw.min() < 0:
            raise DegreeSequenceError("degrees must be non-negative")
        arr = raw.astype(np.int32)
        total = int(arr.sum(dtype=np.int64))
        if total % 2:
            raise DegreeSequenceError(f"sum of degrees must be even (got {total})")
        arr.setflags(write=False)
        object.__setattr__(self, "degrees", arr)

    @classmethod
    def from_counts(cls, counts: Mapping[int, int]) -> "DegreeSequence":
        if any(int(c) < 0 for c in counts.values()):
            raise DegreeSequenceError("counts must be non-negative")
        items = sorted((int(k), int(c)) for k, c in counts.items() if int(c) > 0)
        ks = np.array([k for k, _ in items], dtype=np.int64)
        cs = np.array([c for _, c in items], dtype=np.int64)
        return cls(np.repeat(ks, cs))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DegreeSequence):
            return NotImplemented
        return bool(np.array_equal(self.degrees, other.degrees))

    def __len__(self) -> int:
        return int(self.degrees.size)

    @property
    def n(self) -> int:
        return int(self.degrees.size)

    @property
    def half_edges(self) -> int:
        return int(self.degrees.sum(dtype=np.int64))

    @property
    def max_degree(self) -> int:
        return int(self.degrees.max())

    @property
    def counts(self) -> Dict[int, int]:
        ks, cs = np.unique(self.degrees, return_counts=True)
        return {int(k): int(c) for k, c in zip(ks, cs)}

    def offsets(self) -> np.ndarray:
        return np.concatenate(([0], np.cumsum(self.degrees, dtype=np.int64)))

    def owners(self) -> np.ndarray:
        return np.repeat(np.arange(self.n, dtype=np.int64), self.degrees)

    def tolist(self) -> list[int]:
        return [int(x) for x in self.degrees]


@dataclass(frozen=True, slots=True)
class MomentSummary:
    n: int
    half_edges: int
    rho1_n: float
    rho2_n: float
    nu_n: Optional[float]  # None when rho1_n == 0
    lambda_hat_n: float
    max_degree: int


def moments(d: DegreeSequence) -> MomentSummary:
    deg = d.degrees.astype(np.int64)
    n = d.n
    rho1 = float(deg.sum()) / n
    rho2 = float((deg * (deg - 1)).sum()) / n
    nu = rho2 / rho1 if rho1 > 0 else None
    return MomentSummary(
        n=n,
        half_edges=d.half_edges,
        rho1_n=rho1,
        rho2_n=rho2,
        nu_n=nu,
        lambda_hat_n=float(np.count_nonzero(deg >= 2)) / n,
        max_degree=d.max_degree,
    )


def factorial_moment(d: DegreeSequence, k: int, exact: bool = False) -> Real:
    """(1/n) Σ_v d_v (d_v - 1) ... (d_v - k + 1)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    total = sum(c * math.perm(deg, k) for deg, c in d.counts.items())
    value = Fraction(total, d.n)
    return value if exact else float(value)


def is_feasible(d: Union[DegreeSequence, Sequence[int]]) -> bool:
    """Erdős–Gallai test: does a simple graph with these degrees exist?"""
    deg = np.asarray(d.degrees if isinstance(d, DegreeSequence) else list(d), dtype=np.int64)
    if deg.size == 0:
        return True
    if deg.min() < 0 or int(deg.sum()) % 2:
        return False
    deg = np.sort(deg)[::-1]
    n = deg.size
    k = np.arange(1, n + 1, dtype=np.int64)
    prefix = np.concatenate(([0], np.cumsum(deg)))
    # number of degrees >= k, using the descending order
    at_least = np.searchsorted(-deg, -k, side="right")
    cut = np.maximum(k, at_least)
    rhs = k * (k - 1) + k * np.maximum(0, at_least - k) + (prefix[-1] - prefix[cut])
    return bool(np.all(prefix[1:] <= rhs))


def _as_real(value: object) -> Real:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value) if "/" in value else float(value)
    return float(value)  # type: ignore[arg-type]


@dataclass(frozen=True, slots=True)
class DegreeModel:
    """
    Limiting degree distribution D given by λ_k = P(D = k).
    Values may be Fractions (then ρ₁, ρ₂, ν stay exact) or floats.
    A truncation K drops λ_k for k > K and renormalizes.
    """

    lambdas: Mapping[int, Real]
    truncation: Optional[int] = None

    def __post_init__(self) -> None:
        cleaned: Dict[int, Real] = {}
        for key, raw in self.lambdas.items():
            k = int(key)
            lam = _as_real(raw)
            if k < 0:
                raise ModelError(f"degree {k} is negative")
            if lam < 0:
                raise ModelError(f"lambda_{k} is negative")
            if lam > 0:
                cleaned[k] = lam
        if self.truncation is not None:
            if self.truncation < 0:
                raise ModelError("truncation must be non-negative")
            kept = {k: lam for k, lam in cleaned.items() if k <= self.truncation}
            mass = sum(kept.values())
            if mass <= 0:
                raise ModelError(f"no mass left at or below truncation {self.truncation}")
            if mass != 1:
                logger.debug("truncation at %d drops mass %.3g", self.truncation, 1 - mass)
                kept = {k: lam / mass for k, lam in kept.items()}
            cleaned = kept
        total = sum(cleaned.values())
        if abs(total - 1) > LAMBDA_TOL:
            raise ModelError(f"lambdas must sum to 1 (got {float(total):.15g})")
        object.__setattr__(self, "lambdas", dict(sorted(cleaned.items())))

    @classmethod
    def from_mapping(
        cls, mapping: Mapping[object, object], truncation: Optional[int] = None
    ) -> "DegreeModel":
        return cls({int(str(k)): _as_real(v) for k, v in mapping.items()}, truncation)

    @classmethod
    def regular(cls, k: int) -> "DegreeModel":
        return cls({k: Fraction(1)})

    @classmethod
    def poisson(cls, c: float, rho2_tail: float = POISSON_RHO2_TAIL) -> "DegreeModel":
        """Poisson(c), cut where the discarded part of ρ₂ drops below rho2_tail."""
        if c < 0:
            raise ModelError("Poisson mean must be non-negative")
        if c == 0:
            return cls({0: Fraction(1)})
        # k(k-1) P(X = k) = c² P(X = k-2), so the ρ₂ mass above K is c² P(X >= K-1)
        cutoff = 2
        while c * c * float(stats.poisson.sf(cutoff - 2, c)) >= rho2_tail:
            cutoff += 1
        pmf = stats.poisson.pmf(np.arange(cutoff + 1), c)
        return cls({k: float(p) for k, p in enumerate(pmf)}, truncation=cutoff)

    @classmethod
    def from_json(cls, path: Union[str, Path]) -> "DegreeModel":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        if "poisson" in data:
            return cls.poisson(float(data["poisson"]))
        if "lambdas" not in data:
            raise ModelError(f"{path}: model file needs a 'lambdas' or 'poisson' entry")
        return cls.from_mapping(data["lambdas"], data.get("truncation"))

    @classmethod
    def empirical(cls, d: DegreeSequence) -> "DegreeModel":
        return cls({k: Fraction(c, d.n) for k, c in d.counts.items()})

    def truncate(self, k_max: int) -> "DegreeModel":
        return DegreeModel(self.lambdas, truncation=k_max)

    def lam(self, k: int) -> Real:
        return self.lambdas.get(k, 0)

    @property
    def support(self) -> Tuple[int, ...]:
        return tuple(self.lambdas)

    @property
    def max_degree(self) -> int:
        return max(self.lambdas)

    @property
    def is_rational(self) -> bool:
        return all(isinstance(v, Fraction) for v in self.lambdas.values())

    @property
    def rho1(self) -> Real:
        return sum(k * lam for k, lam in self.lambdas.items())

    @property
    def rho2(self) -> Real:
        return sum(k * (k - 1) * lam for k, lam in self.lambdas.items())

    @property
    def nu_exact(self) -> Real:
        rho1 = self.rho1
        if rho1 <= 0:
            raise ModelError("nu is undefined when rho1 = 0")
        return self.rho2 / rho1

    @property
    def nu(self) -> float:
        return float(self.nu_exact)

    @property
    def lambda_hat(self) -> Real:
        return 1 - self.lam(0) - self.lam(1)

    @property
    def offspring(self) -> "OffspringModel":
        from .branching import OffspringModel

        return OffspringModel.from_model(self)

    def to_json(self) -> Dict[str, object]:
        lambdas = {
            str(k): str(v) if isinstance(v, Fraction) else v for k, v in self.lambdas.items()
        }
        out: Dict[str, object] = {"lambdas": lambdas}
        if self.truncation is not None:
            out["truncation"] = self.truncation
        return out


def realize(
    model: DegreeModel, n: int, policy: RoundingPolicy = RoundingPolicy.NEAREST
) -> DegreeSequence:
    """
    Degree sequence of length n with n_k close to n λ_k.
    Only degrees in the model's support are used, Σ n_k = n, and m_n is even.
    """
    if n < 1:
        raise DegreeSequenceError("n must be >= 1")
    targets = {k: n * Fraction(lam) for k, lam in model.lambdas.items()}
    if policy is RoundingPolicy.NEAREST:
        counts = {k: math.floor(t + Fraction(1, 2)) for k, t in targets.items()}
    else:
        counts = {k: math.floor(t) for k, t in targets.items()}
    residual = {k: targets[k] - counts[k] for k in counts}

    diff = n - sum(counts.values())
    while diff > 0:
        k = max(residual, key=lambda j: (residual[j], -j))
        counts[k] += 1
        residual[k] -= 1
        diff -= 1
    while diff < 0:
        k = min((j for j in residual if counts[j] > 0), key=lambda j: (residual[j], -j))
        counts[k] -= 1
        residual[k] += 1
        diff += 1

    if sum(k * c for k, c in counts.items()) % 2:
        _fix_parity(counts, model)
    logger.debug("realized n=%d counts=%s", n, counts)
    return DegreeSequence.from_counts(counts)


def _fix_parity(counts: Dict[int, int], model: DegreeModel) -> None:
    """Move one vertex to an adjacent supported degree, preferring a decrement."""
    for k in sorted(counts, reverse=True):
        if counts[k] >= 1 and model.lam(k - 1) > 0:
            counts[k] -= 1
            counts[k - 1] = counts.get(k - 1, 0) + 1
            return
    for k in sorted(counts, reverse=True):
        if counts[k] >= 1 and model.lam(k + 1) > 0:
            counts[k] -= 1
            counts[k + 1] = counts.get(k + 1, 0) + 1
            return
    raise DegreeSequenceError("model admits no realization with an even degree sum at this n")


def heavy_tail_sequence(
    n: int,
    base: DegreeModel,
    hub_exponent: float = 0.4,
    hub_count_exponent: float = 0.5,
) -> DegreeSequence:
    """
    Base realization plus ⌊n^hub_count_exponent⌋ hubs of degree ⌊n^hub_exponent⌋.
    With the defaults ρ_{n,2} grows like n^0.3 while Δ_n = o(√n).
    """
    hubs = max(1, _floor_power(n, hub_count_exponent))
    hub_degree = _floor_power(n, hub_exponent)
    if hubs >= n:
        raise DegreeSequenceError(f"n={n} too small for {hubs} hubs")
    body = realize(base, n - hubs)
    degrees = np.concatenate([body.degrees.astype(np.int64), np.full(hubs, hub_degree)])
    if int(degrees.sum()) % 2:
        degrees[-1] -= 1
    return DegreeSequence(degrees)


def _floor_power(n: int, exponent: float) -> int:
    return int(math.floor(n**exponent + 1e-9))


def load_degree_sequence(path: Union[str, Path]) -> DegreeSequence:
    """
    Plain text (one degree per line, '#' comments) or JSON, either
    {"degrees": [...]} or {"counts": {k: n_k}}.
    """
    text = Path(path).read_text(encoding="utf-8")
    if text.lstrip().startswith("{"):
        data = json.loads(text)
        if "degrees" in data:
            return DegreeSequence(np.array([int(x) for x in data["degrees"]], dtype=np.int64))
        if "counts" not in data:
            raise DegreeSequenceError(f"{path}: JSON degree file needs 'degrees' or 'counts'")
        return DegreeSequence.from_counts({int(k): int(v) for k, v in data["counts"].items()})
    values = _parse_int_lines(text.splitlines())
    return DegreeSequence(np.array(values, dtype=np.int64))


def _parse_int_lines(lines: Iterable[str]) -> list[int]:
    out: list[int] = []
    for lineno, line in enumerate(lines, start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        try:
            out.append(int(body))
        except ValueError as exc:
            raise DegreeSequenceError(f"line {lineno}: not an integer: {body!r}") from exc
    return out


def load_model(path: Union[str, Path]) -> DegreeModel:
    return DegreeModel.from_json(path)
