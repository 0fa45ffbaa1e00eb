# cmlimits/limits.py
"""
Closed-form limit quantities for subcritical configuration models.

    ξ_k  = ν^k / 2k                     limiting mean of the k-cycle count
    Q(ν) = √(1−ν) e^{ν/2 + ν²/4}         acyclicity limit of the simple graph
    P(simple) → e^{−ν/2 − ν²/4},  E[Z] → −½ ln(1−ν)
"""
from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import optimize
from scipy.special import gammaln

from .degseq import DegreeModel, DegreeSequence, factorial_moment
from .models import Real, SupercriticalError, ValidationError, Variant
from .multigraph import Fragment, Multigraph, authe_of

logger = logging.getLogger(__name__)

NU0_REFERENCE = 0.9368317
SERIES_TOL = 1e-17
APPENDIX_NS: Tuple[int, ...] = (10**3, 10**4, 10**5, 10**6)


def _check_nu(nu: float) -> float:
    nu = float(nu)
    if not math.isfinite(nu) or nu < 0:
        raise ValidationError(f"nu must be a finite non-negative number (got {nu})")
    return nu


def q_value(nu: float) -> float:
    """Q(ν); 0 for ν ≥ 1."""
    nu = _check_nu(nu)
    if nu >= 1:
        return 0.0
    return math.sqrt(1 - nu) * math.exp(nu / 2 + nu * nu / 4)


def xi(k: int, nu: float) -> float:
    if k < 1:
        raise ValidationError("cycle length must be >= 1")
    return _check_nu(nu) ** k / (2 * k)


def prob_simple_limit(nu: float) -> float:
    nu = _check_nu(nu)
    return math.exp(-nu / 2 - nu * nu / 4)


def p_acyc(nu: float) -> float:
    return q_value(nu)


def series_tail_bound(nu: float, K: int) -> float:
    """Upper bound on Σ_{k>K} ξ_k from ν^k ≤ ν^{K+1} ν^{k−K−1}."""
    nu = _check_nu(nu)
    if nu >= 1:
        raise SupercriticalError(nu, "series tail bound")
    return nu ** (K + 1) / (2 * (K + 1) * (1 - nu))


def _series_terms(nu: float, tol: float) -> int:
    K = 8
    while series_tail_bound(nu, K) > tol:
        K *= 2
    return K


def p_acyc_series(nu: float, terms: Optional[int] = None) -> float:
    """exp(−Σ_{k=3}^{K} ξ_k), the Taylor form of Q."""
    nu = _check_nu(nu)
    if nu >= 1:
        return 0.0
    K = terms if terms is not None else _series_terms(nu, SERIES_TOL)
    if K < 2:
        raise ValidationError("terms must be >= 2")
    ks = np.arange(3, K + 1, dtype=np.float64)
    return math.exp(-float(np.sum(nu**ks / (2 * ks))))


def solve_nu0(tol: float = 1e-7) -> float:
    """Root of Q(ν) = 1/2 on [0, 1] by bisection; |Q(ν₀) − 1/2| < tol."""
    if not tol > 0:
        raise ValidationError("tol must be positive")
    # |Q'| < 4 near the root, so an x-tolerance of tol/16 keeps |Q - 1/2| under tol
    root = optimize.bisect(lambda x: q_value(x) - 0.5, 0.0, 1.0, xtol=tol / 16)
    logger.debug("nu0=%.12f (tol=%g)", root, tol)
    return float(root)


def expected_total_cycles(nu: float) -> float:
    nu = _check_nu(nu)
    if nu >= 1:
        raise SupercriticalError(nu, "expected total cycle count")
    return -0.5 * math.log1p(-nu)


def joint_cycle_prob(
    a: Mapping[int, int], nu: float, variant: Variant = Variant.MULTIGRAPH
) -> float:
    """Limit probability of exactly a_k k-cycles for every k (all other counts zero)."""
    nu = _check_nu(nu)
    if nu >= 1:
        raise SupercriticalError(nu, "joint cycle probability")
    counts = {int(k): int(c) for k, c in a.items() if int(c) != 0}
    if any(c < 0 for c in counts.values()) or any(k < 1 for k in counts):
        raise ValidationError("cycle type needs k >= 1 and a_k >= 0")
    if variant is Variant.SIMPLE:
        if any(k < 3 for k in counts):
            raise ValidationError("simple graphs have no 1- or 2-cycles")
        base = q_value(nu)
    else:
        base = math.sqrt(1 - nu)
    if counts and nu == 0:
        return 0.0
    log_prod = sum(c * math.log(xi(k, nu)) - math.lgamma(c + 1) for k, c in counts.items())
    return base * math.exp(log_prod)


def scaled_length_series(
    nu: float, length: int, variant: Variant = Variant.MULTIGRAPH
) -> np.ndarray:
    """
    v_m = P(total cycle length = m)/ν^m for m < length, from
    m·v_m = ½ Σ_{j<=m−k_min} v_j with v_0 = √(1−ν) (multigraph) or Q (simple).
    """
    nu = _check_nu(nu)
    if nu >= 1:
        raise SupercriticalError(nu, "cycle length law")
    if length < 1:
        raise ValidationError("length must be >= 1")
    k_min = variant.min_cycle
    v = np.zeros(length, dtype=np.float64)
    v[0] = q_value(nu) if variant is Variant.SIMPLE else math.sqrt(1 - nu)
    partial = np.zeros(length, dtype=np.float64)
    partial[0] = v[0]
    for m in range(1, length):
        if m >= k_min:
            v[m] = 0.5 * partial[m - k_min] / m
        partial[m] = partial[m - 1] + v[m]
    return v


def cycle_length_law(
    nu: float, length: int, variant: Variant = Variant.MULTIGRAPH
) -> np.ndarray:
    """Σ of class_sum over cycle types with Σ k·a_k = m, for m < length."""
    v = scaled_length_series(nu, length, variant)
    return v * float(nu) ** np.arange(length, dtype=np.float64)


def cycle_length_tail_bound(
    nu: float, length: int, variant: Variant = Variant.MULTIGRAPH
) -> float:
    """Upper bound on the class mass of total cycle length >= length (v_m <= v_0)."""
    nu = _check_nu(nu)
    if nu >= 1:
        raise SupercriticalError(nu, "cycle length tail")
    base = q_value(nu) if variant is Variant.SIMPLE else math.sqrt(1 - nu)
    return base * nu**length / (1 - nu)


def total_class_mass(
    nu: float, variant: Variant = Variant.MULTIGRAPH, tol: float = 1e-15
) -> float:
    """Σ over all cycle types of class_sum: the length law summed plus its tail bound."""
    length = 64
    while cycle_length_tail_bound(nu, length, variant) > tol:
        length *= 2
    law = cycle_length_law(nu, length, variant)
    return math.fsum(law.tolist()) + cycle_length_tail_bound(nu, length, variant)


@dataclass(frozen=True, slots=True)
class LimitLaw:
    nu: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "nu", _check_nu(self.nu))

    @classmethod
    def from_model(cls, model: DegreeModel) -> "LimitLaw":
        return cls(model.nu)

    @property
    def Q(self) -> float:
        return q_value(self.nu)

    @property
    def p_simple(self) -> float:
        return prob_simple_limit(self.nu)

    @property
    def p_acyc_multigraph(self) -> float:
        return math.sqrt(1 - self.nu) if self.nu < 1 else 0.0

    def xi(self, k: int) -> float:
        return xi(k, self.nu)

    def xis(self, K: int) -> np.ndarray:
        ks = np.arange(1, K + 1, dtype=np.float64)
        return self.nu**ks / (2 * ks)


# Expected copies of a small multigraph H


@dataclass(frozen=True, slots=True)
class _Shape:
    h: int
    census: Dict[int, int]
    ell: int
    authe: int
    min_degree: int


def _shape(H: Union[Fragment, Multigraph]) -> _Shape:
    if isinstance(H, Fragment):
        census = H.degree_census
        G = H.to_multigraph()
        auth = H.authe()
    else:
        G = H
        census = dict(Counter(int(x) for x in G.degrees()))
        auth = authe_of(G)
    return _Shape(
        h=G.n,
        census=census,
        ell=G.edge_count,
        authe=auth,
        min_degree=min(census) if census else 0,
    )


def _rho_product(shape: _Shape, d: DegreeSequence) -> Fraction:
    total = Fraction(1)
    for i, h_i in shape.census.items():
        rho = Fraction(1) if i == 0 else Fraction(factorial_moment(d, i, exact=True))
        total *= rho**h_i
    return total


def expected_copies(H: Union[Fragment, Multigraph], d: DegreeSequence, exact: bool = False) -> Real:
    """Main term n^h ∏ ρ_{n,i}^{h_i} / (authe(H) m_n^ℓ) of E[X_n(H)]."""
    shape = _shape(H)
    m = d.half_edges
    if m == 0 and shape.ell > 0:
        return Fraction(0) if exact else 0.0
    value = Fraction(d.n**shape.h) * _rho_product(shape, d)
    value /= shape.authe * Fraction(m) ** shape.ell
    return value if exact else float(value)


def _odd_falling(m: int, ell: int) -> int:
    return math.prod(m - 2 * i + 1 for i in range(1, ell + 1))


def xi_bound(H: Union[Fragment, Multigraph], d: DegreeSequence, exact: bool = False) -> Real:
    """
    Ξ_n(H) = (n̂)_h ∏ ρ_{n,i}^{h_i} / (authe(H) λ̂_n^h ∏_{i=1}^{ℓ} (m_n − 2i + 1)),
    with n̂ the number of vertices of degree at least 2. H needs minimum degree 2.
    """
    shape = _shape(H)
    if shape.h and shape.min_degree < 2:
        raise ValidationError("xi_bound needs H with minimum degree at least 2")
    n_hat = int(np.count_nonzero(d.degrees >= 2))
    if shape.h > 0 and n_hat == 0:
        raise ValidationError("xi_bound is undefined when no vertex has degree >= 2")
    if 2 * shape.ell > d.half_edges:
        return Fraction(0) if exact else 0.0
    lambda_hat = Fraction(n_hat, d.n)
    value = (
        Fraction(math.perm(n_hat, shape.h))
        * _rho_product(shape, d)
        / (shape.authe * lambda_hat**shape.h * _odd_falling(d.half_edges, shape.ell))
    )
    return value if exact else float(value)


def xi_bound_simple(
    H: Union[Fragment, Multigraph], d: DegreeSequence, exact: bool = False
) -> Real:
    """The weaker bound n^h ∏ ρ_{n,i}^{h_i} / (authe(H) ∏_{i=1}^{ℓ} (m_n − 2i + 1))."""
    shape = _shape(H)
    if 2 * shape.ell > d.half_edges:
        return Fraction(0) if exact else 0.0
    value = (
        Fraction(d.n**shape.h)
        * _rho_product(shape, d)
        / (shape.authe * _odd_falling(d.half_edges, shape.ell))
    )
    return value if exact else float(value)


def expected_loops(d: DegreeSequence, exact: bool = False) -> Real:
    """E[X_{n,1}] = ½ ρ_{n,2} / (ρ_{n,1} − 1/n) = Σ_v C(d_v, 2) / (m_n − 1)."""
    m = d.half_edges
    if m < 2:
        return Fraction(0) if exact else 0.0
    value = Fraction(factorial_moment(d, 2, exact=True)) * d.n / (2 * (m - 1))
    return value if exact else float(value)


# Auxiliary inequalities used by the copy-count bounds


@dataclass(frozen=True, slots=True)
class AuxCheck:
    lhs: Fraction
    rhs: Fraction

    @property
    def holds(self) -> bool:
        return self.lhs >= self.rhs


def aux_inequality(alphas: Sequence[int], betas: Sequence[int]) -> AuxCheck:
    """
    ∏_i ∏_{j<β_i} α_i/(α_i − j)  ≥  ∏_{j<β−k+1} α/(α − j)
    for positive integers α_i ≥ β_i, with α = Σα_i and β = Σβ_i.
    """
    if len(alphas) != len(betas) or not alphas:
        raise ValidationError("alphas and betas must be non-empty and equally long")
    if any(b < 1 or a < b for a, b in zip(alphas, betas)):
        raise ValidationError("need positive integers with alpha_i >= beta_i")
    k = len(alphas)
    alpha = sum(alphas)
    beta = sum(betas)
    lhs = Fraction(1)
    for a, b in zip(alphas, betas):
        lhs *= Fraction(a**b, math.perm(a, b))
    span = beta - k + 1
    rhs = Fraction(alpha**span, math.perm(alpha, span))
    return AuxCheck(lhs=lhs, rhs=rhs)


@dataclass(frozen=True, slots=True)
class RatioSup:
    N: int
    delta: int
    small: float  # sup over 1 <= a < Δ of ln(N^a (N−a)!/N!)/a
    large: float  # sup over Δ <= a < N of ln(N^Δ (N−a)!/(N+Δ−a)!)/a
    argmax_large: int

    @property
    def value(self) -> float:
        return max(self.small, self.large)


def aux_ratio_sup(N: int, delta: Optional[int] = None) -> RatioSup:
    """Empirical ξ_N for the two Stirling-type bounds, with Δ = ⌊N^0.4⌋ by default."""
    if N < 2:
        raise ValidationError("N must be >= 2")
    D = delta if delta is not None else int(math.floor(N**0.4 + 1e-9))
    if not 1 <= D < N:
        raise ValidationError(f"delta must lie in [1, N) (got {D})")
    small = 0.0
    if D > 1:
        a = np.arange(1, D, dtype=np.float64)
        vals = (a * math.log(N) + gammaln(N - a + 1) - gammaln(N + 1)) / a
        small = float(vals.max())
    a = np.arange(D, N, dtype=np.float64)
    vals = (D * math.log(N) + gammaln(N - a + 1) - gammaln(N + D - a + 1)) / a
    idx = int(np.argmax(vals))
    return RatioSup(N=N, delta=D, small=small, large=float(vals[idx]), argmax_large=int(a[idx]))


@dataclass(slots=True)
class AppendixReport:
    samples: int
    violations: int
    min_ratio: Optional[Fraction]  # smallest lhs/rhs seen; 1 at equality
    sups: List[RatioSup] = field(default_factory=list)

    @property
    def decreasing(self) -> bool:
        values = [s.value for s in self.sups]
        return all(b < a for a, b in zip(values, values[1:]))

    @property
    def passed(self) -> bool:
        return self.violations == 0 and self.decreasing

    def to_json(self) -> Dict[str, object]:
        return {
            "samples": self.samples,
            "violations": self.violations,
            "min_ratio": float(self.min_ratio) if self.min_ratio is not None else None,
            "sups": [
                {"N": s.N, "delta": s.delta, "small": s.small, "large": s.large, "sup": s.value}
                for s in self.sups
            ],
            "decreasing": self.decreasing,
            "passed": self.passed,
        }


def check_appendix_inequalities(
    samples: int = 10_000,
    seed: int = 0,
    max_alpha: int = 50,
    max_k: int = 6,
    Ns: Sequence[int] = APPENDIX_NS,
) -> AppendixReport:
    """Exact random checks of the product inequality plus the ξ_N trend over Ns."""
    rng = np.random.default_rng(seed)
    violations = 0
    min_ratio: Optional[Fraction] = None
    for _ in range(samples):
        k = int(rng.integers(1, max_k + 1))
        alphas = rng.integers(1, max_alpha + 1, size=k)
        betas = [int(rng.integers(1, a + 1)) for a in alphas]
        check = aux_inequality([int(a) for a in alphas], betas)
        ratio = check.lhs / check.rhs
        if min_ratio is None or ratio < min_ratio:
            min_ratio = ratio
        if not check.holds:
            violations += 1
            logger.warning("inequality violated for alphas=%s betas=%s", alphas.tolist(), betas)
    report = AppendixReport(samples=samples, violations=violations, min_ratio=min_ratio)
    for N in Ns:
        report.sups.append(aux_ratio_sup(int(N)))
    logger.info("appendix checks: %d samples, %d violations", samples, violations)
    return report
