# cmlimits/fragcat.py
"""
Limit fragment laws and their probability-ordered catalogue.

For a fragment H with cycle type a and degree census h,

    p*(H) = √(1−ν) / authe(H) · ∏_i w_i^{h_i},     w_i = λ_i i! / ρ₁
    p(G)  = Q(ν) / aut(G) · ∏_i w_i^{g_i}           G simple

Both factor over components: p*(H) = √(1−ν) ∏_C φ(C)^{c_C} / c_C! with
φ(C) = ∏_{v∈C} w_{deg v} / authe(C). Writing trees as Galton–Watson trees,
φ(C) = ν^k ∏_v P̃(T_v) / (s(C) e_k), where P̃/P̂ are unlabeled tree
probabilities under D̃/D̂, s(C) the cycle symmetry and e_k = 2 for k ≤ 2.
Every φ is below 1/2, so a fragment containing C has probability at most
base·φ(C); together with P̂(T) ≤ P̂(child) this bounds the search.
"""
from __future__ import annotations

import json
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .branching import OffspringModel
from .degseq import DegreeModel
from .limits import joint_cycle_prob, q_value, total_class_mass
from .models import (
    CatalogueBudgetExceeded,
    Law,
    SupercriticalError,
    ValidationError,
    Variant,
)
from .multigraph import Fragment, component_code, cycle_symmetry, tree_code

logger = logging.getLogger(__name__)

CycleType = Tuple[Tuple[int, int], ...]
ORDER_DIGITS = 12


@dataclass(slots=True)
class CatalogueConfig:
    max_trees: int = 200_000
    max_entries: int = 2_000_000
    residual_tol: float = 0.05
    max_refinements: int = 3
    refine_factor: float = 10.0

    def __post_init__(self) -> None:
        if self.max_trees < 1 or self.max_entries < 1:
            raise ValidationError("catalogue budgets must be positive")
        if not self.residual_tol > 0:
            raise ValidationError("residual_tol must be positive")
        if self.max_refinements < 0:
            raise ValidationError("max_refinements must be non-negative")
        if not self.refine_factor > 1:
            raise ValidationError("refine_factor must exceed 1")


def _weights(model: DegreeModel) -> Dict[int, float]:
    rho1 = model.rho1
    if rho1 <= 0:
        raise ValidationError("fragment laws need rho1 > 0")
    return {i: float(lam * math.factorial(i) / rho1) for i, lam in model.lambdas.items()}


def _require_subcritical(model: DegreeModel, what: str) -> float:
    nu = model.nu
    if nu >= 1:
        raise SupercriticalError(nu, what)
    return nu


def _census_product(census: Mapping[int, int], w: Mapping[int, float]) -> float:
    total = 1.0
    for i, h in census.items():
        total *= w.get(i, 0.0) ** h
    return total


def pstar(H: Fragment, model: DegreeModel) -> float:
    """Limit probability that the configuration model has fragment H."""
    nu = _require_subcritical(model, "p*(H)")
    w = _weights(model)
    return math.sqrt(1 - nu) / H.authe() * _census_product(H.degree_census, w)


def p_simple(G: Fragment, model: DegreeModel) -> float:
    """Limit probability that the simple random graph has fragment G."""
    if not G.is_simple():
        raise ValidationError(f"fragment {G.code} has loops or multiple edges")
    nu = _require_subcritical(model, "p(G)")
    w = _weights(model)
    return q_value(nu) / G.aut() * _census_product(G.degree_census, w)


def gamma(H: Fragment) -> int:
    """Number of lexicographically labeled fragments isomorphic to H."""
    numerator = 1
    for k, a in H.cycle_type.items():
        numerator *= math.factorial(a) * (2 * k) ** a
    for i, h in H.cycle_degree_census.items():
        numerator *= math.factorial(i - 2) ** h
    for i, h in H.tree_degree_census.items():
        numerator *= math.factorial(i - 1) ** h
    auth = H.authe()
    assert numerator % auth == 0, f"gamma({H.code}) is not an integer"
    return numerator // auth


def tree_weight(H: Fragment, model: DegreeModel) -> float:
    """∏ P(D̃ = i−2) over cycle vertices times ∏ P(D̂ = i−1) over tree vertices."""
    off = OffspringModel.from_model(model)
    total = 1.0
    for i, h in H.cycle_degree_census.items():
        total *= float(off.prob(Law.CYCLE_ROOT, i - 2)) ** h
    for i, h in H.tree_degree_census.items():
        total *= float(off.prob(Law.SIZE_BIASED, i - 1)) ** h
    return total


def class_sum(
    a: Mapping[int, int],
    model: Union[DegreeModel, float],
    variant: Variant = Variant.MULTIGRAPH,
) -> float:
    """Total limit mass of the fragments with cycle type a."""
    nu = model.nu if isinstance(model, DegreeModel) else float(model)
    return joint_cycle_prob(a, nu, variant)


def sandwich_index(p: float, nu: float, variant: Variant = Variant.SIMPLE) -> Optional[int]:
    """
    k with base·ν^k/2k >= p > base·ν^{k+1}/2(k+1), base = Q (simple) or √(1−ν).
    None when p lies above the first band.
    """
    if not p > 0:
        raise ValidationError("p must be positive")
    if not 0 < nu < 1:
        raise ValidationError("sandwich index needs 0 < nu < 1")
    base = q_value(nu) if variant is Variant.SIMPLE else math.sqrt(1 - nu)
    k = variant.min_cycle
    if p > base * nu**k / (2 * k):
        return None
    while base * nu ** (k + 1) / (2 * (k + 1)) >= p:
        k += 1
    return k


def _order_key(p: float) -> float:
    return float(f"{p:.{ORDER_DIGITS - 1}e}")


@dataclass(frozen=True, slots=True)
class FragmentProb:
    fragment: Fragment
    pstar: float
    psimple: Optional[float] = None

    def __post_init__(self) -> None:
        if (self.psimple is not None) != self.fragment.is_simple():
            raise ValidationError("psimple is present exactly for simple fragments")

    @property
    def code(self) -> str:
        return self.fragment.code

    def p(self, variant: Variant) -> float:
        if variant is Variant.MULTIGRAPH:
            return self.pstar
        assert self.psimple is not None, "simple catalogue holds a non-simple fragment"
        return self.psimple

    def to_json(self) -> Dict[str, object]:
        row: Dict[str, object] = {
            "code": self.code,
            "pstar": self.pstar,
            "cycle_type": {str(k): a for k, a in self.fragment.cycle_type.items()},
        }
        if self.psimple is not None:
            row["psimple"] = self.psimple
        return row


@dataclass(slots=True)
class FragmentCatalogue:
    """Fragments with probability >= floor, sorted by probability then code."""

    entries: List[FragmentProb]
    floor: float
    variant: Variant
    nu: float
    residuals: Dict[CycleType, float] = field(default_factory=dict)

    @property
    def probabilities(self) -> np.ndarray:
        return np.array([e.p(self.variant) for e in self.entries], dtype=np.float64)

    @property
    def tail_mass(self) -> float:
        """Class-sum mass over all cycle types minus Σ entries."""
        total = total_class_mass(self.nu, self.variant)
        return total - math.fsum(e.p(self.variant) for e in self.entries)

    @property
    def unseen_type_mass(self) -> float:
        """Mass of cycle types with no enumerated fragment."""
        seen = math.fsum(class_sum(dict(t), self.nu, self.variant) for t in self.residuals)
        return total_class_mass(self.nu, self.variant) - seen

    def __len__(self) -> int:
        return len(self.entries)

    def probability_of(self, code: str) -> Optional[float]:
        canonical = Fragment.from_code(code).code
        for e in self.entries:
            if e.code == canonical:
                return e.p(self.variant)
        return None

    def codes(self) -> List[str]:
        return [e.code for e in self.entries]

    def top(self, m: int) -> List[FragmentProb]:
        return self.entries[:m]

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for rank, e in enumerate(self.entries, start=1):
            ct = e.fragment.cycle_type
            rows.append(
                {
                    "rank": rank,
                    "code": e.code,
                    "p": e.p(self.variant),
                    "pstar": e.pstar,
                    "psimple": e.psimple,
                    "cycles": sum(ct.values()),
                    "cycle_type": json.dumps({str(k): a for k, a in ct.items()}),
                    "vertices": e.fragment.vertex_count,
                    "sandwich_k": (
                        sandwich_index(e.p(self.variant), self.nu, self.variant)
                        if 0 < self.nu < 1
                        else None
                    ),
                }
            )
        return pd.DataFrame(rows)

    def to_jsonl(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        header = {
            "floor": self.floor,
            "variant": self.variant.value,
            "nu": self.nu,
            "residuals": [
                {"cycle_type": {str(k): a for k, a in t}, "residual": r}
                for t, r in self.residuals.items()
            ],
        }
        lines = [json.dumps({"catalogue": header}, sort_keys=True)]
        lines += [json.dumps(e.to_json(), sort_keys=True) for e in self.entries]
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path

    @classmethod
    def from_jsonl(cls, path: Union[str, Path]) -> "FragmentCatalogue":
        lines = [ln for ln in Path(path).read_text(encoding="utf-8").splitlines() if ln.strip()]
        if not lines:
            raise ValidationError(f"{path}: empty catalogue file")
        header = json.loads(lines[0]).get("catalogue")
        if header is None:
            raise ValidationError(f"{path}: first line must be the catalogue header")
        entries = []
        for ln in lines[1:]:
            row = json.loads(ln)
            entries.append(
                FragmentProb(
                    fragment=Fragment.from_code(row["code"]),
                    pstar=float(row["pstar"]),
                    psimple=row.get("psimple"),
                )
            )
        residuals = {
            tuple(sorted((int(k), int(a)) for k, a in item["cycle_type"].items())): item["residual"]
            for item in header.get("residuals", [])
        }
        return cls(
            entries=entries,
            floor=float(header["floor"]),
            variant=Variant(header["variant"]),
            nu=float(header["nu"]),
            residuals=residuals,
        )


# Enumeration


@dataclass(frozen=True, slots=True)
class _Tree:
    code: str
    p: float


def _multisets(
    pool: Sequence[_Tree], j: int, coef: float, t: float
) -> Iterator[Tuple[List[str], float]]:
    """
    Multisets of j trees from pool (sorted by p desc) with
    coef · j!/∏c! · ∏p >= t, pruned on coef · j!/((j−r)! ∏_A c!) · ∏_A p.
    """
    chosen: List[str] = []

    def rec(start: int, r: int, bound: float, last: int, last_count: int) -> Iterator[float]:
        if r == j:
            yield bound
            return
        for idx in range(start, len(pool)):
            step = (j - r) * pool[idx].p
            if idx == last:
                nb = bound * step / (last_count + 1)
                if nb < t:
                    continue
                chosen.append(pool[idx].code)
                yield from rec(idx, r + 1, nb, idx, last_count + 1)
                chosen.pop()
            else:
                nb = bound * step
                if nb < t:
                    break
                chosen.append(pool[idx].code)
                yield from rec(idx, r + 1, nb, idx, 1)
                chosen.pop()

    for value in rec(0, 0, coef, -1, 0):
        yield list(chosen), value


def _grow_trees(
    pool: Sequence[_Tree], law: Mapping[int, float], t: float
) -> Dict[str, float]:
    out: Dict[str, float] = {}
    for j, coef in law.items():
        if coef < t:
            continue
        if j == 0:
            out[tree_code(())] = coef
            continue
        for children, value in _multisets(pool, j, coef, t):
            out[tree_code(children)] = value
    return out


def _sorted_pool(trees: Mapping[str, float]) -> List[_Tree]:
    return [_Tree(code, p) for code, p in sorted(trees.items(), key=lambda kv: (-kv[1], kv[0]))]


def enumerate_trees(law: Mapping[int, float], t: float, max_trees: int) -> List[_Tree]:
    """Unlabeled trees with P̂(T) >= t under the non-root law, by rounds of height."""
    trees: Dict[str, float] = {}
    while True:
        grown = _grow_trees(_sorted_pool(trees), law, t)
        if len(grown) > max_trees:
            raise CatalogueBudgetExceeded(f"more than {max_trees} trees above {t:.3g}")
        if len(grown) == len(trees):
            return _sorted_pool(grown)
        trees = grown


@dataclass(frozen=True, slots=True)
class _Component:
    code: str
    k: int
    phi: float


def _is_canonical(seq: Tuple[int, ...]) -> bool:
    k = len(seq)
    for order in (seq, seq[::-1]):
        for r in range(k):
            if order[r:] + order[:r] < seq:
                return False
    return True


def _components(
    roots: Sequence[_Tree], nu: float, k_min: int, tau: float
) -> List[_Component]:
    out: List[_Component] = []
    if not roots:
        return out
    k = k_min
    while nu**k >= tau:
        scale = nu**k
        seq: List[int] = []

        def rec(first: int, prod: float) -> None:
            pos = len(seq)
            if pos == k:
                ids = tuple(seq)
                if not _is_canonical(ids):
                    return
                codes = [roots[i].code for i in ids]
                sym = 1 if k == 1 else cycle_symmetry(codes)
                phi = scale * prod / (sym * (2 if k <= 2 else 1))
                if phi >= tau:
                    out.append(_Component(component_code(k, codes), k, phi))
                return
            cap = roots[first].p ** (k - pos - 1)
            for idx in range(first, len(roots)):
                if scale * prod * roots[idx].p * cap < tau:
                    break
                seq.append(idx)
                rec(first, prod * roots[idx].p)
                seq.pop()

        for f in range(len(roots)):
            if scale * roots[f].p ** k < tau:
                break
            seq.append(f)
            rec(f, roots[f].p)
            seq.pop()
        k += 1
    return out


def _fragments(
    comps: Sequence[_Component], tau: float, max_entries: int
) -> List[Tuple[Tuple[str, ...], float]]:
    out: List[Tuple[Tuple[str, ...], float]] = []
    chosen: List[str] = []

    def rec(start: int, cur: float, last: int, last_count: int) -> None:
        out.append((tuple(chosen), cur))
        if len(out) > max_entries:
            raise CatalogueBudgetExceeded(f"more than {max_entries} fragments above the floor")
        for idx in range(start, len(comps)):
            phi = comps[idx].phi
            if cur * phi < tau:
                break
            count = last_count + 1 if idx == last else 1
            nxt = cur * phi / count
            if nxt < tau:
                continue
            chosen.append(comps[idx].code)
            rec(idx, nxt, idx, count)
            chosen.pop()

    rec(0, 1.0, -1, 0)
    return out


def _component_pool(
    model: DegreeModel, nu: float, variant: Variant, tau: float, cfg: CatalogueConfig
) -> List[_Component]:
    """Every component with φ(C) >= tau, most likely first."""
    if nu <= 0 or tau > 1:
        return []
    off = OffspringModel.from_model(model)
    dhat = {j: float(p) for j, p in off.law(Law.SIZE_BIASED).items() if p > 0}
    dtilde = {j: float(p) for j, p in off.law(Law.CYCLE_ROOT).items() if p > 0}
    k_min = variant.min_cycle
    t_root = tau / nu**k_min
    c_tilde = max(j * p for j, p in dtilde.items())
    t_hat = t_root / c_tilde if c_tilde > 0 else t_root
    pool = enumerate_trees(dhat, t_hat, cfg.max_trees)
    roots = _sorted_pool(_grow_trees(pool, dtilde, t_root))
    logger.debug("trees: %d non-root, %d root", len(pool), len(roots))
    return sorted(_components(roots, nu, k_min, tau), key=lambda c: (-c.phi, c.code))


def _refine_residuals(
    model: DegreeModel,
    nu: float,
    variant: Variant,
    tau: float,
    cfg: CatalogueConfig,
    residuals: Mapping[CycleType, float],
) -> Dict[CycleType, float]:
    """
    Lower the component threshold by refine_factor until every cycle type is
    within residual_tol of its class sum. Fragments of type a built from the
    components with φ >= threshold carry base · ∏_k Φ_k^{a_k} / a_k!, Φ_k the
    summed φ of those components of length k.
    """
    base = q_value(nu) if variant is Variant.SIMPLE else math.sqrt(1 - nu)
    out = dict(residuals)
    pending = [t for t, r in out.items() if r >= cfg.residual_tol]
    for step in range(1, cfg.max_refinements + 1):
        if not pending:
            break
        threshold = tau / cfg.refine_factor**step
        phi_sum: Dict[int, float] = {}
        for comp in _component_pool(model, nu, variant, threshold, cfg):
            phi_sum[comp.k] = phi_sum.get(comp.k, 0.0) + comp.phi
        for t in pending:
            covered = base * math.prod(
                phi_sum.get(k, 0.0) ** a / math.factorial(a) for k, a in t
            )
            out[t] = min(out[t], class_sum(dict(t), nu, variant) - covered)
        pending = [t for t in pending if out[t] >= cfg.residual_tol]
        logger.debug("refinement %d at %.3g: %d cycle types open", step, threshold, len(pending))
    if pending:
        worst = max(pending, key=lambda t: out[t])
        raise CatalogueBudgetExceeded(
            f"cycle type {dict(worst)} keeps residual {out[worst]:.3g} >= "
            f"{cfg.residual_tol:.3g} after {cfg.max_refinements} refinements"
        )
    return out


def enumerate_fragments(
    model: DegreeModel,
    floor: float,
    variant: Variant = Variant.MULTIGRAPH,
    config: Optional[CatalogueConfig] = None,
) -> FragmentCatalogue:
    """
    Every fragment with limit probability >= floor, most likely first. Each cycle
    type present ends within residual_tol of its class sum, refining below the
    floor when needed; CatalogueBudgetExceeded when that fails.
    """
    cfg = config or CatalogueConfig()
    if not floor > 0:
        raise ValidationError("floor must be positive")
    nu = _require_subcritical(model, "fragment enumeration")
    q = q_value(nu)
    sqrt_part = math.sqrt(1 - nu)
    base = q if variant is Variant.SIMPLE else sqrt_part
    tau = floor / base

    comps = _component_pool(model, nu, variant, tau, cfg)
    logger.debug("components above floor: %d", len(comps))
    raw = _fragments(comps, tau, cfg.max_entries) if tau <= 1 else []
    entries = []
    for codes, cur in raw:
        frag = Fragment.from_components(codes)
        simple = frag.is_simple()
        entries.append(
            FragmentProb(fragment=frag, pstar=sqrt_part * cur, psimple=q * cur if simple else None)
        )
    entries.sort(key=lambda e: (-_order_key(e.p(variant)), e.code))

    by_type: Dict[CycleType, float] = {}
    for e in entries:
        key = tuple(sorted(e.fragment.cycle_type.items()))
        by_type[key] = by_type.get(key, 0.0) + e.p(variant)
    residuals = {t: class_sum(dict(t), nu, variant) - s for t, s in by_type.items()}
    residuals = _refine_residuals(model, nu, variant, tau, cfg, residuals)
    catalogue = FragmentCatalogue(
        entries=entries, floor=floor, variant=variant, nu=nu, residuals=residuals
    )
    logger.info(
        "catalogue: %d fragments above %.3g, tail %.3g", len(entries), floor, catalogue.tail_mass
    )
    return catalogue


def cycle_type_key(a: Mapping[int, int]) -> CycleType:
    return tuple(sorted((int(k), int(c)) for k, c in a.items() if c))


def type_counts(catalogue: FragmentCatalogue) -> Counter[CycleType]:
    return Counter(cycle_type_key(e.fragment.cycle_type) for e in catalogue.entries)
