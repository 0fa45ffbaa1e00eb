# cmlimits/harness.py
from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import stats

from .branching import expected_component_size
from .cm import MatchingSampler, enumerate_matchings, get_statistic, make_rng
from .degseq import DegreeModel, DegreeSequence, heavy_tail_sequence, realize
from .fragcat import FragmentCatalogue, enumerate_fragments
from .limits import (
    expected_loops,
    expected_total_cycles,
    prob_simple_limit,
    q_value,
    xi,
)
from .metrics import (
    covariance_z,
    frequency_table,
    proportion_stderr,
    summarize,
    tv_distance,
    z_score,
)
from .models import ComponentClass, SupercriticalError, ValidationError, Variant
from .multigraph import EMPTY_FRAGMENT_CODE, classify_components, count_cycles, extract_fragment

logger = logging.getLogger(__name__)

REPORT_SCHEMA = "cmlimits.report/1"


@dataclass(slots=True)
class ExperimentSpec:
    experiment: str
    model: Optional[DegreeModel] = None
    degrees: Optional[List[int]] = None
    ns: List[int] = field(default_factory=lambda: [5000])
    trials: int = 2000
    seed: int = 0
    statistics: List[str] = field(default_factory=lambda: ["multigraph"])
    K: int = 4
    z_bound: float = 3.0
    tv_bound: float = 0.02
    tv_bound_simple: float = 0.04
    rel_tol: float = 0.05
    dispersion_band: Tuple[float, float] = (0.8, 1.2)
    max_complex_freq: float = 0.01
    top_m: int = 20
    catalogue_floor: float = 1e-6
    chi2_alpha: float = 1e-3
    hub_exponent: float = 0.4
    hub_count_exponent: float = 0.5
    workers: int = 1
    experiment_id: Optional[str] = None

    def __post_init__(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ValidationError(
                f"unknown experiment {self.experiment!r}; choose from {sorted(EXPERIMENTS)}"
            )
        if self.trials < 1:
            raise ValidationError("trials must be >= 1")
        if not self.ns or any(n < 1 for n in self.ns):
            raise ValidationError("ns must be a non-empty list of positive sizes")
        if (self.model is None) == (self.degrees is None):
            raise ValidationError("give exactly one of model or degrees")
        if self.K < 1 or self.top_m < 1 or self.workers < 1:
            raise ValidationError("K, top_m and workers must be >= 1")
        for name in self.statistics:
            get_statistic(name)
        if self.experiment_id is None:
            self.experiment_id = self.experiment

    @classmethod
    def from_json(cls, path: str | Path) -> "ExperimentSpec":
        data: Dict[str, Any] = json.loads(Path(path).read_text(encoding="utf-8"))
        model = data.pop("model", None)
        if isinstance(model, str):
            model = DegreeModel.from_json(Path(path).parent / model)
        elif isinstance(model, dict):
            model = DegreeModel.from_mapping(model["lambdas"], model.get("truncation"))
        if "dispersion_band" in data:
            data["dispersion_band"] = tuple(data["dispersion_band"])
        try:
            return cls(model=model, **data)
        except TypeError as exc:
            raise ValidationError(f"{path}: {exc}") from exc

    def sequence(self, n: int) -> DegreeSequence:
        if self.degrees is not None:
            return DegreeSequence(np.asarray(self.degrees))
        assert self.model is not None
        return realize(self.model, n)

    def to_json(self) -> Dict[str, Any]:
        out = {k: v for k, v in asdict(self).items() if k != "model"}
        out["dispersion_band"] = list(self.dispersion_band)
        if self.model is not None:
            out["model"] = self.model.to_json()
        return out


@dataclass(slots=True)
class ReportRow:
    statistic: str
    empirical: Optional[float]
    theoretical: Optional[float]
    anchor: str
    stderr: Optional[float] = None
    z: Optional[float] = None
    passed: Optional[bool] = None  # None for descriptive rows
    n: Optional[int] = None


@dataclass(slots=True)
class Report:
    experiment: str
    spec: ExperimentSpec
    rows: List[ReportRow] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed is not False for r in self.rows)

    def add(self, row: ReportRow) -> None:
        self.rows.append(row)

    def row(self, statistic: str, n: Optional[int] = None) -> ReportRow:
        for r in self.rows:
            if r.statistic == statistic and (n is None or r.n == n):
                return r
        raise KeyError(statistic)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([asdict(r) for r in self.rows])

    def to_json(self) -> Dict[str, Any]:
        return {
            "schema": REPORT_SCHEMA,
            "experiment": self.experiment,
            "spec": self.spec.to_json(),
            "rows": [{k: _finite(v) for k, v in asdict(r).items()} for r in self.rows],
            "passed": self.passed,
        }


def _finite(value: Any) -> Any:
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def _row(
    statistic: str,
    empirical: float,
    theoretical: float,
    anchor: str,
    stderr: float,
    z_bound: float,
    n: Optional[int] = None,
) -> ReportRow:
    z = z_score(empirical, theoretical, stderr)
    return ReportRow(statistic, empirical, theoretical, anchor, stderr, z, abs(z) <= z_bound, n)


def _run_trials(
    fn: Callable[[Tuple[Any, ...]], Any], jobs: Sequence[Tuple[Any, ...]], workers: int
) -> List[Any]:
    """Results in job order, inline or through a process pool."""
    if workers <= 1:
        return [fn(job) for job in jobs]
    chunk = max(1, len(jobs) // (workers * 8))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs, chunksize=chunk))


# Cycle law


def _cycle_trial(job: Tuple[DegreeSequence, int, str, int, int, int]) -> Dict[str, Any]:
    d, seed, exp_id, n, t, K = job
    g = MatchingSampler(d, make_rng(seed, exp_id, n, t)).sample()
    counts = count_cycles(g, max(K, g.n))
    report = classify_components(g)
    return {
        "X": list(counts.counts[:K]),
        "Z": counts.total,
        "simple": g.is_simple(),
        "acyclic": report.count(ComponentClass.TREE) == len(report.components),
    }


def run_cycle_law(spec: ExperimentSpec) -> Report:
    """Cycle counts against independent Poisson(ξ_k), plus simplicity and acyclicity."""
    if spec.model is None:
        raise ValidationError("cycle law needs a degree model")
    nu = spec.model.nu
    report = Report("cycle_law", spec)
    logger.info("cycle law: nu=%.6g ns=%s trials=%d", nu, spec.ns, spec.trials)
    for n in spec.ns:
        d = realize(spec.model, n)
        jobs = [(d, spec.seed, spec.experiment_id, n, t, spec.K) for t in range(spec.trials)]
        results = _run_trials(_cycle_trial, jobs, spec.workers)
        X = np.array([r["X"] for r in results], dtype=np.float64).reshape(len(results), spec.K)
        for k in range(1, spec.K + 1):
            s = summarize(X[:, k - 1])
            report.add(_row(f"E[X_{k}]", s.mean, xi(k, nu), "xi_k = nu^k/(2k)", s.stderr,
                            spec.z_bound, n))
            lo, hi = spec.dispersion_band
            report.add(ReportRow(f"Var[X_{k}]/E[X_{k}]", s.dispersion, 1.0, "Poisson: var = mean",
                                 passed=lo <= s.dispersion <= hi, n=n))
        for i in range(1, spec.K + 1):
            for j in range(i + 1, spec.K + 1):
                c = covariance_z(X[:, i - 1], X[:, j - 1])
                report.add(ReportRow(f"cov(X_{i},X_{j})", c["cov"], 0.0, "independent limits",
                                     c["stderr"], c["z"], abs(c["z"]) <= spec.z_bound, n))
        simple = np.array([r["simple"] for r in results], dtype=bool)
        acyclic = np.array([r["acyclic"] for r in results], dtype=bool)
        ps = float(simple.mean())
        report.add(_row("P(simple)", ps, prob_simple_limit(nu), "exp(-nu/2 - nu^2/4)",
                        proportion_stderr(prob_simple_limit(nu), simple.size), spec.z_bound, n))
        if nu < 1:
            pa = float(acyclic.mean())
            report.add(_row("P(acyclic)", pa, math.sqrt(1 - nu), "sqrt(1 - nu)",
                            proportion_stderr(math.sqrt(1 - nu), acyclic.size), spec.z_bound, n))
            if simple.any():
                pas = float(acyclic[simple].mean())
                report.add(_row("P(acyclic | simple)", pas, q_value(nu),
                                "sqrt(1 - nu) exp(nu/2 + nu^2/4)",
                                proportion_stderr(q_value(nu), int(simple.sum())), spec.z_bound, n))
            z = summarize([r["Z"] for r in results])
            target = expected_total_cycles(nu)
            rel = abs(z.mean - target) / target if target > 0 else abs(z.mean)
            report.add(ReportRow("E[Z]", z.mean, target, "-ln(1 - nu)/2", z.stderr,
                                 z_score(z.mean, target, z.stderr), rel <= spec.rel_tol, n))
    return report


# Fragment law


def _fragment_trial(job: Tuple[DegreeSequence, int, str, int, int]) -> Dict[str, Any]:
    d, seed, exp_id, n, t = job
    g = MatchingSampler(d, make_rng(seed, exp_id, n, t)).sample()
    report = classify_components(g)
    frag = extract_fragment(g)
    sizes = np.array([c.vertices for c in report.components], dtype=np.float64)
    return {
        "code": frag.code,
        "simple": g.is_simple(),
        "complex": report.complex_count > 0,
        "vertices": frag.vertex_count,
        "size_biased": float((sizes**2).sum() / g.n),
    }


def _top_tv(
    codes: Sequence[str], catalogue: FragmentCatalogue, m: int, variant: Variant
) -> float:
    freq = frequency_table(codes)
    support = [e.code for e in catalogue.top(m)]
    theory = {e.code: e.p(variant) for e in catalogue.top(m)}
    return tv_distance(freq.to_dict(), theory, support)


def run_fragment_law(spec: ExperimentSpec) -> Report:
    """Empirical fragment law against the catalogue; complex components must vanish."""
    if spec.model is None:
        raise ValidationError("fragment law needs a degree model")
    nu = spec.model.nu
    if nu >= 1:
        raise SupercriticalError(nu, "fragment law")
    multi = enumerate_fragments(spec.model, spec.catalogue_floor, Variant.MULTIGRAPH)
    simple_cat = enumerate_fragments(spec.model, spec.catalogue_floor, Variant.SIMPLE)
    report = Report("fragment_law", spec)
    logger.info("fragment law: nu=%.6g catalogue=%d", nu, len(multi))
    for n in spec.ns:
        d = realize(spec.model, n)
        jobs = [(d, spec.seed, spec.experiment_id, n, t) for t in range(spec.trials)]
        results = _run_trials(_fragment_trial, jobs, spec.workers)
        codes = [r["code"] for r in results]
        tv = _top_tv(codes, multi, spec.top_m, Variant.MULTIGRAPH)
        report.add(ReportRow(f"TV(fragment, top {spec.top_m})", tv, 0.0,
                             "p*(H) = sqrt(1-nu)/authe(H) prod (lambda_i i!/rho1)^h_i",
                             passed=tv <= spec.tv_bound, n=n))
        empty = float(np.mean([c == EMPTY_FRAGMENT_CODE for c in codes]))
        report.add(_row("P(empty fragment)", empty, math.sqrt(1 - nu), "sqrt(1 - nu)",
                        proportion_stderr(math.sqrt(1 - nu), len(codes)), spec.z_bound, n))
        complex_freq = float(np.mean([r["complex"] for r in results]))
        report.add(ReportRow("P(complex component)", complex_freq, 0.0, "no complex components",
                             proportion_stderr(complex_freq, len(results)), None,
                             complex_freq < spec.max_complex_freq, n))
        simple_codes = [r["code"] for r in results if r["simple"]]
        if simple_codes:
            tv_s = _top_tv(simple_codes, simple_cat, spec.top_m, Variant.SIMPLE)
            report.add(ReportRow(f"TV(fragment | simple, top {spec.top_m})", tv_s, 0.0,
                                 "p(G) = Q/aut(G) prod (lambda_i i!/rho1)^g_i",
                                 passed=tv_s <= spec.tv_bound_simple, n=n))
        size = summarize([r["size_biased"] for r in results])
        target = expected_component_size(spec.model)
        report.add(ReportRow("E[|C(v)|]", size.mean, target, "1 + rho1/(1 - nu)", size.stderr,
                             z_score(size.mean, target, size.stderr),
                             abs(size.mean - target) <= spec.rel_tol * target, n))
        big = float(np.mean([r["vertices"] >= 10 for r in results]))
        report.add(ReportRow("P(|Frag| >= 10)", big, None, "fragment size tail",
                             proportion_stderr(big, len(results)), n=n))
    return report


# Oracle equivalence


def _oracle_trial(job: Tuple[DegreeSequence, int, str, int, int, Tuple[str, ...]]) -> List[str]:
    d, seed, exp_id, n, t, names = job
    conf = MatchingSampler(d, make_rng(seed, exp_id, n, t)).sample_configuration()
    return [repr(get_statistic(name)(conf)) for name in names]


def run_oracle_equivalence(spec: ExperimentSpec) -> Report:
    """Sampler frequencies against exhaustive enumeration on a tiny sequence."""
    if spec.degrees is None:
        raise ValidationError("oracle equivalence needs an explicit degree sequence")
    d = spec.sequence(0)
    names = tuple(spec.statistics)
    exact = {name: enumerate_matchings(d, name) for name in names}
    n = d.n
    jobs = [(d, spec.seed, spec.experiment_id, n, t, names) for t in range(spec.trials)]
    results = _run_trials(_oracle_trial, jobs, spec.workers)
    report = Report("oracle_equivalence", spec)
    for col, name in enumerate(names):
        dist = exact[name]
        probs = {repr(k): float(p) for k, p in dist.probs.items()}
        observed = pd.Series([r[col] for r in results]).value_counts()
        zs: List[float] = []
        for outcome, p in sorted(probs.items()):
            freq = float(observed.get(outcome, 0)) / spec.trials
            row = _row(f"{name}={outcome}", freq, p, "exhaustive matching enumeration",
                       proportion_stderr(p, spec.trials), spec.z_bound, n)
            zs.append(abs(row.z or 0.0))
            report.add(row)
        unexpected = int(sum(c for k, c in observed.items() if k not in probs))
        keys = sorted(probs)
        if len(keys) > 1:
            f_obs = np.array([observed.get(k, 0) for k in keys], dtype=np.float64)
            f_exp = np.array([probs[k] for k in keys]) * f_obs.sum()
            chi = stats.chisquare(f_obs, f_exp)
            report.add(ReportRow(f"chi2({name})", float(chi.statistic), float(len(keys) - 1),
                                 "chi-square goodness of fit", None, None,
                                 float(chi.pvalue) >= spec.chi2_alpha and unexpected == 0, n))
        report.add(ReportRow(f"max|z|({name})", max(zs, default=0.0), 0.0,
                             "per-outcome z-scores", None, None,
                             max(zs, default=0.0) <= spec.z_bound and unexpected == 0, n))
    if "loops" in names:
        col = names.index("loops")
        loops = summarize([float(r[col]) for r in results])
        e_loops = float(expected_loops(d, exact=True))
        report.add(_row("E[X_1]", loops.mean, e_loops, "sum C(d_v,2)/(m_n - 1)", loops.stderr,
                        spec.z_bound, n))
    return report


# Loop divergence


def _loop_trial(job: Tuple[DegreeSequence, int, str, int, int]) -> bool:
    d, seed, exp_id, n, t = job
    g = MatchingSampler(d, make_rng(seed, exp_id, n, t)).sample()
    return g.loop_count > 0


def _loop_rate(spec: ExperimentSpec, d: DegreeSequence, tag: str, n: int) -> Tuple[float, float]:
    jobs = [(d, spec.seed, f"{spec.experiment_id}/{tag}", n, t) for t in range(spec.trials)]
    hits = np.array(_run_trials(_loop_trial, jobs, spec.workers), dtype=bool)
    p = float(hits.mean())
    return p, proportion_stderr(p, hits.size)


def run_loop_divergence(spec: ExperimentSpec) -> Report:
    """Loop probability of a hub-heavy family rises toward 1; a bounded control does not."""
    if spec.model is None:
        raise ValidationError("loop divergence needs a base degree model")
    report = Report("loop_divergence", spec)
    rates: List[Tuple[int, float, float]] = []
    for n in sorted(spec.ns):
        d = heavy_tail_sequence(n, spec.model, spec.hub_exponent, spec.hub_count_exponent)
        p, se = _loop_rate(spec, d, "heavy", n)
        e1 = float(expected_loops(d))
        logger.info("loop divergence n=%d: P(loop)=%.4f E[X_1]=%.3f", n, p, e1)
        report.add(ReportRow("P(loop), heavy tail", p, 1 - math.exp(-e1),
                             "1 - exp(-E[X_1]) at finite n", se, None, None, n))
        rates.append((n, p, se))
    if len(rates) > 1:
        increasing = all(b[1] > a[1] for a, b in zip(rates, rates[1:]))
        report.add(ReportRow("P(loop) increasing in n", float(increasing), 1.0,
                             "divergent second moment forces loops", passed=increasing))
        (_, p0, s0), (_, p1, s1) = rates[0], rates[-1]
        se = math.hypot(s0, s1)
        z = (p1 - p0) / se if se > 0 else math.inf
        report.add(ReportRow("P(loop) endpoint separation", p1 - p0, None,
                             "divergent second moment forces loops", se, z, z >= spec.z_bound))
    n_max = max(spec.ns)
    p, se = _loop_rate(spec, realize(spec.model, n_max), "control", n_max)
    control = 1 - math.exp(-xi(1, spec.model.nu))
    report.add(_row("P(loop), bounded control", p, control,
                    "1 - exp(-nu/2)", proportion_stderr(control, spec.trials), spec.z_bound,
                    n_max))
    return report


Runner = Callable[[ExperimentSpec], Report]

EXPERIMENTS: Dict[str, Runner] = {
    "cycle_law": run_cycle_law,
    "fragment_law": run_fragment_law,
    "oracle_equivalence": run_oracle_equivalence,
    "loop_divergence": run_loop_divergence,
}


def run_experiment(spec: ExperimentSpec) -> Report:
    return EXPERIMENTS[spec.experiment](spec)


def save_report(report: Report, out_dir: str | Path) -> Dict[str, str]:
    """Write <experiment>_report.json and <experiment>_report.csv; returns their paths."""
    base = Path(out_dir)
    base.mkdir(parents=True, exist_ok=True)
    json_path = base / f"{report.experiment}_report.json"
    json_path.write_text(json.dumps(report.to_json(), indent=2, sort_keys=True) + "\n",
                         encoding="utf-8")
    csv_path = base / f"{report.experiment}_report.csv"
    report.to_frame().to_csv(csv_path, index=False)
    return {"report_json": str(json_path), "report_csv": str(csv_path)}
