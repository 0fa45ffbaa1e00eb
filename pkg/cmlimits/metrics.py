# cmlimits/metrics.py
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Hashable, Iterable, Mapping, Optional, Sequence

import numpy as np
import pandas as pd


@dataclass(slots=True)
class SampleSummary:
    mean: float
    var: float
    stderr: float
    n: int

    @property
    def dispersion(self) -> float:
        """Variance over mean; 1 for a Poisson count."""
        return self.var / self.mean if self.mean > 0 else math.nan


def summarize(values: Sequence[float]) -> SampleSummary:
    x = np.asarray(values, dtype=np.float64)
    n = int(x.size)
    if n == 0:
        return SampleSummary(mean=math.nan, var=math.nan, stderr=math.nan, n=0)
    var = float(x.var(ddof=1)) if n > 1 else 0.0
    return SampleSummary(mean=float(x.mean()), var=var, stderr=math.sqrt(var / n), n=n)


def proportion_stderr(p: float, n: int) -> float:
    return math.sqrt(max(p * (1 - p), 0.0) / n) if n > 0 else math.nan


def z_score(empirical: float, theoretical: float, stderr: float) -> float:
    if stderr > 0:
        return (empirical - theoretical) / stderr
    return 0.0 if math.isclose(empirical, theoretical, abs_tol=1e-12) else math.inf


def covariance_z(x: Sequence[float], y: Sequence[float]) -> Dict[str, float]:
    """Sample covariance with a delta-method standard error, z against 0."""
    a = np.asarray(x, dtype=np.float64)
    b = np.asarray(y, dtype=np.float64)
    n = a.size
    if n < 3:
        return {"cov": math.nan, "stderr": math.nan, "z": math.nan}
    prod = (a - a.mean()) * (b - b.mean())
    cov = float(prod.sum() / (n - 1))
    stderr = float(prod.std(ddof=1) / math.sqrt(n))
    return {"cov": cov, "stderr": stderr, "z": z_score(cov, 0.0, stderr)}


def frequency_table(outcomes: Iterable[Hashable]) -> pd.Series:
    """Relative frequencies, most common first."""
    s = pd.Series(list(outcomes), dtype=object)
    if s.empty:
        return pd.Series(dtype=np.float64)
    return s.value_counts(normalize=True, sort=True)


def tv_distance(
    empirical: Mapping[Hashable, float],
    theoretical: Mapping[Hashable, float],
    support: Optional[Sequence[Hashable]] = None,
) -> float:
    """
    Total variation on a fixed support plus an "other" bucket holding the rest
    of each distribution's mass. Without a support, the union of keys is used.
    """
    if support is None:
        keys = sorted(set(empirical) | set(theoretical), key=str)
    else:
        keys = list(support)
    e = np.array([empirical.get(k, 0.0) for k in keys], dtype=np.float64)
    t = np.array([theoretical.get(k, 0.0) for k in keys], dtype=np.float64)
    e_other = max(0.0, 1.0 - float(e.sum()))
    t_other = max(0.0, 1.0 - float(t.sum()))
    return 0.5 * (float(np.abs(e - t).sum()) + abs(e_other - t_other))

