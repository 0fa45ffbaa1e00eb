# bench/benchmark.py
from __future__ import annotations

import json
import time
from fractions import Fraction
from pathlib import Path
from typing import Callable, Dict, List

import pandas as pd

from cmlimits.cm import MatchingSampler, make_rng
from cmlimits.degseq import DegreeModel, realize
from cmlimits.fragcat import enumerate_fragments
from cmlimits.limits import solve_nu0
from cmlimits.multigraph import classify_components, count_cycles, extract_fragment

MODEL = DegreeModel({1: Fraction(6, 10), 2: Fraction(3, 10), 3: Fraction(1, 10)})


def _time(label: str, fn: Callable[[], object], repeat: int) -> Dict[str, object]:
    samples: List[int] = []
    for _ in range(repeat):
        t0 = time.perf_counter_ns()
        fn()
        samples.append(time.perf_counter_ns() - t0)
    s = pd.Series(samples, dtype="int64")
    return {
        "task": label,
        "repeat": repeat,
        "p50_ms": float(s.quantile(0.5)) / 1e6,
        "p90_ms": float(s.quantile(0.9)) / 1e6,
        "min_ms": float(s.min()) / 1e6,
    }


def main() -> None:
    rows = []
    for n in (10_000, 100_000, 1_000_000):
        d = realize(MODEL, n)
        sampler = MatchingSampler(d, make_rng(123, "bench", n))
        rows.append(_time(f"sample n={n}", sampler.sample, repeat=10))
        g = sampler.sample()
        rows.append(_time(f"count_cycles K=8 n={n}", lambda g=g: count_cycles(g, 8), repeat=5))
        rows.append(_time(f"classify n={n}", lambda g=g: classify_components(g), repeat=5))
        rows.append(_time(f"fragment n={n}", lambda g=g: extract_fragment(g), repeat=5))
    rows.append(_time("solve_nu0 tol=1e-12", lambda: solve_nu0(1e-12), repeat=20))
    for floor in (1e-4, 1e-6):
        rows.append(_time(f"catalogue floor={floor:g}",
                          lambda floor=floor: enumerate_fragments(MODEL, floor), repeat=3))

    Path("results").mkdir(parents=True, exist_ok=True)
    summary = pd.DataFrame(rows)
    summary.to_csv("results/benchmark_summary.csv", index=False)
    print(json.dumps({"benchmark": rows}, indent=2))


if __name__ == "__main__":
    main()
