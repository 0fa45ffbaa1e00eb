# cmlimits/cli.py
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, Optional, Sequence

import pandas as pd

from .branching import sample_limit_fragment
from .cm import sample_cm, sample_simple
from .degseq import DegreeModel, DegreeSequence, load_degree_sequence, load_model, realize
from .fragcat import CatalogueConfig, enumerate_fragments
from .harness import EXPERIMENTS, ExperimentSpec, run_experiment, save_report
from .kakeya import DEFAULT_RESOLUTION, analyze, threshold_report
from .limits import LimitLaw, expected_total_cycles, p_acyc_series, solve_nu0
from .models import BudgetExceeded, ComponentClass, ValidationError, Variant
from .multigraph import Multigraph, classify_components, count_cycles, extract_fragment

logger = logging.getLogger("cmlimits")

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_INVALID = 2


def _u64(text: str) -> int:
    try:
        value = int(text, 0)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from exc
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return value


# Inputs and outputs


def _model(args: argparse.Namespace) -> DegreeModel:
    """The degree model; an explicit sequence is turned into its empirical law."""
    if args.model is not None:
        return load_model(args.model)
    if args.degrees is not None:
        return DegreeModel.empirical(load_degree_sequence(args.degrees))
    raise ValidationError("give --model or --degrees")


def _sequence(args: argparse.Namespace) -> DegreeSequence:
    if args.degrees is not None:
        return load_degree_sequence(args.degrees)
    if args.model is None:
        raise ValidationError("give --model or --degrees")
    if args.n is None:
        raise ValidationError("--n is required when sampling from --model")
    return realize(load_model(args.model), args.n)


def _emit_text(text: str, out: Optional[str]) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    path = Path(out)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    logger.info("wrote %s", path)


def _emit(
    payload: Dict[str, Any], args: argparse.Namespace, table: Optional[pd.DataFrame] = None
) -> None:
    if args.format == "csv":
        frame = table if table is not None else pd.DataFrame([payload])
        _emit_text(frame.to_csv(index=False), args.out)
    else:
        _emit_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", args.out)


def _census(g: Multigraph) -> Dict[str, int]:
    report = classify_components(g)
    return {cls.value: report.count(cls) for cls in ComponentClass}


# Subcommands


def run_sample(args: argparse.Namespace) -> None:
    d = _sequence(args)
    attempts = 1
    if args.simple:
        result = sample_simple(d, args.seed, args.max_tries)
        if result.graph is None:
            raise ValidationError(f"no simple graph in {args.max_tries} tries")
        g, attempts = result.graph, result.attempts
    else:
        g = sample_cm(d, args.seed)
    header = [
        f"# n={d.n}",
        f"# m_n={d.half_edges}",
        f"# seed={args.seed}",
    ]
    if args.simple:
        header.append(f"# attempts={attempts}")
    _emit_text("\n".join(header + g.edge_lines()) + "\n", args.out)


def run_cycles(args: argparse.Namespace) -> None:
    d = _sequence(args)
    g = sample_cm(d, args.seed)
    counts = count_cycles(g, args.K)
    law = LimitLaw.from_model(DegreeModel.empirical(d))
    xis = law.xis(args.K).tolist()
    table = pd.DataFrame({"k": range(1, args.K + 1), "X": list(counts.counts), "xi": xis})
    payload = {
        "n": d.n,
        "seed": args.seed,
        "nu": law.nu,
        "X": {str(k): x for k, x in counts.as_dict().items()},
        "xi": {str(k): x for k, x in zip(range(1, args.K + 1), xis)},
        "simple": g.is_simple(),
    }
    _emit(payload, args, table)


def run_fragment(args: argparse.Namespace) -> None:
    if args.limit:
        frag = sample_limit_fragment(_model(args), args.seed, simple=args.simple)
        payload: Dict[str, Any] = {"source": "limit", "seed": args.seed}
    else:
        d = _sequence(args)
        g = sample_cm(d, args.seed)
        frag = extract_fragment(g)
        payload = {"source": "sample", "n": d.n, "seed": args.seed, "components": _census(g)}
    payload.update(
        {
            "fragment": frag.code,
            "cycle_type": {str(k): a for k, a in frag.cycle_type.items()},
            "vertices": frag.vertex_count,
            "simple": frag.is_simple(),
        }
    )
    _emit(payload, args)


def run_limits(args: argparse.Namespace) -> None:
    law = LimitLaw.from_model(_model(args))
    nu = law.nu
    payload: Dict[str, Any] = {
        "nu": nu,
        "xi": {str(k): x for k, x in zip(range(1, args.K + 1), law.xis(args.K).tolist())},
        "P_simple": law.p_simple,
        "P_acyclic": law.p_acyc_multigraph,
        "Q": law.Q,
    }
    if nu < 1:
        payload["Q_series"] = p_acyc_series(nu)
        payload["E_Z"] = expected_total_cycles(nu)
    payload["threshold"] = threshold_report(nu).to_json()
    _emit(payload, args)


def run_catalogue(args: argparse.Namespace) -> None:
    variant = Variant(args.variant)
    config = CatalogueConfig(max_entries=args.max_entries)
    catalogue = enumerate_fragments(_model(args), args.floor, variant, config)
    if args.format == "csv":
        _emit_text(catalogue.to_frame().to_csv(index=False), args.out)
        return
    if args.out is not None:
        path = catalogue.to_jsonl(args.out)
        print(json.dumps({"saved": str(path), "entries": len(catalogue),
                          "tail_mass": catalogue.tail_mass}, indent=2))
        return
    frame = catalogue.to_frame()
    payload = {
        "floor": catalogue.floor,
        "variant": variant.value,
        "nu": catalogue.nu,
        "tail_mass": catalogue.tail_mass,
        "unseen_type_mass": catalogue.unseen_type_mass,
        "entries": frame.head(args.top).to_dict(orient="records"),
    }
    _emit(payload, args)


def run_kakeya(args: argparse.Namespace) -> None:
    model = _model(args)
    if args.threshold_only:
        _emit(threshold_report(model).to_json(), args)
        return
    result = analyze(model, args.resolution)
    payload = result.to_json()
    if args.format == "csv":
        table = pd.DataFrame(result.union.to_json(), columns=["lo", "hi"])
        _emit(payload, args, table)
        return
    _emit(payload, args)


def run_verify(args: argparse.Namespace) -> int:
    if args.spec is not None:
        spec = ExperimentSpec.from_json(args.spec)
    else:
        if args.experiment is None:
            raise ValidationError("give --spec or --experiment")
        kwargs: Dict[str, Any] = {"experiment": args.experiment}
        if args.model is not None:
            kwargs["model"] = load_model(args.model)
        if args.degrees is not None:
            kwargs["degrees"] = load_degree_sequence(args.degrees).tolist()
        if args.ns:
            kwargs["ns"] = args.ns
        spec = ExperimentSpec(**kwargs)
    if args.seed is not None:
        spec.seed = args.seed
    if args.trials is not None:
        spec.trials = args.trials
    spec.workers = args.workers
    logger.info("verify %s: seed=%d trials=%d", spec.experiment, spec.seed, spec.trials)
    report = run_experiment(spec)
    if args.out is not None:
        paths = save_report(report, args.out)
        print(json.dumps({"saved": paths, "passed": report.passed}, indent=2))
    elif args.format == "csv":
        _emit_text(report.to_frame().to_csv(index=False), None)
    else:
        _emit(report.to_json(), args)
    return EXIT_OK if report.passed else EXIT_INTERNAL


def run_nu0(args: argparse.Namespace) -> None:
    _emit({"nu0": solve_nu0(args.tol), "tol": args.tol}, args)


# Parser


def _common(seed_required: bool) -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    source = parent.add_mutually_exclusive_group()
    source.add_argument("--model", type=str, help="degree model JSON {\"lambdas\": {...}}")
    source.add_argument("--degrees", type=str, help="degree sequence, text or JSON counts")
    parent.add_argument("--seed", type=_u64, required=seed_required, default=None)
    parent.add_argument("--out", type=str, default=None)
    parent.add_argument("--format", choices=["json", "csv"], default="json")
    return parent


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cmlimits", description="Configuration model limit laws CLI"
    )
    parser.add_argument(
        "--log-level", default="WARNING", choices=["DEBUG", "INFO", "WARNING", "ERROR"]
    )
    sub = parser.add_subparsers(dest="cmd", required=True)
    stochastic = _common(seed_required=True)
    plain = _common(seed_required=False)

    p_sample = sub.add_parser("sample", parents=[stochastic], help="Sample a multigraph edge list")
    p_sample.add_argument("--n", type=int, default=None)
    p_sample.add_argument("--simple", action="store_true", help="reject until simple")
    p_sample.add_argument("--max-tries", type=int, default=1000)
    p_sample.set_defaults(func=run_sample)

    p_cycles = sub.add_parser("cycles", parents=[stochastic], help="Cycle counts of one sample")
    p_cycles.add_argument("--n", type=int, default=None)
    p_cycles.add_argument("--K", type=int, default=4)
    p_cycles.set_defaults(func=run_cycles)

    p_frag = sub.add_parser("fragment", parents=[stochastic], help="Fragment of one sample")
    p_frag.add_argument("--n", type=int, default=None)
    p_frag.add_argument("--limit", action="store_true", help="draw from the limit law instead")
    p_frag.add_argument("--simple", action="store_true", help="limit draw of the simple law")
    p_frag.set_defaults(func=run_fragment)

    p_limits = sub.add_parser("limits", parents=[plain], help="Closed-form limit quantities")
    p_limits.add_argument("--K", type=int, default=4)
    p_limits.set_defaults(func=run_limits)

    p_cat = sub.add_parser("catalogue", parents=[plain], help="Fragments above a floor")
    p_cat.add_argument("--floor", type=float, default=1e-6)
    p_cat.add_argument("--variant", choices=[v.value for v in Variant], default="multigraph")
    p_cat.add_argument("--max-entries", type=int, default=CatalogueConfig().max_entries)
    p_cat.add_argument("--top", type=int, default=50)
    p_cat.set_defaults(func=run_catalogue)

    p_kak = sub.add_parser("kakeya", parents=[plain], help="Partial-sum set and verdict")
    p_kak.add_argument("--resolution", type=float, default=DEFAULT_RESOLUTION)
    p_kak.add_argument("--threshold-only", action="store_true")
    p_kak.set_defaults(func=run_kakeya)

    p_verify = sub.add_parser("verify", parents=[plain], help="Run a validation experiment")
    p_verify.add_argument("--spec", type=str, default=None, help="experiment spec JSON")
    p_verify.add_argument("--experiment", choices=sorted(EXPERIMENTS), default=None)
    p_verify.add_argument("--ns", type=int, nargs="+", default=None)
    p_verify.add_argument("--trials", type=int, default=None)
    p_verify.add_argument("--workers", type=int, default=1)
    p_verify.set_defaults(func=run_verify)

    p_nu0 = sub.add_parser("nu0", help="Root of Q(nu) = 1/2")
    p_nu0.add_argument("--tol", type=float, default=1e-7)
    p_nu0.add_argument("--out", type=str, default=None)
    p_nu0.add_argument("--format", choices=["json", "csv"], default="json")
    p_nu0.set_defaults(func=run_nu0)
    return parser


def _fail(exc: BaseException) -> None:
    err = {"error": type(exc).__name__, "message": str(exc)}
    sys.stderr.write(json.dumps(err) + "\n")


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, args.log_level),
        stream=sys.stderr,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        code = args.func(args)
    except (ValidationError, BudgetExceeded) as exc:
        _fail(exc)
        return EXIT_INVALID
    except Exception as exc:
        logger.exception("internal failure in %s", args.cmd)
        _fail(exc)
        return EXIT_INTERNAL
    return EXIT_OK if code is None else int(code)


if __name__ == "__main__":
    raise SystemExit(main())
