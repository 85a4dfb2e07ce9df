"""Command-line front end: problem ingestion and one subcommand per capability.

Problem specs are JSON objects with ``decisions``, ``types``, ``prior``
(rationals as strings, aligned with ``types``) and ``utility`` (type ->
decision -> number).  Two specs ship with the package: ``counterexample.json``
(three single-peaked types, uniform prior) and ``binary.json``.

Exit codes: 0 success, 1 validation error, 2 regression/assertion failure,
3 resource cap exceeded.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from fractions import Fraction
from importlib.resources import files
from typing import Optional, Sequence

from .core import (
    EnumerationCapError,
    Message,
    PreferenceVector,
    Problem,
    ValidationError,
    tv_distance,
    validate_problem,
)
from .truthfulness import (
    compute_quota,
    is_approx_truthful,
    is_approx_truthful_star,
    is_permutation_truthful,
    lie_count,
    min_lie_count,
    permutation_witness,
    star_lie_bound,
)
from .optimize import (
    SocialChoiceFunction,
    best_response_bruteforce,
    best_response_transport,
    payoff,
    verify_counterexample,
)
from .sim import STRATEGY_NAMES, SimConfig, run_convergence, stats_to_csv

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_REGRESSION = 2
EXIT_CAP = 3

BUNDLED_SPECS = ("counterexample", "binary")


def bundled_spec_path(name: str) -> str:
    """Filesystem path of a bundled problem spec ("counterexample" or "binary")."""
    if name not in BUNDLED_SPECS:
        raise ValidationError(f"unknown bundled spec {name!r}; choose from {BUNDLED_SPECS}")
    return str(files("linkmech").joinpath(f"data/{name}.json"))


def load_bundled_problem(name: str) -> Problem:
    with open(bundled_spec_path(name), "r", encoding="utf-8") as fh:
        return validate_problem(json.load(fh))


def _load_problem(path: str) -> Problem:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read spec {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"spec {path} is not valid JSON: {exc}") from exc
    return validate_problem(raw)


def _parse_vector(text: str, problem: Problem, field: str) -> PreferenceVector:
    labels = [x.strip() for x in text.split(",") if x.strip()]
    if not labels:
        raise ValidationError(f"{field}: empty vector")
    unknown = sorted(set(labels) - set(problem.types))
    if unknown:
        raise ValidationError(f"{field}: unknown types {unknown}")
    return problem.vector(labels)


def _emit(text: str, output: Optional[str]) -> None:
    if output in (None, "-"):
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")
    else:
        with open(output, "w", encoding="utf-8") as fh:
            fh.write(text)


def _emit_json(obj, output: Optional[str]) -> None:
    _emit(json.dumps(obj, indent=2), output)


def _frac_str(x: Fraction) -> str:
    return str(Fraction(x))


def _jsonable_number(x):
    """Exact payoffs may be Fractions; render integers as ints, else floats."""
    if isinstance(x, Fraction):
        return int(x) if x.denominator == 1 else float(x)
    return x


def cmd_quota(args) -> int:
    problem = _load_problem(args.spec)
    quota = compute_quota(problem, args.K)
    dist = quota.distribution()
    _emit_json(
        {
            "K": args.K,
            "counts": quota.as_dict(),
            "distribution": {t: _frac_str(w) for t, w in dist.as_dict().items()},
            "tv_to_prior": _frac_str(tv_distance(problem.prior, dist)),
        },
        args.output,
    )
    return EXIT_OK


def cmd_audit(args) -> int:
    problem = _load_problem(args.spec)
    truth = _parse_vector(args.truth, problem, "truth")
    report = _parse_vector(args.report, problem, "report")
    if args.K is not None and args.K != truth.K:
        raise ValidationError(f"--K {args.K} does not match truth length {truth.K}")
    if report.K != truth.K:
        raise ValidationError(f"report length {report.K} != truth length {truth.K}")
    quota = compute_quota(problem, truth.K)
    message = Message(report, quota)  # names over/under-represented types on failure
    witness = permutation_witness(truth, message)
    verdicts = {
        "approx_truthful": is_approx_truthful(truth, message),
        "approx_truthful_star": is_approx_truthful_star(truth, message),
        "permutation_truthful": is_permutation_truthful(truth, message),
        "min_lies": min_lie_count(truth, quota),
        "lies": lie_count(truth, message),
        "star_bound": star_lie_bound(truth, quota),
        "witness": witness.to_json_dict(),
    }
    _emit_json(verdicts, args.output)
    return EXIT_OK


def cmd_best_response(args) -> int:
    problem = _load_problem(args.spec)
    truth = _parse_vector(args.truth, problem, "truth")
    if args.K is not None and args.K != truth.K:
        raise ValidationError(f"--K {args.K} does not match truth length {truth.K}")
    quota = compute_quota(problem, truth.K)
    f = SocialChoiceFunction.utility_argmax(problem)
    if args.method == "bruteforce":
        best = best_response_bruteforce(truth, f, problem, quota, cap=args.cap)
        out = {
            "method": "bruteforce",
            "payoff": _jsonable_number(payoff(truth, best[0], f, problem)),
            "messages": [list(m.entries) for m in best],
        }
    else:
        result = best_response_transport(truth, f, problem, quota)
        out = {
            "method": "transport",
            "payoff": _jsonable_number(result.payoff),
            "message": list(result.message.entries),
            "plan": result.plan.to_json_dict(),
        }
    _emit_json(out, args.output)
    return EXIT_OK


def _apply_utility_overrides(raw: dict, overrides: Sequence[str]) -> dict:
    """Apply ``u_<decision><type>=<value>`` overrides to a raw spec dict."""
    decisions = set(raw["decisions"])
    types = set(raw["types"])
    for text in overrides:
        if "=" not in text or not text.startswith("u_"):
            raise ValidationError(f"malformed utility override {text!r}, expected u_<decision><type>=<number>")
        key, _, value = text.partition("=")
        suffix = key[2:]
        matches = [
            (suffix[:i], suffix[i:])
            for i in range(1, len(suffix))
            if suffix[:i] in decisions and suffix[i:] in types
        ]
        if len(matches) != 1:
            raise ValidationError(f"cannot resolve override {key!r} to a (decision, type) pair")
        decision, typ = matches[0]
        try:
            number = float(value)
        except ValueError as exc:
            raise ValidationError(f"override {text!r}: {value!r} is not a number") from exc
        raw["utility"][typ][decision] = number
    return raw


def cmd_counterexample(args) -> int:
    with open(bundled_spec_path("counterexample"), "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    if args.utility:
        raw = _apply_utility_overrides(raw, args.utility)
    problem = validate_problem(raw)
    report = verify_counterexample(problem)
    _emit_json(report.to_json_dict(), args.output)
    return EXIT_OK if report.passed else EXIT_REGRESSION


def cmd_simulate(args) -> int:
    problem = _load_problem(args.spec)
    try:
        k_values = tuple(int(x) for x in args.K.split(","))
    except ValueError as exc:
        raise ValidationError(f"--K must be a comma-separated list of integers: {args.K!r}") from exc
    seed = args.seed
    if seed is None:
        env = os.environ.get("LINKED_SEED")
        seed = int(env) if env is not None else 0
    cfg = SimConfig(
        problem=problem,
        k_values=k_values,
        replications=args.reps,
        seed=seed,
        strategy=args.strategy,
        workers=args.workers,
    )
    stats = run_convergence(cfg)
    if args.format == "json":
        _emit_json({"stats": [s.to_json_dict() for s in stats]}, args.output)
    else:
        _emit(stats_to_csv(stats), args.output)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="linkmech",
        description="Quota-linked reporting: quotas, truthfulness audits, best responses, simulations.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, spec_required=True, formats=("json",)):
        if spec_required:
            p.add_argument("--spec", required=True, help="path to a problem-spec JSON file")
        p.add_argument("--output", default="-", help="output path, or - for stdout")
        p.add_argument("--format", choices=("json", "csv"), default=formats[0])
        p.set_defaults(allowed_formats=formats)

    p_quota = sub.add_parser("quota", help="rounded report budget for K linked copies")
    add_common(p_quota)
    p_quota.add_argument("--K", type=int, required=True)
    p_quota.set_defaults(fn=cmd_quota)

    p_audit = sub.add_parser("audit", help="judge a report against every truthfulness standard")
    add_common(p_audit)
    p_audit.add_argument("--truth", required=True, help="comma-separated type labels")
    p_audit.add_argument("--report", required=True, help="comma-separated type labels")
    p_audit.add_argument("--K", type=int, default=None)
    p_audit.set_defaults(fn=cmd_audit)

    p_best = sub.add_parser("best-response", help="payoff-maximizing message(s) for a truth vector")
    add_common(p_best)
    p_best.add_argument("--truth", required=True, help="comma-separated type labels")
    p_best.add_argument("--method", choices=("bruteforce", "transport"), default="transport")
    p_best.add_argument("--K", type=int, default=None)
    p_best.add_argument("--cap", type=int, default=10**6)
    p_best.set_defaults(fn=cmd_best_response)

    p_ce = sub.add_parser("counterexample", help="run the bundled deviation-incentive regression")
    add_common(p_ce, spec_required=False)
    p_ce.add_argument(
        "--utility",
        action="append",
        default=[],
        metavar="u_<decision><type>=<number>",
        help="override one utility entry of the bundled spec (repeatable)",
    )
    p_ce.set_defaults(fn=cmd_counterexample)

    p_sim = sub.add_parser("simulate", help="seeded convergence experiment over a K grid")
    add_common(p_sim, formats=("csv", "json"))
    p_sim.add_argument("--K", required=True, help="comma-separated K values, strictly increasing")
    p_sim.add_argument("--reps", type=int, default=1000)
    p_sim.add_argument("--seed", type=int, default=None, help="defaults to $LINKED_SEED or 0")
    p_sim.add_argument("--strategy", choices=STRATEGY_NAMES[:3], default="canonical-min-lie")
    p_sim.add_argument("--workers", type=int, default=1)
    p_sim.set_defaults(fn=cmd_simulate)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.format not in args.allowed_formats:
            raise ValidationError(
                f"{args.command}: only {'/'.join(args.allowed_formats)} output is available"
            )
        return args.fn(args)
    except EnumerationCapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAP
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
