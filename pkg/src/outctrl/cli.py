"""Command-line front end.

Exit status:
    0  output controllable (analyze, compose) / steering verified (synthesize) /
       no unexplained disagreement (crosscheck)
    1  not output controllable; synthesize refuses
    2  criteria disagree (analyze) / unexplained disagreement found (crosscheck)
    3  usage, parse, dimension or numerical error
    4  synthesize produced a control that failed re-verification
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import controllability as ctl
from .errors import NotOutputControllable, OutctrlError
from .lti_model import KINDS, decode_vector, load_system, sample_systems, save_system, to_dict
from .numerics import DEFAULT_TOL, ToleranceConfig
from .synthesis import DEFAULT_GRID, SteeringProblem, min_norm_control, verify_steering

EXIT_POSITIVE = 0
EXIT_NEGATIVE = 1
EXIT_DISAGREE = 2
EXIT_ERROR = 3
EXIT_UNVERIFIED = 4

DEFAULT_KINDS = ("generic", "rank_deficient_C", "jordan")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage, which would read as "criteria disagree"
    def error(self, message):
        raise UsageError(message)


def _fmt(z: complex) -> str:
    z = complex(z)
    if z.imag == 0.0:
        return f"{z.real:.6g}"
    return f"{z.real:.6g}{z.imag:+.6g}j"


def _tolerance(args) -> ToleranceConfig:
    return ToleranceConfig(
        rank_rtol=args.tol_rank if args.tol_rank is not None else DEFAULT_TOL.rank_rtol,
        eig_cluster_atol=DEFAULT_TOL.eig_cluster_atol,
        psd_atol=args.tol_psd if args.tol_psd is not None else DEFAULT_TOL.psd_atol,
    )


def _vector_arg(text: str, name: str) -> np.ndarray:
    """Inline JSON array, or the path of a file holding one."""
    path = Path(text)
    if not text.lstrip().startswith("[") and path.exists():
        text = path.read_text()
    try:
        values = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{name}: not a JSON array or readable file: {exc}") from exc
    return decode_vector(values, name)


def _emit(args, report: dict, human: list[str]) -> None:
    if args.format == "json":
        print(json.dumps(report, indent=1, sort_keys=True))
    else:
        print("\n".join(human))


def _verdict_line(v: ctl.Verdict) -> str:
    line = f"  {v.criterion.value:<14} {v.decision:<24} rank {v.rank}/{v.required_rank}"
    if v.witness is not None:
        line += f"  witness z={_fmt(v.witness)}"
    return line


def _exit_for(report: ctl.CrossCheckReport) -> int:
    if not report.agree:
        return EXIT_DISAGREE
    return EXIT_POSITIVE if report.positive else EXIT_NEGATIVE


def cmd_analyze(args) -> int:
    system = load_system(args.system)
    tol = _tolerance(args)
    report = ctl.cross_check(system, args.time, tol)
    doc = {"system": str(args.system), "dims": list(system.dims), **report.to_dict()}
    human = [f"{args.system}: n={system.n} m={system.m} p={system.p}"]
    human += [_verdict_line(v) for v in report.verdicts.values()]
    human.append(f"  gramian min eigenvalue at t={args.time:g}: {report.gramian.min_eigenvalue:.6g}")
    human.append(f"  agree: {report.agree}")
    _emit(args, doc, human)
    return _exit_for(report)


def cmd_synthesize(args) -> int:
    system = load_system(args.system)
    tol = _tolerance(args)
    x0 = _vector_arg(args.x0, "x0") if args.x0 is not None else np.zeros(system.n)
    target = _vector_arg(args.target, "target")
    prob = SteeringProblem(system, x0, target, args.horizon)
    try:
        result = min_norm_control(prob, args.grid, tol)
    except NotOutputControllable as exc:
        doc = {"refused": True, "reason": str(exc), "verdict": exc.verdict.to_dict()}
        _emit(args, doc, [f"refused: {exc}"])
        return EXIT_NEGATIVE
    verified = verify_steering(prob, result, args.rtol)
    if args.out:
        Path(args.out).write_text(result.control.to_json() + "\n")
    doc = {"refused": False, "verified": verified, **result.to_dict()}
    if args.out:
        doc["control_file"] = str(args.out)
    human = [
        f"steered {args.system} to target at T={prob.T:g} on {result.control.grid} nodes",
        f"  residual {result.residual:.3e}  energy {result.energy:.6g}  verified: {verified}",
    ]
    if args.out:
        human.append(f"  control written to {args.out}")
    _emit(args, doc, human)
    return EXIT_POSITIVE if verified else EXIT_UNVERIFIED


def cmd_compose(args) -> int:
    systems = [load_system(path) for path in args.systems]
    tol = _tolerance(args)
    report = ctl.parallel_sufficiency_check(systems, tol)
    if args.out:
        save_system(report.connected, args.out)
    doc = {"members": [str(p) for p in args.systems], **report.to_dict()}
    if args.out:
        doc["composed_file"] = str(args.out)
    human = [f"parallel connection of {len(systems)} system(s): n={report.connected.n} m={report.connected.m} p={report.connected.p}"]
    for path, v in zip(args.systems, report.member_verdicts):
        human.append(f"  member {path}: {v.decision}")
    gap = "n/a" if np.isinf(report.min_gap) else f"{report.min_gap:.6g}"
    human.append(f"  spectra disjoint: {report.disjoint} (min gap {gap})")
    human.append(f"  disjoint-spectra guarantee applies: {report.applicable}")
    human.append(f"  connected system: {report.connected_verdict.decision}")
    _emit(args, doc, human)
    return EXIT_POSITIVE if report.connected_verdict.positive else EXIT_NEGATIVE


def run_crosscheck(
    seed: int,
    samples: int,
    max_dims=(6, 4, 4),
    kinds=DEFAULT_KINDS,
    t: float = ctl.DEFAULT_HORIZON,
    tol: ToleranceConfig = DEFAULT_TOL,
) -> dict:
    """Cross-check the three output criteria on a seeded batch of random systems.

    A disagreement is escaped when some criterion's decisive value lies
    within a factor 10 of its threshold.
    """
    counts = {"agree": 0, "disagree": 0, "escaped": 0, "unexplained": 0}
    decisions = {"output_controllable": 0, "not_output_controllable": 0, "disagree": 0}
    per_kind: dict[str, dict[str, int]] = {}
    dumps = []
    for sample in sample_systems(seed, samples, tuple(max_dims), tuple(kinds)):
        report = ctl.cross_check(sample.system, t, tol)
        bucket = per_kind.setdefault(sample.kind, {"samples": 0, "positive": 0, "negative": 0, "disagree": 0})
        bucket["samples"] += 1
        if report.agree:
            counts["agree"] += 1
            label = "output_controllable" if report.positive else "not_output_controllable"
            decisions[label] += 1
            bucket["positive" if report.positive else "negative"] += 1
            continue
        counts["disagree"] += 1
        decisions["disagree"] += 1
        bucket["disagree"] += 1
        escaped = report.near_boundary(10.0)
        counts["escaped" if escaped else "unexplained"] += 1
        dumps.append(
            {
                "index": sample.index,
                "kind": sample.kind,
                "seed": sample.seed,
                "dims": list(sample.system.dims),
                "escaped": escaped,
                "verdicts": {c.value: v.to_dict() for c, v in report.verdicts.items()},
                "system": to_dict(sample.system),
            }
        )
    return {
        "seed": seed,
        "samples": samples,
        "max_dims": list(max_dims),
        "kinds": list(kinds),
        "t": t,
        "tolerance": tol.to_dict(),
        "counts": counts,
        "decisions": decisions,
        "per_kind": {k: per_kind[k] for k in sorted(per_kind)},
        "disagreements": sorted(dumps, key=lambda d: d["index"]),
    }


def cmd_crosscheck(args) -> int:
    if args.samples < 1:
        raise UsageError("--samples must be >= 1")
    try:
        dims = tuple(int(x) for x in args.dims.split(","))
    except ValueError as exc:
        raise UsageError(f"--dims expects N,M,P: {exc}") from exc
    if len(dims) != 3 or min(dims) < 1:
        raise UsageError("--dims expects three positive integers N,M,P")
    kinds = tuple(k.strip() for k in args.kinds.split(",") if k.strip())
    bad = [k for k in kinds if k not in KINDS]
    if bad or not kinds:
        raise UsageError(f"--kinds must be drawn from {', '.join(KINDS)}")
    summary = run_crosscheck(args.seed, args.samples, dims, kinds, args.time, _tolerance(args))
    if args.out:
        Path(args.out).write_text(json.dumps(summary, indent=1, sort_keys=True) + "\n")
    c = summary["counts"]
    human = [
        f"crosscheck seed={args.seed} samples={args.samples} dims<={args.dims} kinds={','.join(kinds)} t={args.time:g}",
        f"  agree {c['agree']}  disagree {c['disagree']} (escaped {c['escaped']}, unexplained {c['unexplained']})",
        "  decisions: " + "  ".join(f"{k} {v}" for k, v in summary["decisions"].items()),
    ]
    for kind, b in summary["per_kind"].items():
        human.append(f"  {kind:<28} " + "  ".join(f"{k} {v}" for k, v in b.items()))
    for d in summary["disagreements"]:
        tags = " ".join(f"{k}={v['decision']}" for k, v in d["verdicts"].items())
        human.append(f"  #{d['index']} {d['kind']} seed={d['seed']} dims={d['dims']} escaped={d['escaped']} {tags}")
    _emit(args, summary, human)
    return EXIT_DISAGREE if c["unexplained"] else EXIT_POSITIVE


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--tol-rank", type=float, default=None, help="relative rank tolerance")
    common.add_argument("--tol-psd", type=float, default=None, help="Gramian positivity floor")
    common.add_argument("--format", choices=("human", "json"), default="human")

    parser = _Parser(prog="outctrl", description="Output controllability analysis for LTI systems.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("analyze", parents=[common], help="run the Kalman, Hautus and Gramian output tests")
    p.add_argument("system")
    p.add_argument("--time", "-t", type=float, default=ctl.DEFAULT_HORIZON, help="Gramian horizon")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("synthesize", parents=[common], help="minimum-energy control reaching a target output")
    p.add_argument("system")
    p.add_argument("--x0", default=None, help="initial state (JSON array or file); zero by default")
    p.add_argument("--target", required=True, help="target output (JSON array or file)")
    p.add_argument("--horizon", "-T", type=float, default=1.0)
    p.add_argument("--grid", type=int, default=DEFAULT_GRID, help="node count, 4k+1")
    p.add_argument("--rtol", type=float, default=1e-6, help="verification tolerance")
    p.add_argument("--out", default=None, help="write the control signal JSON here")
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("compose", parents=[common], help="parallel connection and the disjoint-spectra check")
    p.add_argument("systems", nargs="+")
    p.add_argument("--out", default=None, help="write the connected system JSON here")
    p.set_defaults(func=cmd_compose)

    p = sub.add_parser("crosscheck", parents=[common], help="randomized agreement check of the three criteria")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--dims", default="6,4,4", help="maximum N,M,P")
    p.add_argument("--kinds", default=",".join(DEFAULT_KINDS))
    p.add_argument("--time", "-t", type=float, default=ctl.DEFAULT_HORIZON)
    p.add_argument("--out", default=None, help="write the JSON summary here")
    p.set_defaults(func=cmd_crosscheck)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"outctrl: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (OutctrlError, OSError) as exc:
        print(f"outctrl: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
