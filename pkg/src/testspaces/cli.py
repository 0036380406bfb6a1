"""Command-line entry point: ``testspaces <verb> [files] [flags]``.

Exit status is 0 when the check passes, 1 when it fails (signalling found,
exchangeability violated, recovery residual too large, ...) and 2 for usage
or input errors.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import boxes
from .composite import (
    check_nonsignalling,
    full_nonsignalling_deviations,
    marginal,
    tensor_coordinates,
    tensor_reconstruct,
)
from .core import export_greechie, make_fig1, read_space, validate, write_space
from .definetti import (
    Mixture,
    check_exchangeable,
    generate_exchangeable,
    generate_prefix,
    posterior_update,
    recover_mixture,
)
from .documents import (
    joint_from_doc,
    load_json,
    mixture_from_doc,
    mixture_to_doc,
)
from .errors import (
    EmptyStateSpace,
    NotSymmetric,
    SignallingState,
    SpaceParseError,
    TestSpaceError,
    ZeroProbabilityObservation,
)
from .quantum import rebit_counterexample
from .statespace import State, build_frame, dimension, frame_to_doc, vertices

OK, FAIL, USAGE = 0, 1, 2
RECOVERY_RESIDUAL = 1e-7


class Output:
    def __init__(self, as_json: bool, stream=None):
        self.as_json = as_json
        self.stream = stream or sys.stdout

    def emit(self, doc: dict, lines: list[str]):
        if self.as_json:
            json.dump(doc, self.stream, indent=2, default=_jsonable)
            self.stream.write("\n")
        else:
            for line in lines:
                self.stream.write(line + "\n")


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not serialisable: {type(obj).__name__}")


def _read_space_file(path, check=True):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise SpaceParseError(f"cannot read file: {exc.strerror}", str(path))
    return read_space(text, check=check)


# -- verbs ------------------------------------------------------------------

def cmd_validate(args, out: Output) -> int:
    space = _read_space_file(args.file, check=False)
    problems = validate(space)
    if problems:
        out.emit({"valid": False, "violations": problems}, ["invalid:"] + [f"  {p}" for p in problems])
        return FAIL
    out.emit(
        {"valid": True, "outcomes": space.n_outcomes, "tests": space.n_tests},
        [f"valid: {space.n_outcomes} outcomes, {space.n_tests} tests"],
    )
    return OK


def cmd_dim(args, out: Output) -> int:
    space = _read_space_file(args.file)
    d = dimension(space)
    out.emit({"dimension": d}, [f"dimension: {d}"])
    return OK


def cmd_frame(args, out: Output) -> int:
    space = _read_space_file(args.file)
    frame = build_frame(space)
    doc = frame_to_doc(frame)
    lines = [f"d = {frame.d}, c = {frame.shift:.6g}"]
    for i, a in enumerate(frame.members):
        terms = ", ".join(f"{v:.6g}" for v in a.covector)
        lines.append(f"a{i + 1} = [{terms}]")
    out.emit(doc, lines)
    return OK


def cmd_greechie(args, out: Output) -> int:
    space = _read_space_file(args.file)
    dot = export_greechie(space)
    if args.output:
        Path(args.output).write_text(dot, encoding="utf-8")
    if out.as_json:
        out.emit({"dot": dot}, [])
    elif not args.output:
        out.stream.write(dot)
    return OK


def _ns_lines(report):
    if report.passed:
        return [f"nonsignalling: pass (worst deviation {report.worst:.3e})"]
    lines = ["nonsignalling: FAIL"]
    for v in report.violations:
        lines.append(
            "  systems {%s} affected by test choice on system {%s}: deviation %.3e"
            % (",".join(str(i + 1) for i in v.affected), ",".join(str(i + 1) for i in v.source), v.magnitude)
        )
    return lines


def cmd_check_ns(args, out: Output) -> int:
    path = Path(args.file)
    js = joint_from_doc(load_json(path), path.parent)
    report = check_nonsignalling(js, args.tol)
    out.emit(report.to_doc(), _ns_lines(report))
    return OK if report.passed else FAIL


def cmd_check_exchangeable(args, out: Output) -> int:
    prefix = []
    for f in args.files:
        path = Path(f)
        prefix.append(joint_from_doc(load_json(path), path.parent))
    report = check_exchangeable(prefix, args.tol)
    out.emit(report.to_doc(), report.lines())
    return OK if report.passed else FAIL


def _load_support(path, space):
    doc = load_json(path)
    if isinstance(doc, dict) and "components" in doc:
        return mixture_from_doc(doc, Path(path).parent).states
    if isinstance(doc, dict) and "states" in doc:
        try:
            return [State(space, p) for p in doc["states"]]
        except ValueError as exc:
            raise SpaceParseError(str(exc), f"{path}: /states")
    raise SpaceParseError("support file needs 'states' or 'components'", str(path))


def cmd_recover(args, out: Output) -> int:
    path = Path(args.file)
    doc = load_json(path)
    if isinstance(doc, dict) and "components" in doc:
        if args.n is None:
            raise SpaceParseError("a mixture input needs --n", str(path))
        js = generate_exchangeable(mixture_from_doc(doc, path.parent), args.n)
    else:
        js = joint_from_doc(doc, path.parent)
        if args.n is not None and args.n != js.n:
            raise SpaceParseError(f"--n {args.n} but the joint state has {js.n} systems", str(path))
    space = js.product.factors[0]
    support = _load_support(args.support, space) if args.support else None
    try:
        result = recover_mixture(js, support, n_random=args.random, seed=args.seed, tol=args.tol)
    except NotSymmetric as exc:
        out.emit({"error": str(exc), "clause": 1}, [str(exc)])
        return FAIL
    except SignallingState as exc:
        msg = f"exchangeability clause 2 (nonsignalling): {exc}"
        out.emit({"error": msg, "clause": 2}, [msg])
        return FAIL
    doc = result.to_doc()
    lines = [f"residual: {result.residual:.3e}", f"unique: {str(result.unique).lower()}"]
    for w, s in result.mixture.components:
        lines.append(f"  {w:.8f}  [{', '.join(f'{p:.6g}' for p in s.probs)}]")
    out.emit(doc, lines)
    return OK if result.residual <= RECOVERY_RESIDUAL else FAIL


def cmd_posterior(args, out: Output) -> int:
    mpath = Path(args.mixture)
    mixture = mixture_from_doc(load_json(mpath), mpath.parent)
    obs_doc = load_json(args.observations)
    items = obs_doc.get("observations") if isinstance(obs_doc, dict) else obs_doc
    if not isinstance(items, list):
        raise SpaceParseError("observations must be a list", str(args.observations))
    space = mixture.space
    observations = []
    for i, item in enumerate(items):
        loc = f"{args.observations}: /observations/{i}"
        try:
            test = int(item["test"])
            label = item["outcome"]
        except (KeyError, TypeError, ValueError):
            raise SpaceParseError("observation needs integer 'test' and 'outcome' label", loc)
        if label not in space.outcomes:
            raise SpaceParseError(f"unknown outcome {label!r}", loc)
        if not 0 <= test < space.n_tests:
            raise SpaceParseError(f"test index {test} out of range", loc)
        observations.append((test, space.index(label)))
    try:
        post = posterior_update(mixture, observations)
    except ZeroProbabilityObservation as exc:
        out.emit({"error": str(exc)}, [str(exc)])
        return FAIL
    except ValueError as exc:
        raise SpaceParseError(str(exc), str(args.observations))
    doc = mixture_to_doc(post)
    lines = [f"{len(observations)} observations"]
    for w, s in post.components:
        lines.append(f"  {w:.8f}  [{', '.join(f'{p:.6g}' for p in s.probs)}]")
    out.emit(doc, lines)
    return OK


# -- demos ------------------------------------------------------------------

def demo_pr_box(args, out: Output) -> int:
    pr = boxes.pr_box()
    sb = boxes.signalling_box()
    pr_report = check_nonsignalling(pr, args.tol)
    full = full_nonsignalling_deviations(pr)
    local = boxes.pr_box().product.factors[0]
    frame = build_frame(local)
    coords = tensor_coordinates(frame, pr, args.tol)
    roundtrip = float(np.max(np.abs(tensor_reconstruct(frame, coords, pr.product) - pr.tensor)))
    m1 = marginal(pr, [0], args.tol).tensor
    sb_report = check_nonsignalling(sb, args.tol)
    try:
        marginal(sb, [1], args.tol)
        blocked = False
    except SignallingState:
        blocked = True
    unaffected = marginal(sb, [0], args.tol).tensor
    passed = (
        pr_report.passed
        and max(full.values()) <= args.tol
        and roundtrip <= 1e-9
        and not sb_report.passed
        and blocked
    )
    doc = {
        "pr_box_nonsignalling": pr_report.to_doc(),
        "pr_box_marginal_1": m1,
        "frame_roundtrip_error": roundtrip,
        "signalling_box": sb_report.to_doc(),
        "signalling_marginal_2_blocked": blocked,
        "signalling_marginal_1": unaffected,
        "passed": passed,
    }
    lines = (
        ["PR box on process(2,2) x process(2,2):"]
        + ["  " + l for l in _ns_lines(pr_report)]
        + [
            f"  marginal on system 1: {np.round(m1, 12).tolist()}",
            f"  frame coordinates round trip error: {roundtrip:.3e}",
            "one-way signalling box:",
        ]
        + ["  " + l for l in _ns_lines(sb_report)]
        + [
            f"  marginal on system 2 refused: {blocked}",
            f"  marginal on system 1: {np.round(unaffected, 12).tolist()}",
        ]
    )
    out.emit(doc, lines)
    return OK if passed else FAIL


def demo_fig1(args, out: Output) -> int:
    space = make_fig1()
    d = dimension(space)
    verts = vertices(space)
    frame = build_frame(space)
    rng = np.random.default_rng(args.seed)
    picks = rng.choice(len(verts), size=2, replace=False)
    w = rng.dirichlet(np.ones(2))
    planted = Mixture(space, tuple((float(wk), verts[i]) for wk, i in zip(w, picks)))
    n = args.n or 3
    prefix = generate_prefix(planted, n)
    report = check_exchangeable(prefix, args.tol)
    result = recover_mixture(prefix[-1], tol=args.tol)
    passed = d == 5 and report.passed and result.residual <= RECOVERY_RESIDUAL
    doc = {
        "space": json.loads(write_space(space)),
        "dimension": d,
        "vertices": [v.probs for v in verts],
        "frame": frame_to_doc(frame),
        "exchangeable": report.to_doc(),
        "recovery": result.to_doc(),
        "greechie": export_greechie(space),
        "passed": passed,
    }
    lines = [
        f"space {space}",
        f"dimension: {d}",
        f"vertices: {len(verts)}",
        f"frame shift c = {frame.shift:.6g}",
        *report.lines(),
        f"recovery at n={n}: residual {result.residual:.3e}, unique {str(result.unique).lower()}",
    ]
    out.emit(doc, lines)
    return OK if passed else FAIL


def demo_rebit(args, out: Output) -> int:
    n = args.n or 2
    report = rebit_counterexample(n, args.grid)
    passed = (
        report.is_real
        and report.is_symmetric
        and report.trace_consistency <= 1e-9
        and report.embedding_deviation <= 1e-9
        and abs(report.correlator - 1.0) <= 1e-9
        and abs(report.best_real_correlator) <= 1e-9
        and report.recovered_maximally_mixed
        and report.recovery_residual <= 1e-9
    )
    doc = report.to_doc() | {"passed": passed}
    lines = [
        f"rebit sigma_y mixture, n={n}: real={report.is_real}, symmetric={report.is_symmetric}",
        f"  partial-trace consistency deviation: {report.trace_consistency:.3e}",
        f"  x/z statistics vs maximally mixed: {report.embedding_deviation:.3e}",
        f"  correlator Tr((sy x sy) w2): {report.correlator:.12f}",
        f"  best real product-mixture correlator (grid {report.grid}): {report.best_real_correlator:.12f}",
        f"  gap: {report.gap:.12f}",
        f"  x/z recovery: maximally mixed with weight {report.recovered_weight:.9f}, "
        f"residual {report.recovery_residual:.3e}",
    ]
    out.emit(doc, lines)
    return OK if passed else FAIL


DEMOS = {"pr-box": demo_pr_box, "fig1": demo_fig1, "rebit": demo_rebit}


def cmd_demo(args, out: Output) -> int:
    return DEMOS[args.name](args, out)


# -- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="machine-readable output")
    common.add_argument("--tol", type=float, default=1e-9, help="numerical tolerance")
    common.add_argument("--seed", type=int, default=42, help="random seed")

    parser = argparse.ArgumentParser(prog="testspaces", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("validate", parents=[common], help="check a test-space file")
    p.add_argument("file")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("dim", parents=[common], help="dimension of the state space span")
    p.add_argument("file")
    p.set_defaults(func=cmd_dim)

    p = sub.add_parser("frame", parents=[common], help="informationally complete frame")
    p.add_argument("file")
    p.set_defaults(func=cmd_frame)

    p = sub.add_parser("greechie", parents=[common], help="Greechie diagram as DOT")
    p.add_argument("file")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_greechie)

    p = sub.add_parser("check-ns", parents=[common], help="nonsignalling check of a joint state")
    p.add_argument("file")
    p.set_defaults(func=cmd_check_ns)

    p = sub.add_parser(
        "check-exchangeable", parents=[common], help="check joint states for n = 1..N"
    )
    p.add_argument("files", nargs="+", help="joint-state files in order of n")
    p.set_defaults(func=cmd_check_exchangeable)

    p = sub.add_parser("recover", parents=[common], help="recover a de Finetti mixture")
    p.add_argument("file", help="joint-state file, or a mixture file with --n")
    p.add_argument("--n", type=int)
    p.add_argument("--support", help="extra candidate states ('states' or mixture file)")
    p.add_argument("--random", type=int, default=0, help="random interior candidates")
    p.set_defaults(func=cmd_recover)

    p = sub.add_parser("posterior", parents=[common], help="Bayesian update of a mixture")
    p.add_argument("mixture")
    p.add_argument("observations")
    p.set_defaults(func=cmd_posterior)

    p = sub.add_parser("demo", parents=[common], help="built-in demonstrations")
    p.add_argument("name", choices=sorted(DEMOS))
    p.add_argument("--n", type=int)
    p.add_argument("--grid", type=int, default=16)
    p.set_defaults(func=cmd_demo)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    out = Output(args.json)
    try:
        return args.func(args, out)
    except SpaceParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE
    except (EmptyStateSpace, TestSpaceError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE


if __name__ == "__main__":
    sys.exit(main())
