"""Command-line front end: ``commpath gen | perturb | connect | trace | verify``."""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import __version__
from .linalg import (
    BudgetInfeasible,
    ConvergenceError,
    NotCommutingError,
    _greedy_assignment,
    check_variety,
    joint_diagonalize,
)
from .manifold import builtin_atlas, loose_joint_points
from .paths import connect
from .sampling import perturb_tuple, random_tuple
from .serialize import (
    SchemaError,
    dumps,
    instance_from_dict,
    instance_to_dict,
    load,
    path_from_dict,
    path_to_dict,
)
from .verify import Tolerances, certify_path

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_USAGE = 2


def _emit(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text + "\n")
    else:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")


def _tolerances(args) -> Tolerances:
    return Tolerances(algebraic=args.tol_alg, conjugation=args.tol_conj, manifold=args.tol_manifold)


def _default_m(variety: str, m: int | None) -> int:
    if variety.startswith("manifold:"):
        atlas = builtin_atlas(variety)
        if m is not None and m != atlas.m:
            raise ValueError(f"{variety} has ambient dimension {atlas.m}, got --m {m}")
        return atlas.m
    if m is None:
        return 2
    return m


def cmd_gen(args) -> int:
    variety = check_variety(args.variety)
    m = _default_m(variety, args.m)
    X = random_tuple(variety, args.n, m, args.seed)
    meta = {"command": "gen", "version": __version__, "n": args.n, "m": m}
    _emit(dumps(instance_to_dict([X], variety, args.seed, meta)), args.out)
    return EXIT_PASS


def cmd_perturb(args) -> int:
    tuples, doc = instance_from_dict(load(args.input))
    X = tuples[0]
    Y, dist = perturb_tuple(X, args.delta, args.seed, X.variety)
    meta = dict(doc.get("meta") or {})
    meta.update(command="perturb", delta=args.delta, perturb_seed=args.seed, distance=dist)
    _emit(dumps(instance_to_dict([X, Y], X.variety, doc.get("seed"), meta)), args.out)
    return EXIT_PASS


def _certificate_summary(cert) -> str:
    return dumps(
        {
            "verdict": cert.verdict,
            "failed_check": cert.failed_check,
            "epsilon": cert.epsilon_reported,
            "max_eth": float(np.max(cert.eth_to_base)),
        }
    )


def cmd_connect(args) -> int:
    tuples, _ = instance_from_dict(load(args.input))
    if len(tuples) != 2:
        raise SchemaError("connect needs an instance holding two tuples")
    X, Y = tuples
    try:
        path = connect(X, Y, X.variety, args.epsilon)
    except (BudgetInfeasible, NotCommutingError, ConvergenceError) as exc:
        reason = {"status": "infeasible", "error": type(exc).__name__, "reason": str(exc)}
        sys.stderr.write(dumps(reason) + "\n")
        return EXIT_FAIL
    cert = certify_path(path, _tolerances(args), args.samples, expected_start=X, expected_end=Y)
    _emit(dumps(path_to_dict(path)), args.out)
    if args.cert:
        _emit(dumps(cert.to_dict()), args.cert)
    sys.stderr.write(_certificate_summary(cert) + "\n")
    return EXIT_PASS if cert.passed else EXIT_FAIL


def cmd_verify(args) -> int:
    path = path_from_dict(load(args.input))
    cert = certify_path(path, _tolerances(args), args.samples)
    text = dumps(cert.to_dict())
    if args.cert:
        _emit(text, args.cert)
    else:
        _emit(text, args.out)
    return EXIT_PASS if cert.passed else EXIT_FAIL


def joint_points(comps: np.ndarray) -> np.ndarray:
    """Joint eigenvalues of a (nearly) commuting normal tuple, shape ``(n, m)``."""
    try:
        pts = joint_diagonalize(comps, tol=1e-6)[1].points
    except (NotCommutingError, ConvergenceError):
        pts = loose_joint_points(comps)
    return np.asarray(pts, dtype=complex)


def link_trace(path, samples: int) -> np.ndarray:
    """Spectral trajectories of ``path`` at ``samples`` uniform parameters.

    Returns rows ``(t, j, k, re, im)``: component ``j`` of trajectory ``k``.
    Trajectories are continued by greedy nearest-neighbour matching between
    consecutive samples.
    """
    if samples < 2:
        raise ValueError("need at least two samples")
    ts = np.linspace(0.0, 1.0, samples)
    rows = []
    prev = None
    for t in ts:
        pts = joint_points(path.eval(t).components)
        if prev is not None:
            perm = _greedy_assignment(np.linalg.norm(pts[:, None, :] - prev[None, :, :], axis=2))
            pts = pts[perm]
        prev = pts
        n, m = pts.shape
        for j in range(m):
            for k in range(n):
                rows.append((t, j, k, pts[k, j].real, pts[k, j].imag))
    return np.array(rows, dtype=float)


def cmd_trace(args) -> int:
    path = path_from_dict(load(args.input))
    rows = link_trace(path, args.samples)
    if args.format == "csv":
        lines = ["t,j,k,re,im"]
        for t, j, k, re, im in rows:
            lines.append(f"{t:.17g},{int(j)},{int(k)},{re:.17g},{im:.17g}")
        _emit("\n".join(lines), args.out)
    else:
        doc = {
            "kind": "trace",
            "variety": path.variety,
            "samples": args.samples,
            "n": path.start.n,
            "m": path.start.m,
            "rows": [[float(t), int(j), int(k), float(re), float(im)] for t, j, k, re, im in rows],
        }
        _emit(dumps(doc), args.out)
    return EXIT_PASS


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="commpath",
        description="Paths between nearby commuting matrix tuples.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, tolerances=False):
        p.add_argument("--out", default=None, help="output file (default: stdout)")
        if tolerances:
            p.add_argument("--samples", type=int, default=33, help="certificate samples")
            p.add_argument("--tol-alg", type=float, default=1e-10)
            p.add_argument("--tol-conj", type=float, default=1e-8)
            p.add_argument("--tol-manifold", type=float, default=1e-6)

    p = sub.add_parser("gen", help="random tuple on a variety")
    p.add_argument("--variety", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    common(p)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("perturb", help="add a nearby second tuple to an instance")
    p.add_argument("input")
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    common(p)
    p.set_defaults(func=cmd_perturb)

    p = sub.add_parser("connect", help="build and certify a path for a pair instance")
    p.add_argument("input")
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--cert", default=None, help="certificate output file")
    common(p, tolerances=True)
    p.set_defaults(func=cmd_connect)

    p = sub.add_parser("trace", help="export spectral trajectories along a path")
    p.add_argument("input")
    p.add_argument("--samples", type=int, default=101)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    common(p)
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("verify", help="certify a stored path")
    p.add_argument("input")
    p.add_argument("--cert", default=None, help="certificate output file")
    common(p, tolerances=True)
    p.set_defaults(func=cmd_verify)
    return parser


def _thread_limit():
    value = os.environ.get("COMMPATH_THREADS")
    if not value:
        return None
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=max(1, int(value)))


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        limiter = _thread_limit()
    except ValueError:
        parser.error("COMMPATH_THREADS must be a positive integer")
    try:
        return args.func(args)
    except (SchemaError, OSError) as exc:
        sys.stderr.write(f"commpath: error: {exc}\n")
        return EXIT_USAGE
    except ValueError as exc:
        sys.stderr.write(f"commpath: error: {exc}\n")
        return EXIT_USAGE
    finally:
        if limiter is not None:
            limiter.restore_original_limits()


if __name__ == "__main__":
    sys.exit(main())
