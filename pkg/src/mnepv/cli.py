"""Command-line driver.

Subcommands cover the library surface: generic solves, numerical radius,
joint numerical radius, tensor rank-one approximation, dHDAE distance
bounds, stability classification of a supplied vector, and boundary traces
of the joint numerical range.  Exit codes: 0 success/converged, 1 input
error, 2 iteration limit reached.  MNEPV_LOG={error|info|debug} controls
logging verbosity on stderr.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from . import apps, io, linalg, solver
from .errors import MnepvError, NoConvergenceError, ParseError
from .problem import MNepvProblem, MonotoneFn, operator_L_rho, parse_monotone_fn, residual
from .vectors import normalize_unit

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_MAXITER = 2

logger = logging.getLogger("mnepv")


class _Parser(argparse.ArgumentParser):
    """argparse exits with code 2 on bad flags; the CLI contract is 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _add_common(p: argparse.ArgumentParser, starts_default: int = 100) -> None:
    p.add_argument("--tol", type=float, default=solver.DEFAULT_TOL)
    p.add_argument("--tol-acc", dest="tol_acc", type=float, default=solver.DEFAULT_TOL_ACC)
    p.add_argument("--max-iter", dest="max_iter", type=int, default=solver.DEFAULT_MAX_ITER)
    p.add_argument("--starts", type=int, default=starts_default)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.add_argument("--jobs", type=int, default=1)


def _add_problem_inputs(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mtx", action="append", default=[], metavar="PATH")
    p.add_argument("--fn", action="append", default=[], metavar="SPEC")


def _options_dict(args) -> dict:
    return {
        "tol": args.tol,
        "tol_acc": args.tol_acc,
        "max_iter": args.max_iter,
        "starts": args.starts,
        "jobs": args.jobs,
    }


def _solve_options(args) -> solver.SolveOptions:
    return solver.SolveOptions(tol=args.tol, tol_acc=args.tol_acc, max_iter=args.max_iter)


def _load_problem(args) -> MNepvProblem:
    if not args.mtx:
        raise ValueError("at least one --mtx file is required")
    mats = [io.read_matrix_market(p) for p in args.mtx]
    if not args.fn:
        fns = [MonotoneFn.identity()] * len(mats)
    elif len(args.fn) == len(mats):
        fns = [parse_monotone_fn(s) for s in args.fn]
    else:
        raise ValueError(
            f"got {len(args.fn)} --fn specs for {len(mats)} --mtx matrices "
            "(give one per matrix, or none for all-identity)"
        )
    return MNepvProblem(mats, fns)


def _read_vector(path) -> np.ndarray:
    arr = io.read_matrix_market(path)
    if arr.ndim == 2 and 1 in arr.shape:
        return arr.ravel()
    if arr.ndim == 1:
        return arr
    raise ValueError(f"{path}: expected a vector file (n-by-1), got shape {arr.shape}")


def _pick_start(problem: MNepvProblem, args) -> np.ndarray:
    policy = args.start
    if policy == "greedy":
        return solver.greedy_init(problem, args.starts, args.seed)
    if policy == "eig-a1":
        return linalg.largest_eigpair(problem.matrices[0])[1]
    if policy == "file":
        if not args.start_file:
            raise ValueError("--start file requires --start-file PATH")
        return normalize_unit(_read_vector(args.start_file))
    raise ValueError(f"unknown start policy {policy!r}")


def _emit(args, artifact: io.RunArtifact) -> None:
    if args.out:
        io.write_report(artifact, args.out, args.format)
        logger.info("wrote artifact to %s", args.out)


def _stability_of(problem, report):
    if report is None or not report.converged:
        return None
    return operator_L_rho(problem, report.x_star)


def cmd_solve(args) -> int:
    problem = _load_problem(args)
    x0 = _pick_start(problem, args)
    result = solver.multistart(problem, [x0], _solve_options(args), jobs=1)
    report = result.reports[0]
    artifact = io.make_artifact(
        "solve",
        problem.n,
        problem.m,
        args.seed,
        {**_options_dict(args), "start": args.start},
        result,
        stability=_stability_of(problem, result.best_report),
    )
    _emit(args, artifact)
    print(
        f"converged={report.converged} iterations={report.iterations} "
        f"lambda_star={report.lambda_star!r} F={report.f_star!r}"
    )
    return EXIT_OK if report.converged else EXIT_MAXITER


def _multistart_exit(result) -> int:
    return EXIT_OK if result.n_converged == len(result.reports) else EXIT_MAXITER


def cmd_numrad(args) -> int:
    if len(args.mtx) != 1:
        raise ValueError("numrad takes exactly one --mtx matrix")
    b = io.read_matrix_market(args.mtx[0])
    r, result = apps.numerical_radius(
        b, _solve_options(args), num_starts=args.starts, seed=args.seed, jobs=args.jobs
    )
    problem = apps.numrad_problem(b)
    artifact = io.make_artifact(
        "numrad",
        problem.n,
        problem.m,
        args.seed,
        _options_dict(args),
        result,
        stability=_stability_of(problem, result.best_report),
        extras={"r": r},
    )
    _emit(args, artifact)
    print(
        f"r={r!r} clusters={len(result.clusters)} "
        f"converged={result.n_converged}/{len(result.reports)}"
    )
    return _multistart_exit(result)


def cmd_jnumrad(args) -> int:
    if not args.mtx:
        raise ValueError("jnumrad requires at least one --mtx matrix")
    mats = [io.read_matrix_market(p) for p in args.mtx]
    r, result = apps.joint_numrad(
        mats, _solve_options(args), num_starts=args.starts, seed=args.seed, jobs=args.jobs
    )
    problem = MNepvProblem(mats, [MonotoneFn.identity()] * len(mats))
    artifact = io.make_artifact(
        "jnumrad",
        problem.n,
        problem.m,
        args.seed,
        _options_dict(args),
        result,
        stability=_stability_of(problem, result.best_report),
        extras={"r": r},
    )
    _emit(args, artifact)
    print(
        f"r={r!r} clusters={len(result.clusters)} "
        f"converged={result.n_converged}/{len(result.reports)}"
    )
    return _multistart_exit(result)


def cmd_tensor(args) -> int:
    if not args.tensor:
        raise ValueError("--tensor PATH is required")
    t = io.read_tensor_coo(args.tensor)
    res = apps.tensor_rank_one(
        t, _solve_options(args), num_starts=args.starts, seed=args.seed, jobs=args.jobs
    )
    artifact = io.make_artifact(
        "tensor",
        t.n,
        t.m,
        args.seed,
        _options_dict(args),
        res.result,
        extras={
            "mu": res.mu,
            "lambda": res.lam,
            "fit": res.fit,
            "z": [float(v) for v in res.z],
        },
    )
    _emit(args, artifact)
    print(f"mu={res.mu!r} lambda={res.lam!r} fit={res.fit!r}")
    return _multistart_exit(res.result)


def cmd_dhdae(args) -> int:
    if len(args.mtx) < 2:
        raise ValueError("dhdae needs --mtx J plus at least one --mtx B_i")
    j = io.read_matrix_market(args.mtx[0])
    bs = [io.read_matrix_market(p) for p in args.mtx[1:]]
    starts = None
    policy = args.start
    if policy == "file":
        if not args.start_file:
            raise ValueError("--start file requires --start-file PATH")
        starts = [normalize_unit(_read_vector(args.start_file))]
        policy = "eig-a1"  # unused when starts are explicit
    bound = apps.dhdae_distance(
        j,
        bs,
        _solve_options(args),
        start_policy=policy,
        starts=starts,
        num_starts=args.starts,
        seed=args.seed,
        jobs=args.jobs,
    )
    n = j.shape[0]
    artifact = io.make_artifact(
        "dhdae",
        n,
        len(bs) + 1,
        args.seed,
        {**_options_dict(args), "start": args.start},
        bound.result,
        extras={
            "d_est": bound.d_est,
            "delta_m": bound.delta_m,
            "f_star": bound.f_star,
            "f0": bound.f0,
        },
    )
    _emit(args, artifact)
    print(f"d_est={bound.d_est!r} delta_m={bound.delta_m!r}")
    return _multistart_exit(bound.result)


def cmd_stability(args) -> int:
    problem = _load_problem(args)
    if not args.vec:
        raise ValueError("--vec PATH (the candidate solution) is required")
    x = normalize_unit(_read_vector(args.vec))
    rep = operator_L_rho(problem, x)
    res = residual(problem, x)
    print(f"classification={rep.classification.value}")
    print(f"rho_L={rep.rho_L!r}")
    print(f"eigengap={rep.eigengap!r}")
    print(f"lambda_star={rep.lambda_star!r}")
    print(f"residual={res!r}")
    if args.out:
        artifact = io.RunArtifact(
            metadata={
                "kind": "stability",
                "n": problem.n,
                "m": problem.m,
                "seed": args.seed,
                "options": _options_dict(args),
            },
            runs=[],
            clusters=[],
            best_run=None,
            solution={
                "x_star": [[float(np.real(v)), float(np.imag(v))] for v in x],
                "lambda_star": rep.lambda_star,
                "f_star": None,
                "stability": {
                    "rho_L": rep.rho_L,
                    "classification": rep.classification.value,
                    "eigengap": rep.eigengap,
                    "lambda_star": rep.lambda_star,
                },
            },
        )
        io.write_report(artifact, args.out, "json")
    return EXIT_OK


def cmd_boundary(args) -> int:
    problem = _load_problem(args)
    if problem.m == 2:
        _, dirs = solver.theta_grid(args.grid)
    elif problem.m == 3:
        _, _, dirs = solver.sphere_grid(args.grid)
    else:
        raise ValueError(f"boundary traces need m in (2, 3), got m={problem.m}")
    pts = solver.supporting_points(problem, dirs)
    out = args.out or "boundary.csv"
    io.write_boundary(pts, out)
    print(f"wrote {len(pts)} supporting points to {out}")
    return EXIT_OK


def _build_parser() -> _Parser:
    parser = _Parser(prog="mnepv", description=__doc__)
    sub = parser.add_subparsers(dest="cmd", parser_class=_Parser)

    p = sub.add_parser("solve", help="solve one problem from a chosen start")
    _add_problem_inputs(p)
    p.add_argument("--start", choices=["greedy", "eig-a1", "file"], default="greedy")
    p.add_argument("--start-file", dest="start_file", default=None)
    _add_common(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("numrad", help="numerical radius of a square matrix")
    _add_problem_inputs(p)
    _add_common(p)
    p.set_defaults(func=cmd_numrad)

    p = sub.add_parser("jnumrad", help="joint numerical radius of Hermitian matrices")
    _add_problem_inputs(p)
    _add_common(p)
    p.set_defaults(func=cmd_jnumrad)

    p = sub.add_parser("tensor", help="best rank-one partial-symmetric approximation")
    p.add_argument("--tensor", default=None, metavar="PATH")
    _add_common(p)
    p.set_defaults(func=cmd_tensor)

    p = sub.add_parser("dhdae", help="dHDAE distance-to-singularity upper bound")
    _add_problem_inputs(p)
    p.add_argument("--start", choices=["greedy", "eig-a1", "file"], default="eig-a1")
    p.add_argument("--start-file", dest="start_file", default=None)
    _add_common(p)
    p.set_defaults(func=cmd_dhdae)

    p = sub.add_parser("stability", help="classify a supplied solution vector")
    _add_problem_inputs(p)
    p.add_argument("--vec", default=None, metavar="PATH")
    _add_common(p)
    p.set_defaults(func=cmd_stability)

    p = sub.add_parser("boundary", help="supporting-point trace of the numerical range")
    _add_problem_inputs(p)
    p.add_argument("--grid", type=int, default=100)
    _add_common(p)
    p.set_defaults(func=cmd_boundary)

    return parser


def main(argv=None) -> int:
    level = os.environ.get("MNEPV_LOG", "error").lower()
    logging.basicConfig(
        stream=sys.stderr,
        level={"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}.get(
            level, logging.ERROR
        ),
    )
    parser = _build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "cmd", None) is None:
        parser.print_usage(sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except NoConvergenceError as exc:
        print(f"mnepv: {exc}", file=sys.stderr)
        return EXIT_MAXITER
    except (ParseError, MnepvError, ValueError, OSError) as exc:
        print(f"mnepv: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
