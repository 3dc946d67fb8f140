"""SCF iteration with optional inverse-iteration acceleration.

The plain iteration replaces x_k by a top eigenvector of H(x_k); the
objective F is then non-decreasing and every limit point solves the
nonlinear eigenproblem.  Near a solution an inverse step with the
symmetrized Jacobian and Rayleigh shift is attempted and kept only if it
strictly increases F, so the monotone certificate survives acceleration.

Also here: supporting points of the joint numerical range (one Hermitian
eigenproblem per direction, with the +/-v pairing served by a single
decomposition), greedy multistart initialization from sampled supporting
points, and clustering of multistart results.
"""

from __future__ import annotations

import enum
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import linalg
from .errors import IterativeSolveError, SingularShiftError
from .problem import MNepvProblem, _assemble_from_rho, rho_map
from .vectors import check_dim, normalize_unit, phase_normalize

__all__ = [
    "DEFAULT_TOL",
    "DEFAULT_TOL_ACC",
    "DEFAULT_MAX_ITER",
    "CLUSTER_GAP",
    "AccelStatus",
    "SolveOptions",
    "IterationRecord",
    "SolveReport",
    "SupportingPoint",
    "Cluster",
    "MultistartResult",
    "scf_step",
    "jacobian_sym",
    "accel_step",
    "solve",
    "supporting_points",
    "theta_grid",
    "sphere_grid",
    "sample_directions",
    "greedy_init",
    "multistart",
]

logger = logging.getLogger("mnepv")

DEFAULT_TOL = 1e-13
DEFAULT_TOL_ACC = 0.1
DEFAULT_MAX_ITER = 500
CLUSTER_GAP = 1e-6

# Residual stagnation guard: stop when 50 consecutive iterations fail to
# shrink the residual by at least a factor 0.999.
_STALL_WINDOW = 50
_STALL_FACTOR = 0.999


class AccelStatus(enum.Enum):
    NOT_ATTEMPTED = "not_attempted"
    ACCEPTED_INCREASED_F = "accepted_increased_f"
    REJECTED_DECREASED_F = "rejected_decreased_f"
    SOLVE_FAILED = "solve_failed"


@dataclass
class SolveOptions:
    tol: float = DEFAULT_TOL
    tol_acc: float = DEFAULT_TOL_ACC
    max_iter: int = DEFAULT_MAX_ITER
    record_history: bool = False

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.tol_acc < 0:
            raise ValueError("tol_acc must be >= 0")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


@dataclass
class IterationRecord:
    k: int
    lam: float
    f_scf: float
    res_scf: float
    accel: AccelStatus = AccelStatus.NOT_ATTEMPTED
    f_accel: float | None = None
    res_accel: float | None = None
    f_final: float = math.nan
    res_final: float = math.nan
    x: np.ndarray | None = None


@dataclass
class SolveReport:
    x_star: np.ndarray
    lambda_star: float
    f_star: float
    iterations: int
    converged: bool
    f0: float
    res0: float
    records: list[IterationRecord] = field(repr=False)

    @property
    def objective_history(self) -> list[float]:
        return [self.f0] + [r.f_final for r in self.records]

    @property
    def residual_history(self) -> list[float]:
        return [self.res0] + [r.res_final for r in self.records]

    @property
    def accel_log(self) -> list[AccelStatus]:
        return [r.accel for r in self.records]

    @property
    def iterates(self) -> list[np.ndarray]:
        """End-of-iteration vectors (only with record_history)."""
        return [r.x for r in self.records if r.x is not None]


@dataclass
class _Eval:
    """Everything derived from one assembly of H(x)."""

    x: np.ndarray
    h: np.ndarray
    rho: np.ndarray
    f: float
    lam: float
    res: float
    norm1: float
    degenerate: bool


def _evaluate(problem: MNepvProblem, x: np.ndarray) -> _Eval:
    rho = rho_map(problem, x)
    h = _assemble_from_rho(problem, rho)
    f = float(sum(fn.phi(float(r)) for fn, r in zip(problem.fns, rho)))
    norm1 = float(np.linalg.norm(h, 1))
    if norm1 == 0.0:
        # H(x) = 0 makes every unit vector an exact eigenvector with
        # lambda = 0 (= the largest eigenvalue); treat as residual 0.
        return _Eval(x, h, rho, f, 0.0, 0.0, 0.0, True)
    hx = h @ x
    lam = float(np.vdot(x, hx).real)
    res = float(np.linalg.norm(hx - lam * x) / norm1)
    return _Eval(x, h, rho, f, lam, res, norm1, False)


def _top_eigpair(h: np.ndarray, inner_tol: float | None) -> tuple[float, np.ndarray]:
    n = h.shape[0]
    if n <= linalg.DENSE_LIMIT:
        return linalg.largest_eigpair(h)
    op = linalg.LinearOperator(n, lambda v: h @ v, dtype=h.dtype)
    return linalg.largest_eigpair(op, inner_tol if inner_tol is not None else 1e-10)


def scf_step(
    problem: MNepvProblem, x_k: np.ndarray, inner_tol: float | None = None
) -> tuple[float, np.ndarray]:
    """One SCF step: the largest eigenpair of H(x_k), phase-normalized."""
    rho = rho_map(problem, x_k)
    h = _assemble_from_rho(problem, rho)
    return _top_eigpair(h, inner_tol)


def jacobian_sym(problem: MNepvProblem, x: np.ndarray) -> np.ndarray:
    """Symmetrized Jacobian J_s(x) = H(x) + 2 P M C M^H P with P = I - x x^H.

    Shares the eigenvector directions of the inverse step with the true
    Jacobian (they differ by a rank-one term along x) and satisfies
    J_s(x) x = H(x) x exactly.
    """
    x = np.asarray(x)
    check_dim(x, problem.n)
    ev = _evaluate(problem, x)
    return _jacobian_sym_from_eval(problem, ev)


def _jacobian_sym_from_eval(problem: MNepvProblem, ev: _Eval) -> np.ndarray:
    x = ev.x
    mcols = np.stack([a @ x for a in problem.matrices], axis=1)
    c = np.array([fn.hprime(float(r)) for fn, r in zip(problem.fns, ev.rho)])
    w = mcols - np.outer(x, x.conj() @ mcols)
    js = ev.h + 2.0 * (w * c) @ w.conj().T
    return (js + js.conj().T) / 2.0


def accel_step(
    problem: MNepvProblem, x_k: np.ndarray, inner_tol: float | None = None
) -> np.ndarray:
    """Inverse step (J_s(x_k) - sigma_k I)^{-1} x_k with the Rayleigh shift.

    Raises SingularShiftError / IterativeSolveError when the shifted solve
    fails; callers keep the plain SCF iterate in that case.
    """
    x_k = np.asarray(x_k)
    check_dim(x_k, problem.n)
    ev = _evaluate(problem, x_k)
    return _accel_from_eval(problem, ev, inner_tol)


def _accel_from_eval(
    problem: MNepvProblem, ev: _Eval, inner_tol: float | None
) -> np.ndarray:
    js = _jacobian_sym_from_eval(problem, ev)
    n = problem.n
    if n <= linalg.DENSE_LIMIT:
        w = linalg.solve_shifted(js, ev.lam, ev.x)
    else:
        op = linalg.LinearOperator(n, lambda v: js @ v, dtype=js.dtype)
        w = linalg.solve_shifted(
            op, ev.lam, ev.x, inner_tol if inner_tol is not None else 1e-10
        )
    return normalize_unit(w)


def solve(
    problem: MNepvProblem, x0: np.ndarray, opts: SolveOptions | None = None
) -> SolveReport:
    """Run the SCF iteration with optional acceleration from x0.

    Per iteration: one SCF step, a convergence test on its residual, and
    (when the residual is already below tol_acc) one guarded acceleration
    attempt.  Hitting max_iter or the stagnation guard returns a report
    with converged=False rather than raising.
    """
    if opts is None:
        opts = SolveOptions()
    x = normalize_unit(np.asarray(x0))
    ev = _evaluate(problem, x)
    f0, res0 = ev.f, ev.res
    records: list[IterationRecord] = []
    converged = False

    for k in range(1, opts.max_iter + 1):
        inner = min(1e-3, ev.res**2) if ev.res > 0 else 1e-14
        lam, x_new = _top_eigpair(ev.h, inner)
        ev = _evaluate(problem, x_new)
        x = x_new
        rec = IterationRecord(k=k, lam=lam, f_scf=ev.f, res_scf=ev.res)

        if ev.res <= opts.tol:
            converged = True
        elif ev.res <= opts.tol_acc:
            try:
                x_acc = _accel_from_eval(problem, ev, min(1e-3, ev.res**2))
                ev_acc = _evaluate(problem, x_acc)
                rec.f_accel, rec.res_accel = ev_acc.f, ev_acc.res
                if ev_acc.f > ev.f:
                    rec.accel = AccelStatus.ACCEPTED_INCREASED_F
                    x, ev = x_acc, ev_acc
                else:
                    rec.accel = AccelStatus.REJECTED_DECREASED_F
            except (SingularShiftError, IterativeSolveError) as exc:
                rec.accel = AccelStatus.SOLVE_FAILED
                logger.debug("iteration %d: acceleration solve failed: %s", k, exc)

        rec.f_final, rec.res_final = ev.f, ev.res
        if opts.record_history:
            rec.x = x.copy()
        records.append(rec)
        logger.debug(
            "iteration %d: F=%.16e res=%.3e accel=%s", k, ev.f, ev.res, rec.accel.value
        )
        if converged:
            break
        if (
            len(records) > _STALL_WINDOW
            and records[-1].res_scf
            > _STALL_FACTOR * records[-1 - _STALL_WINDOW].res_scf
        ):
            logger.debug("stagnation guard fired at iteration %d", k)
            break

    return SolveReport(
        x_star=x,
        lambda_star=ev.lam,
        f_star=ev.f,
        iterations=len(records),
        converged=converged,
        f0=f0,
        res0=res0,
        records=records,
    )


@dataclass
class SupportingPoint:
    """Boundary point of the joint numerical range for outer normal v."""

    v: np.ndarray
    lambda_v: float
    x_v: np.ndarray
    y_v: np.ndarray


def _canonical_direction(v: np.ndarray) -> tuple[np.ndarray, bool]:
    for entry in v:
        if entry != 0.0:
            return (-v, True) if entry < 0 else (v, False)
    raise ValueError("zero direction has no supporting point")


def supporting_points(
    problem: MNepvProblem,
    directions: Sequence[np.ndarray],
    inner_tol: float | None = None,
) -> list[SupportingPoint]:
    """Supporting points y_v = rho(x_v) for each outer normal direction.

    x_v is a top eigenvector of H_v = sum_i v(i) A_i.  On the dense path a
    single decomposition serves both v and -v (top and bottom eigenpairs),
    so exact-negation pairs in `directions` cost one decomposition.
    """
    cache: dict[bytes, linalg.EigDecomposition] = {}
    points = []
    for v in directions:
        v = np.asarray(v, dtype=np.float64)
        check_dim(v, problem.m)
        nrm = np.linalg.norm(v)
        if nrm == 0.0:
            raise ValueError("zero direction has no supporting point")
        vu = v / nrm
        if problem.n <= linalg.DENSE_LIMIT:
            canon, flipped = _canonical_direction(vu)
            key = canon.tobytes()
            dec = cache.get(key)
            if dec is None:
                hv = sum(w * a for w, a in zip(canon, problem.matrices))
                dec = linalg.eig_full((hv + hv.conj().T) / 2.0)
                cache[key] = dec
            if flipped:
                lam, x_v = -float(dec.values[-1]), dec.vectors[:, -1]
            else:
                lam, x_v = float(dec.values[0]), dec.vectors[:, 0]
        else:
            hv = sum(w * a for w, a in zip(vu, problem.matrices))
            hv = (hv + hv.conj().T) / 2.0
            op = linalg.LinearOperator(problem.n, lambda u: hv @ u, dtype=hv.dtype)
            lam, x_v = linalg.largest_eigpair(
                op, inner_tol if inner_tol is not None else 1e-10
            )
        points.append(
            SupportingPoint(v=vu, lambda_v=lam, x_v=x_v, y_v=rho_map(problem, x_v))
        )
    return points


def theta_grid(num: int) -> tuple[np.ndarray, np.ndarray]:
    """num equispaced planar directions [cos t, sin t], t in [0, 2pi).

    For even num the second half is the exact negation of the first, which
    lets supporting_points reuse decompositions across antipodal pairs.
    """
    if num < 1:
        raise ValueError("need at least one direction")
    thetas = 2.0 * np.pi * np.arange(num) / num
    dirs = np.stack([np.cos(thetas), np.sin(thetas)], axis=1)
    if num % 2 == 0:
        dirs[num // 2 :] = -dirs[: num // 2]
    return thetas, dirs


def sphere_grid(num: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Spherical-coordinate grid of directions in R^3.

    v = [sin(eta) cos(theta), sin(eta) sin(theta), cos(eta)] over an
    equispaced (eta, theta) grid covering [0, pi] x [0, 2pi); roughly twice
    as many theta as eta values.  Returns (etas, thetas, dirs) truncated to
    num points.
    """
    if num < 1:
        raise ValueError("need at least one direction")
    p = max(1, int(round(math.sqrt(num / 2.0))))
    q = max(1, math.ceil(num / p))
    while p * q < num:
        q += 1
    eta_axis = np.linspace(0.0, np.pi, p) if p > 1 else np.array([np.pi / 2.0])
    theta_axis = 2.0 * np.pi * np.arange(q) / q
    etas = np.repeat(eta_axis, q)[:num]
    thetas = np.tile(theta_axis, p)[:num]
    dirs = np.stack(
        [np.sin(etas) * np.cos(thetas), np.sin(etas) * np.sin(thetas), np.cos(etas)],
        axis=1,
    )
    return etas, thetas, dirs


def sample_directions(m: int, num: int, rng_seed: int = 0) -> np.ndarray:
    """Direction samples used for greedy initialization and boundary traces."""
    if num < 1:
        raise ValueError("need at least one direction")
    if m == 1:
        return np.array([[1.0] if j % 2 == 0 else [-1.0] for j in range(num)])
    if m == 2:
        return theta_grid(num)[1]
    if m == 3:
        return sphere_grid(num)[2]
    rng = np.random.default_rng(rng_seed)
    dirs = np.empty((num, m))
    for j in range(num):
        while True:
            v = rng.standard_normal(m)
            nrm = np.linalg.norm(v)
            if nrm > 1e-12:
                dirs[j] = v / nrm
                break
    return dirs


def greedy_init(problem: MNepvProblem, num_samples: int, rng_seed: int = 0) -> np.ndarray:
    """Best sampled supporting point by objective value, as a starting vector."""
    if num_samples < 1:
        raise ValueError("num_samples must be >= 1")
    dirs = sample_directions(problem.m, num_samples, rng_seed)
    pts = supporting_points(problem, dirs)
    fvals = [
        sum(fn.phi(float(y)) for fn, y in zip(problem.fns, p.y_v)) for p in pts
    ]
    return pts[int(np.argmax(fvals))].x_v


@dataclass
class Cluster:
    f_star: float
    count: int
    run_indices: list[int]


@dataclass
class MultistartResult:
    reports: list[SolveReport]
    clusters: list[Cluster]
    best_index: int | None

    @property
    def best_report(self) -> SolveReport | None:
        return None if self.best_index is None else self.reports[self.best_index]

    @property
    def n_converged(self) -> int:
        return sum(r.converged for r in self.reports)


def multistart(
    problem: MNepvProblem,
    starts: Sequence[np.ndarray],
    opts: SolveOptions | None = None,
    jobs: int = 1,
) -> MultistartResult:
    """Solve from every start and cluster the converged objective values.

    Clusters are maximal groups of converged F* values with consecutive
    gaps <= CLUSTER_GAP, reported in descending objective order.
    """
    starts = list(starts)
    if not starts:
        raise ValueError("need at least one start")
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            reports = list(pool.map(lambda x0: solve(problem, x0, opts), starts))
    else:
        reports = [solve(problem, x0, opts) for x0 in starts]

    converged = [(i, r.f_star) for i, r in enumerate(reports) if r.converged]
    converged.sort(key=lambda t: -t[1])
    clusters: list[Cluster] = []
    for i, f in converged:
        if clusters and clusters[-1].f_star - f <= CLUSTER_GAP:
            clusters[-1].count += 1
            clusters[-1].run_indices.append(i)
        else:
            clusters.append(Cluster(f_star=f, count=1, run_indices=[i]))
    best_index = converged[0][0] if converged else None
    logger.info(
        "multistart: %d/%d converged, %d clusters",
        len(converged),
        len(reports),
        len(clusters),
    )
    return MultistartResult(reports=reports, clusters=clusters, best_index=best_index)
