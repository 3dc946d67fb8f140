"""Application front-ends: numerical radius, tensor rank-one, dHDAE distance.

Each application is a reduction to the same solver: build the matrix tuple
and coefficient functions, pick starting vectors, run (multistart) SCF, and
post-process the winner.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import linalg
from .errors import (
    DegenerateTensorError,
    InternalConsistencyError,
    NoConvergenceError,
)
from .problem import MNepvProblem, MonotoneFn, as_hermitian, rho_map
from .solver import (
    MultistartResult,
    SolveOptions,
    multistart,
    sample_directions,
    supporting_points,
)
from .vectors import normalize_unit, phase_normalize

__all__ = [
    "numrad_problem",
    "numerical_radius",
    "joint_numrad",
    "TensorPS3",
    "RankOneResult",
    "tensor_rank_one",
    "als_reference",
    "DhdaeBound",
    "dhdae_problem",
    "dhdae_distance",
]


def numrad_problem(b: np.ndarray) -> MNepvProblem:
    """Quartic problem whose maximizer attains the numerical radius of B.

    A_1 = (B^H + B)/2 and A_2 = i(B^H - B)/2 split x^H B x into real and
    imaginary parts, so r(B)^2 = 2 F(x*) at the global maximizer.
    """
    b = np.asarray(b)
    if b.ndim != 2 or b.shape[0] != b.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {b.shape}")
    bh = b.conj().T
    a1 = (bh + b) / 2.0
    a2 = 1j * (bh - b) / 2.0
    return MNepvProblem([a1, a2], [MonotoneFn.identity(), MonotoneFn.identity()])


def _supporting_starts(
    problem: MNepvProblem, num_starts: int, seed: int
) -> list[np.ndarray]:
    dirs = sample_directions(problem.m, num_starts, seed)
    return [p.x_v for p in supporting_points(problem, dirs)]


def joint_numrad(
    matrices: Sequence[np.ndarray],
    opts: SolveOptions | None = None,
    starts: Sequence[np.ndarray] | None = None,
    num_starts: int = 100,
    seed: int = 0,
    jobs: int = 1,
) -> tuple[float, MultistartResult]:
    """Joint numerical radius max |rho(x)|_2 of an m-tuple of Hermitian matrices."""
    problem = MNepvProblem(
        [as_hermitian(a) for a in matrices],
        [MonotoneFn.identity()] * len(matrices),
    )
    if starts is None:
        starts = _supporting_starts(problem, num_starts, seed)
    result = multistart(problem, starts, opts, jobs=jobs)
    if result.best_index is None:
        raise NoConvergenceError("no multistart run converged")
    r = math.sqrt(max(0.0, 2.0 * result.best_report.f_star))
    return r, result


def numerical_radius(
    b: np.ndarray,
    opts: SolveOptions | None = None,
    starts: Sequence[np.ndarray] | None = None,
    num_starts: int = 100,
    seed: int = 0,
    jobs: int = 1,
) -> tuple[float, MultistartResult]:
    """Numerical radius r(B) = max |x^H B x| over unit x, via multistart SCF."""
    problem = numrad_problem(b)
    if starts is None:
        starts = _supporting_starts(problem, num_starts, seed)
    result = multistart(problem, starts, opts, jobs=jobs)
    if result.best_index is None:
        raise NoConvergenceError("no multistart run converged")
    r = math.sqrt(max(0.0, 2.0 * result.best_report.f_star))
    return r, result


@dataclass
class TensorPS3:
    """Third-order tensor with symmetric frontal slices, in COO form.

    Entries are stored 0-based, lexicographically sorted by (i, j, k), with
    duplicates summed and each slice symmetrized at construction, so two
    tensors holding the same data compare equal entry-for-entry.
    """

    n: int
    m: int
    indices: np.ndarray  # (nnz, 3) int64
    values: np.ndarray  # (nnz,) float64

    @classmethod
    def from_entries(
        cls, n: int, m: int, indices: Sequence[Sequence[int]], values: Sequence[float]
    ) -> "TensorPS3":
        if n < 1 or m < 1:
            raise ValueError("tensor dimensions must be positive")
        idx = np.asarray(indices, dtype=np.int64).reshape(-1, 3)
        vals = np.asarray(values, dtype=np.float64).reshape(-1)
        if idx.shape[0] != vals.shape[0]:
            raise ValueError("index/value length mismatch")
        if idx.size and (
            idx.min() < 0 or idx[:, 0].max() >= n or idx[:, 1].max() >= n or idx[:, 2].max() >= m
        ):
            raise ValueError("tensor index out of bounds")
        if not np.all(np.isfinite(vals)):
            raise ValueError("tensor has non-finite values")
        dense = np.zeros((n, n, m))
        np.add.at(dense, (idx[:, 0], idx[:, 1], idx[:, 2]), vals)
        return cls.from_dense(dense)

    @classmethod
    def from_dense(cls, dense: np.ndarray) -> "TensorPS3":
        dense = np.asarray(dense, dtype=np.float64)
        if dense.ndim != 3 or dense.shape[0] != dense.shape[1]:
            raise ValueError(f"expected an (n, n, m) array, got shape {dense.shape}")
        sym = (dense + dense.transpose(1, 0, 2)) / 2.0
        nz = np.nonzero(sym)
        idx = np.stack(nz, axis=1).astype(np.int64)
        return cls(
            n=sym.shape[0], m=sym.shape[2], indices=idx, values=sym[nz].astype(np.float64)
        )

    @property
    def nnz(self) -> int:
        return self.values.shape[0]

    def dense(self) -> np.ndarray:
        out = np.zeros((self.n, self.n, self.m))
        out[self.indices[:, 0], self.indices[:, 1], self.indices[:, 2]] = self.values
        return out

    def slices(self) -> list[np.ndarray]:
        dense = self.dense()
        return [dense[:, :, k].copy() for k in range(self.m)]

    def norm_fro(self) -> float:
        return float(np.linalg.norm(self.values))

    def is_nonnegative(self) -> bool:
        return bool(np.all(self.values >= 0.0))


@dataclass
class RankOneResult:
    """Best rank-one fit mu * x (x) x (x) z of a partial-symmetric tensor."""

    mu: float
    x: np.ndarray
    z: np.ndarray
    lam: float
    fit: float  # |T|_F^2 - mu^2, the squared approximation error
    report: object = field(repr=False, default=None)
    result: MultistartResult | None = field(repr=False, default=None)


def _tensor_problem(t: TensorPS3) -> MNepvProblem:
    return MNepvProblem(t.slices(), [MonotoneFn.identity()] * t.m)


def tensor_rank_one(
    t: TensorPS3,
    opts: SolveOptions | None = None,
    starts: Sequence[np.ndarray] | None = None,
    num_starts: int = 100,
    seed: int = 0,
    jobs: int = 1,
) -> RankOneResult:
    """Best rank-one partial-symmetric approximation via the quartic problem.

    Real symmetric slices admit real maximizers, so everything runs in real
    arithmetic.  z is recovered as rho(x)/|rho(x)| and mu as the trilinear
    form of (x, x, z); rho(x*) = 0 means z is undefined and raises.
    """
    problem = _tensor_problem(t)
    nonneg = t.is_nonnegative()
    if starts is None:
        rng = np.random.default_rng(seed)
        raw = [rng.standard_normal(t.n) for _ in range(num_starts)]
    else:
        raw = [np.asarray(s, dtype=np.float64) for s in starts]
    if nonneg:
        raw = [np.abs(s) for s in raw]
    start_vecs = [normalize_unit(s) for s in raw]
    result = multistart(problem, start_vecs, opts, jobs=jobs)
    if result.best_index is None:
        raise NoConvergenceError("no multistart run converged")
    best = result.best_report
    x = np.asarray(best.x_star)
    if np.iscomplexobj(x):
        x = x.real
    x = phase_normalize(x / np.linalg.norm(x))
    rho = rho_map(problem, x)
    nr = float(np.linalg.norm(rho))
    if nr <= 1e-14 * max(1.0, t.norm_fro()):
        raise DegenerateTensorError(
            "rho(x*) = 0: the z factor is undefined", f_star=best.f_star
        )
    z = rho / nr
    i, j, k = t.indices[:, 0], t.indices[:, 1], t.indices[:, 2]
    mu = float(np.sum(t.values * x[i] * x[j] * z[k]))
    fit = t.norm_fro() ** 2 - mu**2
    return RankOneResult(
        mu=mu, x=x, z=z, lam=best.lambda_star, fit=fit, report=best, result=result
    )


def als_reference(t: TensorPS3, x0: np.ndarray, max_iter: int) -> list[np.ndarray]:
    """Literal alternating maximization over (z, x) for nonnegative tensors.

    Updates z <- rho(x)/|rho(x)| then x <- top eigenvector of sum_k z_k A_k.
    For nonnegative data this reproduces the SCF iterates exactly; it exists
    as an independent reference for that equivalence.
    """
    slices = t.slices()
    x = normalize_unit(np.asarray(x0, dtype=np.float64))
    iterates: list[np.ndarray] = []
    for _ in range(max_iter):
        rho = np.array([float(x @ (a @ x)) for a in slices])
        nr = np.linalg.norm(rho)
        if nr == 0.0:
            raise DegenerateTensorError("rho(x_k) = 0 during ALS", f_star=0.0)
        z = rho / nr
        hz = sum(zk * a for zk, a in zip(z, slices))
        _, x = linalg.largest_eigpair((hz + hz.T) / 2.0)
        iterates.append(x)
    return iterates


@dataclass
class DhdaeBound:
    """Distance-to-singularity upper bound for a dHDAE system.

    d_est = sqrt(-2 F(x*)) bounds the distance from above whenever x* came
    from a monotone run started at the top eigenvector of A_1, in which
    case d_est <= delta_m = sqrt(-2 lambda_max(A_1)).
    """

    d_est: float
    delta_m: float
    x_star: np.ndarray
    f_star: float
    f0: float = math.nan
    result: MultistartResult | None = field(repr=False, default=None)


def dhdae_problem(j: np.ndarray, bs: Sequence[np.ndarray]) -> MNepvProblem:
    """Problem for the distance to singularity of J d^j u/dt^j = sum B_i d^i u/dt^i.

    A_1 = J^2 - sum_i B_i^2 carries the linear term (phi_1(t) = t); each B_i
    enters quadratically (phi(t) = t^2/2).  J must be skew-symmetric and the
    B_i symmetric positive semidefinite, all real.
    """
    j = np.asarray(j)
    if np.iscomplexobj(j):
        if np.any(j.imag):
            raise ValueError("J must be real")
        j = j.real
    j = j.astype(np.float64)
    if j.ndim != 2 or j.shape[0] != j.shape[1]:
        raise ValueError(f"expected a square J, got shape {j.shape}")
    skew = np.linalg.norm(j + j.T, 1)
    if skew > 1e-12 * max(np.linalg.norm(j, 1), 1e-300):
        raise ValueError(f"J is not skew-symmetric: |J + J^T|_1 = {skew:.3e}")
    if len(bs) < 1:
        raise ValueError("need at least one B matrix")
    bs_sym = []
    for idx, b in enumerate(bs):
        b = as_hermitian(b, asym_tol=1e-10)
        if np.iscomplexobj(b):
            raise ValueError(f"B_{idx} must be real symmetric")
        if b.shape[0] != j.shape[0]:
            raise ValueError(f"B_{idx} dimension {b.shape[0]} != {j.shape[0]}")
        w = np.linalg.eigvalsh(b)
        scale = max(abs(w[0]), abs(w[-1]))
        if w[0] < -1e-10 * max(scale, 1e-300):
            raise ValueError(
                f"B_{idx} is not positive semidefinite: lambda_min = {w[0]:.3e}"
            )
        bs_sym.append(b)
    a1 = j @ j - sum(b @ b for b in bs_sym)
    a1 = (a1 + a1.T) / 2.0
    fns = [MonotoneFn.constant(1.0)] + [MonotoneFn.identity()] * len(bs_sym)
    return MNepvProblem([a1, *bs_sym], fns)


def dhdae_distance(
    j: np.ndarray,
    bs: Sequence[np.ndarray],
    opts: SolveOptions | None = None,
    start_policy: str = "eig-a1",
    starts: Sequence[np.ndarray] | None = None,
    num_starts: int = 100,
    seed: int = 0,
    jobs: int = 1,
) -> DhdaeBound:
    """Upper bound on the distance to the nearest singular dHDAE system.

    start_policy 'eig-a1' runs once from the top eigenvector of A_1 (this
    makes d_est <= delta_m a certificate); 'greedy' multistarts from sampled
    supporting points, which can only tighten the bound.
    """
    problem = dhdae_problem(j, bs)
    a1 = problem.matrices[0]
    lam_a1, v1 = linalg.largest_eigpair(a1)
    delta_m = math.sqrt(max(0.0, -2.0 * lam_a1))
    if starts is None:
        if start_policy == "eig-a1":
            starts = [v1]
        elif start_policy == "greedy":
            starts = _supporting_starts(problem, num_starts, seed)
        else:
            raise ValueError(f"unknown start policy {start_policy!r}")
    result = multistart(problem, starts, opts, jobs=jobs)
    if result.best_index is None:
        raise NoConvergenceError("no multistart run converged")
    best = result.best_report
    if -2.0 * best.f_star < -1e-12:
        raise InternalConsistencyError(
            f"F* = {best.f_star} > 0 would give a negative squared distance"
        )
    d_est = math.sqrt(max(0.0, -2.0 * best.f_star))
    return DhdaeBound(
        d_est=d_est,
        delta_m=delta_m,
        x_star=best.x_star,
        f_star=best.f_star,
        f0=best.f0,
        result=result,
    )
