"""Dense and matrix-free Hermitian eigen-kernels and shifted solves.

Two kernels drive the whole solver: extraction of the largest eigenpair
of a Hermitian matrix and the solution of a shifted Hermitian (possibly
indefinite) linear system.  Small problems use LAPACK directly; above
``DENSE_LIMIT`` the matrix-free Lanczos (ARPACK) and MINRES paths take
over.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from .errors import (
    DimensionMismatchError,
    EigenConvergenceError,
    IterativeSolveError,
    SingularShiftError,
)
from .vectors import check_dim, phase_normalize

__all__ = [
    "DENSE_LIMIT",
    "EigDecomposition",
    "LinearOperator",
    "eig_full",
    "largest_eigpair",
    "solve_shifted",
]

# n up to this size is handled by full dense decompositions / factorizations.
DENSE_LIMIT = 2000


@dataclass
class EigDecomposition:
    """Full spectrum of a Hermitian matrix.

    values[i] are real, sorted descending; vectors[:, i] is the matching
    orthonormal eigenvector, phase-normalized.  Exact-tie groups of values
    are ordered lexicographically by the (Re, Im) interleaving of the
    phase-normalized vectors so identical inputs always produce identical
    output.
    """

    values: np.ndarray
    vectors: np.ndarray


@dataclass
class LinearOperator:
    """Hermitian operator given by its action ``v -> M v``."""

    n: int
    apply: Callable[[np.ndarray], np.ndarray]
    dtype: np.dtype = field(default=np.dtype(np.complex128))

    def check_hermitian(self, probes: int = 2, tol: float = 1e-10, seed: int = 0) -> None:
        """Probe <u, Mv> = conj(<v, Mu>) on random vectors."""
        rng = np.random.default_rng(seed)
        for _ in range(probes):
            u = rng.standard_normal(self.n) + 1j * rng.standard_normal(self.n)
            v = rng.standard_normal(self.n) + 1j * rng.standard_normal(self.n)
            lhs = np.vdot(u, self.apply(v))
            rhs = np.conj(np.vdot(v, self.apply(u)))
            scale = max(1.0, abs(lhs), abs(rhs))
            if abs(lhs - rhs) > tol * scale:
                raise ValueError(
                    f"operator is not Hermitian on probes: |{lhs} - {rhs}| > {tol}*{scale}"
                )

    def _scipy(self) -> scipy.sparse.linalg.LinearOperator:
        return scipy.sparse.linalg.LinearOperator(
            (self.n, self.n), matvec=self.apply, dtype=self.dtype
        )


def _lex_key(column: np.ndarray):
    col = phase_normalize(column)
    if np.iscomplexobj(col):
        return tuple(np.stack([col.real, col.imag], axis=1).ravel())
    return tuple(col)


def _sorted_decomposition(values: np.ndarray, vectors: np.ndarray) -> EigDecomposition:
    order = list(np.argsort(-values, kind="stable"))
    # lexicographic tie-break within groups of exactly equal eigenvalues
    i = 0
    while i < len(order):
        j = i + 1
        while j < len(order) and values[order[j]] == values[order[i]]:
            j += 1
        if j - i > 1:
            order[i:j] = sorted(order[i:j], key=lambda k: _lex_key(vectors[:, k]))
        i = j
    vecs = vectors[:, order]
    for k in range(vecs.shape[1]):
        vecs[:, k] = phase_normalize(vecs[:, k])
    return EigDecomposition(values=values[order].astype(np.float64), vectors=vecs)


def eig_full(h: np.ndarray) -> EigDecomposition:
    """Full eigendecomposition of a Hermitian matrix, descending order."""
    h = np.asarray(h)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise DimensionMismatchError(f"expected a square matrix, got shape {h.shape}")
    if not np.all(np.isfinite(h)):
        raise ValueError("matrix has non-finite entries")
    values, vectors = np.linalg.eigh(h)
    return _sorted_decomposition(values, vectors)


def largest_eigpair(
    op: np.ndarray | LinearOperator, inner_tol: float = 1e-10
) -> tuple[float, np.ndarray]:
    """Largest eigenvalue and a unit eigenvector of a Hermitian operator.

    Dense input is solved exactly by full decomposition.  A LinearOperator
    goes through implicitly restarted Lanczos; non-convergence raises
    EigenConvergenceError carrying the best iterate.
    """
    if inner_tol <= 0:
        raise ValueError("inner_tol must be positive")
    if isinstance(op, np.ndarray):
        dec = eig_full(op)
        return float(dec.values[0]), dec.vectors[:, 0]
    n = op.n
    if n <= 2:
        return largest_eigpair(_materialize(op), inner_tol)
    v0 = np.full(n, 1.0 / np.sqrt(n))
    try:
        vals, vecs = scipy.sparse.linalg.eigsh(
            op._scipy(), k=1, which="LA", tol=inner_tol, v0=v0
        )
    except scipy.sparse.linalg.ArpackNoConvergence as exc:
        best_val = float(exc.eigenvalues[0]) if len(exc.eigenvalues) else None
        best_vec = exc.eigenvectors[:, 0] if exc.eigenvectors.size else None
        raise EigenConvergenceError(
            f"Lanczos did not converge to tol={inner_tol}", best_val, best_vec
        ) from exc
    return float(vals[0]), phase_normalize(vecs[:, 0])


def _materialize(op: LinearOperator) -> np.ndarray:
    eye = np.eye(op.n, dtype=op.dtype)
    cols = [op.apply(eye[:, j]) for j in range(op.n)]
    m = np.stack(cols, axis=1)
    return (m + m.conj().T) / 2


def solve_shifted(
    m: np.ndarray | LinearOperator,
    sigma: float,
    b: np.ndarray,
    inner_tol: float = 1e-10,
) -> np.ndarray:
    """Solve (M - sigma I) w = b for Hermitian M.

    Dense path: LU with partial pivoting; a shift singular to working
    precision raises SingularShiftError.  Operator path: MINRES on the
    (realified, if complex) symmetric system.
    """
    b = np.asarray(b)
    if isinstance(m, np.ndarray):
        check_dim(b, m.shape[0])
        shifted = m - sigma * np.eye(m.shape[0], dtype=m.dtype)
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
                lu, piv = scipy.linalg.lu_factor(shifted, check_finite=True)
        except scipy.linalg.LinAlgError as exc:
            raise SingularShiftError(f"shifted system singular: {exc}") from exc
        with np.errstate(all="ignore"):
            w = scipy.linalg.lu_solve((lu, piv), b, check_finite=False)
        if not np.all(np.isfinite(w)):
            raise SingularShiftError("shifted system singular to working precision")
        return w
    check_dim(b, m.n)
    return _minres_shifted(m, sigma, b, inner_tol)


def _minres_shifted(
    op: LinearOperator, sigma: float, b: np.ndarray, inner_tol: float
) -> np.ndarray:
    n = op.n

    def shifted(v: np.ndarray) -> np.ndarray:
        return op.apply(v) - sigma * v

    if np.issubdtype(op.dtype, np.complexfloating) or np.iscomplexobj(b):
        # scipy's MINRES is real-only; solve the symmetric realified system
        # [[Re A, -Im A], [Im A, Re A]] [Re w; Im w] = [Re b; Im b].
        def real_mv(u: np.ndarray) -> np.ndarray:
            z = shifted(u[:n] + 1j * u[n:])
            return np.concatenate([z.real, z.imag])

        a_real = scipy.sparse.linalg.LinearOperator((2 * n, 2 * n), matvec=real_mv)
        rhs = np.concatenate([np.real(b), np.imag(b)])
        w_real, info = scipy.sparse.linalg.minres(a_real, rhs, rtol=inner_tol)
        w = w_real[:n] + 1j * w_real[n:]
    else:
        a_real = scipy.sparse.linalg.LinearOperator(
            (n, n), matvec=shifted, dtype=np.float64
        )
        w, info = scipy.sparse.linalg.minres(a_real, b.astype(np.float64), rtol=inner_tol)
    if info != 0 or not np.all(np.isfinite(w)):
        raise IterativeSolveError(f"MINRES did not converge (info={info})")
    resid = np.linalg.norm(shifted(w) - b)
    if resid > 10 * inner_tol * max(np.linalg.norm(b), 1e-300):
        raise IterativeSolveError(
            f"MINRES residual {resid:.3e} exceeds tolerance {inner_tol:.3e}*|b|"
        )
    return w
