"""Problem data model and the pure-function formulas attached to it.

An mNEPv instance is a tuple of Hermitian matrices A_1..A_m together with
non-decreasing coefficient functions h_i.  Everything in this module is a
pure function of (problem, vector): the coefficient matrix H(x), the
objective F(x), the moment map rho(x), the relative eigen-residual, the
directional derivative of H, the characteristic quadratic of a candidate
solution, and the spectral-radius stability classification.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import linalg
from .errors import MonotonicityError, NonHermitianError, SingularProblemError
from .vectors import check_dim

__all__ = [
    "TOL_STAB",
    "TOL_GAP_REL",
    "MonotoneFn",
    "parse_monotone_fn",
    "as_hermitian",
    "MNepvProblem",
    "Classification",
    "StabilityReport",
    "assemble_h",
    "rho_map",
    "objective",
    "residual",
    "dh_directional",
    "phi_char",
    "operator_L_rho",
]

# Classification thresholds: separate float noise from genuinely marginal
# spectral radii, and refuse to classify when the top eigenvalue is not
# numerically simple.
TOL_STAB = 1e-8
TOL_GAP_REL = 1e-10


@dataclass(frozen=True)
class MonotoneFn:
    """A scalar coefficient function h with anti-derivative phi and slope h'.

    The triple (phi, h, hprime) must satisfy phi' = h and h' = hprime with
    hprime >= 0 (h non-decreasing).  Builtin kinds are analytically
    consistent; custom triples are sampled for monotonicity when a problem
    is assembled.
    """

    kind: str
    phi: Callable[[float], float]
    h: Callable[[float], float]
    hprime: Callable[[float], float]
    params: tuple[float, ...] = ()

    @classmethod
    def constant(cls, c: float) -> "MonotoneFn":
        c = float(c)
        if c < 0:
            raise ValueError(f"constant coefficient must be >= 0, got {c}")
        return cls("constant", lambda t: c * t, lambda t: c, lambda t: 0.0, (c,))

    @classmethod
    def identity(cls) -> "MonotoneFn":
        return cls("identity", lambda t: t * t / 2.0, lambda t: t, lambda t: 1.0)

    @classmethod
    def affine(cls, a: float, b: float) -> "MonotoneFn":
        a, b = float(a), float(b)
        if b < 0:
            raise ValueError(f"affine slope must be >= 0, got b={b}")
        return cls(
            "affine",
            lambda t: a * t + b * t * t / 2.0,
            lambda t: a + b * t,
            lambda t: b,
            (a, b),
        )

    @classmethod
    def custom(cls, phi, h, hprime) -> "MonotoneFn":
        return cls("custom", phi, h, hprime)

    def spec_string(self) -> str:
        if self.kind == "constant":
            return f"const:{self.params[0]!r}"
        if self.kind == "identity":
            return "id"
        if self.kind == "affine":
            return f"affine:{self.params[0]!r},{self.params[1]!r}"
        return "custom"


def parse_monotone_fn(spec: str) -> MonotoneFn:
    """Parse a CLI-style function spec: 'const:c', 'id', or 'affine:a,b'."""
    name, _, args = spec.strip().partition(":")
    try:
        if name == "const":
            return MonotoneFn.constant(float(args))
        if name == "id":
            if args:
                raise ValueError("'id' takes no parameters")
            return MonotoneFn.identity()
        if name == "affine":
            a_str, b_str = args.split(",")
            return MonotoneFn.affine(float(a_str), float(b_str))
    except ValueError as exc:
        raise ValueError(f"bad function spec {spec!r}: {exc}") from exc
    raise ValueError(f"unknown function spec {spec!r} (expected const:c, id, affine:a,b)")


def as_hermitian(m: np.ndarray, asym_tol: float = 1e-12) -> np.ndarray:
    """Validate and symmetrize a matrix to (M + M^H)/2.

    Asymmetry beyond asym_tol * |M|_1 is a hard error rather than being
    silently averaged away.  Exactly-real input stays real (float64).
    """
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise NonHermitianError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    mh = m.conj().T
    norm1 = np.linalg.norm(m, 1)
    asym = np.linalg.norm(m - mh, 1)
    if asym > asym_tol * max(norm1, 1e-300):
        raise NonHermitianError(
            f"matrix asymmetry {asym:.3e} exceeds {asym_tol:.1e} * |M|_1 = {asym_tol * norm1:.3e}"
        )
    sym = (m + mh) / 2.0
    if np.iscomplexobj(sym) and not np.any(sym.imag):
        sym = sym.real.copy()
    return sym.astype(np.complex128 if np.iscomplexobj(sym) else np.float64)


@dataclass
class MNepvProblem:
    """An m-tuple of n-by-n Hermitian matrices with monotone coefficients."""

    matrices: Sequence[np.ndarray]
    fns: Sequence[MonotoneFn]
    validate_samples: int = field(default=32, repr=False)

    def __post_init__(self):
        if len(self.matrices) == 0:
            raise ValueError("need at least one matrix")
        if len(self.matrices) != len(self.fns):
            raise ValueError(
                f"{len(self.matrices)} matrices but {len(self.fns)} coefficient functions"
            )
        mats = tuple(as_hermitian(a) for a in self.matrices)
        n = mats[0].shape[0]
        for a in mats:
            if a.shape[0] != n:
                raise ValueError("matrices must share a common dimension")
        for a, fn in zip(mats, self.fns):
            if fn.kind == "custom":
                self._check_monotone(a, fn)
            a.flags.writeable = False
        self.matrices = mats
        self.fns = tuple(self.fns)

    def _check_monotone(self, a: np.ndarray, fn: MonotoneFn) -> None:
        vals = np.linalg.eigvalsh(a)
        lo, hi = float(vals[0]), float(vals[-1])
        rng = np.random.default_rng(0)
        ts = np.concatenate([[lo, hi], rng.uniform(lo, hi, self.validate_samples)])
        for t in ts:
            if fn.hprime(float(t)) < 0:
                raise MonotonicityError(
                    f"custom coefficient function has h'({t}) < 0 on [{lo}, {hi}]"
                )

    @property
    def n(self) -> int:
        return self.matrices[0].shape[0]

    @property
    def m(self) -> int:
        return len(self.matrices)

    @property
    def is_real(self) -> bool:
        return all(not np.iscomplexobj(a) for a in self.matrices)


def rho_map(problem: MNepvProblem, x: np.ndarray) -> np.ndarray:
    """Moment map rho(x) = [x^H A_1 x, ..., x^H A_m x], always real."""
    x = np.asarray(x)
    check_dim(x, problem.n)
    return np.array([np.vdot(x, a @ x).real for a in problem.matrices])


def assemble_h(problem: MNepvProblem, x: np.ndarray) -> np.ndarray:
    """Coefficient matrix H(x) = sum_i h_i(x^H A_i x) A_i (exactly Hermitian)."""
    rho = rho_map(problem, x)
    return _assemble_from_rho(problem, rho)


def _assemble_from_rho(problem: MNepvProblem, rho: np.ndarray) -> np.ndarray:
    dtype = np.result_type(*(a.dtype for a in problem.matrices))
    h = np.zeros((problem.n, problem.n), dtype=dtype)
    for a, fn, r in zip(problem.matrices, problem.fns, rho):
        h += fn.h(float(r)) * a
    return (h + h.conj().T) / 2.0


def objective(problem: MNepvProblem, x: np.ndarray) -> float:
    """Objective F(x) = sum_i phi_i(x^H A_i x)."""
    rho = rho_map(problem, x)
    return float(sum(fn.phi(float(r)) for fn, r in zip(problem.fns, rho)))


def residual(problem: MNepvProblem, x: np.ndarray) -> float:
    """Relative eigen-residual |H(x)x - (x^H H(x) x) x|_2 / |H(x)|_1."""
    x = np.asarray(x)
    h = assemble_h(problem, x)
    return _residual_from_h(h, x)


def _residual_from_h(h: np.ndarray, x: np.ndarray) -> float:
    norm1 = np.linalg.norm(h, 1)
    if norm1 == 0.0:
        raise SingularProblemError(
            "H(x) is identically zero; the relative residual is infinite"
        )
    hx = h @ x
    rayleigh = np.vdot(x, hx).real
    return float(np.linalg.norm(hx - rayleigh * x) / norm1)


def dh_directional(problem: MNepvProblem, x: np.ndarray, d: np.ndarray) -> np.ndarray:
    """Directional derivative DH(x)[d] = 2 sum_i Re(x^H A_i d) h_i'(x^H A_i x) A_i."""
    x = np.asarray(x)
    d = np.asarray(d)
    check_dim(x, problem.n)
    check_dim(d, problem.n)
    dtype = np.result_type(*(a.dtype for a in problem.matrices))
    out = np.zeros((problem.n, problem.n), dtype=dtype)
    for a, fn in zip(problem.matrices, problem.fns):
        ax = a @ x
        coeff = 2.0 * np.vdot(x, a @ d).real * fn.hprime(float(np.vdot(x, ax).real))
        out += coeff * a
    return (out + out.conj().T) / 2.0


def phi_char(problem: MNepvProblem, x_star: np.ndarray, d: np.ndarray) -> float:
    """Characteristic quadratic of a candidate solution, evaluated at d.

    Negative-definite on the orthogonal complement of x_star exactly when
    x_star is a stable solution; see operator_L_rho for the equivalent
    spectral-radius test.
    """
    x_star = np.asarray(x_star)
    d = np.asarray(d)
    check_dim(x_star, problem.n)
    check_dim(d, problem.n)
    h = assemble_h(problem, x_star)
    s = np.vdot(x_star, h @ x_star).real
    quad = np.vdot(d, h @ d).real - s * np.vdot(d, d).real
    rho = rho_map(problem, x_star)
    for a, fn, r in zip(problem.matrices, problem.fns, rho):
        quad += 2.0 * fn.hprime(float(r)) * np.vdot(d, a @ x_star).real ** 2
    return float(quad)


class Classification(enum.Enum):
    """Fixed-point stability of a solution under the SCF map."""

    STABLE = "stable"
    WEAKLY_STABLE = "weakly_stable"
    NON_STABLE = "non_stable"
    INDETERMINATE = "indeterminate"


@dataclass
class StabilityReport:
    rho_L: float
    classification: Classification
    eigengap: float
    lambda_star: float


def operator_L_rho(
    problem: MNepvProblem,
    x_star: np.ndarray,
    tol_stab: float = TOL_STAB,
    tol_gap_rel: float = TOL_GAP_REL,
) -> StabilityReport:
    """Spectral radius of the SCF linearization at x_star, with classification.

    The operator acts on the orthogonal complement of x_star; its largest
    eigenvalue is computed from the equivalent m-by-m reduced symmetric
    eigenproblem B^T Dhat^{-1} B (realified supporting vectors), which costs
    O(n^2 m + m^3) instead of assembling the operator densely.
    """
    x_star = np.asarray(x_star)
    check_dim(x_star, problem.n)
    h = assemble_h(problem, x_star)
    dec = linalg.eig_full(h)
    lam_star = float(dec.values[0])
    norm1 = np.linalg.norm(h, 1)
    tol_gap = tol_gap_rel * norm1

    if problem.n == 1:
        return StabilityReport(0.0, Classification.STABLE, math.inf, lam_star)

    eigengap = float(dec.values[0] - dec.values[1])
    x_perp = dec.vectors[:, 1:]
    rho = rho_map(problem, x_star)
    cols = []
    for a, fn, r in zip(problem.matrices, problem.fns, rho):
        c = fn.hprime(float(r))
        if c < 0:
            raise MonotonicityError(f"h'({r}) = {c} < 0 encountered at x_star")
        u = x_perp.conj().T @ (a @ x_star)
        g = np.concatenate([u.real, u.imag])
        cols.append(math.sqrt(2.0 * c) * g)
    b = np.stack(cols, axis=1)

    if not np.any(b):
        rho_l = 0.0
    else:
        d = dec.values[0] - dec.values[1:]
        if np.min(d) <= 0.0:
            rho_l = math.inf
        else:
            dhat = np.concatenate([d, d])
            reduced = b.T @ (b / dhat[:, None])
            reduced = (reduced + reduced.T) / 2.0
            rho_l = max(0.0, float(np.linalg.eigvalsh(reduced)[-1]))

    if eigengap <= tol_gap:
        cls = Classification.INDETERMINATE
    elif rho_l < 1.0 - tol_stab:
        cls = Classification.STABLE
    elif rho_l > 1.0 + tol_stab:
        cls = Classification.NON_STABLE
    else:
        cls = Classification.WEAKLY_STABLE
    return StabilityReport(rho_l, cls, eigengap, lam_star)
