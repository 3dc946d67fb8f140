"""File formats: Matrix Market subset, tensor COO text, run artifacts.

All writers are deterministic: fixed field order, LF line endings, and
floats printed with repr() (the shortest decimal that round-trips to the
same binary value), so identical inputs produce byte-identical files.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .apps import TensorPS3
from .errors import ParseError
from .problem import StabilityReport
from .solver import MultistartResult, SolveReport, SupportingPoint

__all__ = [
    "SCHEMA",
    "read_matrix_market",
    "write_matrix_market",
    "read_tensor_coo",
    "write_tensor_coo",
    "RunArtifact",
    "make_artifact",
    "artifact_to_json",
    "artifact_from_json",
    "write_report",
    "write_boundary",
]

SCHEMA = "mnepv-report/1"

_FIELDS = {"real", "integer", "complex"}
_SYMMETRIES = {"general", "symmetric", "hermitian", "skew-symmetric"}


def _fmt(x: float) -> str:
    return repr(float(x))


class _Lines:
    """Line cursor that skips comments/blanks and tracks 1-based numbers."""

    def __init__(self, path, text: str):
        self.path = str(path)
        self.lines = text.splitlines()
        self.pos = 0

    def next_data(self) -> tuple[int, str] | None:
        while self.pos < len(self.lines):
            self.pos += 1
            line = self.lines[self.pos - 1].strip()
            if line and not line.startswith("%") and not line.startswith("#"):
                return self.pos, line
        return None


def _parse_int(tok: str, path, lineno, what: str) -> int:
    try:
        return int(tok)
    except ValueError:
        raise ParseError(f"non-numeric {what} token {tok!r}", path, lineno) from None


def _parse_float(tok: str, path, lineno) -> float:
    try:
        v = float(tok)
    except ValueError:
        raise ParseError(f"non-numeric value token {tok!r}", path, lineno) from None
    if not math.isfinite(v):
        raise ParseError(f"non-finite value {tok!r}", path, lineno)
    return v


def read_matrix_market(path) -> np.ndarray:
    """Read a Matrix Market file into a dense array.

    Supports matrix objects in coordinate or array format, real/integer/
    complex fields, and general/symmetric/hermitian/skew-symmetric storage
    (lower triangle for the symmetric classes, 1-based indices).
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read file: {exc}", path) from exc
    if not text.strip():
        raise ParseError("empty file", path, 1)
    header = text.splitlines()[0].strip().split()
    if len(header) != 5 or header[0] != "%%MatrixMarket" or header[1].lower() != "matrix":
        raise ParseError(
            "malformed header (expected '%%MatrixMarket matrix <format> <field> <symmetry>')",
            path,
            1,
        )
    fmt, fld, sym = header[2].lower(), header[3].lower(), header[4].lower()
    if fmt not in {"coordinate", "array"}:
        raise ParseError(f"unsupported format {fmt!r}", path, 1)
    if fld not in _FIELDS:
        raise ParseError(f"unsupported field {fld!r}", path, 1)
    if sym not in _SYMMETRIES:
        raise ParseError(f"unsupported symmetry {sym!r}", path, 1)

    cursor = _Lines(path, text)
    cursor.pos = 1  # past header
    size = cursor.next_data()
    if size is None:
        raise ParseError("missing size line", path, len(cursor.lines))
    lineno, line = size
    toks = line.split()
    complex_field = fld == "complex"
    dtype = np.complex128 if complex_field else np.float64
    if fmt == "coordinate":
        if len(toks) != 3:
            raise ParseError("size line must be 'rows cols nnz'", path, lineno)
        nrow = _parse_int(toks[0], path, lineno, "size")
        ncol = _parse_int(toks[1], path, lineno, "size")
        nnz = _parse_int(toks[2], path, lineno, "size")
        mat = np.zeros((nrow, ncol), dtype=dtype)
        for _ in range(nnz):
            entry = cursor.next_data()
            if entry is None:
                raise ParseError(
                    f"expected {nnz} entries, file ended early", path, len(cursor.lines)
                )
            lineno, line = entry
            toks = line.split()
            want = 4 if complex_field else 3
            if len(toks) != want:
                raise ParseError(
                    f"expected {want} tokens on an entry line, got {len(toks)}",
                    path,
                    lineno,
                )
            i = _parse_int(toks[0], path, lineno, "row")
            jcol = _parse_int(toks[1], path, lineno, "column")
            if not (1 <= i <= nrow and 1 <= jcol <= ncol):
                raise ParseError(f"index ({i}, {jcol}) out of bounds", path, lineno)
            if complex_field:
                v = complex(
                    _parse_float(toks[2], path, lineno), _parse_float(toks[3], path, lineno)
                )
            else:
                v = _parse_float(toks[2], path, lineno)
            _place(mat, i - 1, jcol - 1, v, sym, path, lineno)
        if cursor.next_data() is not None:
            raise ParseError("trailing data after declared entries", path, cursor.pos)
        return mat

    if len(toks) != 2:
        raise ParseError("size line must be 'rows cols'", path, lineno)
    nrow = _parse_int(toks[0], path, lineno, "size")
    ncol = _parse_int(toks[1], path, lineno, "size")
    mat = np.zeros((nrow, ncol), dtype=dtype)
    if sym == "general":
        coords = [(i, j) for j in range(ncol) for i in range(nrow)]
    elif sym == "skew-symmetric":
        coords = [(i, j) for j in range(ncol) for i in range(j + 1, nrow)]
    else:
        coords = [(i, j) for j in range(ncol) for i in range(j, nrow)]
    for i, jcol in coords:
        entry = cursor.next_data()
        if entry is None:
            raise ParseError("array data ended early", path, len(cursor.lines))
        lineno, line = entry
        toks = line.split()
        want = 2 if complex_field else 1
        if len(toks) != want:
            raise ParseError(
                f"expected {want} tokens on an array value line, got {len(toks)}",
                path,
                lineno,
            )
        if complex_field:
            v = complex(
                _parse_float(toks[0], path, lineno), _parse_float(toks[1], path, lineno)
            )
        else:
            v = _parse_float(toks[0], path, lineno)
        _place(mat, i, jcol, v, sym, path, lineno)
    if cursor.next_data() is not None:
        raise ParseError("trailing data after declared entries", path, cursor.pos)
    return mat


def _place(mat, i, j, v, sym, path, lineno) -> None:
    if sym == "general":
        mat[i, j] += v
        return
    if sym == "skew-symmetric":
        if i <= j:
            raise ParseError(
                "skew-symmetric storage must be strictly below the diagonal", path, lineno
            )
        mat[i, j] += v
        mat[j, i] += -v
        return
    if i < j:
        raise ParseError(f"{sym} storage must be on or below the diagonal", path, lineno)
    if i == j:
        if sym == "hermitian" and isinstance(v, complex) and v.imag != 0.0:
            raise ParseError("hermitian diagonal entries must be real", path, lineno)
        mat[i, j] += v
        return
    mat[i, j] += v
    mat[j, i] += np.conj(v) if sym == "hermitian" else v


def write_matrix_market(path, mat: np.ndarray, symmetry: str = "general") -> None:
    """Write a dense matrix in coordinate Matrix Market format.

    The claimed symmetry is checked exactly against the data; symmetric
    classes store the (strictly, for skew) lower triangle.
    """
    mat = np.asarray(mat)
    if mat.ndim == 1:
        mat = mat[:, None]
    if symmetry not in _SYMMETRIES:
        raise ValueError(f"unsupported symmetry {symmetry!r}")
    complex_field = bool(np.iscomplexobj(mat))
    fld = "complex" if complex_field else "real"
    nrow, ncol = mat.shape
    if symmetry != "general":
        if nrow != ncol:
            raise ValueError(f"{symmetry} storage requires a square matrix")
        ref = {"symmetric": mat.T, "hermitian": mat.conj().T, "skew-symmetric": -mat.T}
        if not np.array_equal(mat, ref[symmetry]):
            raise ValueError(f"matrix is not exactly {symmetry}")
    rows = []
    for i in range(nrow):
        if symmetry == "general":
            jrange = range(ncol)
        elif symmetry == "skew-symmetric":
            jrange = range(i)
        else:
            jrange = range(i + 1)
        for j in jrange:
            v = mat[i, j]
            if v == 0:
                continue
            if complex_field:
                rows.append(f"{i + 1} {j + 1} {_fmt(v.real)} {_fmt(v.imag)}")
            else:
                rows.append(f"{i + 1} {j + 1} {_fmt(v)}")
    with open(path, "w", newline="\n") as fh:
        fh.write(f"%%MatrixMarket matrix coordinate {fld} {symmetry}\n")
        fh.write(f"{nrow} {ncol} {len(rows)}\n")
        for row in rows:
            fh.write(row + "\n")


def read_tensor_coo(path) -> TensorPS3:
    """Read a tensor from 'n m nnz' header plus 1-based 'i j k value' lines.

    Duplicate entries are summed and every slice is symmetrized, so an
    unmirrored off-diagonal entry contributes half its value to each of the
    two mirrored positions.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read file: {exc}", path) from exc
    cursor = _Lines(path, text)
    header = cursor.next_data()
    if header is None:
        raise ParseError("empty file", path, 1)
    lineno, line = header
    toks = line.split()
    if len(toks) != 3:
        raise ParseError("header must be 'n m nnz'", path, lineno)
    n = _parse_int(toks[0], path, lineno, "size")
    m = _parse_int(toks[1], path, lineno, "size")
    nnz = _parse_int(toks[2], path, lineno, "size")
    if n < 1 or m < 1:
        raise ParseError("tensor dimensions must be positive", path, lineno)
    indices = []
    values = []
    for _ in range(nnz):
        entry = cursor.next_data()
        if entry is None:
            raise ParseError(
                f"expected {nnz} entries, file ended early", path, len(cursor.lines)
            )
        lineno, line = entry
        toks = line.split()
        if len(toks) != 4:
            raise ParseError(
                f"expected 'i j k value', got {len(toks)} tokens", path, lineno
            )
        i = _parse_int(toks[0], path, lineno, "index")
        j = _parse_int(toks[1], path, lineno, "index")
        k = _parse_int(toks[2], path, lineno, "index")
        if not (1 <= i <= n and 1 <= j <= n and 1 <= k <= m):
            raise ParseError(f"index ({i}, {j}, {k}) out of bounds", path, lineno)
        v = _parse_float(toks[3], path, lineno)
        indices.append((i - 1, j - 1, k - 1))
        values.append(v)
    if cursor.next_data() is not None:
        raise ParseError("trailing data after declared entries", path, cursor.pos)
    return TensorPS3.from_entries(n, m, indices, values)


def write_tensor_coo(path, t: TensorPS3) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(f"{t.n} {t.m} {t.nnz}\n")
        for (i, j, k), v in zip(t.indices, t.values):
            fh.write(f"{i + 1} {j + 1} {k + 1} {_fmt(v)}\n")


def _pairs(vec: np.ndarray) -> list[list[float]]:
    vec = np.asarray(vec)
    return [[float(np.real(v)), float(np.imag(v))] for v in vec]


@dataclass
class RunArtifact:
    """Plain-data record of a run; round-trips losslessly through JSON."""

    metadata: dict
    runs: list
    clusters: list
    best_run: int | None
    solution: dict | None
    extras: dict = field(default_factory=dict)
    schema: str = SCHEMA


def _report_dict(report: SolveReport) -> dict:
    return {
        "converged": bool(report.converged),
        "iterations": int(report.iterations),
        "lambda_star": float(report.lambda_star),
        "f_star": float(report.f_star),
        "f0": float(report.f0),
        "res0": float(report.res0),
        "x_star": _pairs(report.x_star),
        "history": [
            {
                "k": rec.k,
                "lambda": rec.lam,
                "f": rec.f_final,
                "residual": rec.res_final,
                "accel": rec.accel.value,
            }
            for rec in report.records
        ],
    }


def _stability_dict(stability: StabilityReport | None) -> dict | None:
    if stability is None:
        return None
    return {
        "rho_L": float(stability.rho_L),
        "classification": stability.classification.value,
        "eigengap": float(stability.eigengap),
        "lambda_star": float(stability.lambda_star),
    }


def make_artifact(
    kind: str,
    n: int,
    m: int,
    seed: int,
    options: dict,
    result: MultistartResult,
    stability: StabilityReport | None = None,
    extras: dict | None = None,
) -> RunArtifact:
    best = result.best_report
    solution = None
    if best is not None:
        solution = {
            "x_star": _pairs(best.x_star),
            "lambda_star": float(best.lambda_star),
            "f_star": float(best.f_star),
            "stability": _stability_dict(stability),
        }
    return RunArtifact(
        metadata={"kind": kind, "n": n, "m": m, "seed": seed, "options": options},
        runs=[_report_dict(r) for r in result.reports],
        clusters=[
            {"f_star": c.f_star, "count": c.count, "run_indices": list(c.run_indices)}
            for c in result.clusters
        ],
        best_run=result.best_index,
        solution=solution,
        extras=extras or {},
    )


def artifact_to_json(artifact: RunArtifact) -> str:
    return json.dumps(asdict(artifact), indent=1)


def artifact_from_json(text: str) -> RunArtifact:
    data = json.loads(text)
    if data.get("schema") != SCHEMA:
        raise ParseError(f"unknown artifact schema {data.get('schema')!r}")
    return RunArtifact(
        metadata=data["metadata"],
        runs=data["runs"],
        clusters=data["clusters"],
        best_run=data["best_run"],
        solution=data["solution"],
        extras=data.get("extras", {}),
        schema=data["schema"],
    )


def write_report(artifact: RunArtifact, path, format: str = "json") -> None:
    """Write an artifact as versioned JSON or as a flat per-iteration CSV."""
    if format == "json":
        with open(path, "w", newline="\n") as fh:
            fh.write(artifact_to_json(artifact))
            fh.write("\n")
        return
    if format == "csv":
        with open(path, "w", newline="\n") as fh:
            fh.write("run,k,f,residual,lambda,accel\n")
            for run_idx, run in enumerate(artifact.runs):
                for rec in run["history"]:
                    fh.write(
                        f"{run_idx},{rec['k']},{_fmt(rec['f'])},{_fmt(rec['residual'])},"
                        f"{_fmt(rec['lambda'])},{rec['accel']}\n"
                    )
        return
    raise ValueError(f"unknown report format {format!r}")


def write_boundary(points: Sequence[SupportingPoint], path) -> None:
    """CSV trace of supporting points: angles, image coordinates, lambda_v.

    Directions are parameterized by theta (m = 2) or (eta, theta) (m = 3);
    other widths have no angle chart and are rejected.
    """
    points = list(points)
    if not points:
        raise ValueError("no supporting points to write")
    m = len(points[0].v)
    if m not in (2, 3):
        raise ValueError(f"boundary traces support m in (2, 3), got m={m}")
    cols = (["theta"] if m == 2 else ["eta", "theta"]) + [
        f"y{i + 1}" for i in range(m)
    ] + ["lambda_v"]
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(cols) + "\n")
        for p in points:
            theta = math.atan2(p.v[1], p.v[0]) % (2.0 * math.pi)
            if m == 2:
                angles = [theta]
            else:
                eta = math.acos(min(1.0, max(-1.0, p.v[2])))
                angles = [eta, theta]
            row = [_fmt(a) for a in angles]
            row += [_fmt(y) for y in p.y_v]
            row.append(_fmt(p.lambda_v))
            fh.write(",".join(row) + "\n")
