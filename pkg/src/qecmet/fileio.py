"""JSON model and code files.

Complex numbers are ``[re, im]`` pairs and matrices are lists of rows.  The
writers emit a fixed key order and one matrix row per line with ``repr``
floats, so ``serialize(parse(text)) == text`` for any writer output.
Rates and ``omega`` share one implicit time unit.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .codes import CodePair
from .model import LindbladModel

SCHEMA_VERSION = 1
PROVENANCES = ("canonical", "optimized", "user")

__all__ = [
    "CodeFile",
    "SchemaError",
    "parse_code",
    "parse_code_text",
    "parse_model",
    "parse_model_text",
    "serialize_code",
    "serialize_model",
    "write_code",
    "write_model",
]


class SchemaError(ValueError):
    pass


def _num(x: float) -> str:
    x = float(x)
    if not math.isfinite(x):
        raise ValueError("cannot serialise non-finite numbers")
    return repr(x)


def _pair(z) -> str:
    z = complex(z)
    return f"[{_num(z.real)}, {_num(z.imag)}]"


def _matrix(m, indent: str) -> str:
    rows = [indent + "  [" + ", ".join(_pair(z) for z in row) + "]" for row in np.asarray(m)]
    return "[\n" + ",\n".join(rows) + "\n" + indent + "]"


def _matrix_list(ms, indent: str) -> str:
    if not ms:
        return "[]"
    inner = indent + "  "
    return "[\n" + ",\n".join(inner + _matrix(m, inner) for m in ms) + "\n" + indent + "]"


def serialize_model(model: LindbladModel) -> str:
    meta = json.dumps({str(k): str(v) for k, v in sorted(model.metadata.items())})
    parts = [
        f'  "schema_version": {SCHEMA_VERSION}',
        f'  "dim": {model.dim}',
        f'  "omega": {_num(model.omega)}',
        f'  "G": {_matrix(model.G, "  ")}',
        f'  "lindblad": {_matrix_list(model.lindblad, "  ")}',
        f'  "perturbation": {_matrix_list(model.perturbation, "  ")}',
        f'  "metadata": {meta}',
    ]
    return "{\n" + ",\n".join(parts) + "\n}\n"


def write_model(model: LindbladModel, path) -> Path:
    p = Path(path)
    p.write_text(serialize_model(model))
    return p


def _line_of(text: str, key: str) -> int | None:
    needle = f'"{key}"'
    for i, line in enumerate(text.splitlines(), 1):
        if needle in line:
            return i
    return None


def _fail(text, key, msg):
    line = _line_of(text, key) if text else None
    where = f" (line {line})" if line else ""
    raise SchemaError(f"{msg}{where}")


def _load(text: str, source: str) -> dict:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{source}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise SchemaError(f"{source}: top level must be an object")
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaError(f"{source}: unsupported schema_version {version!r}")
    return data


def _complex(v, path: str) -> complex:
    if (not isinstance(v, list) or len(v) != 2
            or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v)):
        raise SchemaError(f"{path}: expected [re, im] number pair, got {v!r}")
    z = complex(v[0], v[1])
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise SchemaError(f"{path}: non-finite entry")
    return z


def _read_matrix(v, dim: int, path: str) -> np.ndarray:
    if not isinstance(v, list) or len(v) != dim:
        raise SchemaError(f"{path}: expected {dim} rows")
    out = np.zeros((dim, dim), dtype=complex)
    for i, row in enumerate(v):
        if not isinstance(row, list) or len(row) != dim:
            raise SchemaError(f"{path}[{i}]: expected {dim} entries")
        for j, z in enumerate(row):
            out[i, j] = _complex(z, f"{path}[{i}][{j}]")
    return out


def _read_vector(v, n: int, path: str) -> np.ndarray:
    if not isinstance(v, list) or len(v) != n:
        raise SchemaError(f"{path}: expected {n} amplitudes")
    return np.array([_complex(z, f"{path}[{i}]") for i, z in enumerate(v)])


def parse_model_text(text: str, source: str = "<model>") -> LindbladModel:
    data = _load(text, source)
    for key in ("dim", "omega", "G", "lindblad"):
        if key not in data:
            raise SchemaError(f"{source}: missing field {key!r}")
    dim = data["dim"]
    if not isinstance(dim, int) or isinstance(dim, bool) or dim < 1:
        _fail(text, "dim", f"{source}: dim must be a positive integer")
    omega = data["omega"]
    if not isinstance(omega, (int, float)) or isinstance(omega, bool) or not math.isfinite(omega):
        _fail(text, "omega", f"{source}: omega must be a finite number")
    mats = {}
    for key in ("lindblad", "perturbation"):
        raw = data.get(key, [])
        if not isinstance(raw, list):
            _fail(text, key, f"{source}: {key} must be a list of matrices")
        try:
            mats[key] = tuple(_read_matrix(m, dim, f"{key}[{k}]") for k, m in enumerate(raw))
        except SchemaError as exc:
            _fail(text, key, f"{source}: {exc}")
    try:
        g = _read_matrix(data["G"], dim, "G")
    except SchemaError as exc:
        _fail(text, "G", f"{source}: {exc}")
    meta = data.get("metadata", {})
    if not isinstance(meta, dict) or not all(isinstance(v, str) for v in meta.values()):
        _fail(text, "metadata", f"{source}: metadata must map strings to strings")
    try:
        return LindbladModel(g, mats["lindblad"], mats["perturbation"], float(omega), dict(meta))
    except ValueError as exc:
        _fail(text, "G", f"{source}: {exc}")


def parse_model(path) -> LindbladModel:
    p = Path(path)
    return parse_model_text(p.read_text(), str(p))


@dataclass(frozen=True)
class CodeFile:
    code: CodePair
    s_star: float | None = None
    eigengap: float | None = None
    provenance: str = "user"

    def __post_init__(self):
        if self.provenance not in PROVENANCES:
            raise ValueError(f"provenance must be one of {PROVENANCES}")


def _opt(x) -> str:
    return "null" if x is None else _num(x)


def serialize_code(cf: CodeFile) -> str:
    c = cf.code
    parts = [
        f'  "schema_version": {SCHEMA_VERSION}',
        f'  "d_P": {c.d_P}',
        f'  "d_A": {c.d_A}',
        '  "c0": [' + ", ".join(_pair(z) for z in c.c0) + "]",
        '  "c1": [' + ", ".join(_pair(z) for z in c.c1) + "]",
        f'  "s_star": {_opt(cf.s_star)}',
        f'  "eigengap": {_opt(cf.eigengap)}',
        f'  "provenance": {json.dumps(cf.provenance)}',
    ]
    return "{\n" + ",\n".join(parts) + "\n}\n"


def write_code(cf: CodeFile, path) -> Path:
    p = Path(path)
    p.write_text(serialize_code(cf))
    return p


def parse_code_text(text: str, source: str = "<code>") -> CodeFile:
    data = _load(text, source)
    for key in ("d_P", "d_A", "c0", "c1"):
        if key not in data:
            raise SchemaError(f"{source}: missing field {key!r}")
    dims = []
    for key in ("d_P", "d_A"):
        v = data[key]
        if not isinstance(v, int) or isinstance(v, bool) or v < 1:
            _fail(text, key, f"{source}: {key} must be a positive integer")
        dims.append(v)
    n = dims[0] * dims[1]
    vecs = []
    for key in ("c0", "c1"):
        try:
            vecs.append(_read_vector(data[key], n, key))
        except SchemaError as exc:
            _fail(text, key, f"{source}: {exc}")
    extra = {}
    for key in ("s_star", "eigengap"):
        v = data.get(key)
        if v is not None and (not isinstance(v, (int, float)) or isinstance(v, bool)):
            _fail(text, key, f"{source}: {key} must be a number or null")
        extra[key] = None if v is None else float(v)
    prov = data.get("provenance", "user")
    if prov not in PROVENANCES:
        _fail(text, "provenance", f"{source}: provenance must be one of {PROVENANCES}")
    try:
        code = CodePair(vecs[0], vecs[1], dims[0], dims[1])
    except ValueError as exc:
        raise SchemaError(f"{source}: {exc}") from exc
    return CodeFile(code, extra["s_star"], extra["eigengap"], prov)


def parse_code(path) -> CodeFile:
    p = Path(path)
    return parse_code_text(p.read_text(), str(p))
