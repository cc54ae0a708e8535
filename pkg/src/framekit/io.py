"""JSON and CSV formats.

Complex numbers are written as ``[re, im]`` pairs; plain numbers are read
as real.  JSON floats use Python's shortest round-trip representation and
CSV floats are written with 17 significant digits, so both read back to
the same doubles.

Formats:
    frame:     ``{"ambient_dim", "block_sizes", "labels"?, "vectors" | "sparse_vectors",
               "dual_vectors"? | "sparse_dual_vectors"?}``; the sparse keys list
               ``[row, col, value]`` entries.
    matrix:    ``{"dim", "entries"}`` (dense, row major).
    lattice:   ``{"N", "points": [[t, w], ...], "phases"?}``.
    sequence:  CSV ``n,|I_n|,x_n``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import jsonschema
import numpy as np
import scipy.sparse as sp

from .errors import DomainError, InputError
from .frames import FrameSnapshot, MeasureSequence
from .gabor import GaborLattice
from .index import IndexDecomposition
from .sequences import RealSequence

_NUMBER = {"type": "number"}
_COMPLEX = {"oneOf": [_NUMBER, {"type": "array", "items": _NUMBER,
                                "minItems": 2, "maxItems": 2}]}


def _rows_schema(width: int | None = None) -> dict:
    # entries are checked by _entry_problems; per-entry schema checks are far
    # too slow on frames with a few hundred thousand numbers
    row = {"type": "array"}
    if width is not None:
        row.update(minItems=width, maxItems=width)
    return {"type": "array", "items": row}


def frame_schema(ambient_dim: int | None = None) -> dict:
    """Schema of the frame format; row length is pinned once the dimension is known."""
    entry = {"type": "array", "prefixItems": [{"type": "integer", "minimum": 0},
                                              {"type": "integer", "minimum": 0}, _COMPLEX],
             "minItems": 3, "maxItems": 3}
    entries = {"type": "array", "items": entry}
    return {
        "type": "object",
        "required": ["ambient_dim", "block_sizes"],
        "properties": {
            "ambient_dim": {"type": "integer", "minimum": 1},
            "block_sizes": {"type": "array", "items": {"type": "integer", "minimum": 1},
                            "minItems": 1},
            "labels": {"type": "array"},
            "vectors": _rows_schema(ambient_dim),
            "sparse_vectors": entries,
            "dual_vectors": _rows_schema(ambient_dim),
            "sparse_dual_vectors": entries,
        },
        "oneOf": [{"required": ["vectors"]}, {"required": ["sparse_vectors"]}],
        "not": {"required": ["dual_vectors", "sparse_dual_vectors"]},
    }


MATRIX_SCHEMA = {
    "type": "object",
    "required": ["dim", "entries"],
    "properties": {"dim": {"type": "integer", "minimum": 1}, "entries": _rows_schema()},
}

LATTICE_SCHEMA = {
    "type": "object",
    "required": ["points"],
    "properties": {
        "N": {"type": ["integer", "null"], "minimum": 1},
        "points": {"type": "array", "items": {"type": "array", "items": _NUMBER,
                                              "minItems": 2}},
        "phases": {"type": "array", "items": _COMPLEX},
    },
}

DECOMP_SCHEMA = {
    "type": "object",
    "required": ["labels", "block_sizes"],
    "properties": {"labels": {"type": "array"},
                   "block_sizes": {"type": "array", "items": {"type": "integer"}}},
}


# -- primitives ----------------------------------------------------------------------


def _plain(obj: Any) -> Any:
    """Convert numpy scalars/arrays and complex numbers to JSON types."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [_float(obj.real), _float(obj.imag)]
    if isinstance(obj, (float, np.floating)):
        return _float(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def _float(x) -> float | str | None:
    x = float(x)
    if math.isnan(x):
        return None
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def dumps(obj: Any) -> str:
    return json.dumps(_plain(obj), indent=2, sort_keys=True) + "\n"


def write_json(path: str | Path, obj: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj))
    return path


def loads(text: str, source: str = "<string>") -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{source}: invalid JSON at line {exc.lineno}, column {exc.colno}: "
                         f"{exc.msg}") from exc


def read_json(path: str | Path, schema: dict | None = None) -> Any:
    """Parse a JSON file, optionally validating it against ``schema``."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from exc
    data = loads(text, str(path))
    if schema is not None:
        problems = schema_problems(data, schema)
        if problems:
            raise InputError(f"{path}: schema violation", problems)
    return data


def schema_problems(data: Any, schema: dict) -> list[str]:
    """Every schema failure, as ``location: message`` strings."""
    validator = jsonschema.Draft202012Validator(schema)
    out = []
    for err in sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path)):
        where = "/".join(str(p) for p in err.absolute_path) or "<root>"
        out.append(f"{where}: {err.message}")
    return out


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _entry_problems(rows, where: str) -> list[str]:
    """Every entry of a row list that is neither a number nor an ``[re, im]`` pair."""
    out = []
    for i, row in enumerate(rows):
        for j, v in enumerate(row):
            if not (_is_number(v) or (isinstance(v, list) and len(v) == 2
                                      and _is_number(v[0]) and _is_number(v[1]))):
                out.append(f"{where}/{i}/{j}: {v!r} is not a number or [re, im] pair")
    return out


def decode_complex(rows) -> np.ndarray:
    """Nested lists of numbers or ``[re, im]`` pairs to an array."""
    def one(v):
        return complex(v[0], v[1]) if isinstance(v, (list, tuple)) else v

    arr = np.array([[one(v) for v in row] for row in rows])
    if arr.dtype.kind == "c" and not np.any(arr.imag):
        arr = arr.real
    return arr.astype(complex if arr.dtype.kind == "c" else float)


def encode_complex(M) -> list:
    M = np.asarray(M)
    if M.dtype.kind != "c":
        return [[_float(v) for v in row] for row in M]
    return [[[_float(v.real), _float(v.imag)] for v in row] for row in M]


# -- frames -------------------------------------------------------------------------


def frame_to_dict(frame: FrameSnapshot, sparse: bool | None = None) -> dict:
    """Serialize a frame; sparse frames are written as coordinate entries by default."""
    d = frame.decomp
    out = {"ambient_dim": frame.ambient_dim, "block_sizes": list(d.block_sizes),
           "labels": [list(l) if isinstance(l, tuple) else l for l in d.labels]}
    if d.coordinates is not None:
        out["coordinates"] = d.coordinates.tolist()
    sparse = frame.is_sparse if sparse is None else sparse
    if sparse:
        out["sparse_vectors"] = _encode_coo(frame.vectors)
    else:
        out["vectors"] = encode_complex(frame.dense_vectors())
    D = frame.explicit_dual
    if D is not None and sparse:
        out["sparse_dual_vectors"] = _encode_coo(D)
    elif D is not None:
        out["dual_vectors"] = encode_complex(D.toarray() if sp.issparse(D) else D)
    return out


def _encode_coo(M) -> list:
    coo = sp.coo_matrix(M)
    coo.eliminate_zeros()
    return [[int(r), int(c), _plain(v if np.iscomplexobj(v) else float(v))]
            for r, c, v in zip(coo.row, coo.col, coo.data)]


def _decode_coo(entries, shape) -> sp.csr_matrix:
    vals = np.array([complex(*v) if isinstance(v, list) else v for _, _, v in entries],
                    dtype=None if entries else float)
    if vals.dtype.kind == "c" and not np.any(vals.imag):
        vals = vals.real
    rows = [e[0] for e in entries]
    cols = [e[1] for e in entries]
    return sp.csr_matrix((vals, (rows, cols)), shape=shape)


def _frame_schema_problems(data: Any) -> list[str]:
    """Structure first, then row lengths once the dimension is known, then entries."""
    problems = schema_problems(data, frame_schema())
    if problems:
        return problems
    problems = schema_problems(data, frame_schema(data["ambient_dim"]))
    for key in ("vectors", "dual_vectors"):
        if key in data:
            problems += _entry_problems(data[key], key)
    return problems


def _frame_invariants(data: dict) -> list[str]:
    problems = []
    sizes = data["block_sizes"]
    if any(b < a for a, b in zip(sizes, sizes[1:])):
        problems.append("block_sizes: must be nondecreasing")
    count = sizes[-1]
    if "vectors" in data and len(data["vectors"]) != count:
        problems.append(f"vectors: {len(data['vectors'])} rows but the last block holds {count}")
    for key in ("sparse_vectors", "sparse_dual_vectors"):
        for k, (r, c, _) in enumerate(data.get(key, ())):
            if r >= count or c >= data["ambient_dim"]:
                problems.append(f"{key}/{k}: entry ({r}, {c}) out of range")
    if "dual_vectors" in data and len(data["dual_vectors"]) != count:
        problems.append(f"dual_vectors: {len(data['dual_vectors'])} rows but "
                        f"{count} vectors")
    if "labels" in data and len(data["labels"]) != count:
        problems.append(f"labels: {len(data['labels'])} labels but {count} vectors")
    return problems


def frame_from_dict(data: dict, source: str = "<frame>") -> FrameSnapshot:
    """Validate (schema, then invariants) and build the snapshot."""
    problems = _frame_schema_problems(data)
    if problems:
        raise InputError(f"{source}: schema violation", problems)
    problems = _frame_invariants(data)
    if problems:
        raise InputError(f"{source}: invariant violation", problems)
    sizes = data["block_sizes"]
    if "labels" in data:
        labels = tuple(tuple(l) if isinstance(l, list) else l for l in data["labels"])
        decomp = IndexDecomposition(labels, tuple(sizes), data.get("coordinates"))
    else:
        decomp = IndexDecomposition.from_sizes(sizes, start=1)
    dim = data["ambient_dim"]
    if "vectors" in data:
        vecs = decode_complex(data["vectors"]) if data["vectors"] else np.zeros((0, dim))
    else:
        vecs = _decode_coo(data["sparse_vectors"], (sizes[-1], dim))
    dual = None
    if "dual_vectors" in data:
        dual = decode_complex(data["dual_vectors"])
    elif "sparse_dual_vectors" in data:
        dual = _decode_coo(data["sparse_dual_vectors"], (sizes[-1], dim))
    try:
        return FrameSnapshot(dim, vecs, decomp, explicit_dual=dual)
    except DomainError as exc:
        raise InputError(f"{source}: {exc}") from exc


def write_frame(path: str | Path, frame: FrameSnapshot, sparse: bool | None = None) -> Path:
    return write_json(path, frame_to_dict(frame, sparse))


def read_frame(path: str | Path) -> FrameSnapshot:
    return frame_from_dict(read_json(path), str(path))


@dataclass
class ValidationReport:
    path: str
    schema_errors: list = field(default_factory=list)
    invariant_errors: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not (self.schema_errors or self.invariant_errors)

    def to_dict(self) -> dict:
        return {"path": self.path, "ok": self.ok, "schema_errors": self.schema_errors,
                "invariant_errors": self.invariant_errors}


def validate_frame_file(path: str | Path) -> ValidationReport:
    """Schema check listing all failures, then the count and dual-shape invariants.

    Raises:
        InputError: the file is missing or is not JSON.
    """
    data = read_json(path)
    report = ValidationReport(str(path))
    report.schema_errors = _frame_schema_problems(data)
    if not report.schema_errors:
        report.invariant_errors = _frame_invariants(data)
    return report


# -- matrices, lattices, decompositions --------------------------------------------------


def matrix_to_dict(M) -> dict:
    M = M.toarray() if sp.issparse(M) else np.asarray(M)
    return {"dim": int(M.shape[0]), "entries": encode_complex(M)}


def matrix_from_dict(data: dict, source: str = "<matrix>") -> np.ndarray:
    problems = schema_problems(data, MATRIX_SCHEMA)
    if not problems:
        problems = _entry_problems(data["entries"], "entries")
    if problems:
        raise InputError(f"{source}: schema violation", problems)
    M = decode_complex(data["entries"]) if data["entries"] else np.zeros((0, 0))
    if M.shape != (data["dim"], data["dim"]):
        raise InputError(f"{source}: entries have shape {M.shape}, dim is {data['dim']}")
    return M


def read_matrix(path: str | Path) -> np.ndarray:
    """Dense matrix JSON, or the Gram matrix of a frame file."""
    data = read_json(path)
    if isinstance(data, dict) and "ambient_dim" in data:
        G = frame_from_dict(data, str(path)).gram()
        return G.toarray() if sp.issparse(G) else G
    return matrix_from_dict(data, str(path))


def read_lattice(path: str | Path) -> GaborLattice:
    data = read_json(path, LATTICE_SCHEMA)
    try:
        return GaborLattice.from_dict(data)
    except DomainError as exc:
        raise InputError(f"{path}: {exc}") from exc


def read_decomposition(path: str | Path) -> IndexDecomposition:
    data = read_json(path, DECOMP_SCHEMA)
    try:
        return IndexDecomposition.from_dict(data)
    except DomainError as exc:
        raise InputError(f"{path}: {exc}") from exc


# -- CSV --------------------------------------------------------------------------------


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])
    return path


SEQUENCE_HEADER = ("n", "|I_n|", "x_n")
MEASURE_HEADER = ("n", "|I_n|", "a_n", "b_n", "stable")


def write_sequence(path: str | Path, x: RealSequence) -> Path:
    return write_csv(path, SEQUENCE_HEADER,
                     ((n, s, v) for n, (s, v) in enumerate(zip(x.sizes, x.values), 1)))


def read_sequence(path: str | Path) -> RealSequence:
    """Read ``n,|I_n|,x_n``; errors name the offending line."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from exc
    sizes, values = [], []
    reader = csv.reader(text.splitlines())
    for lineno, row in enumerate(reader, 1):
        if not row or row[0].strip().startswith("#"):
            continue
        if lineno == 1 and not _numeric(row[0]):
            continue
        if len(row) != 3:
            raise InputError(f"{path}: line {lineno}: expected 3 columns, found {len(row)}")
        try:
            n, s, x = int(row[0]), int(row[1]), float(row[2])
        except ValueError as exc:
            raise InputError(f"{path}: line {lineno}: {exc}") from exc
        if n != len(sizes) + 1:
            raise InputError(f"{path}: line {lineno}: expected n = {len(sizes) + 1}, got {n}")
        sizes.append(s)
        values.append(x)
    if not sizes:
        raise InputError(f"{path}: no data rows")
    try:
        return RealSequence(np.array(values), np.array(sizes))
    except DomainError as exc:
        raise InputError(f"{path}: {exc}") from exc


def _numeric(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def write_measure_sequence(path: str | Path, ms: MeasureSequence) -> Path:
    return write_csv(path, MEASURE_HEADER, ms.rows())
