"""Codecs for measures, filters, models, kernels, tables, and trajectories.

Conventions shared by every format:

- frequencies are cycles per unit time in all files
- complex scalars serialize as two-element arrays ``[re, im]``
- matrices serialize as row-major nested arrays of complex scalars
- JSON documents carry a ``"kind"`` discriminator, reject unknown keys, and
  are emitted with a fixed key order and shortest round-trip float formatting,
  so serializing equal objects yields byte-identical output
- CSV headers are ``tau`` (covariance tables) or ``t`` (trajectories)
  followed by ``re_ij``/``im_ij`` columns in row-major index order
- the binary trajectory format is little-endian: magic ``QWSS``, version u32,
  dim u32, n u64, dt f64, then n*dim complex128 samples (interleaved re/im
  f64, time-major)

Schema violations raise SchemaError with a JSON-path location; non-PSD
weights raise NotPositiveSemidefiniteError naming the offending atom or bin
and the witness eigenvalue.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import struct
import tempfile

import numpy as np

from .errors import SchemaError
from .filters import (
    Composition,
    Derivative,
    ExpOperator,
    FilterSpec,
    ScalarConvolution,
    Shift,
    Tabulated,
)
from .linalg import validate_psd
from .measure import (
    CovarianceTable,
    DensityGrid,
    KernelVerdict,
    OperatorSpectralMeasure,
)
from .quantum import KolmogorovFactorization, Mode, QuantumModel
from .sampling import Trajectory

__all__ = [
    "serialize_measure",
    "deserialize_measure",
    "serialize_filter",
    "deserialize_filter",
    "serialize_model",
    "deserialize_model",
    "serialize_kernel",
    "deserialize_kernel",
    "serialize_factorization",
    "deserialize_factorization",
    "serialize_verdict",
    "deserialize_verdict",
    "covariance_to_csv",
    "covariance_from_csv",
    "trajectory_to_csv",
    "trajectory_from_csv",
    "trajectory_to_binary",
    "trajectory_from_binary",
    "write_text_atomic",
    "write_bytes_atomic",
]


# --- primitive encoding / decoding ---------------------------------------


def _enc_complex(z: complex) -> list[float]:
    return [float(z.real), float(z.imag)]


def _enc_matrix(m: np.ndarray) -> list:
    return [[_enc_complex(z) for z in row] for row in np.asarray(m)]


def _dumps(doc: dict) -> bytes:
    return (json.dumps(doc, indent=2, allow_nan=False) + "\n").encode("utf-8")


def _loads(data) -> dict:
    if isinstance(data, (bytes, bytearray)):
        data = bytes(data).decode("utf-8")
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as e:
        raise SchemaError(f"invalid JSON: {e}") from None
    if not isinstance(doc, dict):
        raise SchemaError("top level must be a JSON object")
    return doc


def _check_keys(doc: dict, required: tuple, optional: tuple, loc: str | None):
    for key in doc:
        if key not in required and key not in optional:
            where = key if loc is None else f"{loc}.{key}"
            raise SchemaError(f"unknown key {key!r}", location=where)
    for key in required:
        if key not in doc:
            raise SchemaError(f"missing key {key!r}", location=loc)


def _check_kind(doc: dict, kind: str):
    got = doc.get("kind")
    if got != kind:
        raise SchemaError(f"expected kind {kind!r}, got {got!r}", location="kind")


def _as_real(v, loc: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise SchemaError("expected a real number", location=loc)
    x = float(v)
    if not math.isfinite(x):
        raise SchemaError("number must be finite", location=loc)
    return x


def _as_int(v, loc: str, minimum: int | None = None) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise SchemaError("expected an integer", location=loc)
    if minimum is not None and v < minimum:
        raise SchemaError(f"must be >= {minimum}, got {v}", location=loc)
    return v


def _as_bool(v, loc: str) -> bool:
    if not isinstance(v, bool):
        raise SchemaError("expected a boolean", location=loc)
    return v


def _as_complex(v, loc: str) -> complex:
    if not isinstance(v, list) or len(v) != 2:
        raise SchemaError("expected a complex scalar as [re, im]", location=loc)
    return complex(_as_real(v[0], loc), _as_real(v[1], loc))


def _as_matrix(
    v, loc: str, rows: int | None = None, cols: int | None = None
) -> np.ndarray:
    if not isinstance(v, list) or not v:
        raise SchemaError("expected a non-empty nested array matrix", location=loc)
    width = None
    out = []
    for row in v:
        if not isinstance(row, list) or not row:
            raise SchemaError("matrix rows must be non-empty arrays", location=loc)
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise SchemaError("matrix rows must have equal length", location=loc)
        out.append([_as_complex(z, loc) for z in row])
    m = np.array(out, dtype=np.complex128)
    if rows is not None and m.shape[0] != rows:
        raise SchemaError(f"expected {rows} rows, got {m.shape[0]}", location=loc)
    if cols is not None and m.shape[1] != cols:
        raise SchemaError(f"expected {cols} columns, got {m.shape[1]}", location=loc)
    return m


def _as_list(v, loc: str) -> list:
    if not isinstance(v, list):
        raise SchemaError("expected an array", location=loc)
    return v


def _as_object(v, loc: str) -> dict:
    if not isinstance(v, dict):
        raise SchemaError("expected an object", location=loc)
    return v


# --- spectral measures -----------------------------------------------------


def measure_to_document(mu: OperatorSpectralMeasure) -> dict:
    doc = {
        "kind": "spectral_measure",
        "dim": int(mu.dim),
        "atoms": [
            {"nu": float(nu), "weight": _enc_matrix(w)} for nu, w in mu.atoms
        ],
    }
    if mu.density is not None:
        den = mu.density
        doc["density"] = {
            "nu_min": float(den.nu_min),
            "nu_max": float(den.nu_max),
            "bins": int(den.bins),
            "values": [_enc_matrix(v) for v in den.values],
        }
    return doc


def measure_from_document(doc: dict) -> OperatorSpectralMeasure:
    _check_keys(doc, ("kind", "dim", "atoms"), ("density",), None)
    _check_kind(doc, "spectral_measure")
    dim = _as_int(doc["dim"], "dim", minimum=1)
    atoms = []
    for i, entry in enumerate(_as_list(doc["atoms"], "atoms")):
        loc = f"atoms[{i}]"
        entry = _as_object(entry, loc)
        _check_keys(entry, ("nu", "weight"), (), loc)
        nu = _as_real(entry["nu"], f"{loc}.nu")
        w = _as_matrix(entry["weight"], f"{loc}.weight", rows=dim, cols=dim)
        w = validate_psd(w, name=f"{loc}.weight")
        atoms.append((nu, w))
    density = None
    if "density" in doc:
        den = _as_object(doc["density"], "density")
        _check_keys(den, ("nu_min", "nu_max", "bins", "values"), (), "density")
        nu_min = _as_real(den["nu_min"], "density.nu_min")
        nu_max = _as_real(den["nu_max"], "density.nu_max")
        bins = _as_int(den["bins"], "density.bins", minimum=1)
        raw = _as_list(den["values"], "density.values")
        if len(raw) != bins:
            raise SchemaError(
                f"bins={bins} but {len(raw)} values given", location="density.values"
            )
        vals = np.empty((bins, dim, dim), dtype=np.complex128)
        for b, v in enumerate(raw):
            loc = f"density.values[{b}]"
            vals[b] = validate_psd(
                _as_matrix(v, loc, rows=dim, cols=dim), name=loc
            )
        density = DensityGrid(nu_min=nu_min, nu_max=nu_max, values=vals)
    return OperatorSpectralMeasure(dim=dim, atoms=tuple(atoms), density=density)


def serialize_measure(mu: OperatorSpectralMeasure) -> bytes:
    return _dumps(measure_to_document(mu))


def deserialize_measure(data) -> OperatorSpectralMeasure:
    return measure_from_document(_loads(data))


# --- filters ----------------------------------------------------------------


def filter_to_document(filt: FilterSpec) -> dict:
    if isinstance(filt, Shift):
        return {
            "kind": "filter",
            "variant": "shift",
            "dim": int(filt.dim),
            "s": float(filt.s),
        }
    if isinstance(filt, Derivative):
        return {"kind": "filter", "variant": "derivative", "dim": int(filt.dim)}
    if isinstance(filt, ExpOperator):
        return {
            "kind": "filter",
            "variant": "exp_operator",
            "gamma": _enc_matrix(filt.gamma),
            "a": _enc_matrix(filt.a),
        }
    if isinstance(filt, Tabulated):
        return {
            "kind": "filter",
            "variant": "tabulated",
            "nu_min": float(filt.nu_min),
            "nu_max": float(filt.nu_max),
            "values": [_enc_matrix(v) for v in filt.values],
        }
    if isinstance(filt, Composition):
        return {
            "kind": "filter",
            "variant": "composition",
            "first": filter_to_document(filt.first),
            "second": filter_to_document(filt.second),
        }
    if isinstance(filt, ScalarConvolution):
        raise SchemaError(
            "scalar convolution filters hold an arbitrary callable "
            "and cannot be serialized; tabulate the response instead"
        )
    raise SchemaError(f"not a filter: {type(filt).__name__}")


_FILTER_KEYS = {
    "shift": (("dim", "s"), ()),
    "derivative": (("dim",), ()),
    "exp_operator": (("gamma", "a"), ()),
    "tabulated": (("nu_min", "nu_max", "values"), ()),
    "composition": (("first", "second"), ()),
}


def filter_from_document(doc: dict, loc: str | None = None) -> FilterSpec:
    prefix = f"{loc}." if loc else ""
    doc = _as_object(doc, loc or "filter")
    if "variant" not in doc:
        raise SchemaError("missing key 'variant'", location=loc)
    variant = doc["variant"]
    if variant not in _FILTER_KEYS:
        raise SchemaError(
            f"unknown filter variant {variant!r}", location=f"{prefix}variant"
        )
    required, optional = _FILTER_KEYS[variant]
    _check_keys(doc, ("kind", "variant") + required, optional, loc)
    _check_kind(doc, "filter")
    if variant == "shift":
        return Shift(
            dim=_as_int(doc["dim"], f"{prefix}dim", minimum=1),
            s=_as_real(doc["s"], f"{prefix}s"),
        )
    if variant == "derivative":
        return Derivative(dim=_as_int(doc["dim"], f"{prefix}dim", minimum=1))
    if variant == "exp_operator":
        g = _as_matrix(doc["gamma"], f"{prefix}gamma")
        a = _as_matrix(doc["a"], f"{prefix}a", rows=g.shape[0], cols=g.shape[0])
        return ExpOperator(gamma=g, a=a)
    if variant == "tabulated":
        raw = _as_list(doc["values"], f"{prefix}values")
        if not raw:
            raise SchemaError("need at least one bin", location=f"{prefix}values")
        first = _as_matrix(raw[0], f"{prefix}values[0]")
        d = first.shape[0]
        if first.shape[1] != d:
            raise SchemaError(
                "multiplier matrices must be square", location=f"{prefix}values[0]"
            )
        vals = np.empty((len(raw), d, d), dtype=np.complex128)
        vals[0] = first
        for b in range(1, len(raw)):
            vals[b] = _as_matrix(raw[b], f"{prefix}values[{b}]", rows=d, cols=d)
        return Tabulated(
            nu_min=_as_real(doc["nu_min"], f"{prefix}nu_min"),
            nu_max=_as_real(doc["nu_max"], f"{prefix}nu_max"),
            values=vals,
        )
    return Composition(
        first=filter_from_document(doc["first"], f"{prefix}first"),
        second=filter_from_document(doc["second"], f"{prefix}second"),
    )


def serialize_filter(filt: FilterSpec) -> bytes:
    return _dumps(filter_to_document(filt))


def deserialize_filter(data) -> FilterSpec:
    return filter_from_document(_loads(data))


# --- quantum models ---------------------------------------------------------


def model_to_document(model: QuantumModel) -> dict:
    return {
        "kind": "quantum_model",
        "dim_system": int(model.dim_system),
        "dim_environment": int(model.dim_environment),
        "env_state": _enc_matrix(model.env_state),
        "modes": [
            {
                "nu": float(m.nu),
                "system_op": _enc_matrix(m.system_op),
                "environment_op": _enc_matrix(m.environment_op),
            }
            for m in model.modes
        ],
    }


def model_from_document(doc: dict) -> QuantumModel:
    _check_keys(
        doc,
        ("kind", "dim_system", "dim_environment", "env_state", "modes"),
        (),
        None,
    )
    _check_kind(doc, "quantum_model")
    dh = _as_int(doc["dim_system"], "dim_system", minimum=1)
    dk = _as_int(doc["dim_environment"], "dim_environment", minimum=1)
    rho = _as_matrix(doc["env_state"], "env_state", rows=dk, cols=dk)
    modes = []
    for i, entry in enumerate(_as_list(doc["modes"], "modes")):
        loc = f"modes[{i}]"
        entry = _as_object(entry, loc)
        _check_keys(entry, ("nu", "system_op", "environment_op"), (), loc)
        modes.append(
            Mode(
                nu=_as_real(entry["nu"], f"{loc}.nu"),
                system_op=_as_matrix(
                    entry["system_op"], f"{loc}.system_op", rows=dh, cols=dh
                ),
                environment_op=_as_matrix(
                    entry["environment_op"], f"{loc}.environment_op", rows=dk, cols=dk
                ),
            )
        )
    return QuantumModel(
        dim_system=dh, dim_environment=dk, env_state=rho, modes=tuple(modes)
    )


def serialize_model(model: QuantumModel) -> bytes:
    return _dumps(model_to_document(model))


def deserialize_model(data) -> QuantumModel:
    return model_from_document(_loads(data))


# --- kernels and factorizations ---------------------------------------------


def kernel_to_document(blocks: np.ndarray) -> dict:
    k = np.ascontiguousarray(blocks, dtype=np.complex128)
    if k.ndim != 4 or k.shape[0] != k.shape[1] or k.shape[2] != k.shape[3]:
        raise SchemaError(f"kernel blocks must have shape (n, n, d, d), got {k.shape}")
    return {
        "kind": "kernel",
        "dim": int(k.shape[2]),
        "blocks": [[_enc_matrix(k[i, j]) for j in range(k.shape[1])] for i in range(k.shape[0])],
    }


def kernel_from_document(doc: dict) -> np.ndarray:
    _check_keys(doc, ("kind", "dim", "blocks"), (), None)
    _check_kind(doc, "kernel")
    d = _as_int(doc["dim"], "dim", minimum=1)
    rows = _as_list(doc["blocks"], "blocks")
    n = len(rows)
    if n < 1:
        raise SchemaError("need at least one block row", location="blocks")
    out = np.empty((n, n, d, d), dtype=np.complex128)
    for i, row in enumerate(rows):
        row = _as_list(row, f"blocks[{i}]")
        if len(row) != n:
            raise SchemaError(
                f"expected {n} blocks per row, got {len(row)}", location=f"blocks[{i}]"
            )
        for j, block in enumerate(row):
            out[i, j] = _as_matrix(block, f"blocks[{i}][{j}]", rows=d, cols=d)
    return out


def serialize_kernel(blocks: np.ndarray) -> bytes:
    return _dumps(kernel_to_document(blocks))


def deserialize_kernel(data) -> np.ndarray:
    return kernel_from_document(_loads(data))


def factorization_to_document(fact: KolmogorovFactorization) -> dict:
    return {
        "kind": "kolmogorov_factorization",
        "rank": int(fact.rank),
        "dim": int(fact.factors.shape[2]),
        "factors": [_enc_matrix(v) for v in fact.factors],
    }


def factorization_from_document(doc: dict) -> KolmogorovFactorization:
    _check_keys(doc, ("kind", "rank", "dim", "factors"), (), None)
    _check_kind(doc, "kolmogorov_factorization")
    rank = _as_int(doc["rank"], "rank", minimum=0)
    d = _as_int(doc["dim"], "dim", minimum=1)
    raw = _as_list(doc["factors"], "factors")
    if not raw:
        raise SchemaError("need at least one factor", location="factors")
    out = np.zeros((len(raw), rank, d), dtype=np.complex128)
    for i, v in enumerate(raw):
        loc = f"factors[{i}]"
        if rank == 0:
            if v != []:
                raise SchemaError("rank 0 factors must be empty arrays", location=loc)
        else:
            out[i] = _as_matrix(v, loc, rows=rank, cols=d)
    return KolmogorovFactorization(rank=rank, factors=out)


def serialize_factorization(fact: KolmogorovFactorization) -> bytes:
    return _dumps(factorization_to_document(fact))


def deserialize_factorization(data) -> KolmogorovFactorization:
    return factorization_from_document(_loads(data))


# --- verdicts ----------------------------------------------------------------


def verdict_to_document(verdict: KernelVerdict) -> dict:
    doc = {
        "kind": "kernel_verdict",
        "passed": bool(verdict.passed),
        "dim": int(verdict.dim),
        "points": int(verdict.points),
    }
    if verdict.witness is not None:
        doc["witness"] = float(verdict.witness)
    return doc


def verdict_from_document(doc: dict) -> KernelVerdict:
    _check_keys(doc, ("kind", "passed", "dim", "points"), ("witness",), None)
    _check_kind(doc, "kernel_verdict")
    witness = _as_real(doc["witness"], "witness") if "witness" in doc else None
    return KernelVerdict(
        passed=_as_bool(doc["passed"], "passed"),
        witness=witness,
        points=_as_int(doc["points"], "points", minimum=1),
        dim=_as_int(doc["dim"], "dim", minimum=1),
    )


def serialize_verdict(verdict: KernelVerdict) -> bytes:
    return _dumps(verdict_to_document(verdict))


def deserialize_verdict(data) -> KernelVerdict:
    return verdict_from_document(_loads(data))


# --- CSV tables ---------------------------------------------------------------


def _matrix_header(d: int) -> list[str]:
    return [
        name
        for i in range(d)
        for j in range(d)
        for name in (f"re_{i}{j}", f"im_{i}{j}")
    ]


def _vector_header(d: int) -> list[str]:
    return [name for i in range(d) for name in (f"re_{i}", f"im_{i}")]


def _write_rows(header: list[str], axis: np.ndarray, flat: np.ndarray) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for k in range(flat.shape[0]):
        row = [repr(float(axis[k]))]
        for z in flat[k]:
            row.append(repr(float(z.real)))
            row.append(repr(float(z.imag)))
        writer.writerow(row)
    return buf.getvalue()


def _read_rows(text, index_name: str, expected_header) -> tuple[float, np.ndarray]:
    """Parse a CSV body into (dt, complex array (rows, entries)).

    ``expected_header`` maps an entry count to the full expected header, or
    None if no entry count fits.
    """
    if isinstance(text, (bytes, bytearray)):
        text = bytes(text).decode("utf-8")
    rows = list(csv.reader(io.StringIO(text)))
    rows = [r for r in rows if r]
    if not rows:
        raise SchemaError("empty CSV")
    header = rows[0]
    if not header or header[0] != index_name:
        raise SchemaError(
            f"first column must be {index_name!r}, got {header[:1]}", location="header"
        )
    ncols = len(header) - 1
    if ncols <= 0 or ncols % 2 != 0:
        raise SchemaError("need re/im column pairs after the index", location="header")
    expected = expected_header(ncols // 2)
    if expected is None or header != [index_name] + expected:
        raise SchemaError("header does not match the format", location="header")
    body = rows[1:]
    if len(body) < 2:
        raise SchemaError("need at least two data rows to recover the time step")
    entries = ncols // 2
    data = np.empty((len(body), entries), dtype=np.complex128)
    axis = np.empty(len(body))
    for k, row in enumerate(body):
        if len(row) != len(header):
            raise SchemaError(f"row {k} has {len(row)} fields, expected {len(header)}")
        try:
            nums = [float(x) for x in row]
        except ValueError:
            raise SchemaError(f"row {k} holds a non-numeric field") from None
        if not all(math.isfinite(x) for x in nums):
            raise SchemaError(f"row {k} holds a non-finite value")
        axis[k] = nums[0]
        data[k] = np.asarray(nums[1::2]) + 1j * np.asarray(nums[2::2])
    if abs(axis[0]) > 1e-12 * max(1.0, abs(axis[-1])):
        raise SchemaError(f"index must start at 0, got {axis[0]}")
    dt = axis[1] - axis[0]
    if dt <= 0:
        raise SchemaError(f"index must increase, got step {dt}")
    ideal = np.arange(len(body)) * dt
    if np.abs(axis - ideal).max() > 1e-9 * max(1.0, abs(axis[-1])):
        raise SchemaError("index column must be uniformly spaced from 0")
    return dt, data


def covariance_to_csv(table: CovarianceTable) -> str:
    d = table.dim
    taus = np.arange(table.values.shape[0]) * table.dt
    flat = table.values.reshape(table.values.shape[0], d * d)
    return _write_rows(["tau"] + _matrix_header(d), taus, flat)


def covariance_from_csv(text) -> CovarianceTable:
    def expected(entries: int):
        d = math.isqrt(entries)
        return _matrix_header(d) if d * d == entries else None

    dt, data = _read_rows(text, "tau", expected)
    d = math.isqrt(data.shape[1])
    return CovarianceTable(dt=dt, values=data.reshape(data.shape[0], d, d))


def trajectory_to_csv(traj: Trajectory) -> str:
    times = np.arange(traj.n) * traj.dt
    return _write_rows(["t"] + _vector_header(traj.dim), times, traj.samples)


def trajectory_from_csv(text) -> Trajectory:
    dt, data = _read_rows(text, "t", _vector_header)
    return Trajectory(dt=dt, samples=data)


# --- binary trajectories -------------------------------------------------------


_MAGIC = b"QWSS"
_BINARY_VERSION = 1
_HEADER = struct.Struct("<4sIIQd")


def trajectory_to_binary(traj: Trajectory) -> bytes:
    header = _HEADER.pack(_MAGIC, _BINARY_VERSION, traj.dim, traj.n, traj.dt)
    return header + np.ascontiguousarray(traj.samples, dtype="<c16").tobytes()


def trajectory_from_binary(data: bytes) -> Trajectory:
    data = bytes(data)
    if len(data) < _HEADER.size:
        raise SchemaError(f"truncated header: {len(data)} bytes")
    magic, version, dim, n, dt = _HEADER.unpack_from(data)
    if magic != _MAGIC:
        raise SchemaError(f"bad magic {magic!r}, expected {_MAGIC!r}")
    if version != _BINARY_VERSION:
        raise SchemaError(f"unsupported version {version}")
    if dim < 1 or n < 1:
        raise SchemaError(f"invalid shape n={n}, dim={dim}")
    expected = _HEADER.size + 16 * dim * n
    if len(data) != expected:
        raise SchemaError(f"expected {expected} bytes total, got {len(data)}")
    samples = np.frombuffer(data, dtype="<c16", offset=_HEADER.size)
    return Trajectory(dt=dt, samples=samples.reshape(n, dim).astype(np.complex128))


# --- atomic file output ----------------------------------------------------------


def write_bytes_atomic(path, data: bytes) -> None:
    """Write via a sibling temp file and rename, so failures leave no partial file."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def write_text_atomic(path, text: str) -> None:
    write_bytes_atomic(path, text.encode("utf-8"))
