"""Binary tensor files ("RFTENSOR" v1) and CSV emission.

Layout, all little-endian::

    magic    8 bytes  b"RFTENSOR"
    version  u32      1
    rank     u32
    dims     rank x u64
    payload  prod(dims) x f64, row-major
"""

import struct
from pathlib import Path

import numpy as np

from rfsolve.errors import TensorFormatError

MAGIC = b"RFTENSOR"
VERSION = 1
_HEAD = struct.Struct("<8sII")


def write_tensor(t, path):
    arr = np.ascontiguousarray(t, dtype="<f8")
    if arr.ndim == 0 or 0 in arr.shape:
        raise ValueError(f"tensor shape must be positive integers, got {arr.shape}")
    path = Path(path)
    header = _HEAD.pack(MAGIC, VERSION, arr.ndim) + struct.pack(f"<{arr.ndim}Q", *arr.shape)
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(arr.tobytes(order="C"))
    except OSError as exc:
        raise OSError(f"cannot write tensor file {path}: {exc}") from exc


def read_tensor(path):
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise OSError(f"cannot read tensor file {path}: {exc}") from exc
    if len(raw) < _HEAD.size or raw[:8] != MAGIC:
        raise TensorFormatError(f"not a tensor file: {path}")
    _, version, rank = _HEAD.unpack_from(raw)
    if version != VERSION:
        raise TensorFormatError(f"not a tensor file: {path} (version {version})")
    dims_end = _HEAD.size + 8 * rank
    if len(raw) < dims_end:
        raise TensorFormatError(f"corrupt file: {path} (truncated header)")
    dims = struct.unpack_from(f"<{rank}Q", raw, _HEAD.size)
    if rank == 0 or 0 in dims:
        raise TensorFormatError(f"corrupt file: {path} (bad shape {dims})")
    count = int(np.prod(dims, dtype=np.uint64))
    if len(raw) != dims_end + 8 * count:
        raise TensorFormatError(
            f"corrupt file: {path} (payload {len(raw) - dims_end} bytes, expected {8 * count})"
        )
    data = np.frombuffer(raw, dtype="<f8", offset=dims_end).astype(np.float64).reshape(dims)
    if not np.all(np.isfinite(data)):
        raise TensorFormatError(f"invalid data: {path} (non-finite element)")
    return data


def format_float(x):
    return repr(float(x)) if np.isfinite(x) else str(float(x))


def write_csv(rows, path, metadata=None):
    """Write ``(label, values)`` rows, optionally preceded by ``# key=value`` lines.

    Floats use ``repr`` (shortest string that round-trips a 64-bit float, at most
    17 significant digits).
    """
    rows = [(str(label), [float(v) for v in values]) for label, values in rows]
    if rows and len({len(v) for _, v in rows}) != 1:
        raise ValueError("ragged rows: every value list must have the same length")
    lines = []
    for key, value in (metadata or {}).items():
        lines.append(f"# {key}={value}")
    for label, values in rows:
        lines.append(",".join([label] + [format_float(v) for v in values]))
    text = "".join(line + "\n" for line in lines)
    Path(path).write_text(text, encoding="utf-8")


def read_csv(path):
    """Inverse of :func:`write_csv`; returns ``(metadata, rows)``."""
    metadata, rows = {}, []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.startswith("# "):
            key, _, value = line[2:].partition("=")
            metadata[key] = value
        elif line:
            label, *values = line.split(",")
            rows.append((label, [float(v) for v in values]))
    return metadata, rows
