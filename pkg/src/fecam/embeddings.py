"""Embedding-file ingestion and the FEMB on-disk format.

The binary layout, little-endian throughout::

    magic   4 bytes  "FEMB"
    version u16      currently 1
    dim     u32      feature dimension D
    rows    u32      record count
    labels  u32      number of distinct labels in the file
    then per record: label u32, domain u32, feature f32 x D

Features are stored in single precision and widened to float64 on read;
covariance math downstream needs the extra headroom. A CSV fallback with
header ``label,domain,f0,...,f{D-1}`` parses to the same matrix as its
binary twin, because the CSV writer emits the already-f32-rounded values
at full decimal precision.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from fecam.errors import DataError, FormatError

MAGIC = b"FEMB"
VERSION = 1
_HEADER = struct.Struct("<4sHIII")


def _record_dtype(dim: int) -> np.dtype:
    return np.dtype(
        [("label", "<u4"), ("domain", "<u4"), ("vec", "<f4", (dim,))]
    )


def _coerce(
    features: np.ndarray, labels: np.ndarray, domains: np.ndarray | None
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    x = np.asarray(features)
    if x.ndim != 2 or x.shape[1] == 0:
        raise DataError(f"features must be (n, D) with D > 0, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise DataError("features must be finite")
    y = np.asarray(labels)
    if y.shape != (x.shape[0],):
        raise DataError("labels must align with feature rows")
    d = np.zeros(x.shape[0], dtype=np.int64) if domains is None else np.asarray(domains)
    if d.shape != y.shape:
        raise DataError("domains must align with labels")
    if y.size and (y.min() < 0 or d.min() < 0):
        raise DataError("labels and domains must be nonnegative integers")
    if y.size and (y.max() >= 2**32 or d.max() >= 2**32):
        raise DataError("labels and domains must fit in 32 bits")
    return x.astype(np.float32), y.astype(np.uint32), d.astype(np.uint32)


def write_embeddings(
    path: str | Path,
    features: np.ndarray,
    labels: np.ndarray,
    domains: np.ndarray | None = None,
) -> None:
    """Write a FEMB file. Features are rounded to f32 at rest."""
    x, y, d = _coerce(features, labels, domains)
    n, dim = x.shape
    records = np.empty(n, dtype=_record_dtype(dim))
    records["label"] = y
    records["domain"] = d
    records["vec"] = x
    header = _HEADER.pack(MAGIC, VERSION, dim, n, len(np.unique(y)))
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(records.tobytes())


def write_embeddings_csv(
    path: str | Path,
    features: np.ndarray,
    labels: np.ndarray,
    domains: np.ndarray | None = None,
) -> None:
    """Write the CSV twin of a FEMB file (same f32 rounding, text encoded)."""
    x, y, d = _coerce(features, labels, domains)
    dim = x.shape[1]
    widened = x.astype(np.float64)
    with open(path, "w", encoding="ascii") as fh:
        fh.write("label,domain," + ",".join(f"f{i}" for i in range(dim)) + "\n")
        for i in range(x.shape[0]):
            values = ",".join(repr(float(v)) for v in widened[i])
            fh.write(f"{int(y[i])},{int(d[i])},{values}\n")


def read_embeddings(path: str | Path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Read a FEMB or CSV embedding file.

    Returns:
        (features float64 (n, D), labels int64, domains int64).

    Raises:
        FormatError: Bad magic or version, truncated payload (the error
            names the byte offset), or malformed CSV.
    """
    path = Path(path)
    data = path.read_bytes()
    if data[:4] == MAGIC:
        return _read_binary(data, path)
    return _read_csv(data, path)


def _read_binary(data: bytes, path: Path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if len(data) < _HEADER.size:
        raise FormatError(
            f"{path}: truncated header at byte {len(data)}, "
            f"need {_HEADER.size}"
        )
    magic, version, dim, rows, _label_count = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    if dim == 0 or dim > 2**24:
        raise FormatError(f"{path}: implausible dimension {dim}")
    dtype = _record_dtype(dim)
    expected = _HEADER.size + rows * dtype.itemsize
    if len(data) != expected:
        offset = min(len(data), expected)
        raise FormatError(
            f"{path}: payload ends at byte {len(data)}, expected {expected} "
            f"(first missing byte at offset {offset})"
        )
    records = np.frombuffer(data, dtype=dtype, offset=_HEADER.size)
    features = records["vec"].astype(np.float64)
    labels = records["label"].astype(np.int64)
    domains = records["domain"].astype(np.int64)
    return features, labels, domains


def _read_csv(data: bytes, path: Path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    try:
        text = data.decode("ascii")
    except UnicodeDecodeError as exc:
        raise FormatError(f"{path}: neither FEMB binary nor ASCII CSV") from exc
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise FormatError(f"{path}: empty file")
    header = lines[0].split(",")
    if header[:2] != ["label", "domain"] or len(header) < 3:
        raise FormatError(
            f"{path}: CSV header must start with 'label,domain,f0,...'"
        )
    dim = len(header) - 2
    if header[2:] != [f"f{i}" for i in range(dim)]:
        raise FormatError(f"{path}: CSV feature columns must be f0..f{dim - 1}")
    features = np.empty((len(lines) - 1, dim))
    labels = np.empty(len(lines) - 1, dtype=np.int64)
    domains = np.empty(len(lines) - 1, dtype=np.int64)
    for i, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != dim + 2:
            raise FormatError(
                f"{path}: line {i} has {len(parts)} fields, expected {dim + 2}"
            )
        try:
            labels[i - 2] = int(parts[0])
            domains[i - 2] = int(parts[1])
            features[i - 2] = [float(v) for v in parts[2:]]
        except ValueError as exc:
            raise FormatError(f"{path}: line {i}: {exc}") from exc
    return features, labels, domains
