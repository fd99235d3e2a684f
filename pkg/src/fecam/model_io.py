"""Model persistence: the FECM on-disk format.

Little-endian layout::

    magic   4 bytes  "FECM"
    version u16      currently 1
    mode    u8       0 per_class, 1 common, 2 diagonal, 3 euclidean
    dim     u32      feature dimension D
    classes u32      class count
    then per class (ascending class_id):
        class_id   u32
        count      u32
        prototype  f32 x D                (the scoring prototype)
        payload    per mode:
                     per_class  f32 x D(D+1)/2   normalized matrix, lower
                                                 triangle row by row
                     diagonal   f32 x D          normalized variances
                     common / euclidean          absent
    common mode only, after the class records:
        common     f32 x D(D+1)/2   the merged raw matrix

Covariances are stored as their lower triangle in single precision, which
halves the matrix footprint. Loading re-derives every cached
factorization, so a freshly loaded model predicts identically to the one
saved (up to the documented f32 rounding of values at rest).

What the file intentionally does not carry: the transform/shrinkage
configuration (supplied at load time, echoed in every run report), the
unconditioned covariances (so loaded models cannot take domain-averaging
updates or act as Gaussian samplers), and the raw class means when they
differ from the scoring prototypes.
"""

from __future__ import annotations

import struct
from dataclasses import replace
from pathlib import Path

import numpy as np

from fecam import covariance as cov_ops
from fecam.classifier import ClassModel, FeCAMConfig, FeCAMModel, Mode
from fecam.covariance import CovarianceMatrix, DiagonalModel, Stage
from fecam.errors import DataError, FormatError, ProtocolError

MAGIC = b"FECM"
VERSION = 1
_HEADER = struct.Struct("<4sHBII")
_CLASS_HEAD = struct.Struct("<II")

_MODE_CODES = {
    Mode.PER_CLASS: 0,
    Mode.COMMON: 1,
    Mode.DIAGONAL: 2,
    Mode.EUCLIDEAN: 3,
}
_CODE_MODES = {v: k for k, v in _MODE_CODES.items()}


def save_model(model: FeCAMModel, path: str | Path) -> None:
    """Write a sealed model to disk."""
    if not model.is_sealed():
        raise ProtocolError("cannot save an unsealed model")
    mode = model.config.mode
    dim = model.dim
    chunks = [_HEADER.pack(MAGIC, VERSION, _MODE_CODES[mode], dim, model.n_classes)]
    for cid in model.class_ids:
        cm = model.classes[cid]
        chunks.append(_CLASS_HEAD.pack(cid, cm.count))
        chunks.append(cm.prototype_scored.astype("<f4").tobytes())
        if mode is Mode.PER_CLASS:
            chunks.append(cm.covariance.packed_lower().astype("<f4").tobytes())
        elif mode is Mode.DIAGONAL:
            chunks.append(cm.covariance.variances.astype("<f4").tobytes())
    if mode is Mode.COMMON:
        chunks.append(model.common_cov.packed_lower().astype("<f4").tobytes())
    Path(path).write_bytes(b"".join(chunks))


def load_model(path: str | Path, config: FeCAMConfig | None = None) -> FeCAMModel:
    """Read a model and re-derive its cached factorizations.

    Args:
        config: Scoring configuration (transform, gammas) to attach; its
            mode field is replaced by the mode recorded in the file.

    Raises:
        FormatError: Bad magic, version, mode code, or truncation.
    """
    path = Path(path)
    data = path.read_bytes()
    if len(data) < _HEADER.size:
        raise FormatError(f"{path}: truncated header at byte {len(data)}")
    magic, version, mode_code, dim, n_classes = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    if mode_code not in _CODE_MODES:
        raise FormatError(f"{path}: unknown mode code {mode_code}")
    mode = _CODE_MODES[mode_code]
    config = replace(config or FeCAMConfig(), mode=mode)

    tri = dim * (dim + 1) // 2
    offset = _HEADER.size
    classes: dict[int, ClassModel] = {}
    for _ in range(n_classes):
        offset = _require(data, offset, _CLASS_HEAD.size, path)
        cid, count = _CLASS_HEAD.unpack_from(data, offset - _CLASS_HEAD.size)
        proto, offset = _read_f32(data, offset, dim, path)
        proto.flags.writeable = False
        if mode is Mode.PER_CLASS:
            packed, offset = _read_f32(data, offset, tri, path)
            cov = CovarianceMatrix.from_packed_lower(
                packed, dim, Stage.NORMALIZED, count
            )
            precision = cov_ops.invert_spd(cov)
            classes[cid] = ClassModel(
                cid, count, proto, proto, covariance=cov, precision=precision
            )
        elif mode is Mode.DIAGONAL:
            variances, offset = _read_f32(data, offset, dim, path)
            variances.flags.writeable = False
            diag = DiagonalModel(dim=dim, variances=variances, norm=1.0)
            classes[cid] = ClassModel(cid, count, proto, proto, covariance=diag)
        else:
            classes[cid] = ClassModel(cid, count, proto, proto)

    common_cov = None
    common_precision = None
    if mode is Mode.COMMON:
        packed, offset = _read_f32(data, offset, tri, path)
        common_cov = CovarianceMatrix.from_packed_lower(
            packed, dim, Stage.RAW, sum(c.count for c in classes.values())
        )
        common_precision = cov_ops.invert_spd(
            cov_ops.shrink(common_cov, config.gamma1, config.gamma2)
        )
    if offset != len(data):
        raise FormatError(
            f"{path}: {len(data) - offset} unexpected trailing bytes at "
            f"offset {offset}"
        )
    return FeCAMModel(
        config=config,
        dim=dim,
        classes=classes,
        common_cov=common_cov,
        common_precision=common_precision,
        task_log=((0, tuple(sorted(classes))),),
        notes=(f"loaded from {path.name}",),
    )


def _require(data: bytes, offset: int, size: int, path: Path) -> int:
    end = offset + size
    if end > len(data):
        raise FormatError(
            f"{path}: truncated at byte {len(data)}, needed {end}"
        )
    return end


def _read_f32(
    data: bytes, offset: int, count: int, path: Path
) -> tuple[np.ndarray, int]:
    end = _require(data, offset, count * 4, path)
    values = np.frombuffer(data, dtype="<f4", count=count, offset=offset)
    return values.astype(np.float64), end
