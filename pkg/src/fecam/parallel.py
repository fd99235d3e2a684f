"""Worker-count resolution for query-parallel scoring.

The FECAM_THREADS environment variable caps parallelism: unset or "1"
keeps scoring single-threaded, "0" resolves to the CPU count, and any
other positive integer is used as given.
"""

from __future__ import annotations

import os

from fecam.errors import DataError

ENV_VAR = "FECAM_THREADS"


def resolve_threads() -> int:
    raw = os.environ.get(ENV_VAR, "").strip()
    if not raw:
        return 1
    try:
        value = int(raw)
    except ValueError as exc:
        raise DataError(f"{ENV_VAR} must be an integer, got {raw!r}") from exc
    if value < 0:
        raise DataError(f"{ENV_VAR} must be >= 0, got {value}")
    if value == 0:
        return os.cpu_count() or 1
    return value
