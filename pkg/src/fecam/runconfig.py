"""Flat key=value run configuration with CLI override precedence.

One file format, no layered discovery: a run is fully described by the
merged (file, overrides) mapping, and that mapping is echoed into every
report so any result can be reproduced from its own output.
"""

from __future__ import annotations

from pathlib import Path

from fecam.classifier import FeCAMConfig, Mode, TransformOrder
from fecam.errors import DataError, FormatError
from fecam.harness import ProtocolConfig, ProtocolKind
from fecam.transform import NegativePolicy, TukeyConfig

DEFAULTS: dict[str, str] = {
    "mode": "per_class",
    "tukey.lambda": "0.5",
    "tukey.enabled": "true",
    "tukey.negative_policy": "error",
    "gamma1": "1.0",
    "gamma2": "1.0",
    "prototype.transform_order": "transform-mean",
    "covariance.unbiased": "false",
    "scoring.logdet_correction": "false",
    "protocol.kind": "mscil",
    "protocol.initial_classes": "0",
    "protocol.tasks": "0",
    "protocol.classes_per_task": "0",
    "protocol.shots": "0",
    "protocol.domain_order": "",
    "seed": "0",
}


def parse_config_file(path: str | Path) -> dict[str, str]:
    """Parse a key=value file; '#' starts a comment, unknown keys reject."""
    values: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise FormatError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if key not in DEFAULTS:
            raise FormatError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = value.strip()
    return values


def effective_config(
    file_values: dict[str, str] | None = None,
    overrides: dict[str, str] | None = None,
) -> dict[str, str]:
    """Defaults, then file values, then explicit overrides."""
    merged = dict(DEFAULTS)
    for source in (file_values, overrides):
        if not source:
            continue
        for key, value in source.items():
            if key not in DEFAULTS:
                raise DataError(f"unknown config key {key!r}")
            merged[key] = value
    return merged


def _parse_bool(key: str, value: str) -> bool:
    lowered = value.lower()
    if lowered in ("true", "1", "yes"):
        return True
    if lowered in ("false", "0", "no"):
        return False
    raise DataError(f"{key}: expected a boolean, got {value!r}")


def _parse_enum(key: str, value: str, enum_cls):
    try:
        return enum_cls(value)
    except ValueError:
        options = ", ".join(e.value for e in enum_cls)
        raise DataError(f"{key}: expected one of [{options}], got {value!r}") from None


def to_fecam_config(values: dict[str, str]) -> FeCAMConfig:
    return FeCAMConfig(
        mode=_parse_enum("mode", values["mode"], Mode),
        tukey=TukeyConfig(
            lam=float(values["tukey.lambda"]),
            enabled=_parse_bool("tukey.enabled", values["tukey.enabled"]),
            negative_policy=_parse_enum(
                "tukey.negative_policy",
                values["tukey.negative_policy"],
                NegativePolicy,
            ),
        ),
        gamma1=float(values["gamma1"]),
        gamma2=float(values["gamma2"]),
        transform_order=_parse_enum(
            "prototype.transform_order",
            values["prototype.transform_order"],
            TransformOrder,
        ),
        unbiased_covariance=_parse_bool(
            "covariance.unbiased", values["covariance.unbiased"]
        ),
        logdet_correction=_parse_bool(
            "scoring.logdet_correction", values["scoring.logdet_correction"]
        ),
    )


def to_protocol_config(values: dict[str, str]) -> ProtocolConfig:
    domain_order = tuple(
        int(v) for v in values["protocol.domain_order"].split(",") if v.strip() != ""
    )
    return ProtocolConfig(
        kind=_parse_enum("protocol.kind", values["protocol.kind"], ProtocolKind),
        initial_classes=int(values["protocol.initial_classes"]),
        tasks=int(values["protocol.tasks"]),
        classes_per_task=int(values["protocol.classes_per_task"]),
        shots=int(values["protocol.shots"]),
        domain_order=domain_order,
        seed=int(values["seed"]),
    )
