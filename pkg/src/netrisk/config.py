"""Run configuration.

Configs are INI files (Python ``configparser``) with these sections, all
optional::

    [run]
    param = Number of Packets Received
    sync_window = 1.2          ; delta, seconds
    graph_window = 90          ; tau, seconds
    forget_factor = 0.5        ; rho_f in [0, 1]
    relief_factor = auto       ; rho_r in [0, 1) or "auto" (1 - 1/lambda_max)
    relief_scale = 1.0         ; multiplies the automatic relief factor
    process_noise = 1e-3       ; q, Q = q I
    prior_mean = 1.0
    prior_variance = 1e-3      ; defaults to process_noise
    max_group_size = 50
    partition_sync_window =    ; offline partition delta (defaults to sync_window)
    delimiter = ,

    [schema]
    preset = default           ; or cicids2017
    timestamp = Timestamp      ; canonical field = column header overrides
    time_formats = %d/%m/%Y %H:%M:%S | %d/%m/%Y %H:%M

    [units]
    duration = 1e-6            ; column multiplier to seconds / bytes

    [paths]
    flows = flows.csv
    history = history.csv
    measurements = measurements.csv
    topology = topology.csv
    out = out
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from pathlib import Path

from .estimator import DEFAULT_PROCESS_NOISE
from .flows import CANONICAL_FIELDS, DEFAULT_TIME_FORMATS, SCHEMA_PRESETS
from .signals import get_parameter


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    param: str = "Number of Packets Received"
    sync_window: float = 1.2
    graph_window: float = 90.0
    forget_factor: float = 0.5
    relief_factor: float | str = "auto"
    relief_scale: float = 1.0
    process_noise: float = DEFAULT_PROCESS_NOISE
    prior_mean: float = 1.0
    prior_variance: float | None = None
    max_group_size: int = 50
    partition_sync_window: float | None = None
    delimiter: str = ","
    schema: dict = field(default_factory=lambda: dict(SCHEMA_PRESETS["default"][0]))
    units: dict = field(default_factory=dict)
    time_formats: tuple = DEFAULT_TIME_FORMATS
    flows: str | None = None
    history: str | None = None
    measurements: str | None = None
    topology: str | None = None
    out: str = "out"

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        try:
            get_parameter(self.param)
        except KeyError as exc:
            raise ConfigError(str(exc)) from None
        if not self.sync_window > 0:
            raise ConfigError("sync_window must be > 0")
        if not self.graph_window >= self.sync_window:
            raise ConfigError("graph_window must be >= sync_window")
        if not 0 <= self.forget_factor <= 1:
            raise ConfigError("forget_factor must lie in [0, 1]")
        if self.relief_factor != "auto" and not 0 <= float(self.relief_factor) < 1:
            raise ConfigError("relief_factor must lie in [0, 1) or be 'auto'")
        if not 0 <= self.relief_scale <= 1:
            raise ConfigError("relief_scale must lie in [0, 1]")
        if self.process_noise < 0:
            raise ConfigError("process_noise must be >= 0")
        if self.prior_variance is not None and self.prior_variance < 0:
            raise ConfigError("prior_variance must be >= 0")
        if self.max_group_size < 1:
            raise ConfigError("max_group_size must be >= 1")
        if self.partition_sync_window is not None and not self.partition_sync_window > 0:
            raise ConfigError("partition_sync_window must be > 0")

    @property
    def effective_prior_variance(self) -> float:
        return self.process_noise if self.prior_variance is None else self.prior_variance

    @property
    def offline_sync_window(self) -> float:
        return self.sync_window if self.partition_sync_window is None else self.partition_sync_window

    def with_overrides(self, **overrides) -> "RunConfig":
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})

    def as_metadata(self) -> dict[str, str]:
        return {
            "param": self.param,
            "sync_window": repr(self.sync_window),
            "graph_window": repr(self.graph_window),
            "forget_factor": repr(self.forget_factor),
            "relief_factor": str(self.relief_factor),
            "relief_scale": repr(self.relief_scale),
            "process_noise": repr(self.process_noise),
            "max_group_size": str(self.max_group_size),
        }


_FLOAT_KEYS = {
    "sync_window", "graph_window", "forget_factor", "relief_scale", "process_noise",
    "prior_mean", "prior_variance", "partition_sync_window",
}


def load_config(path: str | Path | None = None, text: str | None = None) -> RunConfig:
    """Read a :class:`RunConfig` from an INI file (or INI text)."""
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    parser.optionxform = str  # keep header case
    if path is not None:
        if not Path(path).exists():
            raise ConfigError(f"config file not found: {path}")
        parser.read(path, encoding="utf-8")
    if text is not None:
        parser.read_string(text)

    kwargs: dict = {}
    if parser.has_section("run"):
        for key, raw in parser.items("run"):
            raw = raw.strip()
            if raw == "":
                continue
            if key in _FLOAT_KEYS:
                kwargs[key] = _float(key, raw)
            elif key == "relief_factor":
                kwargs[key] = "auto" if raw.lower() == "auto" else _float(key, raw)
            elif key == "max_group_size":
                kwargs[key] = int(raw)
            elif key == "delimiter":
                kwargs[key] = "\t" if raw in ("\\t", "tab") else raw
            elif key == "param":
                kwargs[key] = raw
            else:
                raise ConfigError(f"unknown [run] key {key!r}")

    schema_section = dict(parser.items("schema")) if parser.has_section("schema") else {}
    preset = schema_section.pop("preset", "default").strip().lower()
    if preset not in SCHEMA_PRESETS:
        raise ConfigError(f"unknown schema preset {preset!r}")
    schema, units = dict(SCHEMA_PRESETS[preset][0]), dict(SCHEMA_PRESETS[preset][1])
    formats = schema_section.pop("time_formats", None)
    if formats:
        kwargs["time_formats"] = tuple(f.strip() for f in formats.split("|") if f.strip())
    for key, column in schema_section.items():
        if key not in CANONICAL_FIELDS:
            raise ConfigError(f"unknown schema field {key!r}")
        if column.strip():
            schema[key] = column.strip()
        else:
            schema.pop(key, None)
    if parser.has_section("units"):
        for key, raw in parser.items("units"):
            if key not in CANONICAL_FIELDS:
                raise ConfigError(f"unknown units field {key!r}")
            units[key] = _float(key, raw)
    kwargs["schema"] = schema
    kwargs["units"] = units

    if parser.has_section("paths"):
        for key, raw in parser.items("paths"):
            if key not in ("flows", "history", "measurements", "topology", "out"):
                raise ConfigError(f"unknown [paths] key {key!r}")
            if raw.strip():
                kwargs[key] = raw.strip()
    return RunConfig(**kwargs)


def _float(key: str, raw: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"{key} must be a number, got {raw!r}") from None
