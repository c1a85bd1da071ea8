"""Flow-record ingestion.

Delimited flow files (CICFlowMeter exports or synthetic fixtures) are parsed
into immutable :class:`FlowRecord` values. Column names are resolved through a
schema map so that different datasets load into the same canonical record.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from typing import Iterable, Iterator, Mapping, Sequence, TextIO


class SchemaError(ValueError):
    """A mandatory column is missing from the input header."""


NUMERIC_FIELDS = (
    "duration",
    "fwd_packets",
    "bwd_packets",
    "fwd_payload_packets",
    "bytes_per_second",
    "fwd_header_bytes",
    "active_mean",
    "idle_mean",
    "fwd_iat_mean",
    "bwd_iat_mean",
    "fwd_packet_length_mean",
    "src_port",
    "protocol",
)
INTEGER_FIELDS = ("src_port", "protocol")
REQUIRED_FIELDS = ("timestamp", "src_entity", "dst_entity")
CANONICAL_FIELDS = REQUIRED_FIELDS + NUMERIC_FIELDS + ("label",)

# Canonical names double as column headers for synthetic fixtures.
DEFAULT_SCHEMA: dict[str, str] = {name: name for name in CANONICAL_FIELDS}

# CICFlowMeter / CIC-IDS-2017 column headers (leading blanks are stripped on read).
CICIDS2017_SCHEMA: dict[str, str] = {
    "timestamp": "Timestamp",
    "src_entity": "Source IP",
    "dst_entity": "Destination IP",
    "duration": "Flow Duration",
    "fwd_packets": "Total Fwd Packets",
    "bwd_packets": "Total Backward Packets",
    "fwd_payload_packets": "act_data_pkt_fwd",
    "bytes_per_second": "Flow Bytes/s",
    "fwd_header_bytes": "Fwd Header Length",
    "active_mean": "Active Mean",
    "idle_mean": "Idle Mean",
    "fwd_iat_mean": "Fwd IAT Mean",
    "bwd_iat_mean": "Bwd IAT Mean",
    "fwd_packet_length_mean": "Fwd Packet Length Mean",
    "src_port": "Source Port",
    "protocol": "Protocol",
    "label": "Label",
}
# CICFlowMeter reports times in microseconds.
CICIDS2017_UNITS: dict[str, float] = {
    "duration": 1e-6,
    "active_mean": 1e-6,
    "idle_mean": 1e-6,
    "fwd_iat_mean": 1e-6,
    "bwd_iat_mean": 1e-6,
}

DEFAULT_TIME_FORMATS = (
    "%d/%m/%Y %H:%M:%S",
    "%d/%m/%Y %H:%M",
    "%d/%m/%Y %I:%M:%S %p",
    "%d/%m/%Y %I:%M %p",
    "%Y-%m-%d %H:%M:%S",
    "%Y-%m-%dT%H:%M:%S",
    "%Y-%m-%d %H:%M:%S.%f",
)

SCHEMA_PRESETS = {
    "default": (DEFAULT_SCHEMA, {}),
    "cicids2017": (CICIDS2017_SCHEMA, CICIDS2017_UNITS),
}


@dataclass(frozen=True)
class FlowRecord:
    """One flow between two endpoints. Times in seconds, sizes in bytes."""

    timestamp: float
    src_entity: str
    dst_entity: str
    duration: float = 0.0
    fwd_packets: float = 0.0
    bwd_packets: float = 0.0
    fwd_payload_packets: float = 0.0
    bytes_per_second: float = 0.0
    fwd_header_bytes: float = 0.0
    active_mean: float = 0.0
    idle_mean: float = 0.0
    fwd_iat_mean: float = 0.0
    bwd_iat_mean: float = 0.0
    fwd_packet_length_mean: float = 0.0
    src_port: int = 0
    protocol: int = 0
    label: str | None = None

    def __post_init__(self):
        if not self.src_entity or not self.dst_entity:
            raise ValueError("flow endpoints must be non-empty")
        for name in NUMERIC_FIELDS:
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {value!r}")

    @property
    def is_attack(self) -> bool:
        return self.label is not None and self.label.strip().upper() != "BENIGN"


@dataclass(frozen=True)
class RowError:
    row: int  # 1-based data row number (header excluded)
    field: str
    message: str


@dataclass
class ParseResult:
    records: list[FlowRecord]
    errors: list[RowError] = field(default_factory=list)
    data_rows: int = 0

    @property
    def skipped(self) -> int:
        return len(self.errors)


class EntityIndex:
    """Bidirectional map between entity identifiers and dense indices."""

    def __init__(self, entities: Iterable[str] = ()):
        self._ids: list[str] = []
        self._pos: dict[str, int] = {}
        for entity in entities:
            self.add(entity)

    def add(self, entity: str) -> int:
        pos = self._pos.get(entity)
        if pos is None:
            pos = len(self._ids)
            self._ids.append(entity)
            self._pos[entity] = pos
        return pos

    def index(self, entity: str) -> int:
        return self._pos[entity]

    def get(self, entity: str, default=None):
        return self._pos.get(entity, default)

    def entity(self, idx: int) -> str:
        return self._ids[idx]

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(self._ids)

    def subset(self, positions: Sequence[int]) -> "EntityIndex":
        return EntityIndex(self._ids[p] for p in positions)

    def __contains__(self, entity) -> bool:
        return entity in self._pos

    def __len__(self) -> int:
        return len(self._ids)

    def __iter__(self) -> Iterator[str]:
        return iter(self._ids)

    def __eq__(self, other) -> bool:
        return isinstance(other, EntityIndex) and self._ids == other._ids

    def __repr__(self) -> str:
        return f"EntityIndex({self._ids!r})"


def parse_timestamp(text: str, formats: Sequence[str] = DEFAULT_TIME_FORMATS) -> float:
    """Numeric seconds, or a date string in one of ``formats`` (read as UTC, POSIX seconds)."""
    text = text.strip()
    try:
        value = float(text)
    except ValueError:
        pass
    else:
        if not math.isfinite(value):
            raise ValueError(f"non-finite timestamp {text!r}")
        return value
    for fmt in formats:
        try:
            return datetime.strptime(text, fmt).replace(tzinfo=timezone.utc).timestamp()
        except ValueError:
            continue
    raise ValueError(f"unrecognised timestamp {text!r}")


def _open_text(source) -> TextIO:
    if isinstance(source, (bytes, bytearray)):
        return io.StringIO(bytes(source).decode("utf-8-sig"))
    if isinstance(source, io.TextIOBase):
        return source
    if hasattr(source, "read"):
        return io.TextIOWrapper(source, encoding="utf-8-sig", newline="")
    return open(source, "r", encoding="utf-8-sig", newline="")


def parse_flows(
    source,
    schema: Mapping[str, str] | None = None,
    *,
    delimiter: str = ",",
    units: Mapping[str, float] | None = None,
    time_formats: Sequence[str] = DEFAULT_TIME_FORMATS,
) -> ParseResult:
    """Parse delimited flow text into records.

    Parameters
    ----------
    source : path, bytes, binary or text stream
        Delimited text with a header row.
    schema : mapping
        Canonical field name -> column header. Fields left out of the schema
        take their default value; ``label`` is optional even when mapped.
    units : mapping
        Canonical field name -> multiplier converting the column to seconds or
        bytes (e.g. ``1e-6`` for microsecond durations).

    Rows with non-numeric or invalid values are skipped and reported in
    ``ParseResult.errors``; a missing mandatory column raises
    :class:`SchemaError`.
    """
    schema = dict(DEFAULT_SCHEMA if schema is None else schema)
    units = dict(units or {})
    for name in schema:
        if name not in CANONICAL_FIELDS:
            raise SchemaError(f"unknown canonical field {name!r}")
    for name in REQUIRED_FIELDS:
        if name not in schema:
            raise SchemaError(f"schema does not map mandatory field {name!r}")

    should_close = not isinstance(source, (bytes, bytearray)) and not hasattr(source, "read")
    fh = _open_text(source)
    try:
        reader = csv.reader(fh, delimiter=delimiter)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError("input has no header row") from None
        columns = {h: i for i, h in enumerate(header)}

        positions: dict[str, int] = {}
        for name, column in schema.items():
            column = column.strip()
            if column in columns:
                positions[name] = columns[column]
            elif name != "label":
                raise SchemaError(f"missing column {column!r} for field {name!r}")

        result = ParseResult(records=[])
        for row_no, row in enumerate(reader, start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            result.data_rows += 1
            record, error = _parse_row(row, row_no, positions, units, time_formats)
            if error is not None:
                result.errors.append(error)
            else:
                result.records.append(record)
        return result
    finally:
        if should_close:
            fh.close()


def _parse_row(row, row_no, positions, units, time_formats):
    values: dict[str, object] = {}
    for name, pos in positions.items():
        if pos >= len(row):
            return None, RowError(row_no, name, "row is shorter than header")
        cell = row[pos].strip()
        if name == "timestamp":
            try:
                values[name] = parse_timestamp(cell, time_formats)
            except ValueError as exc:
                return None, RowError(row_no, name, str(exc))
        elif name in ("src_entity", "dst_entity"):
            if not cell:
                return None, RowError(row_no, name, "empty entity identifier")
            values[name] = cell
        elif name == "label":
            values[name] = cell or None
        else:
            try:
                number = float(cell)
            except ValueError:
                return None, RowError(row_no, name, f"non-numeric value {cell!r}")
            if not math.isfinite(number) or number < 0:
                return None, RowError(row_no, name, f"value out of range {cell!r}")
            number *= units.get(name, 1.0)
            values[name] = int(number) if name in INTEGER_FIELDS else number
    return FlowRecord(**values), None


def normalize_timestamps(flows: Sequence[FlowRecord], origin: float | None = None):
    """Shift timestamps so the run starts at 0. Returns ``(flows, origin)``.

    The origin defaults to the earliest timestamp so that out-of-order input
    never produces negative times.
    """
    if not flows:
        return [], 0.0 if origin is None else origin
    if origin is None:
        origin = min(f.timestamp for f in flows)
    return [replace(f, timestamp=f.timestamp - origin) for f in flows], origin


def build_entity_index(flows: Iterable[FlowRecord]) -> EntityIndex:
    """Distinct endpoints in first-appearance order (src before dst)."""
    index = EntityIndex()
    for flow in flows:
        index.add(flow.src_entity)
        index.add(flow.dst_entity)
    return index
