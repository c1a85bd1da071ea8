"""Synchronous per-entity signals from asynchronous flows.

Each flow is a single tick at its start timestamp. Flows falling into the same
synchronization slot are aggregated per entity according to the connection
parameter's aggregation method.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from .flows import EntityIndex, FlowRecord


class Aggregation(str, Enum):
    TOTAL = "Total"
    AVERAGE = "Average"
    LAST = "Last"
    BINARY = "Binary"


_Extractor = Callable[[FlowRecord], float]


@dataclass(frozen=True)
class ConnectionParameter:
    """A scalar per-entity aspect of flows.

    ``src_value``/``dst_value`` give the per-flow value seen from each
    endpoint; ``None`` means that endpoint receives no contribution.
    """

    name: str
    aggregation: Aggregation
    src_value: _Extractor | None
    dst_value: _Extractor | None
    flow_attributes: tuple[str, ...]  # flow-level features (used by the FBNSI baseline)

    def __str__(self) -> str:
        return self.name


def _attr(name: str) -> _Extractor:
    return lambda flow: float(getattr(flow, name))


def _one(flow: FlowRecord) -> float:
    return 1.0


def _symmetric(name, aggregation, attribute):
    return ConnectionParameter(name, aggregation, _attr(attribute), _attr(attribute), (attribute,))


_PARAMETERS = [
    ConnectionParameter("Activation", Aggregation.BINARY, _one, _one, ()),
    _symmetric("Active Time", Aggregation.AVERAGE, "active_mean"),
    _symmetric("Flow Duration", Aggregation.TOTAL, "duration"),
    _symmetric("Flow Speed", Aggregation.AVERAGE, "bytes_per_second"),
    # Forward-only attributes belong to the flow's initiator.
    ConnectionParameter("Header Length", Aggregation.AVERAGE, _attr("fwd_header_bytes"), None, ("fwd_header_bytes",)),
    _symmetric("Idle Time", Aggregation.AVERAGE, "idle_mean"),
    ConnectionParameter(
        "Number of Active Packets", Aggregation.TOTAL, _attr("fwd_payload_packets"), None, ("fwd_payload_packets",)
    ),
    ConnectionParameter(
        "Number of Packets Received",
        Aggregation.TOTAL,
        _attr("bwd_packets"),
        _attr("fwd_packets"),
        ("fwd_packets", "bwd_packets"),
    ),
    ConnectionParameter(
        "Number of Packets Sent",
        Aggregation.TOTAL,
        _attr("fwd_packets"),
        _attr("bwd_packets"),
        ("fwd_packets", "bwd_packets"),
    ),
    ConnectionParameter(
        "Packet Delay", Aggregation.AVERAGE, _attr("fwd_iat_mean"), _attr("bwd_iat_mean"), ("fwd_iat_mean",)
    ),
    ConnectionParameter(
        "Packet Length", Aggregation.AVERAGE, _attr("fwd_packet_length_mean"), None, ("fwd_packet_length_mean",)
    ),
    ConnectionParameter("Port Number", Aggregation.LAST, _attr("src_port"), None, ("src_port",)),
    _symmetric("Protocol", Aggregation.LAST, "protocol"),
    ConnectionParameter(
        "Response Time", Aggregation.AVERAGE, _attr("bwd_iat_mean"), _attr("fwd_iat_mean"), ("bwd_iat_mean",)
    ),
]

PARAMETERS: dict[str, ConnectionParameter] = {p.name: p for p in _PARAMETERS}


def get_parameter(name: str | ConnectionParameter) -> ConnectionParameter:
    """Look up a connection parameter by name (case and separator insensitive)."""
    if isinstance(name, ConnectionParameter):
        return name
    key = _normalise(name)
    for param in _PARAMETERS:
        if _normalise(param.name) == key:
            return param
    raise KeyError(f"unknown connection parameter {name!r}; choose from {sorted(PARAMETERS)}")


def _normalise(name: str) -> str:
    return "".join(ch for ch in name.lower() if ch.isalnum())


@dataclass(frozen=True)
class SignalFrame:
    """Synchronized samples for one graph window: ``values`` is n x N."""

    window_start: float
    sync_window: float
    graph_window: float
    values: np.ndarray
    entity_index: EntityIndex
    param: str = ""

    @property
    def sample_count(self) -> int:
        return self.values.shape[1]

    @property
    def n(self) -> int:
        return self.values.shape[0]


def sample_count(graph_window: float, sync_window: float) -> int:
    """N = floor(tau / delta), robust to binary round-off (90 / 1.2 -> 75)."""
    return int(math.floor(graph_window / sync_window + 1e-9))


def entity_contribution(flow: FlowRecord, param) -> list[tuple[str, float]]:
    """Per-endpoint values of ``param`` for one flow."""
    param = get_parameter(param)
    out = []
    if param.src_value is not None:
        out.append((flow.src_entity, param.src_value(flow)))
    if param.dst_value is not None:
        out.append((flow.dst_entity, param.dst_value(flow)))
    return out


def build_signal_frame(
    flows: Sequence[FlowRecord],
    param,
    sync_window: float,
    window_start: float,
    graph_window: float,
    entity_index: EntityIndex,
) -> SignalFrame:
    """Aggregate flows inside ``[window_start, window_start + graph_window)``.

    Flows outside the window and endpoints missing from ``entity_index`` are
    ignored. When ``graph_window`` is not a multiple of ``sync_window`` the
    tail of the window folds into the last slot.
    """
    if not sync_window > 0:
        raise ValueError(f"sync window must be positive, got {sync_window}")
    if not graph_window >= sync_window:
        raise ValueError(f"graph window {graph_window} is shorter than sync window {sync_window}")
    param = get_parameter(param)
    n_samples = sample_count(graph_window, sync_window)
    n = len(entity_index)
    end = window_start + graph_window

    rows, slots, vals, times = [], [], [], []
    for flow in flows:
        ts = flow.timestamp
        if not (window_start <= ts < end):
            continue
        slot = min(int((ts - window_start) // sync_window), n_samples - 1)
        for entity, value in entity_contribution(flow, param):
            pos = entity_index.get(entity)
            if pos is None:
                continue
            rows.append(pos)
            slots.append(slot)
            vals.append(value)
            times.append(ts)

    values = np.zeros((n, n_samples))
    if rows:
        _aggregate(values, np.asarray(rows), np.asarray(slots), np.asarray(vals, dtype=float),
                   np.asarray(times, dtype=float), param.aggregation)
    values.setflags(write=False)
    return SignalFrame(window_start, sync_window, graph_window, values, entity_index, param.name)


def _aggregate(out, rows, slots, vals, times, aggregation):
    if aggregation is Aggregation.TOTAL:
        np.add.at(out, (rows, slots), vals)
    elif aggregation is Aggregation.BINARY:
        out[rows, slots] = 1.0
    elif aggregation is Aggregation.AVERAGE:
        counts = np.zeros_like(out)
        np.add.at(out, (rows, slots), vals)
        np.add.at(counts, (rows, slots), 1.0)
        np.divide(out, counts, out=out, where=counts > 0)
    elif aggregation is Aggregation.LAST:
        # Stable sort by time; the last occurrence of each cell wins.
        order = np.argsort(times, kind="stable")
        cells = rows[order] * out.shape[1] + slots[order]
        rev_cells = cells[::-1]
        _, first_in_rev = np.unique(rev_cells, return_index=True)
        last = order[len(order) - 1 - first_in_rev]
        out[rows[last], slots[last]] = vals[last]
    else:  # pragma: no cover
        raise ValueError(aggregation)
