"""End-to-end orchestration: offline partition discovery, then per-group
streaming graph computation and risk estimation."""

from __future__ import annotations

import math
import time
import warnings
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .config import RunConfig
from .connectivity import ConnectivityGraph, ConvergenceError, max_eigenvalue, pearson_graph, smooth
from .estimator import MeasurementBatch, NoiseModel, init_state, relief_rule_of_thumb, step
from .flows import EntityIndex, FlowRecord, build_entity_index
from .partition import Partition, partition_to_size
from .signals import build_signal_frame, sample_count


class EmptyInputError(ValueError):
    pass


@dataclass(frozen=True)
class Measurement:
    t: float
    entity: str
    value: float
    variance: float


@dataclass(frozen=True)
class RiskSnapshot:
    """Post-relief estimate of one entity group at the end of one graph window."""

    window: int
    group: int
    window_start: float
    t: float
    entities: tuple[str, ...]
    mean: np.ndarray
    variance: np.ndarray
    cov: np.ndarray
    lambda_max: float
    relief: float
    measured: tuple[str, ...] = ()


@dataclass
class StageTimings:
    frame: float = 0.0
    graph: float = 0.0
    estimate: float = 0.0
    graph_per_window: list[float] = field(default_factory=list)

    def merge(self, other: "StageTimings") -> None:
        self.frame += other.frame
        self.graph += other.graph
        self.estimate += other.estimate
        if not self.graph_per_window:
            self.graph_per_window = [0.0] * len(other.graph_per_window)
        for k, v in enumerate(other.graph_per_window):
            self.graph_per_window[k] += v


@dataclass
class StreamRun:
    snapshots: list[RiskSnapshot]
    window_starts: list[float]
    graph_window: float
    timings: StageTimings
    wall_seconds: float
    entity_index: EntityIndex
    partition: Partition
    skipped_measurements: int = 0

    @property
    def data_seconds(self) -> float:
        return len(self.window_starts) * self.graph_window

    def group_snapshots(self, group: int) -> list[RiskSnapshot]:
        return [s for s in self.snapshots if s.group == group]

    def window_snapshots(self, window: int) -> list[RiskSnapshot]:
        return [s for s in self.snapshots if s.window == window]


@dataclass(frozen=True)
class ThroughputReport:
    data_seconds: float
    wall_seconds: float
    coverage_ratio: float | None  # data seconds per wall-clock second
    coverage_defined: bool
    stage_seconds: dict
    graph_seconds_per_window: tuple[float, ...]


def window_count(flows: Sequence[FlowRecord], graph_window: float, start: float = 0.0) -> int:
    """Number of consecutive windows from ``start`` needed to hold every flow."""
    if not flows:
        return 0
    last = max(f.timestamp for f in flows)
    return int(math.floor((last - start) / graph_window)) + 1


def bucket_flows(flows: Iterable[FlowRecord], graph_window: float, start: float, count: int):
    buckets: list[list[FlowRecord]] = [[] for _ in range(count)]
    for flow in sorted(flows, key=lambda f: f.timestamp):
        k = int(math.floor((flow.timestamp - start) / graph_window))
        if 0 <= k < count:
            buckets[k].append(flow)
    return buckets


def history_graph(flows: Sequence[FlowRecord], config: RunConfig, index: EntityIndex | None = None) -> ConnectivityGraph:
    """One connectivity graph spanning the whole history."""
    if not flows:
        raise EmptyInputError("no historical flows")
    if index is None:
        index = build_entity_index(flows)
    delta = config.offline_sync_window
    start = min(f.timestamp for f in flows)
    last = max(f.timestamp for f in flows)
    slots = max(int(math.floor((last - start) / delta)) + 1, 2)
    frame = build_signal_frame(flows, config.param, delta, start, slots * delta, index)
    return pearson_graph(frame)


def offline_partition(flows: Sequence[FlowRecord], config: RunConfig) -> tuple[EntityIndex, Partition]:
    """Entity index and size-bounded partition from historical flows."""
    index = build_entity_index(flows)
    graph = history_graph(flows, config, index)
    return index, partition_to_size(graph, config.max_group_size)


def measurement_batches(
    measurements: Iterable[Measurement],
    index: EntityIndex,
    graph_window: float,
    start: float,
    count: int,
) -> tuple[list[dict[str, Measurement]], int]:
    """Per-window measurements keyed by entity (lowest variance kept)."""
    per_window: list[dict[str, Measurement]] = [{} for _ in range(count)]
    skipped = 0
    for m in measurements:
        k = int(math.floor((m.t - start) / graph_window))
        if not 0 <= k < count or m.entity not in index:
            skipped += 1
            continue
        kept = per_window[k].get(m.entity)
        if kept is None or m.variance < kept.variance:
            per_window[k][m.entity] = m
    return per_window, skipped


def _largest_eigenvalue(graph: ConnectivityGraph) -> float:
    try:
        return max_eigenvalue(graph)
    except ConvergenceError:
        # nearly tied leading eigenvalues; a stream must not stop on them
        warnings.warn("power iteration stalled; using a dense eigensolver", RuntimeWarning)
        return float(np.linalg.eigvalsh(graph.weights)[-1])


def _run_group(group, positions, index, buckets, batches, starts, config):
    members = index.subset(positions)
    n = len(members)
    noise = NoiseModel.isotropic(n, config.process_noise)
    state = init_state(n, config.prior_mean, config.effective_prior_variance, starts[0] if starts else 0.0)
    timings = StageTimings(graph_per_window=[0.0] * len(starts))
    smoothed = None
    snapshots = []
    for k, (t0, window_flows) in enumerate(zip(starts, buckets)):
        c0 = time.perf_counter()
        frame = build_signal_frame(window_flows, config.param, config.sync_window, t0, config.graph_window, members)
        c1 = time.perf_counter()
        graph = pearson_graph(frame)
        smoothed = smooth(smoothed, graph, config.forget_factor)
        c2 = time.perf_counter()

        lam = _largest_eigenvalue(smoothed)
        if config.relief_factor == "auto":
            relief = config.relief_scale * relief_rule_of_thumb(lam)
        else:
            relief = float(config.relief_factor)
        window_meas = [m for m in batches[k].values() if m.entity in members]
        window_meas.sort(key=lambda m: members.index(m.entity))
        batch = MeasurementBatch(
            [members.index(m.entity) for m in window_meas],
            [m.value for m in window_meas],
            [m.variance for m in window_meas],
            t=t0,
            allow_exact=True,
        )
        state = step(state, smoothed, batch, noise, relief, dt=config.graph_window)
        c3 = time.perf_counter()

        timings.frame += c1 - c0
        timings.graph += c2 - c1
        timings.estimate += c3 - c2
        timings.graph_per_window[k] = (c1 - c0) + (c2 - c1)
        snapshots.append(
            RiskSnapshot(
                window=k,
                group=group,
                window_start=t0,
                t=state.t,
                entities=members.ids,
                mean=state.mean,
                variance=state.variance,
                cov=state.cov,
                lambda_max=lam,
                relief=relief,
                measured=tuple(m.entity for m in window_meas),
            )
        )
    return group, snapshots, timings


def run_stream(
    flows: Sequence[FlowRecord],
    measurements: Iterable[Measurement],
    config: RunConfig,
    index: EntityIndex,
    partition: Partition,
    *,
    start: float = 0.0,
    n_windows: int | None = None,
    workers: int = 1,
    group_order: Sequence[int] | None = None,
) -> StreamRun:
    """Estimate risks window by window for every entity group.

    Windows are ``[start + k tau, start + (k+1) tau)``; by default enough
    windows are run to cover the last flow. Groups are independent and may be
    processed by a thread pool (``workers > 1``) in any ``group_order``.
    """
    if not flows:
        raise EmptyInputError("no flows to process")
    if len(partition.assignment) != len(index):
        raise ValueError("partition does not match entity index")
    wall0 = time.perf_counter()
    tau = config.graph_window
    if sample_count(tau, config.sync_window) < 2:
        raise ValueError("graph window must hold at least two sync windows")
    count = window_count(flows, tau, start) if n_windows is None else n_windows
    starts = [start + k * tau for k in range(count)]
    buckets = bucket_flows(flows, tau, start, count)
    batches, skipped = measurement_batches(measurements, index, tau, start, count)

    groups = partition.groups()
    order = list(range(len(groups))) if group_order is None else list(group_order)
    jobs = [(g, groups[g], index, buckets, batches, starts, config) for g in order]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda job: _run_group(*job), jobs))
    else:
        results = [_run_group(*job) for job in jobs]

    timings = StageTimings(graph_per_window=[0.0] * count)
    by_group = {}
    for g, snaps, t in results:
        by_group[g] = snaps
        timings.merge(t)
    snapshots = [by_group[g][k] for k in range(count) for g in range(len(groups))]
    return StreamRun(
        snapshots=snapshots,
        window_starts=starts,
        graph_window=tau,
        timings=timings,
        wall_seconds=time.perf_counter() - wall0,
        entity_index=index,
        partition=partition,
        skipped_measurements=skipped,
    )


def throughput_report(run: StreamRun) -> ThroughputReport:
    data = run.data_seconds
    wall = run.wall_seconds
    defined = data > 0 and wall > 0
    return ThroughputReport(
        data_seconds=data,
        wall_seconds=wall,
        coverage_ratio=data / wall if defined else None,
        coverage_defined=defined,
        stage_seconds={
            "frame": run.timings.frame,
            "graph": run.timings.graph,
            "estimate": run.timings.estimate,
        },
        graph_seconds_per_window=tuple(run.timings.graph_per_window),
    )


def stream_graphs(flows: Sequence[FlowRecord], config: RunConfig, index: EntityIndex, start: float = 0.0):
    """Raw and smoothed graphs per window over the whole entity index."""
    count = window_count(flows, config.graph_window, start)
    buckets = bucket_flows(flows, config.graph_window, start, count)
    smoothed = None
    out = []
    for k, window_flows in enumerate(buckets):
        t0 = start + k * config.graph_window
        frame = build_signal_frame(window_flows, config.param, config.sync_window, t0, config.graph_window, index)
        raw = pearson_graph(frame)
        smoothed = smooth(smoothed, raw, config.forget_factor)
        out.append((raw, smoothed))
    return out


def final_means(run: StreamRun) -> dict[str, float]:
    """Latest mean risk per entity across all groups."""
    last = defaultdict(float)
    for snap in run.snapshots:
        for entity, value in zip(snap.entities, snap.mean):
            last[entity] = float(value)
    return dict(last)
