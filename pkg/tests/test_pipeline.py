import math

import numpy as np
import pytest

from netrisk.config import RunConfig
from netrisk.flows import EntityIndex
from netrisk.partition import Partition
from netrisk.pipeline import (
    EmptyInputError,
    Measurement,
    StageTimings,
    StreamRun,
    bucket_flows,
    final_means,
    history_graph,
    measurement_batches,
    offline_partition,
    run_stream,
    stream_graphs,
    throughput_report,
    window_count,
)
from netrisk.signals import sample_count
from netrisk.synthetic import periodic_flows, planted_group_flows, random_flow

from conftest import flow

CONFIG = RunConfig(param="Number of Packets Sent", sync_window=1.0, graph_window=30.0, max_group_size=50)


def planted_history(rng, sizes=(4, 5)):
    return planted_group_flows(sizes, 300.0, 1.0, rng, activity=0.5)


def groups_of(index, partition):
    return sorted(sorted(index.entity(i) for i in g) for g in partition.groups())


def test_offline_partition_separates_planted_groups(rng):
    flows, groups = planted_history(rng)
    index, part = offline_partition(flows, CONFIG.with_overrides(max_group_size=5))
    assert groups_of(index, part) == sorted(sorted(g) for g in groups)


def test_offline_partition_one_group_when_large(rng):
    flows, _ = planted_history(rng)
    index, part = offline_partition(flows, CONFIG.with_overrides(max_group_size=9))
    assert part.group_count == 1 and len(index) == 9


def test_offline_partition_deterministic(rng, tmp_path):
    from netrisk.io import write_partition

    flows, _ = planted_history(rng)
    a = offline_partition(flows, CONFIG.with_overrides(max_group_size=5))
    b = offline_partition(list(flows), CONFIG.with_overrides(max_group_size=5))
    write_partition(tmp_path / "a.csv", *a)
    write_partition(tmp_path / "b.csv", *b)
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_history_graph_empty():
    with pytest.raises(EmptyInputError):
        history_graph([], CONFIG)


def test_windows_are_gapless(rng):
    flows = [flow(t) for t in rng.uniform(0, 300, 200)] + [flow(0.0), flow(30.0), flow(59.999)]
    count = window_count(flows, 30.0)
    buckets = bucket_flows(flows, 30.0, 0.0, count)
    assert sum(len(b) for b in buckets) == len(flows)
    for k, b in enumerate(buckets):
        assert all(30.0 * k <= f.timestamp < 30.0 * (k + 1) for f in b)
    assert window_count([], 30.0) == 0


def test_measurement_batches_keep_lowest_variance():
    idx = EntityIndex(["A", "B"])
    ms = [Measurement(5, "A", 3.0, 0.5), Measurement(6, "A", 9.0, 0.1), Measurement(40, "A", 1.0, 0.1),
          Measurement(7, "Z", 1.0, 1.0), Measurement(99, "B", 1.0, 1.0)]
    batches, skipped = measurement_batches(ms, idx, 30.0, 0.0, 2)
    assert batches[0]["A"].value == 9.0 and batches[1]["A"].value == 1.0
    assert skipped == 2


def _one_group_run(flows, measurements=(), config=CONFIG, **kw):
    index = EntityIndex(sorted({f.src_entity for f in flows} | {f.dst_entity for f in flows}))
    part = Partition((0,) * len(index))
    return run_stream(flows, measurements, config, index, part, **kw)


def test_stream_converges_to_dominant_eigenvector(rng):
    names = "ABCDE"
    base = [random_flow(rng, rng.uniform(0, 30), names[i % 5], names[(i * 3 + 1) % 5]) for i in range(60)]
    flows = periodic_flows(base, 30.0, 60)
    config = CONFIG.with_overrides(relief_scale=0.95)
    run = _one_group_run(flows, config=config)
    F = stream_graphs(flows, config, run.entity_index)[-1][1].weights
    v = np.linalg.eigh(F)[1][:, -1]
    mean = run.snapshots[-1].mean
    assert abs(mean @ v) / np.linalg.norm(mean) >= 1 - 1e-6


def test_measurement_drops_variance_at_its_window(rng):
    names = "ABCD"
    flows = [random_flow(rng, rng.uniform(0, 270), names[i % 4], names[(i + 1) % 4]) for i in range(300)]
    config = CONFIG.with_overrides(graph_window=90.0)
    run = _one_group_run(flows, [Measurement(90.0, "B", 5.0, 1e-6)], config=config)
    b = run.entity_index.index("B")
    var = [s.variance[b] for s in run.snapshots]
    others = [s.variance[0] for s in run.snapshots]
    assert var[1] < 0.01 * var[0] and var[1] < 0.01 * others[1]
    assert run.snapshots[1].measured == ("B",)
    assert run.snapshots[1].mean[b] > run.snapshots[0].mean[b]


def test_empty_flows_rejected():
    with pytest.raises(EmptyInputError):
        run_stream([], [], CONFIG, EntityIndex(["A"]), Partition((0,)))


def test_partition_must_match_index():
    with pytest.raises(ValueError):
        run_stream([flow(1)], [], CONFIG, EntityIndex(["A", "B"]), Partition((0,)))


def test_group_without_flows_still_steps(rng):
    flows = [flow(t, "A", "B", fwd_packets=int(rng.integers(1, 9))) for t in rng.uniform(0, 60, 50)]
    index = EntityIndex(["A", "B", "C", "D"])
    run = run_stream(flows, [], CONFIG, index, Partition((0, 0, 1, 1)))
    quiet = run.group_snapshots(1)
    assert len(quiet) == window_count(flows, 30.0)
    assert all(s.lambda_max == pytest.approx(1.0) for s in quiet)


def test_group_order_and_workers_are_bit_identical(rng):
    flows, _ = planted_history(rng, (3, 3, 4))
    index, part = offline_partition(flows, CONFIG.with_overrides(max_group_size=4))
    ms = [Measurement(45.0, index.entity(0), 4.0, 0.01)]
    a = run_stream(flows, ms, CONFIG, index, part)
    b = run_stream(flows, ms, CONFIG, index, part, group_order=list(reversed(range(part.group_count))), workers=3)
    assert len(a.snapshots) == len(b.snapshots)
    for x, y in zip(a.snapshots, b.snapshots):
        assert (x.window, x.group, x.entities) == (y.window, y.group, y.entities)
        assert np.array_equal(x.mean, y.mean) and np.array_equal(x.cov, y.cov)


def test_snapshot_layout_and_final_means(rng):
    flows, _ = planted_history(rng)
    index, part = offline_partition(flows, CONFIG.with_overrides(max_group_size=5))
    run = run_stream(flows, [], CONFIG, index, part)
    count = window_count(flows, 30.0)
    assert len(run.snapshots) == count * part.group_count
    assert len(run.window_snapshots(0)) == part.group_count
    assert set(final_means(run)) == set(index)
    assert run.data_seconds == count * 30.0


def test_throughput_report_fields(rng):
    flows, _ = planted_history(rng)
    run = _one_group_run(flows)
    rep = throughput_report(run)
    assert rep.coverage_defined and rep.coverage_ratio > 0
    assert len(rep.graph_seconds_per_window) == len(run.window_starts)
    assert set(rep.stage_seconds) == {"frame", "graph", "estimate"}


def test_zero_flow_run_has_undefined_coverage():
    run = StreamRun([], [], 90.0, StageTimings(), 0.0, EntityIndex([]), Partition(()))
    rep = throughput_report(run)
    assert not rep.coverage_defined and rep.coverage_ratio is None


def test_halving_sync_window_doubles_samples():
    assert sample_count(90.0, 0.6) == 2 * sample_count(90.0, 1.2)
    assert sample_count(90.0, 0.6) == 150


def test_unsorted_input_is_sorted(rng):
    flows, _ = planted_history(rng)
    a = _one_group_run(flows)
    b = _one_group_run(list(reversed(flows)))
    assert all(np.array_equal(x.mean, y.mean) for x, y in zip(a.snapshots, b.snapshots))
    assert math.isfinite(a.snapshots[-1].lambda_max)
