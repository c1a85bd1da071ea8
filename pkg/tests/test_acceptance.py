"""Acceptance criteria, one test per criterion.

Each test records a ``PASS``/``FAIL`` line (shown in the pytest summary and
printed when run as a script) before asserting.

    pytest tests/test_acceptance.py -v
    python3 tests/test_acceptance.py
"""

import math
import os
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from conftest import ACCEPTANCE_LINES  # noqa: E402
from oracles import best_path, joint_gaussian_posterior, min_ratio_cut, pearson_magnitude  # noqa: E402

from netrisk.bench import run_experiment, tune_forget_factor  # noqa: E402
from netrisk.config import RunConfig  # noqa: E402
from netrisk.connectivity import pearson_graph  # noqa: E402
from netrisk.estimator import MeasurementBatch, NoiseModel, RiskState, init_state, relief_rule_of_thumb, step  # noqa: E402
from netrisk.flows import EntityIndex, build_entity_index  # noqa: E402
from netrisk.partition import ratio_cut, spectral_bisect  # noqa: E402
from netrisk.routing import Topology, min_max_path  # noqa: E402
from netrisk.signals import SignalFrame, build_signal_frame  # noqa: E402
from netrisk.synthetic import attack_traffic, scaling_flows  # noqa: E402

pytestmark = pytest.mark.acceptance


def record(name, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'}  {name}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def random_weights(rng, n):
    A = rng.uniform(0, 1, (n, n))
    F = np.triu(A, 1)
    return F + F.T + np.eye(n)


def test_correlation_oracle():
    rng = np.random.default_rng(101)
    worst, broken = 0.0, 0
    t0 = time.perf_counter()
    for k in range(200):
        n, N = int(rng.integers(2, 11)), int(rng.integers(2, 51))
        if k % 3 == 0:
            Y = rng.poisson(3.0, (n, N)).astype(float)  # count-like, with frequent constant rows
            Y[rng.random(n) < 0.2] = 0.0
        else:
            Y = rng.normal(0, rng.uniform(0.1, 100), (n, N))
        F = pearson_graph(SignalFrame(0.0, 1.0, float(N), Y, EntityIndex(str(i) for i in range(n)))).weights
        worst = max(worst, float(np.abs(F - pearson_magnitude(Y)).max()))
        ok = np.array_equal(F, F.T) and F.min() >= 0 and F.max() <= 1 and np.all(np.diag(F) == 1)
        broken += not ok
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-9 and broken == 0 and elapsed < 5.0
    assert record("correlation oracle", ok,
                  f"max |diff| {worst:.1e} (<= 1e-9), invariant failures {broken}, {elapsed:.2f}s (< 5s)")


def test_kalman_batch_oracle():
    rng = np.random.default_rng(202)
    worst = 0.0
    t0 = time.perf_counter()
    for _ in range(100):
        n, T = int(rng.integers(1, 5)), int(rng.integers(1, 6))
        q = rng.uniform(0.01, 0.5, n)
        s = RiskState(rng.normal(1, 1, n), np.diag(rng.uniform(0.1, 1, n)))
        m0, P0 = s.mean.copy(), s.cov.copy()
        graphs, meas = [], []
        for _ in range(T):
            graphs.append(random_weights(rng, n))
            idx = sorted(i for i in range(n) if rng.random() < 0.4)
            meas.append([(i, float(rng.normal(1, 2)), float(rng.uniform(0.05, 2))) for i in idx])
            batch = MeasurementBatch([m[0] for m in meas[-1]], [m[1] for m in meas[-1]], [m[2] for m in meas[-1]])
            s = step(s, graphs[-1], batch, NoiseModel(q), 0.0)
            mean, cov = joint_gaussian_posterior(m0, P0, graphs, np.diag(q), meas)
            # relative to magnitude: risks grow like lambda_max^T without relief
            scale = max(1.0, float(np.abs(mean).max()), float(np.abs(cov).max()))
            worst = max(worst, float(np.abs(s.mean - mean).max()) / scale, float(np.abs(s.cov - cov).max()) / scale)
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-8 and elapsed < 10.0
    assert record("kalman batch oracle", ok, f"max scaled diff {worst:.1e} (<= 1e-8), {elapsed:.2f}s (< 10s)")


def test_dominant_eigenvector_convergence():
    rng = np.random.default_rng(303)
    worst_steps, worst_cos = 0, 1.0
    for _ in range(20):
        n = int(rng.integers(3, 13))
        F = random_weights(rng, n)
        w, V = np.linalg.eigh(F)
        assert w[-1] - w[-2] > 1e-6  # simple leading eigenvalue
        v = V[:, -1]
        relief = 0.95 * relief_rule_of_thumb(w[-1])
        s = init_state(n, 1.0, 0.0)
        noise = NoiseModel.isotropic(n, 0.0)
        steps, cos = None, 0.0
        for k in range(1, 501):
            s = step(s, F, None, noise, relief)
            cos = abs(s.mean @ v) / np.linalg.norm(s.mean)
            if cos >= 1 - 1e-6:
                steps = k
                break
        worst_cos = min(worst_cos, cos)
        worst_steps = max(worst_steps, steps if steps is not None else 10**9)
    ok = worst_steps <= 500
    assert record("dominant eigenvector", ok,
                  f"20 graphs, slowest reached cos >= 1-1e-6 in {worst_steps} steps (<= 500), min cos {worst_cos:.9f}")


def test_boundedness():
    rng = np.random.default_rng(404)
    violations = 0
    for _ in range(50):
        n = int(rng.integers(2, 11))
        F = random_weights(rng, n)
        relief = relief_rule_of_thumb(float(np.linalg.eigvalsh(F)[-1]))
        s = RiskState(rng.uniform(0, 2, n), 1e-3 * np.eye(n))
        noise = NoiseModel.isotropic(n)
        prev = np.linalg.norm(s.mean)
        for _ in range(1000):
            s = step(s, F, None, noise, relief)
            cur = np.linalg.norm(s.mean)
            violations += cur > prev * (1 + 1e-12)
            prev = cur
    ok = violations == 0
    assert record("boundedness", ok, f"50 graphs x 1000 steps, norm increases {violations} (== 0)")


def _connected_topology(rng, n):
    order = rng.permutation(n)
    edges = {tuple(sorted((int(order[i]), int(order[rng.integers(0, i)])))) for i in range(1, n)}
    p = rng.uniform(0.1, 0.6)
    edges |= {(u, v) for u in range(n) for v in range(u + 1, n) if rng.random() < p}
    return Topology(n, sorted(edges))


def test_routing_oracle():
    rng = np.random.default_rng(505)
    mismatches, checked = 0, 0
    t0 = time.perf_counter()
    for g in range(500):
        n = int(rng.integers(2, 9))
        top = _connected_topology(rng, n)
        # half the graphs use coarse risks so ties exercise the tie rule
        risks = rng.integers(0, 4, n) / 4.0 if g % 2 else rng.uniform(0, 1, n)
        adj = {u: top.neighbors(u) for u in range(n)}
        src = int(rng.integers(0, n))
        for dst in range(n):
            if dst == src:
                continue
            for endpoints in (True, False):
                got = min_max_path(top, risks, src, dst, endpoints)
                want = best_path(adj, risks, src, dst, endpoints)
                checked += 1
                mismatches += got is None or (got.path, got.path_risk) != want
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and elapsed < 30.0
    assert record("routing oracle", ok, f"{checked} routes on 500 graphs, mismatches {mismatches}, {elapsed:.2f}s (< 30s)")


def test_partition_recovery():
    rng = np.random.default_rng(606)
    recovered, ratio_checked, ratio_bad = 0, 0, 0
    for _ in range(100):
        a, b = int(rng.integers(4, 9)), int(rng.integers(4, 9))
        n = a + b
        labels = np.array([0] * a + [1] * b)
        same = labels[:, None] == labels[None, :]
        W = np.where(same, rng.uniform(0.7, 1.0, (n, n)), rng.uniform(0.0, 0.05, (n, n)))
        F = np.triu(W, 1)
        F = F + F.T + np.eye(n)
        perm = rng.permutation(n)
        F, labels = F[np.ix_(perm, perm)], labels[perm]
        p = spectral_bisect(F)
        assign = np.asarray(p.assignment)
        hit = all((assign[i] == assign[j]) == (labels[i] == labels[j]) for i in range(n) for j in range(n))
        recovered += hit
        if hit and n <= 12:
            best, _ = min_ratio_cut(F)
            ratio_checked += 1
            ratio_bad += not math.isclose(ratio_cut(F, p), best, rel_tol=1e-12, abs_tol=1e-15)
    ok = recovered >= 95 and ratio_bad == 0
    assert record("partition recovery", ok,
                  f"recovered {recovered}/100 (>= 95); ratio cut equals brute-force minimum on "
                  f"{ratio_checked - ratio_bad}/{ratio_checked} recovered graphs with n <= 12")


def test_risk_propagation_chain():
    F = np.array([[1.0, 0.9, 0.0], [0.9, 1.0, 0.01], [0.0, 0.01, 1.0]])
    relief = relief_rule_of_thumb(float(np.linalg.eigvalsh(F)[-1]))
    noise = NoiseModel.isotropic(3)
    hit = MeasurementBatch([0], [10.0], [1e-4])
    with_m = step(init_state(3), F, hit, noise, relief)
    base = step(init_state(3), F, None, noise, relief)
    gaps = []
    for _ in range(3):
        with_m = step(with_m, F, None, noise, relief)
        base = step(base, F, None, noise, relief)
        d = with_m.mean - base.mean
        gaps.append((float(d[1]), float(d[2])))
    ok = all(db > dc for db, dc in gaps)
    detail = ", ".join(f"B +{db:.4g} vs C +{dc:.4g}" for db, dc in gaps)
    assert record("risk propagation chain", ok, f"{detail} (B > C each step)")


def test_bench_self_test():
    rng = np.random.default_rng(2024)
    flows, _ = attack_traffic(rng, n_windows=80, burst_rate=0.3, benign_rate=0.05, sync_window=1.0)
    config = RunConfig(param="Protocol", sync_window=1.0, graph_window=90.0)
    best, trace = tune_forget_factor(flows, config)
    res = run_experiment(flows, config.with_overrides(forget_factor=best))
    nre, fb = res.nre.test_auc, res.fbnsi.test_auc
    ok = nre >= 0.9 and nre - fb >= 0.1
    assert record("bench self-test", ok,
                  f"forget factor {best} (val AUC sweep {', '.join(f'{r}:{a:.3f}' for r, a in trace)}); "
                  f"test AUC NRE {nre:.3f} (>= 0.9), FBNSI {fb:.3f}, gap {nre - fb:.3f} (>= 0.1)")


def _graph_time(flows, index, delta, tau, repeats=7):
    best = math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        pearson_graph(build_signal_frame(flows, "Number of Packets Received", delta, 0.0, tau, index))
        best = min(best, time.perf_counter() - t0)
    return best


def test_scaling_envelope():
    rng = np.random.default_rng(707)
    delta, slots = 1.0, 75
    sizes = [50, 100, 200]
    times = []
    for n in sizes:
        flows = scaling_flows(n, slots, delta, rng)
        times.append(_graph_time(flows, build_entity_index(flows), delta, slots * delta))
    alpha = float(np.polyfit(np.log(sizes), np.log(times), 1)[0])

    n = 200
    counts = [50, 100, 200, 300, 400, 500]
    n_times = []
    for N in counts:
        flows = scaling_flows(n, N, delta, rng)
        n_times.append(_graph_time(flows, build_entity_index(flows), delta, N * delta))
    slope, icpt = np.polyfit(counts, n_times, 1)
    fitted = slope * np.array(counts) + icpt
    dev = float(np.max(np.abs(np.array(n_times) - fitted) / fitted))
    ok = alpha <= 2.2 and dev <= 0.25 and slope > 0
    assert record("scaling envelope", ok,
                  f"alpha {alpha:.2f} (<= 2.2) over n={sizes}; time vs N at n=200 within {dev:.1%} "
                  f"of a linear fit (<= 25%) over N={counts[0]}..{counts[-1]}")


@pytest.mark.skipif(not os.environ.get("NETRISK_CICIDS_DIR"), reason="NETRISK_CICIDS_DIR not set")
def test_cicids_ordering():
    from netrisk.flows import CICIDS2017_SCHEMA, CICIDS2017_UNITS, normalize_timestamps, parse_flows

    root = Path(os.environ["NETRISK_CICIDS_DIR"])
    flows = []
    for path in sorted(root.glob("*.csv")):
        flows.extend(parse_flows(path, CICIDS2017_SCHEMA, units=CICIDS2017_UNITS).records)
    flows, _ = normalize_timestamps(flows)
    config = RunConfig(param="Number of Packets Received", sync_window=1.2, graph_window=180.0, forget_factor=0.5)
    res = run_experiment(flows, config)
    nre, fb = res.nre.val_auc, res.fbnsi.val_auc
    assert record("CIC-IDS-2017 ordering", nre > fb, f"validation AUC NRE {nre:.3f} vs FBNSI {fb:.3f} (NRE > FBNSI)")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v", "-p", "no:cacheprovider"]))
