"""Synthetic flow generators for fixtures, demos and timing runs."""

from __future__ import annotations

from dataclasses import replace
from typing import Sequence

import numpy as np

from .flows import FlowRecord


def random_flow(rng: np.random.Generator, t: float, src: str, dst: str, label: str | None = "BENIGN") -> FlowRecord:
    """A flow with i.i.d. attribute draws (same distribution for every label)."""
    fwd = int(rng.integers(1, 40))
    bwd = int(rng.integers(0, 40))
    return FlowRecord(
        timestamp=float(t),
        src_entity=src,
        dst_entity=dst,
        duration=float(rng.exponential(2.0)),
        fwd_packets=fwd,
        bwd_packets=bwd,
        fwd_payload_packets=int(rng.integers(0, fwd + 1)),
        bytes_per_second=float(rng.lognormal(8.0, 1.0)),
        fwd_header_bytes=float(20 * fwd),
        active_mean=float(rng.exponential(0.5)),
        idle_mean=float(rng.exponential(5.0)),
        fwd_iat_mean=float(rng.exponential(0.1)),
        bwd_iat_mean=float(rng.exponential(0.1)),
        fwd_packet_length_mean=float(rng.uniform(40, 1500)),
        src_port=int(rng.integers(1024, 65535)),
        protocol=int(rng.choice([6, 17])),
        label=label,
    )


def entity_names(n: int, prefix: str = "10.0.0.") -> list[str]:
    return [f"{prefix}{i}" for i in range(n)]


def planted_group_flows(
    group_sizes: Sequence[int],
    duration: float,
    sync_window: float,
    rng: np.random.Generator,
    activity: float = 0.5,
) -> tuple[list[FlowRecord], list[list[str]]]:
    """Flows where members of a group are active in the same slots.

    Each group follows its own Bernoulli on/off schedule per sync slot; in an
    active slot every member opens a flow to another member, with packet
    counts scaled by a shared slot intensity. Groups are mutually independent.
    """
    flows: list[FlowRecord] = []
    groups: list[list[str]] = []
    n_slots = int(duration // sync_window)
    for size in group_sizes:
        members = [f"10.{len(groups)}.0.{i}" for i in range(size)]
        groups.append(members)
        for k in range(n_slots):
            if rng.random() >= activity:
                continue
            level = rng.uniform(5, 50)
            for i, src in enumerate(members):
                dst = members[(i + 1 + int(rng.integers(0, size - 1))) % size] if size > 1 else src + "-peer"
                t = k * sync_window + rng.uniform(0, sync_window)
                f = random_flow(rng, t, src, dst)
                n_fwd = max(1, int(level + rng.normal(0, 1)))
                n_bwd = max(0, int(level + rng.normal(0, 1)))
                flows.append(_with_packets(f, n_fwd, n_bwd))
    flows.sort(key=lambda f: f.timestamp)
    return flows, groups


def _with_packets(f: FlowRecord, fwd: int, bwd: int) -> FlowRecord:
    return replace(f, fwd_packets=fwd, bwd_packets=bwd, fwd_payload_packets=min(f.fwd_payload_packets, fwd))


def periodic_flows(base: Sequence[FlowRecord], period: float, repeats: int) -> list[FlowRecord]:
    """Repeat a window's flows ``repeats`` times, shifting by ``period``."""
    return [replace(f, timestamp=f.timestamp + r * period) for r in range(repeats) for f in base]


def attack_traffic(
    rng: np.random.Generator,
    *,
    n_entities: int = 15,
    n_attackers: int = 5,
    n_windows: int = 60,
    graph_window: float = 90.0,
    sync_window: float = 1.5,
    benign_rate: float = 0.08,
    burst_rate: float = 0.3,
    attack_blocks: Sequence[tuple[int, int]] | None = None,
) -> tuple[list[FlowRecord], list[bool]]:
    """Labeled traffic where attack windows carry coordinated bursts.

    Benign background: each entity independently opens a flow to a random
    peer with probability ``benign_rate`` per sync slot. In attack windows,
    every slot is a burst with probability ``burst_rate``; in a burst all
    ``n_attackers`` entities send one flow each to another attacker. Attack
    flows draw attributes from the same distribution as benign ones, so
    single-flow attributes carry no information about the label.
    """
    names = entity_names(n_entities)
    attackers = names[:n_attackers]
    if attack_blocks is None:
        attack_blocks = _alternating_blocks(n_windows, rng)
    attack = [False] * n_windows
    for a, b in attack_blocks:
        for k in range(a, min(b, n_windows)):
            attack[k] = True

    slots = int(round(graph_window / sync_window))
    flows = []
    for w in range(n_windows):
        for s in range(slots):
            t0 = w * graph_window + s * sync_window
            for src in names:
                if rng.random() < benign_rate:
                    dst = names[int(rng.integers(0, n_entities))]
                    if dst != src:
                        flows.append(random_flow(rng, t0 + rng.uniform(0, sync_window), src, dst))
            if attack[w] and rng.random() < burst_rate:
                for i, src in enumerate(attackers):
                    dst = attackers[(i + 1) % n_attackers]
                    flows.append(random_flow(rng, t0 + rng.uniform(0, sync_window), src, dst, label="DoS"))
    flows.sort(key=lambda f: f.timestamp)
    return flows, attack


def _alternating_blocks(n_windows: int, rng: np.random.Generator) -> list[tuple[int, int]]:
    """Attack blocks of 2-4 windows separated by 2-5 benign windows."""
    blocks, k = [], int(rng.integers(1, 4))
    while k < n_windows:
        length = int(rng.integers(2, 5))
        blocks.append((k, k + length))
        k += length + int(rng.integers(2, 6))
    return blocks


def scaling_flows(
    n_entities: int,
    n_slots: int,
    sync_window: float,
    rng: np.random.Generator,
    flows_per_slot: int | None = None,
) -> list[FlowRecord]:
    """Uniform random traffic for timing runs (about ``n_entities`` flows per slot)."""
    names = entity_names(n_entities)
    per_slot = n_entities if flows_per_slot is None else flows_per_slot
    total = per_slot * n_slots
    t = np.sort(rng.uniform(0, n_slots * sync_window, total))
    src = rng.integers(0, n_entities, total)
    dst = (src + rng.integers(1, n_entities, total)) % n_entities
    fwd = rng.integers(1, 40, total)
    bwd = rng.integers(0, 40, total)
    return [
        FlowRecord(timestamp=float(t[i]), src_entity=names[src[i]], dst_entity=names[dst[i]],
                   fwd_packets=int(fwd[i]), bwd_packets=int(bwd[i]), label="BENIGN")
        for i in range(total)
    ]
