"""CSV and sidecar readers/writers for graphs, partitions, measurements,
risk snapshots and topologies."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .connectivity import ConnectivityGraph, make_graph
from .flows import CANONICAL_FIELDS, EntityIndex, parse_timestamp
from .partition import Partition
from .pipeline import Measurement, RiskSnapshot
from .routing import Topology


def write_metadata(path, meta: Mapping[str, object]) -> None:
    """``key=value`` lines, one per entry."""
    with open(path, "w", encoding="utf-8") as fh:
        for key, value in meta.items():
            fh.write(f"{key}={value}\n")


def read_metadata(path) -> dict[str, str]:
    meta = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition("=")
            meta[key.strip()] = value.strip()
    return meta


def write_matrix_csv(path, ids: Iterable[str], matrix: np.ndarray) -> None:
    ids = list(ids)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["entity", *ids])
        for entity, row in zip(ids, matrix):
            writer.writerow([entity, *(repr(float(v)) for v in row)])


def read_matrix_csv(path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    ids = rows[0][1:]
    if [r[0] for r in rows[1:]] != ids:
        raise ValueError(f"{path}: row labels do not match column labels")
    return ids, np.array([[float(v) for v in r[1:]] for r in rows[1:]], dtype=float).reshape(len(ids), len(ids))


def write_graph(path, graph: ConnectivityGraph, meta: Mapping[str, object] | None = None) -> Path:
    """Graph CSV plus a ``.meta`` sidecar; returns the sidecar path."""
    path = Path(path)
    write_matrix_csv(path, graph.entity_index, graph.weights)
    sidecar = path.with_suffix(".meta")
    write_metadata(sidecar, {"t": graph.window_start, "tau": graph.graph_window, **(meta or {})})
    return sidecar


def read_graph(path) -> ConnectivityGraph:
    path = Path(path)
    ids, F = read_matrix_csv(path)
    meta = read_metadata(path.with_suffix(".meta")) if path.with_suffix(".meta").exists() else {}
    return make_graph(F, EntityIndex(ids), float(meta.get("t", 0.0)), float(meta.get("tau", 0.0)))


def write_partition(path, index: EntityIndex, partition: Partition) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["entity", "group"])
        for entity, group in zip(index, partition.assignment):
            writer.writerow([entity, group])


def read_partition(path) -> tuple[EntityIndex, Partition]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        rows = [(r["entity"], int(r["group"])) for r in reader]
    index = EntityIndex(e for e, _ in rows)
    if len(index) != len(rows):
        raise ValueError(f"{path}: duplicate entity rows")
    groups: dict[int, list[int]] = {}
    for pos, (_, g) in enumerate(rows):
        groups.setdefault(g, []).append(pos)
    return index, Partition.from_groups(groups.values(), len(rows))


def read_measurements(path, delimiter: str = ",", time_origin: float = 0.0) -> list[Measurement]:
    """Rows of ``time,entity,value,variance``; times shifted by ``time_origin``."""
    out = []
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.DictReader(fh, delimiter=delimiter)
        missing = {"time", "entity", "value", "variance"} - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        for row in reader:
            out.append(
                Measurement(
                    t=parse_timestamp(row["time"]) - time_origin,
                    entity=row["entity"].strip(),
                    value=float(row["value"]),
                    variance=float(row["variance"]),
                )
            )
    return out


def write_measurements(path, measurements: Iterable[Measurement]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time", "entity", "value", "variance"])
        for m in measurements:
            writer.writerow([repr(m.t), m.entity, repr(m.value), repr(m.variance)])


SNAPSHOT_COLUMNS = ["window", "group", "time", "entity", "mean", "variance"]


def write_snapshots(path, snapshots: Iterable[RiskSnapshot]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(SNAPSHOT_COLUMNS)
        for snap in snapshots:
            for entity, mean, var in zip(snap.entities, snap.mean, snap.variance):
                writer.writerow([snap.window, snap.group, repr(snap.t), entity, repr(float(mean)), repr(float(var))])


def read_snapshots(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [
            {
                "window": int(r["window"]),
                "group": int(r["group"]),
                "time": float(r["time"]),
                "entity": r["entity"],
                "mean": float(r["mean"]),
                "variance": float(r["variance"]),
            }
            for r in csv.DictReader(fh)
        ]


def latest_risks(path) -> dict[str, float]:
    """Mean risk per entity from the last window of a snapshot CSV."""
    rows = read_snapshots(path)
    if not rows:
        return {}
    last = max(r["window"] for r in rows)
    return {r["entity"]: r["mean"] for r in rows if r["window"] == last}


def read_topology(path, index: EntityIndex, delimiter: str = ",") -> Topology:
    """Two-column edge list (header row first) over entities of ``index``."""
    with open(path, newline="", encoding="utf-8-sig") as fh:
        rows = [r for r in csv.reader(fh, delimiter=delimiter) if r and any(c.strip() for c in r)]
    if not rows:
        raise ValueError(f"{path}: empty topology file")
    topo = Topology(len(index))
    for a, b, *_ in rows[1:]:
        a, b = a.strip(), b.strip()
        for entity in (a, b):
            if entity not in index:
                raise KeyError(f"topology entity {entity!r} has no risk estimate")
        if a != b:
            topo.add_edge(index.index(a), index.index(b))
    return topo


def topology_entities(path, delimiter: str = ",") -> list[str]:
    with open(path, newline="", encoding="utf-8-sig") as fh:
        rows = [r for r in csv.reader(fh, delimiter=delimiter) if r and any(c.strip() for c in r)]
    index = EntityIndex()
    for a, b, *_ in rows[1:]:
        index.add(a.strip())
        index.add(b.strip())
    return list(index)


def write_flows(path, flows: Iterable, columns: Iterable[str] | None = None) -> None:
    """Flow records as CSV under canonical column names (the default schema)."""
    columns = list(CANONICAL_FIELDS if columns is None else columns)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for f in flows:
            writer.writerow([_cell(getattr(f, c)) for c in columns])


def _cell(value) -> str:
    if value is None:
        return ""
    return repr(value) if isinstance(value, float) else str(value)
