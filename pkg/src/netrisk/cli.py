"""Command line entry point.

Every subcommand takes ``--config`` (INI, see :mod:`netrisk.config`) and
``--out``; command-line values override the config. On failure a single JSON
line ``{"error": ..., "message": ..., "command": ...}`` goes to stderr and the
exit status is nonzero.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import io as nio
from .bench import compare_parameters, run_experiment, tune_forget_factor
from .config import RunConfig, load_config
from .connectivity import max_eigenvalue
from .flows import EntityIndex, build_entity_index, normalize_timestamps, parse_flows
from .partition import iter_bisections, partition_to_size, ratio_cut
from .pipeline import EmptyInputError, history_graph, run_stream, stream_graphs, throughput_report
from .routing import all_min_max_paths, min_max_path
from .signals import PARAMETERS

EXIT_FAILURE = 1


class CliError(Exception):
    pass


def _config(args) -> RunConfig:
    base = load_config(args.config) if args.config else RunConfig()
    return base.with_overrides(
        param=args.param,
        sync_window=args.sync_window,
        graph_window=args.graph_window,
        flows=args.flows,
        out=args.out,
        **{k: getattr(args, k, None) for k in ("forget_factor", "max_group_size", "history", "measurements", "topology")},
    )


def _out_dir(config: RunConfig) -> Path:
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_flows(path, config: RunConfig, origin=None):
    if not path:
        raise CliError("no flow file given (use --flows or [paths] flows)")
    result = parse_flows(path, config.schema, delimiter=config.delimiter, units=config.units,
                         time_formats=config.time_formats)
    for err in result.errors[:5]:
        print(f"warning: {path}: row {err.row}: {err.field}: {err.message}", file=sys.stderr)
    if result.skipped > 5:
        print(f"warning: {path}: {result.skipped} rows skipped in total", file=sys.stderr)
    if not result.records:
        raise EmptyInputError(f"{path}: no valid flow records")
    flows, origin = normalize_timestamps(result.records, origin)
    return flows, origin, result.skipped


def _partition_inputs(config: RunConfig):
    """Streaming flows, the history they are partitioned on, and a shared index."""
    flows, origin, skipped = _load_flows(config.flows, config)
    history = flows
    if config.history:
        history, _, _ = _load_flows(config.history, config)
    index = build_entity_index(list(history) + list(flows))
    return flows, history, index, origin, skipped


def cmd_graph(args) -> int:
    config = _config(args)
    out = _out_dir(config)
    flows, origin, _ = _load_flows(config.flows, config)
    index = build_entity_index(flows)
    meta = {"delta": config.sync_window, "param": config.param, "rho_f": config.forget_factor, "origin": origin}
    if args.whole:
        graph = history_graph(flows, config, index)
        nio.write_graph(out / "graph.csv", graph, {**meta, "delta": config.offline_sync_window,
                                                   "lambda_max": max_eigenvalue(graph)})
        print(f"wrote {out / 'graph.csv'} ({len(index)} entities)")
        return 0
    gdir = out / "graphs"
    gdir.mkdir(exist_ok=True)
    graphs = stream_graphs(flows, config, index)
    for k, (_, smoothed) in enumerate(graphs):
        nio.write_graph(gdir / f"graph_{k:04d}.csv", smoothed, {**meta, "window": k})
    nio.write_graph(out / "graph.csv", graphs[-1][1], {**meta, "window": len(graphs) - 1})
    print(f"wrote {len(graphs)} window graphs to {gdir} ({len(index)} entities)")
    return 0


def cmd_partition(args) -> int:
    config = _config(args)
    out = _out_dir(config)
    _, history, index, _, _ = _partition_inputs(config)
    graph = history_graph(history, config, index)
    trace = list(iter_bisections(graph, config.max_group_size))
    partition = trace[-1]
    nio.write_partition(out / "partition.csv", index, partition)
    with open(out / "partition_trace.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["split", "groups", "ratio_cut"])
        for k, p in enumerate(trace):
            writer.writerow([k, p.group_count, repr(ratio_cut(graph, p))])
    nio.write_metadata(out / "partition.meta", {**config.as_metadata(), "entities": len(index),
                                                "groups": partition.group_count})
    print(f"wrote {out / 'partition.csv'}: {len(index)} entities in {partition.group_count} groups")
    return 0


def cmd_estimate(args) -> int:
    config = _config(args)
    out = _out_dir(config)
    flows, history, index, origin, skipped = _partition_inputs(config)
    if args.partition:
        index, partition = nio.read_partition(args.partition)
        for f in flows:
            for e in (f.src_entity, f.dst_entity):
                if e not in index:
                    raise CliError(f"entity {e!r} missing from partition file {args.partition}")
    else:
        partition = partition_to_size(history_graph(history, config, index), config.max_group_size)
        nio.write_partition(out / "partition.csv", index, partition)
    measurements = nio.read_measurements(config.measurements, config.delimiter, origin) if config.measurements else []
    run = run_stream(flows, measurements, config, index, partition, workers=args.workers)

    nio.write_snapshots(out / "risk_snapshots.csv", run.snapshots)
    if args.covariance:
        for snap in run.window_snapshots(len(run.window_starts) - 1):
            nio.write_matrix_csv(out / f"covariance_group{snap.group}.csv", snap.entities, snap.cov)
    report = throughput_report(run)
    timing = {
        "data_seconds": report.data_seconds,
        "wall_seconds": report.wall_seconds,
        "coverage_ratio": report.coverage_ratio if report.coverage_defined else "undefined",
        **{f"stage_{k}_seconds": v for k, v in report.stage_seconds.items()},
        "graph_seconds_per_window_mean": float(np.mean(report.graph_seconds_per_window)),
    }
    nio.write_metadata(out / "timing.meta", timing)
    nio.write_metadata(out / "risk_snapshots.meta", {
        **config.as_metadata(), "origin": origin, "windows": len(run.window_starts),
        "groups": partition.group_count, "skipped_flow_rows": skipped,
        "skipped_measurements": run.skipped_measurements,
    })
    print(f"wrote {out / 'risk_snapshots.csv'}: {len(run.window_starts)} windows, "
          f"{partition.group_count} groups; coverage {timing['coverage_ratio']}")
    return 0


def _route_row(index: EntityIndex, dst: int, result) -> dict:
    return {
        "destination": index.entity(dst),
        "path_risk": result.path_risk,
        "path": " > ".join(index.entity(v) for v in result.path),
    }


def cmd_route(args) -> int:
    config = _config(args)
    out = _out_dir(config)
    risks_path = Path(args.risks) if args.risks else out / "risk_snapshots.csv"
    if not risks_path.exists():
        raise CliError(f"risk snapshot file not found: {risks_path}")
    if not config.topology:
        raise CliError("no topology file given (use --topology or [paths] topology)")
    latest = nio.latest_risks(risks_path)
    index = EntityIndex(latest)
    topology = nio.read_topology(config.topology, index, config.delimiter)
    risks = [latest[e] for e in index]
    if args.exclude:
        excluded = [e.strip() for e in args.exclude.split(",") if e.strip()]
        for e in excluded:
            if e not in index:
                raise CliError(f"excluded entity {e!r} is unknown")
        topology = topology.without(index.index(e) for e in excluded)
    if args.src not in index:
        raise CliError(f"unknown source entity {args.src!r}")
    src = index.index(args.src)
    include = not args.exclude_endpoints

    if args.all:
        routes = all_min_max_paths(topology, risks, src, include)
        rows = [_route_row(index, d, r) for d, r in sorted(routes.items(), key=lambda kv: index.entity(kv[0]))]
        target = out / f"routes_{_safe(args.src)}.csv"
        with open(target, "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=["destination", "path_risk", "path"])
            writer.writeheader()
            for row in rows:
                writer.writerow({**row, "path_risk": repr(row["path_risk"])})
        for row in rows:
            print(f"{row['destination']}\t{row['path_risk']:.6g}\t{row['path']}")
        return 0

    if not args.dst:
        raise CliError("route needs --dst or --all")
    if args.dst not in index:
        raise CliError(f"unknown destination entity {args.dst!r}")
    result = min_max_path(topology, risks, src, index.index(args.dst), include)
    if result is None:
        raise CliError(f"{args.dst} is unreachable from {args.src}")
    row = _route_row(index, index.index(args.dst), result)
    print(f"path: {row['path']}")
    print(f"path_risk: {row['path_risk']!r}")
    return 0


def _safe(name: str) -> str:
    return "".join(c if c.isalnum() or c in "-_" else "_" for c in name)


def cmd_bench(args) -> int:
    config = _config(args)
    out = _out_dir(config)
    flows, _, _ = _load_flows(config.flows, config)
    history = None
    if config.history:
        history, _, _ = _load_flows(config.history, config)
    kwargs = {"history": history, "fractions": tuple(args.split)}
    if args.tune_forget_factor:
        best, trace = tune_forget_factor(flows, config, **kwargs)
        for rho, auc in trace:
            print(f"forget_factor={rho}: NRE val AUC {auc:.4f}")
        config = config.with_overrides(forget_factor=best)
    result = run_experiment(flows, config, **kwargs)

    with open(out / "roc_points.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "split", "threshold", "fpr", "tpr"])
        for m in (result.nre, result.fbnsi):
            for split, curve in (("val", m.val_curve), ("test", m.test_curve)):
                for thr, fpr, tpr in curve.points:
                    writer.writerow([m.method, split, repr(thr), repr(fpr), repr(tpr)])
    with open(out / "summary.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "param", "val_auc", "test_auc", "val_peak_ba", "threshold", "test_ba"])
        for m in (result.nre, result.fbnsi):
            writer.writerow([m.method, result.param, repr(m.val_auc), repr(m.test_auc),
                             repr(m.val_peak_ba), repr(m.threshold), repr(m.test_ba)])
    nio.write_metadata(out / "summary.meta", {
        **config.as_metadata(), "windows": len(result.labels),
        "attack_windows": sum(lab == "ATTACK" for lab in result.labels),
        "split": ",".join(str(s) for s in args.split),
    })
    if args.compare:
        params = list(PARAMETERS) if args.compare == "all" else [p.strip() for p in args.compare.split(",")]
        rows = compare_parameters(flows, config, params, **kwargs)
        columns = ["param"] + sorted({k for r in rows for k in r if k != "param"})
        with open(out / "comparison.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=columns)
            writer.writeheader()
            writer.writerows(rows)
    for m in (result.nre, result.fbnsi):
        print(f"{m.method}: val AUC {m.val_auc:.4f}  test AUC {m.test_auc:.4f}  test balanced accuracy {m.test_ba:.4f}")
    return 0


def _read_rows(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def cmd_report(args) -> int:
    from . import plotting

    config = _config(args)
    out = _out_dir(config)
    src = Path(args.source) if args.source else out
    written = []

    snaps = src / "risk_snapshots.csv"
    if snaps.exists():
        rows = nio.read_snapshots(snaps)
        if rows:
            written.append(plotting.plot_risk_heatmap(rows, out / "risk_mean.png"))
            written.append(plotting.plot_risk_heatmap(rows, out / "risk_variance.png", key="variance"))
            written.append(plotting.plot_risk_traces(rows, out / "risk_traces.png"))
    graph = src / "graph.csv"
    if graph.exists():
        ids, F = nio.read_matrix_csv(graph)
        written.append(plotting.plot_graph(ids, F, out / "graph.png"))
    roc_file = src / "roc_points.csv"
    if roc_file.exists():
        rows = _read_rows(roc_file)
        summary = {r["method"]: r for r in _read_rows(src / "summary.csv")} if (src / "summary.csv").exists() else {}
        for split in ("val", "test"):
            curves = {}
            for method in dict.fromkeys(r["method"] for r in rows):
                pts = [r for r in rows if r["method"] == method and r["split"] == split]
                if not pts:
                    continue
                fpr = [float(r["fpr"]) for r in pts]
                tpr = [float(r["tpr"]) for r in pts]
                auc = float(summary[method][f"{split}_auc"]) if method in summary else float(np.trapezoid(tpr, fpr))
                curves[method] = (fpr, tpr, auc)
            if curves:
                written.append(plotting.plot_roc(curves, out / f"roc_{split}.png", title=f"ROC ({split})"))
    comparison = src / "comparison.csv"
    if comparison.exists():
        written.append(plotting.plot_comparison(_read_rows(comparison), out / "comparison.png"))
    for routes in sorted(src.glob("routes_*.csv")):
        written.append(plotting.plot_routes(_read_rows(routes), out / f"{routes.stem}.png", routes.stem[7:]))

    if not written:
        raise CliError(f"nothing to plot in {src} (run estimate, graph, bench or route first)")
    for path in written:
        print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI config file")
    common.add_argument("--out", help="output directory (default: out)")
    common.add_argument("--flows", help="flow CSV")
    common.add_argument("--param", help="connection parameter name")
    common.add_argument("--sync-window", type=float, help="sync window in seconds")
    common.add_argument("--graph-window", type=float, help="graph window in seconds")

    parser = argparse.ArgumentParser(prog="netrisk", description="Network risk estimation from flow data.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("graph", parents=[common], help="connectivity graphs per window")
    p.add_argument("--forget-factor", dest="forget_factor", type=float)
    p.add_argument("--whole", action="store_true", help="one graph over the full span instead")
    p.set_defaults(func=cmd_graph)

    p = sub.add_parser("partition", parents=[common], help="size-bounded entity groups")
    p.add_argument("--max-size", dest="max_group_size", type=int)
    p.add_argument("--history", help="historical flow CSV (default: --flows)")
    p.set_defaults(func=cmd_partition)

    p = sub.add_parser("estimate", parents=[common], help="streaming risk estimates")
    p.add_argument("--history")
    p.add_argument("--measurements", help="CSV of time,entity,value,variance")
    p.add_argument("--partition", help="partition CSV to reuse")
    p.add_argument("--max-size", dest="max_group_size", type=int)
    p.add_argument("--forget-factor", dest="forget_factor", type=float)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--covariance", action="store_true", help="dump last-window covariance per group")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("route", parents=[common], help="min-max risk routes")
    p.add_argument("--src", required=True)
    p.add_argument("--dst")
    p.add_argument("--all", action="store_true", help="routes to every reachable entity")
    p.add_argument("--topology", help="edge-list CSV")
    p.add_argument("--risks", help="risk snapshot CSV (default: OUT/risk_snapshots.csv)")
    p.add_argument("--exclude", help="comma-separated entities to route around")
    p.add_argument("--exclude-endpoints", action="store_true", help="leave source and destination out of the max")
    p.set_defaults(func=cmd_route)

    p = sub.add_parser("bench", parents=[common], help="NRE vs FBNSI classification")
    p.add_argument("--history")
    p.add_argument("--forget-factor", dest="forget_factor", type=float)
    p.add_argument("--split", type=float, nargs=3, default=[0.5, 0.25, 0.25], metavar=("TRAIN", "VAL", "TEST"))
    p.add_argument("--compare", help="comma-separated parameters, or 'all'")
    p.add_argument("--tune-forget-factor", action="store_true", help="pick the forget factor on validation AUC")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("report", parents=[common], help="render figures next to the CSV outputs")
    p.add_argument("--source", help="directory holding CSV outputs (default: --out)")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001  (reported as one machine-readable line)
        message = str(exc.args[0]) if isinstance(exc, KeyError) and exc.args else str(exc)
        line = {"error": type(exc).__name__, "message": message, "command": args.command}
        print(json.dumps(line), file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
