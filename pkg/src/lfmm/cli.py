"""Command line interface.

Every subcommand reads tabular text inputs, writes its outputs plus a
manifest.txt into --out, and is deterministic: rerunning with the same
inputs and flags reproduces identical bytes, whatever --jobs says. Exit
codes: 0 success, 1 failed conservation check, 2 bad input or configuration.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .aggregate import aggregate, load_aggregation_map
from .detect import DetectConfig, leiden, load_partition, rb_quality, save_partition
from .diversity import GravityConfig, gsi, load_spatial, null_diversity
from .errors import ConfigError, FormatError, LfmmError, ValidationError
from .fileio import fmt_num, read_table, write_manifest, write_text
from .graph import load_graph, save_graph
from .membership import (
    MEMBERSHIP_KINDS,
    diffusion_membership,
    normalize_aggregate,
    normalize_node,
    raw_membership,
    conservation_check,
)
from .synth import SbmConfig, run_consistency_experiment, run_heatmap_experiment


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_csv(path: Path, header: list[str], rows: list[list[str]]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _load_graph_args(args):
    inputs = {"edges": args.edges}
    if args.diagonal:
        inputs["diagonal"] = args.diagonal
    return load_graph(args.edges, args.diagonal), inputs


def _missing(value: float) -> str:
    return "" if value is None or (isinstance(value, float) and np.isnan(value)) else fmt_num(value)


def cmd_aggregate(args) -> int:
    g, inputs = _load_graph_args(args)
    amap = load_aggregation_map(args.partition, g)
    inputs["partition"] = args.partition
    g_agg = aggregate(g, amap)
    out = _out_dir(args)
    save_graph(g_agg, out / "edges.tsv", out / "diagonal.tsv")
    write_manifest(out, "aggregate", {}, inputs)
    return 0


def cmd_detect(args) -> int:
    g, inputs = _load_graph_args(args)
    cfg = DetectConfig(resolution=args.resolution, seed=args.seed, max_passes=args.max_passes)
    c = leiden(g, cfg)
    out = _out_dir(args)
    save_partition(c, g, out / "partition.tsv")
    write_manifest(
        out,
        "detect",
        {"resolution": fmt_num(cfg.resolution), "seed": cfg.seed, "max_passes": cfg.max_passes},
        inputs,
    )
    print(f"communities\t{c.community_count}")
    print(f"quality\t{fmt_num(rb_quality(g, c, cfg.resolution))}")
    return 0


SIZES_HEADER = ("set_id", "size")


def _load_sizes(path, g) -> np.ndarray:
    table: dict[str, float] = {}
    for lineno, (set_id, field) in read_table(path, SIZES_HEADER):
        if set_id in table:
            raise FormatError(f"{path}:{lineno}: duplicate row for set {set_id!r}")
        try:
            size = int(field)
        except ValueError:
            raise FormatError(f"{path}:{lineno}: size {field!r} is not an integer") from None
        if size < 1:
            raise FormatError(f"{path}:{lineno}: size must be >= 1, got {size}")
        table[set_id] = size
    sizes = np.empty(g.node_count, dtype=float)
    for i, label in enumerate(g.node_labels):
        if label not in table:
            raise ValidationError(f"no size for set {label!r}")
        sizes[i] = table[label]
    return sizes


def cmd_membership(args) -> int:
    g, inputs = _load_graph_args(args)
    c = load_partition(args.partition, g)
    inputs["partition"] = args.partition
    params = {"kind": args.kind}
    if args.kind == "raw":
        matrix = raw_membership(g, c)
    elif args.kind == "node-normalized":
        matrix = normalize_node(raw_membership(g, c))
    elif args.kind == "aggregate-normalized":
        if not args.sizes:
            raise ConfigError("aggregate-normalized membership needs --sizes")
        sizes = _load_sizes(args.sizes, g)
        inputs["sizes"] = args.sizes
        matrix = normalize_aggregate(raw_membership(g, c), sizes)
    else:
        matrix = diffusion_membership(g, c, args.t)
        params["t"] = args.t
    out = _out_dir(args)
    header = ["node"] + [c.community_name(k) for k in range(c.community_count)]
    order = sorted(range(g.node_count), key=lambda i: g.node_labels[i])
    rows = [
        [g.node_labels[i]] + [fmt_num(v) for v in matrix.values[i]]
        for i in order
    ]
    _write_csv(out / "membership.csv", header, rows)
    write_manifest(out, "membership", params, inputs)
    return 0


def _read_membership_csv(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as err:
        raise FormatError(f"{path}: cannot read: {err}") from err
    reader = csv.reader(text.splitlines())
    try:
        header = next(reader)
    except StopIteration:
        raise FormatError(f"{path}: empty membership table") from None
    if not header or header[0] != "node" or len(header) < 2:
        raise FormatError(f"{path}: expected header node,<community>,...")
    labels = []
    values = []
    seen = set()
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise FormatError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        label = row[0]
        if label in seen:
            raise FormatError(f"{path}:{lineno}: duplicate row for node {label!r}")
        seen.add(label)
        labels.append(label)
        try:
            shares = [float(v) for v in row[1:]]
        except ValueError:
            raise FormatError(f"{path}:{lineno}: non-numeric membership value") from None
        if any(not np.isfinite(v) or v < 0 for v in shares):
            raise FormatError(f"{path}:{lineno}: membership values must be finite and >= 0")
        values.append(shares)
    if not labels:
        raise FormatError(f"{path}: no membership rows")
    return labels, np.asarray(values, dtype=float)


def cmd_diversity(args) -> int:
    out = _out_dir(args)
    if args.membership:
        if args.edges or args.partition:
            raise ConfigError("pass either --membership or --edges/--partition, not both")
        if args.spatial:
            raise ConfigError(
                "z scores need the graph form (--edges with --partition), "
                "not a precomputed membership table"
            )
        labels, values = _read_membership_csv(args.membership)
        rows = []
        for label, row in sorted(zip(labels, values.tolist())):
            value = gsi(np.asarray(row))
            rows.append([label, _missing(np.nan if value is None else value)])
        _write_csv(out / "diversity.csv", ["set_id", "gsi"], rows)
        write_manifest(out, "diversity", {"mode": "gsi-only"}, {"membership": args.membership})
        return 0

    if not args.edges or not args.partition:
        raise ConfigError("diversity needs --membership, or --edges with --partition")
    g, inputs = _load_graph_args(args)
    c = load_partition(args.partition, g)
    inputs["partition"] = args.partition

    if not args.spatial:
        shares = normalize_node(raw_membership(g, c))
        rows = []
        for label, row in sorted(zip(g.node_labels, shares.values.tolist())):
            value = gsi(np.asarray(row))
            rows.append([label, _missing(np.nan if value is None else value)])
        _write_csv(out / "diversity.csv", ["set_id", "gsi"], rows)
        write_manifest(out, "diversity", {"mode": "gsi-only"}, inputs)
        return 0

    spatial = load_spatial(args.spatial)
    inputs["spatial"] = args.spatial
    cfg = GravityConfig(
        beta=args.beta,
        samples=args.samples,
        seed=args.seed,
        self_distance_factor=args.theta,
        sigma_floor=args.sigma_floor,
    )
    report = null_diversity(
        g, c, spatial, cfg,
        jobs=args.jobs,
        redetect=args.redetect,
        detect_cfg=DetectConfig(resolution=args.resolution),
    )
    rows = []
    for i in sorted(range(g.node_count), key=lambda i: report.set_labels[i]):
        rows.append([
            report.set_labels[i],
            _missing(report.gsi_observed[i]),
            _missing(report.mu[i]),
            _missing(report.sigma[i]),
            _missing(report.z[i]),
        ])
    _write_csv(out / "diversity.csv", ["set_id", "gsi", "mu", "sigma", "z"], rows)
    params = {
        "beta": "fit" if args.beta is None else fmt_num(args.beta),
        "samples": cfg.samples,
        "seed": cfg.seed,
        "theta": fmt_num(cfg.self_distance_factor),
        "sigma_floor": fmt_num(cfg.sigma_floor),
        "redetect": args.redetect,
        "resolution": fmt_num(args.resolution),
    }
    write_manifest(out, "diversity", params, inputs)
    print(f"beta\t{fmt_num(report.fit.beta)}")
    print(f"kappa\t{fmt_num(report.fit.kappa)}")
    return 0


_CONSISTENCY_KEYS = {
    "nodes": int,
    "communities": int,
    "mean_degree": float,
    "mu": float,
    "n_sets": int,
    "mixing": float,
    "seed": int,
}
_HEATMAP_ONLY_KEYS = {"mu_values", "m_values", "seeds_per_cell"}


def _parse_config(path) -> dict[str, str]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as err:
        raise FormatError(f"{path}: cannot read: {err}") from err
    table: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise FormatError(f"{path}:{lineno}: expected key = value")
        key, _, value = stripped.partition("=")
        key = key.strip()
        value = value.strip()
        if key in table:
            raise FormatError(f"{path}:{lineno}: duplicate key {key!r}")
        table[key] = value
    return table


def _config_value(path, key, value, cast):
    try:
        return cast(value)
    except ValueError:
        raise ConfigError(f"{path}: bad value for {key!r}: {value!r}") from None


def _sbm_from_config(table: dict[str, str], path, allowed_extra=frozenset()) -> tuple[SbmConfig, float]:
    kwargs = {}
    resolution = 1.0
    for key, value in table.items():
        if key == "resolution":
            resolution = _config_value(path, key, value, float)
        elif key in _CONSISTENCY_KEYS:
            kwargs[key] = _config_value(path, key, value, _CONSISTENCY_KEYS[key])
        elif key in allowed_extra:
            continue
        else:
            raise ConfigError(f"{path}: unknown config key {key!r}")
    return SbmConfig(**kwargs), resolution


def cmd_bench(args) -> int:
    table = _parse_config(args.config)
    out = _out_dir(args)
    if args.experiment == "consistency":
        cfg, resolution = _sbm_from_config(table, args.config)
        result = run_consistency_experiment(cfg, resolution=resolution)
        label_order = sorted(range(len(result.set_labels)), key=lambda x: result.set_labels[x])
        rows = []
        for series in ("raw", "normalized", "individual"):
            xs, ys = result.series()[series]
            for x in label_order:
                for k in range(result.community_count):
                    rows.append([
                        result.set_labels[x],
                        str(k),
                        fmt_num(xs[x, k]),
                        fmt_num(ys[x, k]),
                        series,
                    ])
        _write_csv(out / "scatter.csv", ["set", "community", "x", "y", "series"], rows)
        summary = [
            ["raw_pearson", fmt_num(result.correlations["raw"])],
            ["normalized_pearson", fmt_num(result.correlations["normalized"])],
            ["individual_pearson", fmt_num(result.correlations["individual"])],
            ["minority_bias", fmt_num(result.minority_bias)],
        ]
        _write_csv(out / "summary.csv", ["metric", "value"], summary)
        for metric, value in summary:
            print(f"{metric}\t{value}")
    else:
        default_axis = "0,0.1,0.2,0.3,0.4,0.5"
        mu_values = [
            _config_value(args.config, "mu_values", v, float)
            for v in table.get("mu_values", default_axis).split(",")
        ]
        m_values = [
            _config_value(args.config, "m_values", v, float)
            for v in table.get("m_values", default_axis).split(",")
        ]
        seeds_per_cell = _config_value(
            args.config, "seeds_per_cell", table.get("seeds_per_cell", "5"), int
        )
        cfg, resolution = _sbm_from_config(table, args.config, allowed_extra=_HEATMAP_ONLY_KEYS)
        result = run_heatmap_experiment(
            cfg, mu_values, m_values,
            seeds_per_cell=seeds_per_cell,
            resolution=resolution,
            jobs=args.jobs,
        )
        rows = []
        for i, mu in enumerate(result.mu_values):
            for j, m in enumerate(result.m_values):
                rows.append([fmt_num(mu), fmt_num(m), _missing(result.grid[i, j])])
        _write_csv(out / "grid.csv", ["mu", "m", "mean_minority"], rows)
    params = {"experiment": args.experiment}
    write_manifest(out, "bench", params, {"config": args.config})
    return 0


def cmd_check(args) -> int:
    g, inputs = _load_graph_args(args)
    amap = load_aggregation_map(args.aggregation, g)
    inputs["aggregation"] = args.aggregation
    g_agg_for_labels = aggregate(g, amap)
    c_sets = load_partition(args.partition, g_agg_for_labels)
    inputs["partition"] = args.partition
    supplied = None
    if args.agg_edges:
        supplied = load_graph(args.agg_edges, args.agg_diagonal)
        inputs["agg_edges"] = args.agg_edges
        if args.agg_diagonal:
            inputs["agg_diagonal"] = args.agg_diagonal
    report = conservation_check(g, amap, c_sets, aggregated=supplied)
    out = _out_dir(args)
    order = sorted(range(len(report.set_labels)), key=lambda x: report.set_labels[x])
    rows = []
    for x in order:
        for k in range(len(report.community_names)):
            rows.append([
                report.set_labels[x],
                report.community_names[k],
                fmt_num(report.direct[x, k]),
                fmt_num(report.summed[x, k]),
                fmt_num(abs(report.direct[x, k] - report.summed[x, k])),
            ])
    _write_csv(out / "report.csv", ["set_id", "community", "direct", "summed", "abs_diff"], rows)
    write_manifest(out, "check", {"tolerance": fmt_num(args.tolerance)}, inputs)
    ok = report.passes(args.tolerance)
    print(
        f"max relative discrepancy\t{fmt_num(report.max_relative_discrepancy())}"
        f"\ttolerance\t{fmt_num(args.tolerance)}\t{'pass' if ok else 'FAIL'}"
    )
    if not ok:
        worst = int(np.argmax(np.abs(report.direct - report.summed).max(axis=1)))
        print(f"offending set\t{report.set_labels[worst]}")
    return 0 if ok else 1


def _add_graph_arguments(sub, diagonal=True):
    sub.add_argument("--edges", required=True, help="edge list TSV (src, dst, weight)")
    if diagonal:
        sub.add_argument("--diagonal", help="diagonal mass TSV (node, diagonal_mass)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lfmm",
        description="Aggregation-consistent mixed community memberships",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("aggregate", help="collapse node sets into super-nodes")
    _add_graph_arguments(p)
    p.add_argument("--partition", required=True, help="node-to-set map TSV")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_aggregate)

    p = subs.add_parser("detect", help="seeded Leiden community detection")
    _add_graph_arguments(p)
    p.add_argument("--resolution", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-passes", type=int, default=32)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_detect)

    p = subs.add_parser("membership", help="membership matrix for a partition")
    _add_graph_arguments(p)
    p.add_argument("--partition", required=True, help="community partition TSV")
    p.add_argument("--kind", choices=MEMBERSHIP_KINDS, default="node-normalized")
    p.add_argument("--t", type=int, default=1, help="diffusion step count")
    p.add_argument("--sizes", help="set size TSV for aggregate-normalized membership")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_membership)

    p = subs.add_parser("diversity", help="membership diversity and gravity-null z scores")
    p.add_argument("--membership", help="precomputed membership CSV (GSI only)")
    p.add_argument("--edges")
    p.add_argument("--diagonal")
    p.add_argument("--partition")
    p.add_argument("--spatial", help="set coordinates and populations TSV")
    p.add_argument("--beta", type=float, default=None, help="fixed distance exponent (default: fit)")
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--theta", type=float, default=0.5, help="self-distance factor")
    p.add_argument("--sigma-floor", type=float, default=1e-12)
    p.add_argument("--redetect", action="store_true",
                   help="re-detect communities on every null sample")
    p.add_argument("--resolution", type=float, default=1.0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_diversity)

    p = subs.add_parser("bench", help="synthetic benchmark experiments")
    p.add_argument("experiment", choices=("consistency", "heatmap"))
    p.add_argument("--config", required=True, help="flat key = value settings file")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bench)

    p = subs.add_parser("check", help="verify membership conservation under aggregation")
    _add_graph_arguments(p)
    p.add_argument("--aggregation", required=True, help="node-to-set map TSV")
    p.add_argument("--partition", required=True, help="partition of the sets TSV")
    p.add_argument("--agg-edges", help="stored aggregated edge list to verify")
    p.add_argument("--agg-diagonal", help="stored aggregated diagonal file")
    p.add_argument("--tolerance", type=float, default=1e-9,
                   help="relative discrepancy tolerance")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except LfmmError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
