"""Command-line front end: `cluster`, `shapes`, `simulate`, and `synth`.

Every data output embeds the dataset content hash and the resolved
configuration; figures are rendered next to the delimited files.
Exit codes: 0 success, 1 internal error, 2 user/input error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
import traceback
from pathlib import Path

from . import plots
from .clustering import Cluster, cluster_size_pdf, time_sequence_clusters
from .config import ENV_CONFIG, ResolvedConfig, resolve_config
from .errors import ConfigError, DataError, InvalidInputError, SchemaError, VrucpError
from .simulator import evaluate_tick, run_simulation, summarize
from .trajectory_io import GroupSpec, ScenarioSpec, WalkerSpec, load_trajectories, \
    preset_scenario, resample, synth_scenario

logger = logging.getLogger(__name__)

USER_ERRORS = (SchemaError, DataError, ConfigError, InvalidInputError, FileNotFoundError)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help=f"JSON config file (default: ${ENV_CONFIG})")
    parser.add_argument("--seed", type=int, help="seed for every random choice")
    parser.add_argument("--out-dir", default="vrucp_out", help="output directory")
    parser.add_argument("--print-config", action="store_true",
                        help="print the resolved config with provenance and exit")
    parser.add_argument("--no-figures", action="store_true", help="skip figure rendering")


def _add_cluster_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--e", type=float, help="DBSCAN radius in meters")
    parser.add_argument("--r", type=float, help="coexistence-ratio threshold in (0, 1]")
    parser.add_argument("--min-pts", type=int, dest="min_pts", help="minimum cluster size")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vrucp",
        description="Cluster VRU trajectories, fit minimal enclosing shapes, and "
                    "simulate the message load of a road-side unit.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_cluster = sub.add_parser("cluster", help="offline clustering of a trajectory file")
    p_cluster.add_argument("--input", required=True, help="trajectory CSV")
    _add_cluster_flags(p_cluster)
    _add_common(p_cluster)

    p_shapes = sub.add_parser("shapes", help="per-tick shape evaluations for given clusters")
    p_shapes.add_argument("--input", required=True, help="trajectory CSV")
    p_shapes.add_argument("--clusters", required=True, help="clusters.json from `cluster`")
    p_shapes.add_argument("--rate", type=float, help="evaluation tick rate in Hz")
    p_shapes.add_argument("--mode", choices=("full", "compulsory"), help="shape size mode")
    _add_common(p_shapes)

    p_sim = sub.add_parser("simulate", help="full message-load experiment")
    p_sim.add_argument("--input", required=True, help="trajectory CSV")
    _add_cluster_flags(p_sim)
    p_sim.add_argument("--rate", type=float, help="CPM generation rate in Hz")
    p_sim.add_argument("--policies", help="comma list from "
                       "{no-cluster,circle,ellipse,rectangle,polygon,adaptive}")
    p_sim.add_argument("--mode", choices=("full", "compulsory"), help="shape size mode")
    _add_common(p_sim)

    p_synth = sub.add_parser("synth", help="generate a synthetic trajectory CSV")
    p_synth.add_argument("--preset", default="crowd",
                         choices=("lockstep", "two-walkers", "crowd"),
                         help="built-in scenario (ignored when the config file has one)")
    p_synth.add_argument("--duration", type=float, help="scenario duration in seconds")
    _add_common(p_synth)

    return parser


def _flag_values(args: argparse.Namespace) -> dict:
    keys = ("e", "r", "min_pts", "rate", "policies", "mode", "seed")
    return {k: getattr(args, k) for k in keys if hasattr(args, k)}


def _resolve(args: argparse.Namespace) -> ResolvedConfig:
    return resolve_config(args.config, _flag_values(args))


def _print_config(resolved: ResolvedConfig) -> int:
    print(json.dumps(resolved.provenance(), indent=2, sort_keys=True))
    return 0


def _json_dump(data: dict, path: Path) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _csv_with_header(path: Path, dataset_hash: str, resolved: ResolvedConfig,
                     columns, rows) -> None:
    buf = io.StringIO()
    buf.write(f"# dataset_hash={dataset_hash}\n")
    buf.write(f"# config={json.dumps(resolved.provenance(), sort_keys=True)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    writer.writerows(rows)
    path.write_text(buf.getvalue(), encoding="utf-8")


def _load_input(args: argparse.Namespace):
    table = load_trajectories(args.input)
    if not table.vru_ids:
        raise DataError(f"{args.input}: no trajectories")
    return table


def cmd_cluster(args: argparse.Namespace) -> int:
    resolved = _resolve(args)
    if args.print_config:
        return _print_config(resolved)
    table = _load_input(args)
    params = resolved.cluster_params()
    clusters = time_sequence_clusters(table, params)
    stats = cluster_size_pdf(clusters, table)
    dataset_hash = table.content_hash()

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _json_dump({
        "dataset_hash": dataset_hash,
        "config": resolved.provenance(),
        "params": {"e": params.e, "r": params.r, "min_pts": params.min_pts},
        "clusters": [{"id": c.id, "members": sorted(c.members),
                      "coexistence": c.coexistence, "window": list(c.window)}
                     for c in clusters],
        "stats": {
            "pdf": {str(k): v for k, v in stats.pdf.items()},
            "unclustered_instance_fraction": stats.unclustered_instance_fraction,
            "unclustered_vru_fraction": stats.unclustered_vru_fraction,
            "n_cluster_instances": stats.n_cluster_instances,
            "n_vru_instances": stats.n_vru_instances,
        },
    }, out / "clusters.json")
    _csv_with_header(out / "cluster_size_pdf.csv", dataset_hash, resolved,
                     ["size", "probability"],
                     [[size, prob] for size, prob in sorted(stats.pdf.items())])
    if not args.no_figures:
        plots.save_cluster_size_pdf(stats.pdf, out / "cluster_size_pdf.png")

    print(f"clusters: {len(clusters)}")
    print(f"unclustered instance fraction: {stats.unclustered_instance_fraction:.4f}")
    print(f"unclustered VRU fraction: {stats.unclustered_vru_fraction:.4f}")
    print(f"wrote {out / 'clusters.json'}")
    return 0


def _clusters_from_json(path: str, dataset_hash: str) -> list[Cluster]:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    if data.get("dataset_hash") != dataset_hash:
        raise DataError(
            f"{path}: dataset hash mismatch (clusters built from a different input)")
    return [Cluster(c["id"], frozenset(c["members"]), tuple(c["window"]), c["coexistence"])
            for c in data["clusters"]]


def cmd_shapes(args: argparse.Namespace) -> int:
    resolved = _resolve(args)
    if args.print_config:
        return _print_config(resolved)
    table = _load_input(args)
    dataset_hash = table.content_hash()
    clusters = _clusters_from_json(args.clusters, dataset_hash)
    config = resolved.sim_config()

    from collections import defaultdict

    from .simulator import _nearest_native  # shared tick->frame mapping

    resampled = resample(table, config.rate)
    active_by_native = defaultdict(list)
    for c in clusters:
        for t in c.window:
            active_by_native[t].append(c)
    half_period = 0.5 / table.rate + 1e-12
    native_ts = list(table.timestamps)

    records = []
    for tick in resampled.timestamps:
        t_star = _nearest_native(native_ts, tick, half_period)
        actives = active_by_native.get(t_star, []) if t_star is not None else []
        recs, _ = evaluate_tick(resampled.states_at(tick), actives, config, tick)
        records.extend(recs)

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _csv_with_header(
        out / "shape_evaluations.csv", dataset_hash, resolved,
        ["tick", "cluster_id", "shape_kind", "ca", "cadi", "area", "size_bits",
         "chosen_by_adaptive"],
        [[r.tick, r.cluster_id, r.kind, float(r.ca), r.cadi, r.area, r.size_bits,
          int(r.chosen)] for r in records])
    if not args.no_figures:
        by_kind_ca = {}
        by_kind_cadi = {}
        for r in records:
            by_kind_ca.setdefault(r.kind, []).append(float(r.ca))
            by_kind_cadi.setdefault(r.kind, []).append(r.cadi)
        plots.save_metric_cdf(by_kind_ca, "cluster accuracy", "Shape accuracy",
                              out / "shapes_ca_cdf.png")
        plots.save_metric_cdf(by_kind_cadi, "size x area per member [bit m^2/VRU]",
                              "Shape description efficiency", out / "shapes_cadi_cdf.png",
                              logx=True)

    print(f"evaluated {len(records)} shape/tick/cluster rows")
    print(f"wrote {out / 'shape_evaluations.csv'}")
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    resolved = _resolve(args)
    if args.print_config:
        return _print_config(resolved)
    table = _load_input(args)
    config = resolved.sim_config()
    report = run_simulation(table, config)
    report.provenance["config_provenance"] = resolved.provenance()

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _json_dump(report.to_dict(), out / "report.json")
    dataset_hash = report.provenance["dataset_hash"]
    for policy, series in sorted(report.policies.items()):
        _csv_with_header(out / f"bytes_{policy}.csv", dataset_hash, resolved,
                         ["second", "bytes", "message_count"],
                         list(zip(series.seconds, series.bytes, series.messages)))
    if not args.no_figures:
        plots.save_bytes_per_second({p: s.bytes for p, s in report.policies.items()},
                                    out / "sim_bytes_per_second.png")
        if report.adaptive_choices:
            plots.save_shape_choices(report.adaptive_choices, out / "sim_shape_choices.png")

    summary = summarize(report)
    header = f"{'policy':<12} {'median B/s':>12} {'q1':>10} {'q3':>10} {'reduction':>10}"
    print(header)
    for policy, stats in summary.items():
        red = stats.get("reduction_vs_no_cluster")
        red_txt = f"{red * 100:9.1f}%" if red is not None else "         -"
        print(f"{policy:<12} {stats['median']:>12.1f} {stats['q1']:>10.1f} "
              f"{stats['q3']:>10.1f} {red_txt}")
    print(f"wrote {out / 'report.json'}")
    return 0


def _scenario_from_config(resolved: ResolvedConfig, args: argparse.Namespace) -> ScenarioSpec:
    scenario = resolved.values.get("scenario")
    seed = resolved.values["seed"]
    if scenario is None:
        return preset_scenario(args.preset, seed=seed, duration=args.duration)
    groups = tuple(GroupSpec(**g) for g in scenario.get("groups", []))
    walkers = tuple(WalkerSpec(**w) for w in scenario.get("walkers", []))
    return ScenarioSpec(
        duration=float(scenario.get("duration", args.duration or 60.0)),
        frame_rate=float(scenario.get("frame_rate", 10.0)),
        groups=groups, walkers=walkers, seed=seed)


def cmd_synth(args: argparse.Namespace) -> int:
    resolved = _resolve(args)
    if args.print_config:
        return _print_config(resolved)
    try:
        spec = _scenario_from_config(resolved, args)
    except TypeError as exc:
        raise ConfigError(f"invalid scenario description: {exc}") from None
    table = synth_scenario(spec)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "synthetic.csv"
    table.save(path)
    print(f"wrote {path} ({len(table.vru_ids)} VRUs, {table.n_states} states, "
          f"{table.rate:g} Hz)")
    return 0


COMMANDS = {
    "cluster": cmd_cluster,
    "shapes": cmd_shapes,
    "simulate": cmd_simulate,
    "synth": cmd_synth,
}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except USER_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except VrucpError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 1
    except Exception:
        traceback.print_exc()
        return 1


if __name__ == "__main__":
    sys.exit(main())
