"""End-to-end broadcast experiment: offline clustering, per-tick shape fits,
message assembly under each policy, and per-second byte accounting."""

from __future__ import annotations

import logging
import math
from bisect import bisect_left
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .clustering import Cluster, ClusterParams, ClusterStats, cluster_size_pdf, \
    time_sequence_clusters
from .cpm import DEFAULT_VRU_HEIGHT, CpmSizeModel, build_cpms, validate_size_model
from .errors import InvalidInputError
from .geometry import FootprintDims, fit_shapes, footprint_corners
from .metrics import evaluate_shapes, select_adaptive
from .trajectory_io import TrajectoryTable, resample

logger = logging.getLogger(__name__)

POLICIES = ("no-cluster", "circle", "ellipse", "rectangle", "polygon", "adaptive")
GENERATION_MODES = ("fixed", "on-detection")


@dataclass(frozen=True)
class SimConfig:
    params: ClusterParams = field(default_factory=ClusterParams)
    policies: tuple[str, ...] = POLICIES
    size_model: CpmSizeModel = field(default_factory=CpmSizeModel)
    rate: float = 2.0
    dims: FootprintDims = field(default_factory=FootprintDims)
    seed: int = 0
    containment: str = "center"
    mvee_tolerance: float = 1e-4
    generation: str = "fixed"

    def __post_init__(self):
        policies = tuple(self.policies)
        if not policies:
            raise InvalidInputError("at least one policy is required")
        unknown = [p for p in policies if p not in POLICIES]
        if unknown:
            raise InvalidInputError(f"unknown policies {unknown}; valid: {list(POLICIES)}")
        if len(set(policies)) != len(policies):
            raise InvalidInputError("duplicate policies")
        if not (self.rate > 0 and math.isfinite(self.rate)):
            raise InvalidInputError("generation rate must be positive")
        if self.generation not in GENERATION_MODES:
            raise InvalidInputError(f"unknown generation mode {self.generation!r}")
        object.__setattr__(self, "policies", policies)


@dataclass(frozen=True)
class EvalRecord:
    """One fitted shape of one active cluster at one tick."""

    tick: float
    cluster_id: int
    n_members: int
    kind: str
    ca: Fraction
    cadi: float
    area: float
    size_bits: float
    chosen: bool

    def to_dict(self) -> dict:
        return {
            "tick": self.tick,
            "cluster_id": self.cluster_id,
            "n_members": self.n_members,
            "shape_kind": self.kind,
            "ca": [self.ca.numerator, self.ca.denominator],
            "ca_value": float(self.ca),
            "cadi": self.cadi,
            "area": self.area,
            "size_bits": self.size_bits,
            "chosen_by_adaptive": self.chosen,
        }


@dataclass
class PolicySeries:
    """Per-second transmitted bytes and message counts for one policy."""

    seconds: list[int]
    bytes: list[int]
    messages: list[int]

    def to_dict(self) -> dict:
        return {"seconds": self.seconds, "bytes": self.bytes, "messages": self.messages}


@dataclass
class SimReport:
    policies: dict[str, PolicySeries]
    evaluations: list[EvalRecord]
    adaptive_choices: dict[int, dict[str, int]]
    cluster_stats: ClusterStats
    n_clusters: int
    provenance: dict

    def to_dict(self) -> dict:
        return {
            "provenance": self.provenance,
            "policies": {p: s.to_dict() for p, s in sorted(self.policies.items())},
            "summary": summarize(self),
            "evaluations": [e.to_dict() for e in self.evaluations],
            "adaptive_choices": {str(size): dict(sorted(kinds.items()))
                                 for size, kinds in sorted(self.adaptive_choices.items())},
            "cluster_stats": {
                "pdf": {str(k): v for k, v in self.cluster_stats.pdf.items()},
                "unclustered_instance_fraction": self.cluster_stats.unclustered_instance_fraction,
                "unclustered_vru_fraction": self.cluster_stats.unclustered_vru_fraction,
                "n_cluster_instances": self.cluster_stats.n_cluster_instances,
                "n_vru_instances": self.cluster_stats.n_vru_instances,
                "n_clusters": self.n_clusters,
            },
        }


def config_to_dict(config: SimConfig) -> dict:
    return {
        "e": config.params.e,
        "r": config.params.r,
        "min_pts": config.params.min_pts,
        "policies": list(config.policies),
        "rate": config.rate,
        "mode": config.size_model.mode,
        "base_bytes": float(config.size_model.base_bytes),
        "vru_object_bytes": float(config.size_model.vru_object_bytes),
        "cluster_object_base_bytes": float(config.size_model.cluster_object_base_bytes),
        "footprint_width": config.dims.width,
        "footprint_depth": config.dims.depth,
        "seed": config.seed,
        "containment": config.containment,
        "mvee_tolerance": config.mvee_tolerance,
        "generation": config.generation,
    }


def _nearest_native(timestamps, tick: float, half_period: float):
    """Nearest grid timestamp within half a native period, or None."""
    i = bisect_left(timestamps, tick)
    best = None
    for j in (i - 1, i):
        if 0 <= j < len(timestamps):
            d = abs(timestamps[j] - tick)
            if d <= half_period and (best is None or d < abs(timestamps[best] - tick)):
                best = j
    return timestamps[best] if best is not None else None


def evaluate_tick(frame_states, active_clusters, config: SimConfig, tick: float):
    """Fit all four shapes to every active cluster at one tick and score
    them against the frame. Returns (records, fits) where fits maps a
    cluster id to its fitted shapes, evaluations, and adaptive choice."""
    records: list[EvalRecord] = []
    fits: dict[int, dict] = {}
    by_id = {s.vru_id: s for s in frame_states}
    for cluster in active_clusters:
        member_states = [by_id[m] for m in sorted(cluster.members) if m in by_id]
        if len(member_states) != len(cluster.members):
            # Resampling can drop a member's frame at the tick boundary when
            # the rate equals the native rate; the cluster then counts as
            # inactive and its members transmit individually.
            logger.warning("cluster %d inactive at tick %.3f: member frame missing",
                           cluster.id, tick)
            continue
        corners = [c for s in member_states
                   for c in footprint_corners(s, config.dims)]
        shapes = fit_shapes(corners, mvee_tolerance=config.mvee_tolerance,
                            welzl_seed=config.seed)
        evals = evaluate_shapes(shapes, cluster.members, frame_states,
                                mode=config.size_model.mode,
                                model=config.size_model.shape_model,
                                containment=config.containment, dims=config.dims)
        chosen = select_adaptive(evals)
        for ev in evals:
            records.append(EvalRecord(
                tick=tick, cluster_id=cluster.id, n_members=ev.n_members, kind=ev.kind,
                ca=ev.ca, cadi=ev.cadi, area=ev.area, size_bits=ev.size_bits,
                chosen=(ev.kind == chosen.kind)))
        fits[cluster.id] = {"shapes": shapes, "evaluations": evals, "chosen": chosen}
    return records, fits


def run_simulation(table: TrajectoryTable, config: SimConfig) -> SimReport:
    """Run the full experiment over one trajectory table.

    Clustering runs offline over the native grid first; the table is then
    resampled to the generation rate and, per tick and policy, active
    clusters are fitted, scored, and packed into messages whose bytes are
    binned by wall-clock second. The result is deterministic for a fixed
    (table, config) pair.
    """
    validate_size_model(config.size_model)

    clusters = time_sequence_clusters(table, config.params) if table.timestamps else []
    stats = cluster_size_pdf(clusters, table)
    resampled = resample(table, config.rate)

    active_by_native: dict[float, list[Cluster]] = defaultdict(list)
    for c in clusters:
        for t in c.window:
            active_by_native[t].append(c)

    object_ids = {vid: i + 1 for i, vid in enumerate(table.vru_ids)}
    half_period = 0.5 / table.rate + 1e-12
    native_ts = list(table.timestamps)
    vru_dims = (config.dims.depth, config.dims.width, DEFAULT_VRU_HEIGHT)

    ticks = list(resampled.timestamps)
    gen_events: list[tuple[float, tuple, list[Cluster]]] = []
    for tick in ticks:
        frame = resampled.states_at(tick)
        t_star = _nearest_native(native_ts, tick, half_period)
        actives = active_by_native.get(t_star, []) if t_star is not None else []
        gen_events.append((tick, frame, actives))

    if config.generation == "on-detection":
        # A newly detected VRU triggers an extra full message at its first
        # native frame, in addition to the fixed-rate ticks.
        seen: set[str] = set()
        for t in native_ts:
            frame = table.states_at(t)
            new_ids = {s.vru_id for s in frame} - seen
            seen.update(s.vru_id for s in frame)
            if new_ids and t not in resampled.frames:
                gen_events.append((t, frame, active_by_native.get(t, [])))
        gen_events.sort(key=lambda ev: ev[0])

    sec_bytes: dict[str, dict[int, int]] = {p: defaultdict(int) for p in config.policies}
    sec_msgs: dict[str, dict[int, int]] = {p: defaultdict(int) for p in config.policies}
    evaluations: list[EvalRecord] = []
    adaptive_choices: dict[int, dict[str, int]] = defaultdict(lambda: defaultdict(int))

    for tick, frame, actives in gen_events:
        records, fits = evaluate_tick(frame, actives, config, tick)
        evaluations.extend(records)
        for rec in records:
            if rec.chosen:
                adaptive_choices[rec.n_members][rec.kind] += 1
        second = math.floor(tick)
        fitted = [c for c in actives if c.id in fits]
        for policy in config.policies:
            if policy == "no-cluster":
                pairs = []
            elif policy == "adaptive":
                pairs = [(c, fits[c.id]["chosen"].shape) for c in fitted]
            else:
                pairs = [(c, fits[c.id]["shapes"][policy]) for c in fitted]
            msgs = build_cpms(frame, pairs, generation_time=tick,
                              size_model=config.size_model, object_ids=object_ids,
                              vru_dims=vru_dims)
            sec_bytes[policy][second] += sum(m.total_bytes for m in msgs)
            sec_msgs[policy][second] += len(msgs)

    if ticks:
        lo = math.floor(ticks[0])
        hi = math.floor(ticks[-1])
        seconds = list(range(lo, hi + 1))
    else:
        seconds = []
    policy_series = {
        p: PolicySeries(seconds=list(seconds),
                       bytes=[sec_bytes[p].get(s, 0) for s in seconds],
                       messages=[sec_msgs[p].get(s, 0) for s in seconds])
        for p in config.policies
    }

    if "no-cluster" in policy_series:
        base = policy_series["no-cluster"].bytes
        for p, series in policy_series.items():
            for s, b, nb in zip(seconds, series.bytes, base):
                if b > nb:
                    raise RuntimeError(
                        f"byte monotonicity violated: policy {p!r} sent {b} B > "
                        f"no-cluster {nb} B in second {s}")

    provenance = {"config": config_to_dict(config), "dataset_hash": table.content_hash(),
                  "n_vrus": len(table.vru_ids), "n_ticks": len(ticks)}
    return SimReport(policies=policy_series, evaluations=evaluations,
                     adaptive_choices={k: dict(v) for k, v in adaptive_choices.items()},
                     cluster_stats=stats, n_clusters=len(clusters), provenance=provenance)


def summarize(report: SimReport, baseline: str = "no-cluster") -> dict:
    """Per-policy spread statistics of the bytes/s series plus the median
    reduction relative to the unclustered baseline."""
    out: dict[str, dict] = {}
    base_median = None
    if baseline in report.policies and report.policies[baseline].bytes:
        base_median = float(np.median(report.policies[baseline].bytes))
    for policy, series in sorted(report.policies.items()):
        if series.bytes:
            arr = np.asarray(series.bytes, dtype=float)
            stats = {
                "median": float(np.median(arr)),
                "q1": float(np.percentile(arr, 25)),
                "q3": float(np.percentile(arr, 75)),
                "min": float(arr.min()),
                "max": float(arr.max()),
                "total_bytes": int(arr.sum()),
                "messages": int(sum(series.messages)),
            }
        else:
            stats = {"median": 0.0, "q1": 0.0, "q3": 0.0, "min": 0.0, "max": 0.0,
                     "total_bytes": 0, "messages": 0}
        if base_median and policy != baseline:
            stats["reduction_vs_no_cluster"] = 1.0 - stats["median"] / base_median
        out[policy] = stats
    return out
