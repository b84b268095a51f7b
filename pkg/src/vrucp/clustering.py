"""Frame-level density clustering and its time-sequence aggregation with
coexistence validation and symmetric-connectivity filtering."""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np

from .errors import InvalidInputError
from .trajectory_io import TrajectoryTable


@dataclass(frozen=True)
class ClusterParams:
    """Hyperparameters: neighborhood radius `e` (m), coexistence threshold
    `r`, and the minimum group size."""

    e: float = 1.5
    r: float = 0.7
    min_pts: int = 2

    def __post_init__(self):
        if not (self.e > 0 and math.isfinite(self.e)):
            raise InvalidInputError("e must be positive")
        if not (0.0 < self.r <= 1.0):
            raise InvalidInputError("r must be in (0, 1]")
        if self.min_pts < 2:
            raise InvalidInputError("min_pts must be >= 2")


@dataclass(frozen=True)
class FrameClustering:
    """Cluster assignment for one frame: VRU id -> cluster label, where a
    cluster is labeled by its lexicographically smallest member id and
    noise points map to None."""

    timestamp: float
    assignments: Mapping[str, Optional[str]]

    def groups(self) -> dict[str, frozenset[str]]:
        by_label: dict[str, set[str]] = defaultdict(set)
        for vid, label in self.assignments.items():
            if label is not None:
                by_label[label].add(vid)
        return {label: frozenset(members) for label, members in by_label.items()}


@dataclass(frozen=True)
class Cluster:
    """A validated group over one contiguous run of grid timestamps.

    Identity is tied to the exact member set: any membership change closes
    the cluster and a successor gets a fresh id.
    """

    id: int
    members: frozenset[str]
    window: tuple[float, ...]
    coexistence: float


def dbscan_frame(states, params: ClusterParams) -> FrameClustering:
    """Density clustering of one frame's positions.

    A point is core when at least `min_pts` points (itself included) lie
    within `e`; clusters are the connected components of the graph linking
    every core point to its radius-e neighbors, and points reachable from
    no core point are noise. Labels are canonical (smallest member id), so
    the result is independent of input order.
    """
    states = list(states)
    if not states:
        raise InvalidInputError("empty frame")
    stamps = {s.timestamp for s in states}
    if len(stamps) != 1:
        raise InvalidInputError(f"mixed timestamps in one frame: {sorted(stamps)}")
    pos = np.array([[s.position.x, s.position.y] for s in states], dtype=float)
    if not np.isfinite(pos).all():
        raise InvalidInputError("non-finite positions in frame")

    n = len(states)
    d2 = np.sum((pos[:, None, :] - pos[None, :, :]) ** 2, axis=-1)
    adj = d2 <= params.e ** 2
    core = adj.sum(axis=1) >= params.min_pts

    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    def union(i, j):
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[ri] = rj

    for i in range(n):
        if core[i]:
            for j in np.nonzero(adj[i])[0]:
                union(i, int(j))

    comp_members: dict[int, list[int]] = defaultdict(list)
    for i in range(n):
        comp_members[find(i)].append(i)

    assignments: dict[str, Optional[str]] = {}
    for members in comp_members.values():
        clustered = len(members) > 1 and any(core[i] for i in members)
        label = min(states[i].vru_id for i in members) if clustered else None
        for i in members:
            assignments[states[i].vru_id] = label
    return FrameClustering(states[0].timestamp, assignments)


def symmetric_groups(candidates: Mapping[str, Optional[frozenset[str]]]) -> set[frozenset[str]]:
    """Keep only candidate groups proposed identically by every member.

    `candidates` maps each seed VRU to the member set it proposes (itself
    included), or None when the seed is unclustered. A group survives only
    when each of its members, taken as the seed, proposes the same set.
    """
    out = set()
    for group in candidates.values():
        if group and all(candidates.get(m) == group for m in group):
            out.add(group)
    return out


def coexistence_ratio(members, table: TrajectoryTable, clustered_timestamps) -> float:
    """Clustered duration over the union of the members' presence
    durations, both counted in grid timestamps of the table."""
    union: set[float] = set()
    for m in members:
        union.update(s.timestamp for s in table.states_of(m))
    if not union:
        raise InvalidInputError("members have no presence timestamps")
    return len(set(clustered_timestamps)) / len(union)


def time_sequence_clusters(table: TrajectoryTable, params: ClusterParams) -> list[Cluster]:
    """Aggregate per-frame clustering into validated clusters.

    Every VRU seeds a candidate group per frame (the group it is clustered
    with); groups must be proposed symmetrically by all members, and a
    member set is kept only when its clustered duration is at least `r`
    of the union of its members' lifetimes. The validated per-timestamp
    membership is split into contiguous runs, one `Cluster` each.
    """
    group_times: dict[frozenset[str], list[float]] = defaultdict(list)
    for t in table.timestamps:
        frame = table.states_at(t)
        fc = dbscan_frame(frame, params)
        groups = fc.groups()
        candidates = {vid: (groups[label] if label is not None else None)
                      for vid, label in fc.assignments.items()}
        for g in symmetric_groups(candidates):
            group_times[g].append(t)

    index_of = {t: i for i, t in enumerate(table.timestamps)}
    runs = []
    for g in sorted(group_times, key=lambda g: tuple(sorted(g))):
        times = sorted(group_times[g])
        ratio = coexistence_ratio(g, table, times)
        if ratio < params.r:
            continue
        run: list[float] = []
        for t in times:
            if run and index_of[t] != index_of[run[-1]] + 1:
                runs.append((run[0], g, tuple(run), ratio))
                run = []
            run.append(t)
        if run:
            runs.append((run[0], g, tuple(run), ratio))
    runs.sort(key=lambda r: (r[0], tuple(sorted(r[1]))))
    return [Cluster(i, g, window, ratio)
            for i, (_, g, window, ratio) in enumerate(runs, start=1)]


@dataclass(frozen=True)
class ClusterStats:
    """Cluster-size distribution over frames plus the unclustered shares,
    counted both per VRU-frame instance and per whole VRU lifetime."""

    pdf: dict[int, float]
    unclustered_instance_fraction: float
    unclustered_vru_fraction: float
    n_cluster_instances: int
    n_vru_instances: int


def cluster_size_pdf(clusters, table: TrajectoryTable) -> ClusterStats:
    """Per-frame cluster sizes over the whole dataset, normalized to a
    probability density (singleton VRUs are excluded from the density but
    counted in the unclustered fractions)."""
    counts: Counter[int] = Counter()
    covered_instances = 0
    clustered_vrus: set[str] = set()
    for c in clusters:
        size = len(c.members)
        counts[size] += len(c.window)
        covered_instances += size * len(c.window)
        clustered_vrus.update(c.members)

    total_cluster_instances = sum(counts.values())
    pdf = {size: counts[size] / total_cluster_instances for size in sorted(counts)} \
        if total_cluster_instances else {}
    total_vru_instances = table.n_states
    unclustered_instances = (1.0 - covered_instances / total_vru_instances) \
        if total_vru_instances else 0.0
    n_vrus = len(table.vru_ids)
    unclustered_vrus = (1.0 - len(clustered_vrus) / n_vrus) if n_vrus else 0.0
    return ClusterStats(pdf, unclustered_instances, unclustered_vrus,
                        total_cluster_instances, total_vru_instances)
