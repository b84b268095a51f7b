import pytest

from vrucp.clustering import (
    ClusterParams,
    cluster_size_pdf,
    coexistence_ratio,
    dbscan_frame,
    symmetric_groups,
    time_sequence_clusters,
)
from vrucp.errors import InvalidInputError
from vrucp.geometry import Point2D
from vrucp.trajectory_io import (
    GroupSpec,
    ScenarioSpec,
    TrajectoryTable,
    VruState,
    preset_scenario,
    synth_scenario,
)

from .oracles import closure_dbscan


def frame(positions, t=0.0):
    return [VruState(f"v{i:02d}", t, Point2D(*p), 1.0, 0.0)
            for i, p in enumerate(positions)]


def partition_of(assignments):
    clusters = {}
    noise = set()
    for vid, label in assignments.items():
        if label is None:
            noise.add(vid)
        else:
            clusters.setdefault(label, set()).add(vid)
    return set(map(frozenset, clusters.values())), noise


def oracle_partition(positions, e, min_pts):
    labels = closure_dbscan(positions, e, min_pts)
    clusters = {}
    noise = set()
    for i, lab in enumerate(labels):
        vid = f"v{i:02d}"
        if lab < 0:
            noise.add(vid)
        else:
            clusters.setdefault(lab, set()).add(vid)
    return set(map(frozenset, clusters.values())), noise


class TestDbscanFrame:
    def test_two_close_points_cluster(self):
        fc = dbscan_frame(frame([(0, 0), (1, 0)]), ClusterParams(e=1.5))
        assert fc.assignments == {"v00": "v00", "v01": "v00"}

    def test_two_far_points_noise(self):
        fc = dbscan_frame(frame([(0, 0), (10, 0)]), ClusterParams(e=1.5))
        assert fc.assignments == {"v00": None, "v01": None}

    def test_mixed_timestamps_rejected(self):
        states = frame([(0, 0)], t=0.0) + frame([(1, 0)], t=1.0)
        with pytest.raises(InvalidInputError):
            dbscan_frame(states, ClusterParams())

    def test_empty_frame_rejected(self):
        with pytest.raises(InvalidInputError):
            dbscan_frame([], ClusterParams())

    def test_label_is_smallest_member_id(self):
        states = [VruState("zz", 0.0, Point2D(0, 0), 1.0, 0.0),
                  VruState("aa", 0.0, Point2D(0.5, 0), 1.0, 0.0)]
        fc = dbscan_frame(states, ClusterParams(e=1.0))
        assert fc.assignments == {"zz": "aa", "aa": "aa"}

    def test_order_independent(self, rng):
        pts = rng.uniform(0, 6, (12, 2))
        states = frame(pts)
        fc1 = dbscan_frame(states, ClusterParams(e=1.2))
        fc2 = dbscan_frame(list(reversed(states)), ClusterParams(e=1.2))
        assert fc1.assignments == fc2.assignments

    def test_matches_closure_oracle(self, rng):
        for _ in range(120):
            n = int(rng.integers(1, 31))
            pts = rng.uniform(0, 10, (n, 2))
            e = float(rng.uniform(0.3, 3.0))
            min_pts = int(rng.integers(2, 5))
            fc = dbscan_frame(frame(pts), ClusterParams(e=e, min_pts=min_pts))
            assert partition_of(fc.assignments) == oracle_partition(pts, e, min_pts)

    def test_monotone_in_radius(self, rng):
        for _ in range(30):
            pts = rng.uniform(0, 10, (20, 2))
            e1, e2 = sorted(rng.uniform(0.2, 3.0, 2))
            p1 = dbscan_frame(frame(pts), ClusterParams(e=float(e1)))
            p2 = dbscan_frame(frame(pts), ClusterParams(e=float(e2)))
            clustered1 = sum(v is not None for v in p1.assignments.values())
            clustered2 = sum(v is not None for v in p2.assignments.values())
            assert clustered2 >= clustered1

    def test_group_size_at_least_min_pts(self, rng):
        for _ in range(20):
            pts = rng.uniform(0, 8, (25, 2))
            min_pts = int(rng.integers(2, 6))
            fc = dbscan_frame(frame(pts), ClusterParams(e=1.0, min_pts=min_pts))
            groups, _ = partition_of(fc.assignments)
            assert all(len(g) >= min_pts for g in groups)


class TestSymmetricGroups:
    def test_worked_example(self):
        ab = frozenset({"a", "b"})
        ca = frozenset({"c", "a"})
        candidates = {"a": ab, "b": ab, "c": ca}
        assert symmetric_groups(candidates) == {ab}

    def test_unclustered_seed(self):
        assert symmetric_groups({"a": None, "b": None}) == set()

    def test_full_agreement(self):
        abc = frozenset({"a", "b", "c"})
        assert symmetric_groups({"a": abc, "b": abc, "c": abc}) == {abc}


class TestCoexistenceRatio:
    def make_table(self, spans, rate=1.0):
        states = []
        for vid, (t0, t1) in spans.items():
            for k in range(int(round((t1 - t0) * rate)) + 1):
                t = t0 + k / rate
                states.append(VruState(vid, t, Point2D(0, 0), 1.0, 0.0))
        return TrajectoryTable(states, rate)

    def test_full_overlap(self):
        table = self.make_table({"a": (0, 9), "b": (0, 9)})
        assert coexistence_ratio({"a", "b"}, table, set(table.timestamps)) == 1.0

    def test_half(self):
        table = self.make_table({"a": (0, 59), "b": (0, 59)})
        clustered = set(list(table.timestamps)[:30])
        assert coexistence_ratio({"a", "b"}, table, clustered) == 0.5

    def test_staggered_lifetimes(self):
        table = self.make_table({"a": (0, 10), "b": (5, 15)})
        clustered = {float(t) for t in range(5, 11)}
        assert coexistence_ratio({"a", "b"}, table, clustered) == pytest.approx(6 / 16)

    def test_unknown_member(self):
        table = self.make_table({"a": (0, 5)})
        with pytest.raises(InvalidInputError):
            coexistence_ratio({"a", "zz"}, table, set())


class TestTimeSequenceClusters:
    def test_lockstep_group_clusters_fully(self):
        table = synth_scenario(preset_scenario("lockstep", seed=3))
        clusters = time_sequence_clusters(table, ClusterParams(e=1.5, r=0.7))
        assert len(clusters) == 1
        (c,) = clusters
        assert len(c.members) == 3
        assert c.coexistence == 1.0
        assert len(c.window) == len(table.timestamps)

    def test_distant_walkers_never_cluster(self):
        table = synth_scenario(preset_scenario("two-walkers", seed=5))
        clusters = time_sequence_clusters(table, ClusterParams())
        assert clusters == []

    def test_every_cluster_obeys_thresholds(self):
        table = synth_scenario(preset_scenario("crowd", seed=1, duration=20.0))
        params = ClusterParams(e=1.5, r=0.7, min_pts=2)
        clusters = time_sequence_clusters(table, params)
        assert clusters
        for c in clusters:
            assert len(c.members) >= params.min_pts
            assert c.coexistence >= params.r

    def test_symmetry_replay(self):
        table = synth_scenario(preset_scenario("crowd", seed=2, duration=10.0))
        params = ClusterParams()
        clusters = time_sequence_clusters(table, params)
        assert clusters
        for c in clusters:
            for t in c.window:
                fc = dbscan_frame(table.states_at(t), params)
                groups = fc.groups()
                for member in c.members:
                    assert groups[fc.assignments[member]] == c.members

    def test_membership_change_opens_new_id(self):
        # b walks with a for 10 s, then meets c instead
        states = []
        rate = 1.0
        for k in range(21):
            t = float(k)
            states.append(VruState("a", t, Point2D(0.0, 0.0 if t <= 10 else 50.0), 1.0, 0.0))
            states.append(VruState("b", t, Point2D(0.5, 0.0), 1.0, 0.0))
            states.append(VruState("c", t, Point2D(1.0, 0.0 if t > 10 else 50.0), 1.0, 0.0))
        table = TrajectoryTable(states, rate)
        clusters = time_sequence_clusters(table, ClusterParams(e=1.2, r=0.3))
        member_sets = {c.members for c in clusters}
        assert frozenset({"a", "b"}) in member_sets
        assert frozenset({"b", "c"}) in member_sets
        ids = [c.id for c in clusters]
        assert len(set(ids)) == len(ids)

    def test_windows_are_contiguous_runs(self):
        table = synth_scenario(preset_scenario("crowd", seed=4, duration=10.0))
        clusters = time_sequence_clusters(table, ClusterParams())
        index = {t: i for i, t in enumerate(table.timestamps)}
        for c in clusters:
            idxs = [index[t] for t in c.window]
            assert idxs == list(range(idxs[0], idxs[-1] + 1))


class TestClusterSizePdf:
    def test_single_permanent_cluster(self):
        table = synth_scenario(preset_scenario("lockstep", seed=0))
        clusters = time_sequence_clusters(table, ClusterParams())
        stats = cluster_size_pdf(clusters, table)
        assert stats.pdf == {3: 1.0}
        assert stats.unclustered_instance_fraction == 0.0
        assert stats.unclustered_vru_fraction == 0.0

    def test_pair_plus_loner(self):
        spec = ScenarioSpec(duration=30.0, frame_rate=5.0, seed=0,
                            groups=(GroupSpec(size=2, spacing=0.5),
                                    GroupSpec(size=1, spacing=0.5, start=(0.0, 80.0))))
        table = synth_scenario(spec)
        clusters = time_sequence_clusters(table, ClusterParams())
        stats = cluster_size_pdf(clusters, table)
        assert stats.pdf == {2: 1.0}
        assert stats.unclustered_instance_fraction == pytest.approx(1 / 3)
        assert stats.unclustered_vru_fraction == pytest.approx(1 / 3)

    def test_pdf_sums_to_one(self):
        table = synth_scenario(preset_scenario("crowd", seed=9, duration=15.0))
        clusters = time_sequence_clusters(table, ClusterParams())
        stats = cluster_size_pdf(clusters, table)
        assert stats.pdf
        assert sum(stats.pdf.values()) == pytest.approx(1.0, abs=1e-12)
        assert 0.0 <= stats.unclustered_instance_fraction <= 1.0
        assert 0.0 <= stats.unclustered_vru_fraction <= 1.0

    def test_empty_clusters(self):
        table = synth_scenario(preset_scenario("two-walkers", seed=1))
        stats = cluster_size_pdf([], table)
        assert stats.pdf == {}
        assert stats.unclustered_instance_fraction == 1.0
        assert stats.unclustered_vru_fraction == 1.0


class TestClusterParams:
    def test_validation(self):
        with pytest.raises(InvalidInputError):
            ClusterParams(e=0.0)
        with pytest.raises(InvalidInputError):
            ClusterParams(r=0.0)
        with pytest.raises(InvalidInputError):
            ClusterParams(r=1.5)
        with pytest.raises(InvalidInputError):
            ClusterParams(min_pts=1)
