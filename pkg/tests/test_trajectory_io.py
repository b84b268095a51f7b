import json
import math

import pytest

from vrucp.errors import DataError, InvalidInputError, SchemaError
from vrucp.geometry import Point2D
from vrucp.trajectory_io import (
    GroupSpec,
    ScenarioSpec,
    TrajectoryTable,
    VruState,
    WalkerSpec,
    load_trajectories,
    preset_scenario,
    resample,
    synth_scenario,
)


def write(tmp_path, text, name="traj.csv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


HEADER = "vru_id,time,x,y,speed,heading\n"


class TestLoader:
    def test_two_row_file(self, tmp_path):
        path = write(tmp_path, HEADER + "p1,0.0,1.0,2.0,1.2,0.0\np1,0.5,1.5,2.0,1.2,0.0\n")
        table = load_trajectories(path)
        assert table.vru_ids == ("p1",)
        assert table.n_states == 2
        assert table.states_of("p1")[0].position == Point2D(1.0, 2.0)
        assert table.rate == pytest.approx(2.0)

    def test_nan_coordinate_names_row(self, tmp_path):
        path = write(tmp_path, HEADER + "p1,0.0,1.0,2.0,1.2,0.0\np1,0.5,nan,2.0,1.2,0.0\n")
        with pytest.raises(DataError) as err:
            load_trajectories(path)
        assert "row 3" in str(err.value)

    def test_missing_column_is_schema_error(self, tmp_path):
        path = write(tmp_path, "vru_id,time,x,speed\np1,0.0,1.0,1.2\n")
        with pytest.raises(SchemaError) as err:
            load_trajectories(path)
        assert "y" in str(err.value)

    def test_missing_time_column(self, tmp_path):
        path = write(tmp_path, "vru_id,x,y,speed\np1,1.0,2.0,1.2\n")
        with pytest.raises(SchemaError):
            load_trajectories(path)

    def test_duplicate_timestamp_names_vru(self, tmp_path):
        path = write(tmp_path, HEADER + "p7,0.0,1.0,2.0,1.2,0.0\np7,0.0,1.5,2.0,1.2,0.0\n")
        with pytest.raises(DataError) as err:
            load_trajectories(path)
        assert "p7" in str(err.value)

    def test_round_trip_identity(self, tmp_path):
        table = synth_scenario(preset_scenario("crowd", seed=3, duration=5.0))
        path = tmp_path / "export.csv"
        table.save(path)
        again = load_trajectories(path)
        assert again.vru_ids == table.vru_ids
        assert again.all_states() == table.all_states()
        assert again.content_hash() == table.content_hash()

    def test_sidecar_column_mapping_and_units(self, tmp_path):
        path = write(tmp_path, "id,frame,px,py,v,deg\nw1,0,100.0,200.0,1.0,90.0\n"
                               "w1,12,112.0,200.0,1.0,90.0\n")
        sidecar = tmp_path / "traj.csv.meta.json"
        sidecar.write_text(json.dumps({
            "columns": {"vru_id": "id", "frame": "frame", "x": "px", "y": "py",
                        "speed": "v", "heading": "deg"},
            "units": {"frame_rate": 23.98, "position_scale": 0.1, "heading": "degrees"},
        }))
        table = load_trajectories(path)
        s0, s1 = table.states_of("w1")
        assert s0.position == pytest.approx((10.0, 20.0))
        assert s0.heading == pytest.approx(math.pi / 2)
        assert s1.timestamp == pytest.approx(12 / 23.98)
        assert table.rate == pytest.approx(23.98)

    def test_frame_column_without_rate_rejected(self, tmp_path):
        path = write(tmp_path, "vru_id,frame,x,y,speed\np1,0,1.0,2.0,1.2\n")
        with pytest.raises(SchemaError):
            load_trajectories(path)

    def test_heading_derived_when_absent(self, tmp_path, caplog):
        path = write(tmp_path, "vru_id,time,x,y,speed\n"
                               "p1,0.0,0.0,0.0,1.0\np1,1.0,0.0,1.0,1.0\n")
        table = load_trajectories(path)
        assert table.derived_heading_ids == {"p1"}
        s0, s1 = table.states_of("p1")
        assert s0.heading == pytest.approx(math.pi / 2)
        assert s1.heading == pytest.approx(math.pi / 2)

    def test_unknown_format_rejected(self, tmp_path):
        path = write(tmp_path, HEADER)
        with pytest.raises(InvalidInputError):
            load_trajectories(path, fmt="rosbag")


class TestResample:
    def test_identity_at_native_rate(self):
        table = synth_scenario(preset_scenario("lockstep", seed=0, duration=5.0))
        out = resample(table, table.rate)
        assert out.all_states() == table.all_states()

    def test_downsample_ratio(self):
        spec = ScenarioSpec(duration=10.0, frame_rate=23.98, seed=0,
                            groups=(GroupSpec(size=1, spacing=0.5),))
        table = synth_scenario(spec)
        out = resample(table, 2.0)
        kept = out.n_states / table.n_states
        assert kept == pytest.approx(2.0 / 23.98, rel=0.06)

    def test_never_invents_states(self):
        table = synth_scenario(preset_scenario("crowd", seed=5, duration=8.0))
        out = resample(table, 2.0)
        originals = set(table.all_states())
        assert all(s in originals for s in out.all_states())

    def test_single_frame_vru_survives(self):
        states = [VruState("solo", 4.2, Point2D(0, 0), 1.0, 0.0)]
        table = TrajectoryTable(states, rate=10.0)
        out = resample(table, 2.0)
        assert out.all_states() == states

    def test_absent_vrus_omitted_per_tick(self):
        states = [VruState("a", float(k), Point2D(0, 0), 1.0, 0.0) for k in range(11)]
        states += [VruState("b", float(k), Point2D(5, 5), 1.0, 0.0) for k in range(5, 11)]
        table = TrajectoryTable(states, rate=1.0)
        out = resample(table, 0.5)
        for tick, frame in out.frames.items():
            ids = {s.vru_id for s in frame}
            assert ("b" in ids) == (tick >= 5.0)

    def test_rate_above_native_rejected(self):
        table = synth_scenario(preset_scenario("lockstep", seed=0, duration=2.0))
        with pytest.raises(InvalidInputError):
            resample(table, table.rate * 2)

    def test_empty_table(self):
        table = TrajectoryTable([], rate=10.0)
        out = resample(table, 2.0)
        assert out.n_states == 0
        assert out.timestamps == ()


class TestSynthScenario:
    def test_same_seed_identical(self):
        a = synth_scenario(preset_scenario("crowd", seed=11, duration=4.0))
        b = synth_scenario(preset_scenario("crowd", seed=11, duration=4.0))
        assert a.all_states() == b.all_states()
        assert a.content_hash() == b.content_hash()

    def test_different_seed_differs(self):
        a = synth_scenario(preset_scenario("crowd", seed=1, duration=4.0))
        b = synth_scenario(preset_scenario("crowd", seed=2, duration=4.0))
        assert a.content_hash() != b.content_hash()

    def test_negative_spacing_rejected(self):
        spec = ScenarioSpec(groups=(GroupSpec(size=2, spacing=-0.5),))
        with pytest.raises(InvalidInputError):
            synth_scenario(spec)

    def test_group_spacing_is_exact(self):
        spec = ScenarioSpec(duration=1.0, frame_rate=10.0,
                            groups=(GroupSpec(size=3, spacing=0.5),))
        table = synth_scenario(spec)
        frame = table.states_at(table.timestamps[0])
        ys = sorted(s.position.y for s in frame)
        assert ys[1] - ys[0] == pytest.approx(0.5)
        assert ys[2] - ys[1] == pytest.approx(0.5)

    def test_lockstep_moves_in_lockstep(self):
        table = synth_scenario(preset_scenario("lockstep", seed=0, duration=3.0))
        for t in table.timestamps:
            xs = {round(s.position.x, 9) for s in table.states_at(t)}
            assert len(xs) == 1  # same advance along the heading

    def test_timestamps_on_shared_grid(self):
        spec = ScenarioSpec(duration=5.0, frame_rate=10.0, seed=0,
                            groups=(GroupSpec(size=2, spacing=0.5),),
                            walkers=(WalkerSpec(start=(50, 50), start_time=1.3),))
        table = synth_scenario(spec)
        for t in table.timestamps:
            assert round(t * 10) == pytest.approx(t * 10, abs=1e-9)


class TestTableInvariants:
    def test_non_monotonic_rejected(self):
        states = [VruState("a", 1.0, Point2D(0, 0), 1.0, 0.0),
                  VruState("a", 1.0, Point2D(1, 1), 1.0, 0.0)]
        with pytest.raises(DataError):
            TrajectoryTable(states, rate=1.0)

    def test_bad_rate_rejected(self):
        with pytest.raises(InvalidInputError):
            TrajectoryTable([], rate=0.0)

    def test_frames_sorted_by_vru(self):
        states = [VruState("b", 0.0, Point2D(1, 0), 1.0, 0.0),
                  VruState("a", 0.0, Point2D(0, 0), 1.0, 0.0)]
        table = TrajectoryTable(states, rate=1.0)
        assert [s.vru_id for s in table.states_at(0.0)] == ["a", "b"]

    def test_content_hash_tracks_content(self):
        t1 = TrajectoryTable([VruState("a", 0.0, Point2D(0, 0), 1.0, 0.0)], rate=1.0)
        t2 = TrajectoryTable([VruState("a", 0.0, Point2D(0, 1), 1.0, 0.0)], rate=1.0)
        assert t1.content_hash() != t2.content_hash()
