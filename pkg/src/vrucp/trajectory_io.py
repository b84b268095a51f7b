"""Trajectory ingest (DUT-style CSV), resampling to the broadcast grid, and
deterministic synthetic scenarios for testing."""

from __future__ import annotations

import bisect
import csv
import hashlib
import io
import json
import logging
import math
import os
from dataclasses import dataclass

import numpy as np

from .errors import DataError, InvalidInputError, SchemaError
from .geometry import Point2D

logger = logging.getLogger(__name__)

REQUIRED_COLUMNS = ("vru_id", "x", "y", "speed")
TIME_COLUMNS = ("time", "frame")


@dataclass(frozen=True)
class VruState:
    """One timestamped observation of a VRU."""

    vru_id: str
    timestamp: float
    position: Point2D
    speed: float
    heading: float

    def velocity(self) -> tuple[float, float]:
        return (self.speed * math.cos(self.heading), self.speed * math.sin(self.heading))


class TrajectoryTable:
    """Immutable collection of VRU states, grouped per VRU and per frame.

    `frames` maps a grid timestamp to the states observed there; for a
    loaded or synthetic table the grid is the native one, for a resampled
    table it is the output tick grid (states keep their original stamps).
    """

    def __init__(self, states, rate: float, derived_heading_ids=(), frames=None):
        if not (rate > 0 and math.isfinite(rate)):
            raise InvalidInputError("frame rate must be positive and finite")
        by_vru: dict[str, list[VruState]] = {}
        for s in states:
            by_vru.setdefault(s.vru_id, []).append(s)
        bad = []
        for vid, ss in by_vru.items():
            ss.sort(key=lambda s: s.timestamp)
            if any(b.timestamp <= a.timestamp for a, b in zip(ss, ss[1:])):
                bad.append(vid)
        if bad:
            raise DataError(f"non-increasing timestamps for VRU ids: {sorted(bad)}")
        self._by_vru = {vid: tuple(ss) for vid, ss in sorted(by_vru.items())}
        if frames is None:
            grouped: dict[float, list[VruState]] = {}
            for ss in self._by_vru.values():
                for s in ss:
                    grouped.setdefault(s.timestamp, []).append(s)
            frames = {t: tuple(sorted(ss, key=lambda s: s.vru_id)) for t, ss in grouped.items()}
        self.frames: dict[float, tuple[VruState, ...]] = dict(sorted(frames.items()))
        self.timestamps: tuple[float, ...] = tuple(self.frames)
        self.rate = float(rate)
        self.derived_heading_ids = frozenset(derived_heading_ids)

    @property
    def vru_ids(self) -> tuple[str, ...]:
        return tuple(self._by_vru)

    @property
    def n_states(self) -> int:
        return sum(len(ss) for ss in self._by_vru.values())

    def states_of(self, vru_id: str) -> tuple[VruState, ...]:
        try:
            return self._by_vru[vru_id]
        except KeyError:
            raise InvalidInputError(f"unknown VRU id: {vru_id!r}") from None

    def states_at(self, timestamp: float) -> tuple[VruState, ...]:
        return self.frames.get(timestamp, ())

    def all_states(self) -> list[VruState]:
        return [s for ss in self._by_vru.values() for s in ss]

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["vru_id", "time", "x", "y", "speed", "heading"])
        for vid in self.vru_ids:
            for s in self._by_vru[vid]:
                w.writerow([s.vru_id, repr(s.timestamp), repr(s.position.x), repr(s.position.y),
                            repr(s.speed), repr(s.heading)])
        return buf.getvalue()

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.to_csv_text())

    def content_hash(self) -> str:
        """SHA-256 over the canonical CSV serialization; embedded in every
        report so downstream consumers can reject mismatched inputs."""
        return hashlib.sha256(self.to_csv_text().encode("utf-8")).hexdigest()


def _load_sidecar(path, sidecar):
    if sidecar is not None:
        with open(sidecar, "r", encoding="utf-8") as fh:
            return json.load(fh)
    default = str(path) + ".meta.json"
    if os.path.exists(default):
        with open(default, "r", encoding="utf-8") as fh:
            return json.load(fh)
    return {}


def load_trajectories(path, fmt: str = "dut-csv", sidecar=None) -> TrajectoryTable:
    """Load a DUT-style trajectory CSV into a validated table.

    The header declares the column order; an optional JSON sidecar
    (`<path>.meta.json` or explicit `sidecar=`) remaps column names and
    declares units: `position_scale` (m per unit), `heading` ("radians" or
    "degrees"), `speed_scale`, `time_scale`, and `frame_rate` (required
    when the time column is a frame index). Headings absent from the file
    are derived from consecutive positions and flagged.
    """
    if fmt != "dut-csv":
        raise InvalidInputError(f"unsupported trajectory format: {fmt!r}")
    meta = _load_sidecar(path, sidecar)
    colmap = dict(meta.get("columns", {}))
    units = dict(meta.get("units", {}))

    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file, expected a header row") from None
        header = [h.strip() for h in header]
        idx = {}
        for canonical in REQUIRED_COLUMNS + TIME_COLUMNS + ("heading",):
            name = colmap.get(canonical, canonical)
            if name in header:
                idx[canonical] = header.index(name)
        missing = [c for c in REQUIRED_COLUMNS if c not in idx]
        time_col = next((c for c in TIME_COLUMNS if c in idx), None)
        if time_col is None:
            missing.append("time|frame")
        if missing:
            raise SchemaError(f"{path}: missing required columns: {missing} (header: {header})")

        frame_rate = units.get("frame_rate")
        if time_col == "frame" and not frame_rate:
            raise SchemaError(f"{path}: frame-indexed time column requires 'frame_rate' in the sidecar units")
        pos_scale = float(units.get("position_scale", 1.0))
        speed_scale = float(units.get("speed_scale", 1.0))
        time_scale = float(units.get("time_scale", 1.0))
        heading_unit = units.get("heading", "radians")
        if heading_unit not in ("radians", "degrees"):
            raise SchemaError(f"{path}: unknown heading unit {heading_unit!r}")

        rows = []
        bad_rows = []
        for row_no, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            try:
                vid = row[idx["vru_id"]].strip()
                if not vid:
                    raise ValueError("empty vru_id")
                raw_t = float(row[idx[time_col]])
                x = float(row[idx["x"]]) * pos_scale
                y = float(row[idx["y"]]) * pos_scale
                speed = float(row[idx["speed"]]) * speed_scale
                heading = None
                if "heading" in idx and row[idx["heading"]].strip() != "":
                    heading = float(row[idx["heading"]])
                    if heading_unit == "degrees":
                        heading = math.radians(heading)
                t = raw_t / float(frame_rate) if time_col == "frame" else raw_t * time_scale
                values = [t, x, y, speed] + ([heading] if heading is not None else [])
                if not all(math.isfinite(v) for v in values):
                    raise ValueError("non-finite value")
            except (ValueError, IndexError) as exc:
                bad_rows.append(f"row {row_no}: {exc}")
                continue
            rows.append((vid, t, x, y, speed, heading))
        if bad_rows:
            shown = "; ".join(bad_rows[:20])
            more = f" (+{len(bad_rows) - 20} more)" if len(bad_rows) > 20 else ""
            raise DataError(f"{path}: {len(bad_rows)} malformed rows: {shown}{more}")

    derived_ids = set()
    by_vru: dict[str, list] = {}
    for r in rows:
        by_vru.setdefault(r[0], []).append(r)
    states = []
    for vid, rs in by_vru.items():
        rs.sort(key=lambda r: r[1])
        if any(r[5] is None for r in rs):
            derived_ids.add(vid)
        for i, (vid_, t, x, y, speed, heading) in enumerate(rs):
            if heading is None:
                heading = _derived_heading(rs, i)
            states.append(VruState(vid_, t, Point2D(x, y), speed, heading))
    if derived_ids:
        logger.warning("derived headings from position differences for %d VRUs: %s",
                       len(derived_ids), sorted(derived_ids))

    if frame_rate:
        rate = float(frame_rate)
    else:
        rate = _estimate_rate(states)
    return TrajectoryTable(states, rate, derived_heading_ids=derived_ids)


def _derived_heading(rows, i) -> float:
    # finite difference toward the next sample; last sample reuses the previous segment
    if len(rows) == 1:
        return 0.0
    j = i if i + 1 < len(rows) else i - 1
    _, t0, x0, y0, _, _ = rows[j]
    _, t1, x1, y1, _, _ = rows[j + 1]
    if x1 == x0 and y1 == y0:
        return 0.0
    return math.atan2(y1 - y0, x1 - x0)


def _estimate_rate(states) -> float:
    ts = sorted({s.timestamp for s in states})
    if len(ts) < 2:
        return 1.0
    diffs = np.diff(np.asarray(ts))
    med = float(np.median(diffs))
    return 1.0 / med if med > 0 else 1.0


def resample(table: TrajectoryTable, rate: float) -> TrajectoryTable:
    """Pick, for each output tick, every VRU's nearest native frame within
    half a native frame period. No interpolation: every output state exists
    verbatim in the input; VRUs with no frame near a tick are omitted there.
    """
    if not (rate > 0 and math.isfinite(rate)):
        raise InvalidInputError("resample rate must be positive")
    if rate > table.rate + 1e-9:
        raise InvalidInputError(f"resample rate {rate} Hz exceeds native rate {table.rate} Hz")
    if not table.timestamps:
        return TrajectoryTable([], rate, derived_heading_ids=table.derived_heading_ids, frames={})

    t0, t1 = table.timestamps[0], table.timestamps[-1]
    n_ticks = int(math.floor((t1 - t0) * rate + 1e-9)) + 1
    ticks = [t0 + k / rate for k in range(n_ticks)]
    half_period = 0.5 / table.rate + 1e-12

    per_vru_ts = {vid: [s.timestamp for s in table.states_of(vid)] for vid in table.vru_ids}
    frames: dict[float, tuple[VruState, ...]] = {}
    selected: list[VruState] = []
    last_pick: dict[str, float] = {}
    for tick in ticks:
        chosen = []
        for vid, ts in per_vru_ts.items():
            i = bisect.bisect_left(ts, tick)
            best = None
            for j in (i - 1, i):
                if 0 <= j < len(ts):
                    d = abs(ts[j] - tick)
                    if d <= half_period and (best is None or d < abs(ts[best] - tick)):
                        best = j
            if best is None:
                continue
            t_sel = ts[best]
            if last_pick.get(vid) == t_sel:
                continue  # a native frame feeds at most one tick
            last_pick[vid] = t_sel
            chosen.append(table.states_of(vid)[best])
        if chosen:
            chosen.sort(key=lambda s: s.vru_id)
            frames[tick] = tuple(chosen)
            selected.extend(chosen)
    return TrajectoryTable(selected, rate, derived_heading_ids=table.derived_heading_ids,
                           frames=frames)


@dataclass(frozen=True)
class GroupSpec:
    """A lockstep group: `size` members in a row perpendicular to the
    shared heading, adjacent members `spacing` meters apart."""

    size: int
    spacing: float
    speed: float = 1.3
    heading: float = 0.0
    start: tuple[float, float] = (0.0, 0.0)
    start_time: float = 0.0
    duration: float | None = None


@dataclass(frozen=True)
class WalkerSpec:
    """An independent walker with a seeded random-walk heading jitter."""

    start: tuple[float, float]
    speed: float = 1.3
    heading: float = 0.0
    start_time: float = 0.0
    duration: float | None = None
    wander: float = 0.05


@dataclass(frozen=True)
class ScenarioSpec:
    duration: float = 60.0
    frame_rate: float = 10.0
    groups: tuple[GroupSpec, ...] = ()
    walkers: tuple[WalkerSpec, ...] = ()
    seed: int = 0


def synth_scenario(spec: ScenarioSpec) -> TrajectoryTable:
    """Deterministic synthetic trajectories from a scenario description.

    Group members move in exact lockstep; walkers follow seeded
    heading-jitter walks. The same spec (and seed) always yields a
    bit-identical table.
    """
    if spec.duration <= 0 or spec.frame_rate <= 0:
        raise InvalidInputError("scenario duration and frame_rate must be positive")
    for g in spec.groups:
        if g.size < 1 or g.spacing <= 0 or g.speed < 0:
            raise InvalidInputError(f"infeasible group spec: {g}")
    for w in spec.walkers:
        if w.speed < 0 or w.wander < 0:
            raise InvalidInputError(f"infeasible walker spec: {w}")

    rate = spec.frame_rate
    states: list[VruState] = []

    def frame_span(start_time, duration):
        dur = spec.duration if duration is None else duration
        k0 = round(start_time * rate)
        k1 = round((start_time + dur) * rate)
        return k0, k1

    for gi, g in enumerate(spec.groups):
        k0, k1 = frame_span(g.start_time, g.duration)
        c, s = math.cos(g.heading), math.sin(g.heading)
        nx, ny = -s, c
        for mj in range(g.size):
            off = (mj - (g.size - 1) / 2.0) * g.spacing
            vid = f"g{gi:02d}m{mj:02d}"
            for k in range(k0, k1 + 1):
                t = k / rate
                adv = g.speed * (t - g.start_time)
                x = g.start[0] + adv * c + off * nx
                y = g.start[1] + adv * s + off * ny
                states.append(VruState(vid, t, Point2D(x, y), g.speed, g.heading))

    for wi, w in enumerate(spec.walkers):
        rng = np.random.default_rng([spec.seed, 1000 + wi])
        k0, k1 = frame_span(w.start_time, w.duration)
        n = k1 - k0 + 1
        jitter = np.cumsum(rng.standard_normal(n)) * w.wander if n > 0 else np.zeros(0)
        vid = f"w{wi:02d}"
        x, y = float(w.start[0]), float(w.start[1])
        for step, k in enumerate(range(k0, k1 + 1)):
            t = k / rate
            h = w.heading + float(jitter[step])
            states.append(VruState(vid, t, Point2D(x, y), w.speed, h))
            x += (w.speed / rate) * math.cos(h)
            y += (w.speed / rate) * math.sin(h)

    return TrajectoryTable(states, rate)


def preset_scenario(name: str, seed: int = 0, duration: float | None = None) -> ScenarioSpec:
    """Built-in scenario presets used by the CLI and the test suite."""
    if name == "lockstep":
        dur = duration or 60.0
        return ScenarioSpec(duration=dur, frame_rate=10.0, seed=seed,
                            groups=(GroupSpec(size=3, spacing=0.5),))
    if name == "two-walkers":
        dur = duration or 30.0
        return ScenarioSpec(duration=dur, frame_rate=10.0, seed=seed,
                            walkers=(WalkerSpec(start=(0.0, 0.0)),
                                     WalkerSpec(start=(0.0, 50.0))))
    if name == "crowd":
        # Six parallel lanes of lockstep groups plus two distant walkers:
        # mean cluster size 20/6 >= 3, singleton share 2/22 <= 30%.
        dur = duration or 60.0
        sizes = (3, 4, 3, 4, 3, 3)
        speeds = (1.15, 1.3, 1.25, 1.4, 1.2, 1.35)
        groups = tuple(
            GroupSpec(size=sz, spacing=0.5, speed=sp, heading=0.0,
                      start=(5.0 * i, 25.0 * i))
            for i, (sz, sp) in enumerate(zip(sizes, speeds))
        )
        walkers = (WalkerSpec(start=(0.0, -60.0), heading=0.0),
                   WalkerSpec(start=(40.0, 200.0), heading=0.0))
        return ScenarioSpec(duration=dur, frame_rate=10.0, seed=seed,
                            groups=groups, walkers=walkers)
    raise InvalidInputError(f"unknown scenario preset: {name!r}")
