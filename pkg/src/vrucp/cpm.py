"""Collective-perception message assembly and byte accounting."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .errors import ConfigError, InvalidInputError
from .geometry import ClusterShape, shape_centroid, shape_orientation, shape_to_dict
from .metrics import MODES, ShapeSizeModel, shape_size_bytes

MAX_OBJECTS_PER_MESSAGE = 255
DELTA_TIME_RANGE_MS = (-2048, 2047)
DEFAULT_VRU_HEIGHT = 1.8

STANDARD_CONTAINERS = ("message_header", "management", "originating_rsu", "sensor_information")

# Worst-case hull vertex count contributed by one member's rectangular footprint.
_CORNERS_PER_MEMBER = 4


@dataclass(frozen=True)
class CpmSizeModel:
    """Byte model for one message: fixed container overhead plus per-object
    costs. The container constants are configurable defaults, echoed into
    every report."""

    base_bytes: Fraction = Fraction(60)
    vru_object_bytes: Fraction = Fraction(35)
    cluster_object_base_bytes: Fraction = Fraction(29)
    shape_model: ShapeSizeModel = field(default_factory=ShapeSizeModel)
    mode: str = "compulsory"

    def __post_init__(self):
        for name in ("base_bytes", "vru_object_bytes", "cluster_object_base_bytes"):
            value = Fraction(getattr(self, name))
            if value <= 0:
                raise InvalidInputError(f"{name} must be positive")
            object.__setattr__(self, name, value)
        if self.mode not in MODES:
            raise InvalidInputError(f"unknown size mode {self.mode!r}")


def validate_size_model(model: CpmSizeModel) -> None:
    """Check that a cluster object can never cost more than the individual
    objects it replaces, so clustered traffic is bounded by unclustered
    traffic frame by frame.

    A cluster of k >= 2 members yields a hull of at most 4k vertices, so it
    suffices that (a) the worst two-member cluster object (+1 B for the
    per-message ceiling) costs at most two individual objects and (b) each
    further member's four hull vertices cost at most one individual object.
    Raises ConfigError listing the violating constants.
    """
    sm = model.shape_model
    mode = model.mode
    if mode == "full":
        fixed = (sm.circle_full, sm.ellipse_full, sm.rectangle_full)
        per_point = sm.polygon_full_per_point
    else:
        fixed = (sm.circle_compulsory, sm.ellipse_compulsory, sm.rectangle_compulsory)
        per_point = sm.polygon_compulsory_per_point
    worst_two_member = max(max(fixed), sm.polygon_bytes(2 * _CORNERS_PER_MEMBER, mode))
    lhs = model.cluster_object_base_bytes + worst_two_member + 1
    rhs = 2 * model.vru_object_bytes
    if lhs > rhs:
        raise ConfigError(
            "size model violates the clustering byte inequality: "
            f"cluster_object_base_bytes ({model.cluster_object_base_bytes}) + worst 2-member "
            f"shape ({worst_two_member}) + 1 = {lhs} B exceeds 2 x vru_object_bytes = {rhs} B "
            f"in mode {mode!r}"
        )
    marginal = _CORNERS_PER_MEMBER * per_point
    if marginal > model.vru_object_bytes:
        raise ConfigError(
            "size model violates the clustering byte inequality: "
            f"{_CORNERS_PER_MEMBER} polygon vertices cost {marginal} B per extra member, "
            f"exceeding vru_object_bytes = {model.vru_object_bytes} B in mode {mode!r}"
        )


@dataclass(frozen=True)
class PerceivedObject:
    """One entry of the perceived-object container: an individual VRU or a
    whole VRU cluster."""

    kind: str  # "vru" | "vru_cluster"
    object_id: int
    position: tuple[float, float]
    velocity: tuple[float, float]
    angles: tuple[float, float, float]
    measurement_delta_time: int
    dimensions: Optional[tuple[float, float, float]] = None
    cluster_shape: Optional[ClusterShape] = None
    cardinality: Optional[int] = None

    def __post_init__(self):
        lo, hi = DELTA_TIME_RANGE_MS
        if not lo <= self.measurement_delta_time <= hi:
            raise InvalidInputError("measurement_delta_time out of range")
        if self.kind == "vru":
            if self.dimensions is None:
                raise InvalidInputError("individual VRU objects carry dimensions")
        elif self.kind == "vru_cluster":
            if self.cluster_shape is None or self.cardinality is None:
                raise InvalidInputError("cluster objects carry a shape and a cardinality")
            if self.cardinality < 2:
                raise InvalidInputError("cluster cardinality must be >= 2")
        else:
            raise InvalidInputError(f"unknown perceived-object kind {self.kind!r}")

    def to_dict(self) -> dict:
        out = {
            "class": "vruCluster" if self.kind == "vru_cluster" else "vru",
            "objectId": self.object_id,
            "position": {"x": self.position[0], "y": self.position[1]},
            "velocity": {"x": self.velocity[0], "y": self.velocity[1]},
            "angles": {"x": self.angles[0], "y": self.angles[1], "z": self.angles[2]},
            "measurementDeltaTime": self.measurement_delta_time,
        }
        if self.kind == "vru":
            out["dimensions"] = {"x": self.dimensions[0], "y": self.dimensions[1],
                                 "z": self.dimensions[2]}
        else:
            out["clusterShape"] = shape_to_dict(self.cluster_shape)
            out["cardinality"] = self.cardinality
        return out


@dataclass(frozen=True)
class CpmMessage:
    """Descriptor of one message: the standard containers plus up to 255
    perceived objects, with its accounted total size."""

    generation_time: float
    objects: tuple[PerceivedObject, ...]
    total_bytes: int
    containers: tuple[str, ...] = STANDARD_CONTAINERS

    def __post_init__(self):
        if len(self.objects) > MAX_OBJECTS_PER_MESSAGE:
            raise InvalidInputError(f"message exceeds {MAX_OBJECTS_PER_MESSAGE} objects")
        ids = [o.object_id for o in self.objects]
        if len(set(ids)) != len(ids):
            raise InvalidInputError("object ids must be unique within a message")

    def to_dict(self) -> dict:
        return {
            "generationTime": self.generation_time,
            "containers": list(self.containers),
            "perceivedObjects": [o.to_dict() for o in self.objects],
            "totalBytes": self.total_bytes,
        }


def object_size_bytes(obj: PerceivedObject, model: CpmSizeModel) -> Fraction:
    if obj.kind == "vru":
        return model.vru_object_bytes
    return model.cluster_object_base_bytes + shape_size_bytes(obj.cluster_shape, model.mode,
                                                              model.shape_model)


def _objects_size_bytes(objects, model: CpmSizeModel) -> int:
    total = model.base_bytes + sum((object_size_bytes(o, model) for o in objects), Fraction(0))
    return math.ceil(total)


def cpm_size_bytes(msg: CpmMessage, model: CpmSizeModel) -> int:
    """Total message size: container base plus all object costs, fractional
    contributions summed exactly and rounded up once per message."""
    return _objects_size_bytes(msg.objects, model)


def _delta_ms(state_time: float, generation_time: float) -> int:
    lo, hi = DELTA_TIME_RANGE_MS
    return max(lo, min(hi, round((state_time - generation_time) * 1000.0)))


def build_cpms(frame_states, clusters_with_shapes, *, generation_time: float,
               size_model: CpmSizeModel, object_ids=None,
               vru_dims: tuple[float, float, float] = (0.3, 0.5, DEFAULT_VRU_HEIGHT),
               max_objects: int = MAX_OBJECTS_PER_MESSAGE) -> list[CpmMessage]:
    """Assemble the messages for one generation tick.

    Each active cluster becomes a single cluster object (position at the
    shape centroid, mean member velocity, heading from the shape
    orientation); all remaining frame VRUs are individual objects. Objects
    beyond the per-message cap overflow into additional messages; an empty
    frame yields no messages.

    `clusters_with_shapes` is a sequence of (cluster, fitted shape) pairs;
    pass an empty sequence for unclustered transmission.
    """
    frame_states = list(frame_states)
    by_id = {s.vru_id: s for s in frame_states}
    if object_ids is None:
        object_ids = {vid: i + 1 for i, vid in enumerate(sorted(by_id))}
    cluster_id_base = max(object_ids.values(), default=0)

    clustered_ids: set[str] = set()
    cluster_objects = []
    for cluster, shape in sorted(clusters_with_shapes, key=lambda cs: cs[0].id):
        members = cluster.members
        missing = members - by_id.keys()
        if missing:
            raise InvalidInputError(
                f"cluster {cluster.id} references VRUs absent from the frame: {sorted(missing)}")
        overlap = members & clustered_ids
        if overlap:
            raise InvalidInputError(f"VRUs assigned to two clusters: {sorted(overlap)}")
        clustered_ids |= members
        states = [by_id[m] for m in sorted(members)]
        vx = sum(s.velocity()[0] for s in states) / len(states)
        vy = sum(s.velocity()[1] for s in states) / len(states)
        mean_t = sum(s.timestamp for s in states) / len(states)
        centroid = shape_centroid(shape)
        cluster_objects.append(PerceivedObject(
            kind="vru_cluster",
            object_id=cluster_id_base + cluster.id,
            position=(centroid.x, centroid.y),
            velocity=(vx, vy),
            angles=(0.0, 0.0, shape_orientation(shape)),
            measurement_delta_time=_delta_ms(mean_t, generation_time),
            cluster_shape=shape,
            cardinality=len(members),
        ))

    individual_objects = []
    for vid in sorted(by_id):
        if vid in clustered_ids:
            continue
        s = by_id[vid]
        individual_objects.append(PerceivedObject(
            kind="vru",
            object_id=object_ids[vid],
            position=(s.position.x, s.position.y),
            velocity=s.velocity(),
            angles=(0.0, 0.0, s.heading),
            measurement_delta_time=_delta_ms(s.timestamp, generation_time),
            dimensions=vru_dims,
        ))

    objects = cluster_objects + individual_objects
    messages = []
    for start in range(0, len(objects), max_objects):
        chunk = tuple(objects[start:start + max_objects])
        messages.append(CpmMessage(generation_time, chunk,
                                   _objects_size_bytes(chunk, size_model)))
    return messages
