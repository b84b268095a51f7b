"""Shape byte-size model, cluster accuracy, area-density efficiency, and the
adaptive shape selector."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from . import geometry
from .errors import InvalidInputError
from .geometry import ClusterShape, FootprintDims, footprint_corners, shape_kind

MODES = ("full", "compulsory")

# Tie-break order for the adaptive selector (most preferred first).
SHAPE_PRIORITY = {"rectangle": 0, "circle": 1, "ellipse": 2, "polygon": 3}


@dataclass(frozen=True)
class ShapeSizeModel:
    """Encoding cost of each shape in bytes, with and without optional
    fields; polygon cost scales with the vertex count."""

    circle_full: Fraction = Fraction(9)
    circle_compulsory: Fraction = Fraction(3, 2)
    ellipse_full: Fraction = Fraction(12)
    ellipse_compulsory: Fraction = Fraction(3)
    rectangle_full: Fraction = Fraction(12)
    rectangle_compulsory: Fraction = Fraction(3)
    polygon_full_base: Fraction = Fraction(15, 2)
    polygon_full_per_point: Fraction = Fraction(6)
    polygon_compulsory_base: Fraction = Fraction(0)
    polygon_compulsory_per_point: Fraction = Fraction(4)

    def __post_init__(self):
        for name in ("circle_full", "circle_compulsory", "ellipse_full", "ellipse_compulsory",
                     "rectangle_full", "rectangle_compulsory", "polygon_full_base",
                     "polygon_full_per_point", "polygon_compulsory_base",
                     "polygon_compulsory_per_point"):
            value = Fraction(getattr(self, name))
            if value < 0:
                raise InvalidInputError(f"shape size component {name} must be >= 0")
            object.__setattr__(self, name, value)
        for mode in MODES:
            if self.polygon_bytes(3, mode) <= 0:
                raise InvalidInputError("polygon cost must be positive for any vertex count")
        for cost in (self.circle_full, self.circle_compulsory, self.ellipse_full,
                     self.ellipse_compulsory, self.rectangle_full, self.rectangle_compulsory):
            if cost <= 0:
                raise InvalidInputError("fixed shape costs must be positive")

    def polygon_bytes(self, n_points: int, mode: str) -> Fraction:
        if mode == "full":
            return self.polygon_full_base + self.polygon_full_per_point * n_points
        return self.polygon_compulsory_base + self.polygon_compulsory_per_point * n_points


DEFAULT_SIZE_MODEL = ShapeSizeModel()


def shape_size_bytes(shape: ClusterShape, mode: str,
                     model: ShapeSizeModel = DEFAULT_SIZE_MODEL) -> Fraction:
    """Byte cost of encoding the shape; fractional values are exact."""
    if mode not in MODES:
        raise InvalidInputError(f"unknown size mode {mode!r}")
    kind = shape_kind(shape)
    if kind == "polygon":
        return model.polygon_bytes(len(shape.vertices), mode)
    return getattr(model, f"{kind}_{mode}")


def under_shape(shape: ClusterShape, state, containment: str = "center",
                dims: FootprintDims | None = None) -> bool:
    """Predicate for a VRU counting as covered by a cluster shape.

    "center" tests the footprint center; "footprint" additionally samples
    the four footprint corners (an approximation of footprint overlap,
    available for sensitivity checks).
    """
    if geometry.contains(shape, state.position):
        return True
    if containment == "center":
        return False
    if containment == "footprint":
        d = dims if dims is not None else FootprintDims()
        return any(geometry.contains(shape, c) for c in footprint_corners(state, d))
    raise InvalidInputError(f"unknown containment mode {containment!r}")


def _coverage_counts(shape, members, frame_states, containment, dims) -> tuple[int, int]:
    n_under = 0
    n_correct = 0
    for state in frame_states:
        if under_shape(shape, state, containment, dims):
            n_under += 1
            if state.vru_id in members:
                n_correct += 1
    return n_correct, n_under


def cluster_accuracy(shape: ClusterShape, members, frame_states,
                     containment: str = "center",
                     dims: FootprintDims | None = None) -> Fraction:
    """Share of the VRUs covered by the shape that are actual members.

    Returned as an exact rational so equal accuracies compare exactly in
    the adaptive selector.
    """
    n_correct, n_under = _coverage_counts(shape, frozenset(members), frame_states,
                                          containment, dims)
    if n_under == 0:
        raise InvalidInputError("no VRU under the shape; was it fitted to the members?")
    return Fraction(n_correct, n_under)


def cadi(shape: ClusterShape, n_members: int, mode: str = "compulsory",
         model: ShapeSizeModel = DEFAULT_SIZE_MODEL) -> float:
    """Shape description size (bits) times covered area per member VRU;
    lower values mean a more efficient cluster description."""
    if n_members < 1:
        raise InvalidInputError("cluster must have at least one member")
    size_bits = shape_size_bytes(shape, mode, model) * 8
    return float(size_bits) * geometry.area(shape) / n_members


@dataclass(frozen=True)
class ShapeEvaluation:
    """Scores of one fitted shape against one frame."""

    kind: str
    shape: ClusterShape
    ca: Fraction
    cadi: float
    size_bits: float
    area: float
    n_members: int
    n_under_shape: int


def evaluate_shapes(shapes: dict[str, ClusterShape], members, frame_states,
                    mode: str = "compulsory",
                    model: ShapeSizeModel = DEFAULT_SIZE_MODEL,
                    containment: str = "center",
                    dims: FootprintDims | None = None) -> list[ShapeEvaluation]:
    """Score every fitted shape of one cluster against the frame."""
    members = frozenset(members)
    out = []
    for kind in geometry.SHAPE_KINDS:
        if kind not in shapes:
            continue
        shape = shapes[kind]
        n_correct, n_under = _coverage_counts(shape, members, frame_states, containment, dims)
        if n_under == 0:
            raise InvalidInputError("no VRU under the shape; was it fitted to the members?")
        out.append(ShapeEvaluation(
            kind=kind,
            shape=shape,
            ca=Fraction(n_correct, n_under),
            cadi=cadi(shape, len(members), mode, model),
            size_bits=float(shape_size_bytes(shape, mode, model) * 8),
            area=geometry.area(shape),
            n_members=len(members),
            n_under_shape=n_under,
        ))
    return out


def select_adaptive(evaluations: Sequence[ShapeEvaluation]) -> ShapeEvaluation:
    """Pick the most accurate shape, then the most efficient among ties.

    Accuracy ties are exact rational comparisons; efficiency ties fall
    back to the fixed priority rectangle > circle > ellipse > polygon.
    """
    evaluations = list(evaluations)
    if not evaluations:
        raise InvalidInputError("no shape evaluations to select from")
    kinds = [e.kind for e in evaluations]
    if len(set(kinds)) != len(kinds):
        raise InvalidInputError(f"duplicate shape kinds in evaluations: {kinds}")
    best_ca = max(e.ca for e in evaluations)
    pool = [e for e in evaluations if e.ca == best_ca]
    return min(pool, key=lambda e: (e.cadi, SHAPE_PRIORITY[e.kind]))
