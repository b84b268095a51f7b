"""Planar geometry kernel: VRU footprints, convex hulls, minimal enclosing shapes.

Coordinates are meters in a bird-eye east/north frame; angles are radians
measured counter-clockwise from +x. Every operation here is a pure function
of its inputs and safe to call concurrently.
"""

from __future__ import annotations

import logging
import math
import random
from dataclasses import dataclass
from typing import NamedTuple, Union

import numpy as np

from .errors import DegenerateInputError, InvalidInputError, NumericalError

logger = logging.getLogger(__name__)

# Absolute tolerance (meters) for boundary / containment tests.
BOUNDARY_TOL = 1e-9

# Fixed shuffle seed so repeated circle fits are bit-reproducible.
DEFAULT_WELZL_SEED = 0x5EED

# Relative epsilon for the internal in-circle tests of the Welzl recursion.
_REL_EPS = 1e-14

MVEE_DEFAULT_TOLERANCE = 1e-4

SHAPE_KINDS = ("circle", "ellipse", "rectangle", "polygon")


class Point2D(NamedTuple):
    """Planar point, meters east (x) / north (y)."""

    x: float
    y: float


def as_point_array(points) -> np.ndarray:
    """Coerce an iterable of points (Point2D, pairs, or an (n, 2) array)
    to a float array, rejecting non-finite coordinates."""
    arr = np.asarray(points, dtype=float)
    if arr.size == 0:
        return arr.reshape(0, 2)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise InvalidInputError(f"expected an (n, 2) point array, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise InvalidInputError("points contain non-finite coordinates")
    return arr


def _check_finite(*values: float) -> None:
    for v in values:
        if not math.isfinite(v):
            raise InvalidInputError("non-finite value in shape parameters")


@dataclass(frozen=True)
class FootprintDims:
    """Bird-eye extent of one VRU: width across the heading, depth along it."""

    width: float = 0.5
    depth: float = 0.3

    def __post_init__(self):
        _check_finite(self.width, self.depth)
        if self.width <= 0 or self.depth <= 0:
            raise InvalidInputError("footprint dimensions must be positive")


@dataclass(frozen=True)
class Footprint:
    """Heading-aligned bounding rectangle of a single VRU."""

    center: Point2D
    heading: float
    width: float
    depth: float

    def __post_init__(self):
        _check_finite(self.center[0], self.center[1], self.heading, self.width, self.depth)
        if self.width <= 0 or self.depth <= 0:
            raise InvalidInputError("footprint dimensions must be positive")
        object.__setattr__(self, "center", Point2D(*self.center))

    def corners(self) -> tuple[Point2D, Point2D, Point2D, Point2D]:
        """Four corners in CCW order; depth spans the heading axis, width the lateral one."""
        c, s = math.cos(self.heading), math.sin(self.heading)
        hd, hw = self.depth / 2.0, self.width / 2.0
        out = []
        for du, dv in ((hd, hw), (-hd, hw), (-hd, -hw), (hd, -hw)):
            out.append(Point2D(self.center.x + du * c - dv * s, self.center.y + du * s + dv * c))
        return tuple(out)


@dataclass(frozen=True)
class Circle:
    center: Point2D
    radius: float

    def __post_init__(self):
        _check_finite(self.center[0], self.center[1], self.radius)
        if self.radius < 0:
            raise InvalidInputError("circle radius must be >= 0")
        object.__setattr__(self, "center", Point2D(*self.center))


@dataclass(frozen=True)
class Ellipse:
    """Axis lengths are normalized so semi_major >= semi_minor and the
    orientation (of the major axis) lies in [0, pi)."""

    center: Point2D
    semi_major: float
    semi_minor: float
    orientation: float

    def __post_init__(self):
        a, b, theta = self.semi_major, self.semi_minor, self.orientation
        _check_finite(self.center[0], self.center[1], a, b, theta)
        if a < b:
            a, b = b, a
            theta += math.pi / 2.0
        if b <= 0:
            raise InvalidInputError("ellipse semi-axes must be positive")
        object.__setattr__(self, "center", Point2D(*self.center))
        object.__setattr__(self, "semi_major", a)
        object.__setattr__(self, "semi_minor", b)
        object.__setattr__(self, "orientation", theta % math.pi)


@dataclass(frozen=True)
class OrientedRect:
    """Rectangle given by half extents; the longer axis carries the
    orientation, normalized to [0, pi)."""

    center: Point2D
    half_len: float
    half_wid: float
    orientation: float

    def __post_init__(self):
        hl, hw, theta = self.half_len, self.half_wid, self.orientation
        _check_finite(self.center[0], self.center[1], hl, hw, theta)
        if hl < hw:
            hl, hw = hw, hl
            theta += math.pi / 2.0
        if hw <= 0:
            raise InvalidInputError("rectangle half extents must be positive")
        object.__setattr__(self, "center", Point2D(*self.center))
        object.__setattr__(self, "half_len", hl)
        object.__setattr__(self, "half_wid", hw)
        object.__setattr__(self, "orientation", theta % math.pi)

    def corners(self) -> tuple[Point2D, Point2D, Point2D, Point2D]:
        c, s = math.cos(self.orientation), math.sin(self.orientation)
        out = []
        for du, dv in ((self.half_len, self.half_wid), (-self.half_len, self.half_wid),
                       (-self.half_len, -self.half_wid), (self.half_len, -self.half_wid)):
            out.append(Point2D(self.center.x + du * c - dv * s, self.center.y + du * s + dv * c))
        return tuple(out)


@dataclass(frozen=True)
class Polygon:
    """Strictly convex polygon, vertices in CCW order."""

    vertices: tuple[Point2D, ...]

    def __post_init__(self):
        verts = tuple(Point2D(float(x), float(y)) for x, y in self.vertices)
        if len(verts) < 3:
            raise InvalidInputError("polygon needs at least 3 vertices")
        for p in verts:
            _check_finite(p.x, p.y)
        if _twice_signed_area(verts) <= 0:
            raise InvalidInputError("polygon vertices must wind counter-clockwise")
        n = len(verts)
        for i in range(n):
            if _cross(verts[i], verts[(i + 1) % n], verts[(i + 2) % n]) <= 0:
                raise InvalidInputError("polygon must be strictly convex (no collinear vertices)")
        object.__setattr__(self, "vertices", verts)


ClusterShape = Union[Circle, Ellipse, OrientedRect, Polygon]


def shape_kind(shape: ClusterShape) -> str:
    if isinstance(shape, Circle):
        return "circle"
    if isinstance(shape, Ellipse):
        return "ellipse"
    if isinstance(shape, OrientedRect):
        return "rectangle"
    if isinstance(shape, Polygon):
        return "polygon"
    raise InvalidInputError(f"not a cluster shape: {type(shape).__name__}")


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _twice_signed_area(verts) -> float:
    acc = 0.0
    n = len(verts)
    for i in range(n):
        x0, y0 = verts[i]
        x1, y1 = verts[(i + 1) % n]
        acc += x0 * y1 - x1 * y0
    return acc


def footprint_corners(state, dims: FootprintDims) -> tuple[Point2D, Point2D, Point2D, Point2D]:
    """Corners of the VRU's bounding rectangle at `state` (anything with
    `.position` and `.heading`), depth-axis aligned with the heading."""
    pos = state.position
    return Footprint(Point2D(*pos), state.heading, dims.width, dims.depth).corners()


def convex_hull(points) -> Polygon:
    """Smallest convex polygon containing the points (monotone chain).

    Vertices are a minimal subset of the inputs in CCW order; collinear
    boundary points are dropped. Raises DegenerateInputError for fewer
    than three distinct points or an all-collinear set.
    """
    arr = as_point_array(points)
    pts = sorted(set(map(tuple, arr.tolist())))
    if len(pts) < 3:
        raise DegenerateInputError("convex hull needs at least 3 distinct points")

    def build(seq):
        chain: list = []
        for p in seq:
            while len(chain) >= 2 and _cross(chain[-2], chain[-1], p) <= 0:
                chain.pop()
            chain.append(p)
        return chain

    lower = build(pts)
    upper = build(reversed(pts))
    hull = lower[:-1] + upper[:-1]
    if len(hull) < 3:
        raise DegenerateInputError("all points are collinear")
    return Polygon(tuple(Point2D(*p) for p in hull))


def _circle_contains(center, r, p, scale) -> bool:
    return math.dist(center, p) <= r + _REL_EPS * scale


def _diameter_circle(a, b):
    center = ((a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0)
    r = max(math.dist(center, a), math.dist(center, b))
    return center, r


def _circumcircle(a, b, c):
    # Work relative to the bounding-box midpoint for numerical stability.
    ox = (min(a[0], b[0], c[0]) + max(a[0], b[0], c[0])) / 2.0
    oy = (min(a[1], b[1], c[1]) + max(a[1], b[1], c[1])) / 2.0
    ax, ay = a[0] - ox, a[1] - oy
    bx, by = b[0] - ox, b[1] - oy
    cx, cy = c[0] - ox, c[1] - oy
    d = (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by)) * 2.0
    if d == 0.0:
        return None
    x = ox + ((ax * ax + ay * ay) * (by - cy) + (bx * bx + by * by) * (cy - ay)
              + (cx * cx + cy * cy) * (ay - by)) / d
    y = oy + ((ax * ax + ay * ay) * (cx - bx) + (bx * bx + by * by) * (ax - cx)
              + (cx * cx + cy * cy) * (bx - ax)) / d
    r = max(math.dist((x, y), p) for p in (a, b, c))
    return (x, y), r


def min_enclosing_circle(points, seed: int = DEFAULT_WELZL_SEED) -> Circle:
    """Smallest circle containing every point, in expected linear time.

    Incremental Welzl recursion over a deterministically shuffled copy of
    the input, so repeated runs return identical results. The circle is
    determined by at most three support points.
    """
    arr = as_point_array(points)
    if arr.shape[0] == 0:
        raise InvalidInputError("need at least one point")
    pts = [tuple(p) for p in arr.tolist()]
    random.Random(seed).shuffle(pts)
    scale = max(1.0, float(np.abs(arr).max()))

    center, r = pts[0], 0.0
    for i, p in enumerate(pts):
        if not _circle_contains(center, r, p, scale):
            center, r = _circle_one_boundary(pts[: i + 1], p, scale)
    return Circle(Point2D(*center), r)


def _circle_one_boundary(pts, p, scale):
    center, r = p, 0.0
    for j, q in enumerate(pts):
        if not _circle_contains(center, r, q, scale):
            if r == 0.0:
                center, r = _diameter_circle(p, q)
            else:
                center, r = _circle_two_boundary(pts[: j + 1], p, q, scale)
    return center, r


def _circle_two_boundary(pts, p, q, scale):
    circ = _diameter_circle(p, q)
    left = None
    right = None
    for r_pt in pts:
        if _circle_contains(circ[0], circ[1], r_pt, scale):
            continue
        cross = _cross(p, q, r_pt)
        cand = _circumcircle(p, q, r_pt)
        if cand is None:
            continue
        d = _cross(p, q, cand[0])
        if cross > 0.0 and (left is None or d > _cross(p, q, left[0])):
            left = cand
        elif cross < 0.0 and (right is None or d < _cross(p, q, right[0])):
            right = cand
    if left is None and right is None:
        return circ
    if left is None:
        return right
    if right is None:
        return left
    return left if left[1] <= right[1] else right


def _canonical_frame(arr: np.ndarray):
    """Centroid + principal-axis frame with a deterministic sign convention.

    Fitting in this frame makes the iterative ellipse fit stable under
    rigid motions of the input.
    """
    mean = arr.mean(axis=0)
    centered = arr - mean
    cov = centered.T @ centered
    _, vecs = np.linalg.eigh(cov)
    rot = vecs[:, ::-1].copy()  # columns: major then minor axis
    for k in range(2):
        col = rot[:, k]
        i = int(np.argmax(np.abs(col)))
        if col[i] < 0:
            rot[:, k] = -col
    if np.linalg.det(rot) < 0:
        rot[:, 1] = -rot[:, 1]
    return mean, rot, centered @ rot


def min_enclosing_ellipse(points, tolerance: float = MVEE_DEFAULT_TOLERANCE) -> Ellipse:
    """Minimum-volume enclosing ellipse (Khachiyan's barycentric iteration).

    The converged quadratic form is rescaled so the farthest input point
    sits exactly on the boundary: the result always contains every input,
    with area above the true optimum by at most the convergence tolerance.
    Only the convex-hull vertices enter the iteration.
    """
    if not (0.0 < tolerance < 1.0):
        raise InvalidInputError("tolerance must be in (0, 1)")
    arr = as_point_array(points)
    if arr.shape[0] < 3:
        raise DegenerateInputError("ellipse fit needs at least 3 points")

    sv = np.linalg.svd(arr - arr.mean(axis=0), compute_uv=False)
    if sv[1] <= 1e-12 * max(1.0, sv[0]):
        raise DegenerateInputError("points are (near-)collinear; ellipse fit is degenerate")

    hull = convex_hull(arr)
    arr = np.asarray(hull.vertices, dtype=float)

    mean, rot, P = _canonical_frame(arr)
    n, d = P.shape
    Q = np.vstack([P.T, np.ones(n)])
    # Start from the coordinate-extreme points: far fewer iterations than a
    # uniform start on elongated sets. Needs 3+ support points for a
    # non-singular start, else fall back to uniform weights.
    extremes = {int(P[:, 0].argmin()), int(P[:, 0].argmax()),
                int(P[:, 1].argmin()), int(P[:, 1].argmax())}
    if len(extremes) >= 3:
        u = np.zeros(n)
        u[list(extremes)] = 1.0 / len(extremes)
    else:
        u = np.full(n, 1.0 / n)
    max_iter = max(5000, math.ceil(10.0 * n * math.log(1.0 / tolerance)))
    dp1 = d + 1.0

    # Barycentric ascent with away steps (Wolfe-Atwood), which converges
    # linearly where the plain add-only iteration does not.
    converged = False
    for _ in range(max_iter):
        X = (Q * u) @ Q.T
        try:
            M = np.einsum("ji,ji->i", Q, np.linalg.solve(X, Q))
        except np.linalg.LinAlgError as exc:
            raise DegenerateInputError("degenerate point configuration for ellipse fit") from exc
        j_up = int(np.argmax(M))
        eps_up = float(M[j_up]) / dp1 - 1.0
        support = u > 0.0
        masked = np.where(support, M, np.inf)
        j_dn = int(np.argmin(masked))
        eps_dn = 1.0 - float(M[j_dn]) / dp1
        if max(eps_up, eps_dn) <= tolerance:
            converged = True
            break
        if eps_up >= eps_dn:
            mx = float(M[j_up])
            lam = (mx - dp1) / (dp1 * (mx - 1.0))
            u *= 1.0 - lam
            u[j_up] += lam
        else:
            mn = float(M[j_dn])
            lam_cap = u[j_dn] / (1.0 - u[j_dn]) if u[j_dn] < 1.0 else math.inf
            lam_opt = (dp1 - mn) / (dp1 * (mn - 1.0)) if mn > 1.0 else math.inf
            lam = min(lam_opt, lam_cap)
            u *= 1.0 + lam
            u[j_dn] -= lam
            u[u < 0.0] = 0.0
    if not converged:
        raise NumericalError(f"ellipse fit did not converge within {max_iter} iterations")

    center_c = P.T @ u
    try:
        A = np.linalg.inv((P * u[:, None]).T @ P - np.outer(center_c, center_c)) / d
    except np.linalg.LinAlgError as exc:
        raise DegenerateInputError("degenerate point configuration for ellipse fit") from exc

    diffs = P - center_c
    forms = np.einsum("ij,jk,ik->i", diffs, A, diffs)
    fmax = float(forms.max())
    if fmax > 0.0:
        A = A / fmax  # farthest point exactly on the boundary

    eigvals, eigvecs = np.linalg.eigh(A)
    if eigvals[0] <= 0.0:
        raise NumericalError("ellipse fit produced a non-positive-definite form")
    semi_major = 1.0 / math.sqrt(float(eigvals[0]))
    semi_minor = 1.0 / math.sqrt(float(eigvals[1]))
    major_world = rot @ eigvecs[:, 0]
    center_world = rot @ center_c + mean
    orientation = math.atan2(float(major_world[1]), float(major_world[0]))
    return Ellipse(Point2D(*center_world), semi_major, semi_minor, orientation)


def min_area_rect(points) -> OrientedRect:
    """Minimum-area oriented bounding rectangle via rotating calipers.

    One side of the optimum is collinear with a convex-hull edge, so only
    hull-edge directions need to be examined.
    """
    hull = convex_hull(points)
    V = np.asarray(hull.vertices, dtype=float)
    edges = np.roll(V, -1, axis=0) - V
    angles = np.arctan2(edges[:, 1], edges[:, 0])

    best = None
    for theta in angles:
        c, s = math.cos(theta), math.sin(theta)
        u = V[:, 0] * c + V[:, 1] * s
        v = -V[:, 0] * s + V[:, 1] * c
        du = float(u.max() - u.min())
        dv = float(v.max() - v.min())
        a = du * dv
        if best is None or a < best[0]:
            uc = (float(u.max()) + float(u.min())) / 2.0
            vc = (float(v.max()) + float(v.min())) / 2.0
            best = (a, theta, du / 2.0, dv / 2.0, uc, vc)

    _, theta, hl, hw, uc, vc = best
    c, s = math.cos(theta), math.sin(theta)
    center = Point2D(uc * c - vc * s, uc * s + vc * c)
    return OrientedRect(center, hl, hw, theta)


def contains(shape: ClusterShape, point, tol: float = BOUNDARY_TOL) -> bool:
    """True iff the point is inside or on the boundary of the shape
    (boundary-inclusive within `tol` meters)."""
    x, y = float(point[0]), float(point[1])
    if isinstance(shape, Circle):
        return math.dist(shape.center, (x, y)) <= shape.radius + tol
    if isinstance(shape, OrientedRect):
        c, s = math.cos(shape.orientation), math.sin(shape.orientation)
        dx, dy = x - shape.center.x, y - shape.center.y
        u = dx * c + dy * s
        v = -dx * s + dy * c
        return abs(u) <= shape.half_len + tol and abs(v) <= shape.half_wid + tol
    if isinstance(shape, Ellipse):
        c, s = math.cos(shape.orientation), math.sin(shape.orientation)
        dx, dy = x - shape.center.x, y - shape.center.y
        u = (dx * c + dy * s) / shape.semi_major
        v = (-dx * s + dy * c) / shape.semi_minor
        # metric tolerance mapped to the canonical form via the minor axis
        return math.hypot(u, v) <= 1.0 + tol / shape.semi_minor
    if isinstance(shape, Polygon):
        verts = shape.vertices
        n = len(verts)
        for i in range(n):
            a = verts[i]
            b = verts[(i + 1) % n]
            edge = math.dist(a, b)
            if _cross(a, b, (x, y)) < -tol * edge:
                return False
        return True
    raise InvalidInputError(f"not a cluster shape: {type(shape).__name__}")


def area(shape: ClusterShape) -> float:
    """Shape area in square meters."""
    if isinstance(shape, Circle):
        return math.pi * shape.radius ** 2
    if isinstance(shape, Ellipse):
        return math.pi * shape.semi_major * shape.semi_minor
    if isinstance(shape, OrientedRect):
        return 4.0 * shape.half_len * shape.half_wid
    if isinstance(shape, Polygon):
        return _twice_signed_area(shape.vertices) / 2.0
    raise InvalidInputError(f"not a cluster shape: {type(shape).__name__}")


def degenerate_spread(points, offset: float = 1e-3) -> np.ndarray:
    """Symmetric +-offset duplication of each point, perpendicular to the
    principal direction of the set (both axes when the set is a single
    location). Used as the fit fallback for rank-deficient clusters; the
    spread set's hull contains every original point."""
    arr = as_point_array(points)
    centered = arr - arr.mean(axis=0)
    cov = centered.T @ centered
    evals, evecs = np.linalg.eigh(cov)
    if evals[1] <= 0.0:  # all points coincide: spread in both axes
        dx = np.array([offset, 0.0])
        dy = np.array([0.0, offset])
        return np.vstack([arr + dx, arr - dx, arr + dy, arr - dy])
    direction = evecs[:, 1]
    normal = np.array([-direction[1], direction[0]]) * offset
    return np.vstack([arr + normal, arr - normal])


def fit_shapes(points, *, mvee_tolerance: float = MVEE_DEFAULT_TOLERANCE,
               welzl_seed: int = DEFAULT_WELZL_SEED) -> dict[str, ClusterShape]:
    """Fit all four minimal enclosing shapes to one point set.

    Collinear sets get a symmetric 1 mm perpendicular spread before the
    hull / rectangle / ellipse fits (the circle fit never needs it); the
    fallback is logged, never silent.
    """
    arr = as_point_array(points)
    circle = min_enclosing_circle(arr, seed=welzl_seed)
    try:
        polygon = convex_hull(arr)
        rectangle = min_area_rect(arr)
        ellipse = min_enclosing_ellipse(arr, tolerance=mvee_tolerance)
    except DegenerateInputError:
        logger.warning(
            "degenerate point set (%d points): fitting hull/rectangle/ellipse on a 1 mm perpendicular spread",
            arr.shape[0],
        )
        spread = degenerate_spread(arr)
        polygon = convex_hull(spread)
        rectangle = min_area_rect(spread)
        ellipse = min_enclosing_ellipse(spread, tolerance=mvee_tolerance)
    return {"circle": circle, "ellipse": ellipse, "rectangle": rectangle, "polygon": polygon}


def shape_centroid(shape: ClusterShape) -> Point2D:
    """Center of the shape (area centroid for polygons)."""
    if isinstance(shape, (Circle, Ellipse, OrientedRect)):
        return shape.center
    verts = shape.vertices
    n = len(verts)
    cx = cy = acc = 0.0
    for i in range(n):
        x0, y0 = verts[i]
        x1, y1 = verts[(i + 1) % n]
        w = x0 * y1 - x1 * y0
        acc += w
        cx += (x0 + x1) * w
        cy += (y0 + y1) * w
    return Point2D(cx / (3.0 * acc), cy / (3.0 * acc))


def shape_orientation(shape: ClusterShape) -> float:
    """Orientation angle transmitted for the shape (0 where undefined)."""
    if isinstance(shape, (Ellipse, OrientedRect)):
        return shape.orientation
    return 0.0


def shape_to_dict(shape: ClusterShape) -> dict:
    kind = shape_kind(shape)
    if isinstance(shape, Circle):
        return {"kind": kind, "center": [shape.center.x, shape.center.y], "radius": shape.radius}
    if isinstance(shape, Ellipse):
        return {"kind": kind, "center": [shape.center.x, shape.center.y],
                "semi_major": shape.semi_major, "semi_minor": shape.semi_minor,
                "orientation": shape.orientation}
    if isinstance(shape, OrientedRect):
        return {"kind": kind, "center": [shape.center.x, shape.center.y],
                "half_len": shape.half_len, "half_wid": shape.half_wid,
                "orientation": shape.orientation}
    return {"kind": kind, "vertices": [[p.x, p.y] for p in shape.vertices]}


def shape_from_dict(data: dict) -> ClusterShape:
    kind = data.get("kind")
    if kind == "circle":
        return Circle(Point2D(*data["center"]), data["radius"])
    if kind == "ellipse":
        return Ellipse(Point2D(*data["center"]), data["semi_major"], data["semi_minor"],
                       data["orientation"])
    if kind == "rectangle":
        return OrientedRect(Point2D(*data["center"]), data["half_len"], data["half_wid"],
                            data["orientation"])
    if kind == "polygon":
        return Polygon(tuple(Point2D(*v) for v in data["vertices"]))
    raise InvalidInputError(f"unknown shape kind: {kind!r}")
