"""Planar poses and convex shape geometry.

Everything works on two primitive kinds internally: disks and convex
polygons (boxes are converted to polygons). Separations are signed:
positive when apart, negative penetration depth when overlapping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateContact

TWO_PI = 2.0 * math.pi


def _cross2(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """z-component of the 2D cross product, elementwise over rows."""
    a = np.asarray(a)
    b = np.asarray(b)
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def wrap_angle(a: float) -> float:
    """Normalize an angle to (-pi, pi]; in-range values pass through exactly."""
    if -math.pi < a <= math.pi:
        return a
    return -((-a + math.pi) % TWO_PI - math.pi)


@dataclass(frozen=True)
class Pose2D:
    """Planar pose (meters, radians); theta is normalized to (-pi, pi]."""

    x: float
    y: float
    theta: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.theta)):
            raise ValueError("pose components must be finite")
        object.__setattr__(self, "theta", wrap_angle(self.theta))

    @property
    def xy(self) -> np.ndarray:
        return np.array([self.x, self.y])

    def rotation(self) -> np.ndarray:
        c, s = math.cos(self.theta), math.sin(self.theta)
        return np.array([[c, -s], [s, c]])

    def transform(self, local: np.ndarray) -> np.ndarray:
        """Map body-frame point(s) to world frame."""
        return local @ self.rotation().T + self.xy

    def inverse_transform(self, world: np.ndarray) -> np.ndarray:
        """Map world point(s) into this pose's body frame."""
        return (np.asarray(world) - self.xy) @ self.rotation()


@dataclass(frozen=True)
class ShapeSpec:
    """Disk, box or convex polygon in the body frame.

    kind: "disk" (radius), "box" (half_extents), or "convex-polygon"
    (vertices, counter-clockwise, convex, >= 3).
    """

    kind: str
    radius: float = 0.0
    half_extents: tuple[float, float] = (0.0, 0.0)
    vertices: tuple[tuple[float, float], ...] = field(default=())

    def __post_init__(self):
        if self.kind == "disk":
            if not self.radius > 0.0:
                raise ValueError("disk radius must be > 0")
        elif self.kind == "box":
            if not (self.half_extents[0] > 0.0 and self.half_extents[1] > 0.0):
                raise ValueError("box half extents must be > 0")
        elif self.kind == "convex-polygon":
            v = np.asarray(self.vertices, dtype=float)
            if v.shape[0] < 3:
                raise ValueError("polygon needs >= 3 vertices")
            cross = _cross2(np.roll(v, -1, axis=0) - v,
                            np.roll(v, -2, axis=0) - np.roll(v, -1, axis=0))
            if np.any(cross <= 0.0):
                raise ValueError("polygon vertices must be counter-clockwise and convex")
        else:
            raise ValueError(f"unknown shape kind {self.kind!r}")

    def local_vertices(self) -> np.ndarray:
        """Body-frame vertex array; raises for disks."""
        if self.kind == "box":
            hx, hy = self.half_extents
            return np.array([[hx, -hy], [hx, hy], [-hx, hy], [-hx, -hy]])
        if self.kind == "convex-polygon":
            return np.asarray(self.vertices, dtype=float)
        raise ValueError("disk has no vertices")

    @property
    def circumradius(self) -> float:
        """Radius of the smallest origin-centered circle containing the shape."""
        if self.kind == "disk":
            return self.radius
        return float(np.max(np.linalg.norm(self.local_vertices(), axis=1)))

    @property
    def inradius(self) -> float:
        """Radius of the largest origin-centered circle inside the shape."""
        if self.kind == "disk":
            return self.radius
        v = self.local_vertices()
        e = np.roll(v, -1, axis=0) - v
        # distance from origin to each edge line (origin assumed interior)
        d = _cross2(e, -v) / np.linalg.norm(e, axis=1)
        return float(np.min(d))

    @property
    def diameter(self) -> float:
        return 2.0 * self.circumradius


def disk(radius: float) -> ShapeSpec:
    return ShapeSpec(kind="disk", radius=radius)


def box(hx: float, hy: float) -> ShapeSpec:
    return ShapeSpec(kind="box", half_extents=(hx, hy))


def convex_polygon(vertices) -> ShapeSpec:
    return ShapeSpec(kind="convex-polygon", vertices=tuple(map(tuple, vertices)))


def world_vertices(shape: ShapeSpec, pose: Pose2D) -> np.ndarray:
    return pose.transform(shape.local_vertices())


def _closest_on_segment(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0.0:
        return a
    t = float((p - a) @ ab) / denom
    return a + min(1.0, max(0.0, t)) * ab


def point_in_polygon(p: np.ndarray, verts: np.ndarray) -> bool:
    """Inside-or-on-boundary test for a CCW convex polygon."""
    nxt = np.roll(verts, -1, axis=0)
    return bool(np.all(_cross2(nxt - verts, p - verts) >= 0.0))


def signed_distance_point_polygon(p: np.ndarray, verts: np.ndarray) -> float:
    """Positive outside, negative inside (depth to the nearest edge)."""
    nxt = np.roll(verts, -1, axis=0)
    edge = nxt - verts
    side = _cross2(edge, p - verts) / np.linalg.norm(edge, axis=1)
    if np.all(side >= 0.0):
        return -float(np.min(side))
    best = math.inf
    for a, b in zip(verts, nxt):
        q = _closest_on_segment(p, a, b)
        best = min(best, float(np.linalg.norm(p - q)))
    return best


def closest_boundary_point(p: np.ndarray, verts: np.ndarray) -> np.ndarray:
    """Nearest point on the polygon boundary; deterministic tie-breaking.

    Ties are broken by the smaller polar angle of the candidate point
    measured about the polygon centroid.
    """
    centroid = verts.mean(axis=0)
    best_q = None
    best_d = math.inf
    best_ang = math.inf
    nxt = np.roll(verts, -1, axis=0)
    for a, b in zip(verts, nxt):
        q = _closest_on_segment(p, a, b)
        d = float(np.linalg.norm(p - q))
        ang = math.atan2(q[1] - centroid[1], q[0] - centroid[0])
        if d < best_d - 1e-15 or (abs(d - best_d) <= 1e-15 and ang < best_ang):
            best_q, best_d, best_ang = q, d, ang
    return best_q


def _project(verts: np.ndarray, axis: np.ndarray) -> tuple[float, float]:
    d = verts @ axis
    return float(d.min()), float(d.max())


def _sat_polygons(va: np.ndarray, vb: np.ndarray):
    """(depth, axis) of the minimum translation pushing A out of B, or
    (gap, None) when a separating axis exists (gap > 0)."""
    best_depth = math.inf
    best_axis = None
    for verts in (va, vb):
        nxt = np.roll(verts, -1, axis=0)
        for a, b in zip(verts, nxt):
            e = b - a
            n = np.array([e[1], -e[0]])
            norm = float(np.linalg.norm(n))
            if norm == 0.0:
                continue
            n /= norm
            lo_a, hi_a = _project(va, n)
            lo_b, hi_b = _project(vb, n)
            gap = max(lo_b - hi_a, lo_a - hi_b)
            if gap > 0.0:
                return gap, None
            push_pos = hi_b - lo_a  # move A along +n until clear
            push_neg = hi_a - lo_b  # move A along -n until clear
            if push_pos <= push_neg:
                depth, direction = push_pos, n
            else:
                depth, direction = push_neg, -n
            if depth < best_depth:
                best_depth, best_axis = depth, direction
    return best_depth, best_axis


def _points_to_segments_min(pts: np.ndarray, verts: np.ndarray) -> float:
    a = verts
    b = np.roll(verts, -1, axis=0)
    ab = b - a
    denom = np.maximum((ab * ab).sum(axis=1), 1e-300)
    ap = pts[:, None, :] - a[None, :, :]
    t = np.clip((ap * ab[None, :, :]).sum(axis=2) / denom, 0.0, 1.0)
    q = a[None, :, :] + t[:, :, None] * ab[None, :, :]
    d = pts[:, None, :] - q
    return float(np.sqrt((d * d).sum(axis=2).min()))


def _polygon_polygon_separation(va: np.ndarray, vb: np.ndarray) -> float:
    depth, axis = _sat_polygons(va, vb)
    if axis is not None:
        return -depth
    return min(_points_to_segments_min(va, vb), _points_to_segments_min(vb, va))


def separation(shape_a: ShapeSpec, pose_a: Pose2D, shape_b: ShapeSpec, pose_b: Pose2D) -> float:
    """Signed boundary-to-boundary distance (negative = penetration depth)."""
    a_disk = shape_a.kind == "disk"
    b_disk = shape_b.kind == "disk"
    if a_disk and b_disk:
        d = float(np.linalg.norm(pose_a.xy - pose_b.xy))
        return d - shape_a.radius - shape_b.radius
    if a_disk:
        sd = signed_distance_point_polygon(pose_a.xy, world_vertices(shape_b, pose_b))
        return sd - shape_a.radius
    if b_disk:
        sd = signed_distance_point_polygon(pose_b.xy, world_vertices(shape_a, pose_a))
        return sd - shape_b.radius
    return _polygon_polygon_separation(world_vertices(shape_a, pose_a),
                                       world_vertices(shape_b, pose_b))


def minimum_translation(shape: ShapeSpec, pose: Pose2D,
                        other: ShapeSpec, other_pose: Pose2D):
    """(depth, unit direction) moving `shape` out of `other`; None if apart."""
    # circumradius cull: overlap is impossible beyond the bounding circles
    gap = float(np.linalg.norm(pose.xy - other_pose.xy))
    if gap > shape.circumradius + other.circumradius:
        return None
    sep = separation(shape, pose, other, other_pose)
    if sep >= 0.0:
        return None
    if shape.kind == "disk" and other.kind == "disk":
        u = pose.xy - other_pose.xy
        n = float(np.linalg.norm(u))
        direction = u / n if n > 0.0 else np.array([1.0, 0.0])
        return -sep, direction
    if shape.kind == "disk":
        verts = world_vertices(other, other_pose)
        q = closest_boundary_point(pose.xy, verts)
        inside = point_in_polygon(pose.xy, verts)
        u = (q - pose.xy) if inside else (pose.xy - q)
        n = float(np.linalg.norm(u))
        direction = u / n if n > 0.0 else np.array([1.0, 0.0])
        return -sep, direction
    if other.kind == "disk":
        depth, direction = minimum_translation(other, other_pose, shape, pose)
        return depth, -direction
    depth, axis = _sat_polygons(world_vertices(shape, pose), world_vertices(other, other_pose))
    return depth, axis


def disk_contact(shape: ShapeSpec, pose: Pose2D, center: np.ndarray, radius: float):
    """Contact of a disk probe (the EE) against a body.

    Returns (separation, contact_point, normal) with the normal pointing
    from the probe into the body (the direction a push displaces it).
    """
    if shape.kind == "disk":
        u = pose.xy - center
        d = float(np.linalg.norm(u))
        n = u / d if d > 0.0 else np.array([1.0, 0.0])
        contact = pose.xy - shape.radius * n
        return d - shape.radius - radius, contact, n
    verts = world_vertices(shape, pose)
    q = closest_boundary_point(center, verts)
    inside = point_in_polygon(center, verts)
    u = q - center
    d = float(np.linalg.norm(u))
    if d > 0.0:
        # points at the nearest face both when the probe is outside (push
        # into the body) and when it sits inside (push the face away)
        n = u / d
    else:
        # probe center exactly on the boundary: use the inward edge normal
        nxt = np.roll(verts, -1, axis=0)
        edge = nxt - verts
        side = _cross2(edge, center - verts) / np.linalg.norm(edge, axis=1)
        i = int(np.argmin(np.abs(side)))
        e = edge[i] / np.linalg.norm(edge[i])
        n = np.array([e[1], -e[0]])  # inward for CCW
        n = -n
    sep = (d - radius) if not inside else -(d + radius)
    return sep, q, n


def normalized(v: np.ndarray) -> np.ndarray:
    n = float(np.linalg.norm(v))
    if n == 0.0:
        raise DegenerateContact("zero-length vector")
    return v / n


def mask_inside(shape: ShapeSpec, pose: Pose2D, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Vectorized inside test for grids of world points."""
    if shape.kind == "disk":
        return (xs - pose.x) ** 2 + (ys - pose.y) ** 2 <= shape.radius ** 2
    verts = world_vertices(shape, pose)
    nxt = np.roll(verts, -1, axis=0)
    inside = np.ones(xs.shape, dtype=bool)
    for (ax, ay), (bx, by) in zip(verts, nxt):
        inside &= (bx - ax) * (ys - ay) - (by - ay) * (xs - ax) >= 0.0
    return inside
