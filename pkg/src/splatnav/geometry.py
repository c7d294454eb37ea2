"""Convex collision geometry: hulls, 2D contact queries, ray casts.

Per-object collision bodies are unions of convex hulls, one per connected
point cluster.  Agent-vs-world contact runs in 2D (disc against convex
footprints and wall segments); 3D ray casts against the hulls back the
depth/semantic observation channels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull as _SciHull
from scipy.spatial import QhullError, cKDTree

from .errors import DegenerateInputError
from .scene import Mobility, ObjectInstance

_EPS = 1e-12


def _cross2(a, b) -> float:
    return float(a[0] * b[1] - a[1] * b[0])


# ---------------------------------------------------------------------------
# Convex hulls


@dataclass
class ConvexHull3:
    """Triangulated 3D convex hull with outward face planes."""

    vertices: np.ndarray  # (V, 3)
    faces: np.ndarray     # (F, 3) int indices into vertices, outward winding
    normals: np.ndarray   # (F, 3) unit outward normals
    offsets: np.ndarray   # (F,) plane offsets: inside iff normals @ x <= offsets
    volume: float

    def contains(self, points: np.ndarray, tol: float = 1e-9) -> np.ndarray:
        """Boolean mask: inside or on the hull within `tol`."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        sd = pts @ self.normals.T - self.offsets  # (n, F) signed distances
        return np.all(sd <= tol, axis=1)

    @property
    def z_range(self) -> tuple[float, float]:
        zs = self.vertices[:, 2]
        return float(zs.min()), float(zs.max())

    def edges(self) -> set[tuple[int, int]]:
        out: set[tuple[int, int]] = set()
        for a, b, c in self.faces:
            for u, v in ((a, b), (b, c), (c, a)):
                out.add((min(u, v), max(u, v)))
        return out


def convex_hull_3d(points: np.ndarray) -> ConvexHull3:
    """Minimal convex hull of >=4 non-coplanar points.

    Raises DegenerateInputError when the input is coplanar/collinear; the
    caller falls back to a 2D footprint extrusion.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3 or len(pts) < 4:
        raise DegenerateInputError(f"need >=4 3D points, got shape {pts.shape}")
    try:
        hull = _SciHull(pts)
    except QhullError as exc:
        raise DegenerateInputError(f"degenerate point set: {exc}") from exc

    keep = hull.vertices  # indices of true hull vertices
    remap = {int(old): new for new, old in enumerate(keep)}
    vertices = pts[keep]
    faces = np.array([[remap[int(i)] for i in simplex] for simplex in hull.simplices])
    normals = hull.equations[:, :3].copy()
    offsets = -hull.equations[:, 3].copy()

    # Enforce outward triangle winding consistent with the plane normals.
    for k, (a, b, c) in enumerate(faces):
        n = np.cross(vertices[b] - vertices[a], vertices[c] - vertices[a])
        if np.dot(n, normals[k]) < 0:
            faces[k, 1], faces[k, 2] = faces[k, 2], faces[k, 1]

    return ConvexHull3(
        vertices=vertices,
        faces=faces,
        normals=normals,
        offsets=offsets,
        volume=float(hull.volume),
    )


@dataclass
class CollisionBody:
    """All convex hulls attached to one object instance."""

    instance_id: str
    hulls: list[ConvexHull3]
    is_static: bool = True

    def contains(self, points: np.ndarray, tol: float = 1e-6) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        inside = np.zeros(len(pts), dtype=bool)
        for hull in self.hulls:
            inside |= hull.contains(pts, tol=tol)
        return inside


def _connected_components(points: np.ndarray, tau: float) -> list[np.ndarray]:
    """Single-linkage clusters: indices of points within chains of <= tau."""
    n = len(points)
    parent = list(range(n))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    tree = cKDTree(points)
    for i, j in tree.query_pairs(tau):
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[ri] = rj
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return [np.array(idx) for idx in sorted(groups.values(), key=lambda g: g[0])]


def _extruded_hull(points: np.ndarray, epsilon: float = 1e-3) -> ConvexHull3:
    """Fallback hull for a degenerate (coplanar/collinear) component.

    Extrudes the component's 2D footprint between its own z slices, padding
    collapsed dimensions by a hair so quickhull gets a real volume.
    """
    pts = np.asarray(points, dtype=float)
    z_lo, z_hi = float(pts[:, 2].min()), float(pts[:, 2].max())
    if z_hi - z_lo < epsilon:
        z_lo -= epsilon / 2
        z_hi += epsilon / 2
    flat = pts[:, :2]
    try:
        poly = convex_hull_2d(flat)
    except DegenerateInputError:
        poly = thin_rectangle(flat, epsilon)
    corners = poly.vertices
    prism = np.vstack(
        [np.column_stack([corners, np.full(len(corners), z_lo)]),
         np.column_stack([corners, np.full(len(corners), z_hi)])]
    )
    return convex_hull_3d(prism)


def build_collision_body(
    obj: ObjectInstance, points: np.ndarray, tau_link: float = 0.05
) -> CollisionBody:
    """Cluster surface points and hull each cluster.

    Components are single-linkage clusters at threshold `tau_link`; each
    yields one convex hull (or an extruded 2D hull if too flat).
    """
    pts = np.asarray(points, dtype=float)
    if len(pts) == 0:
        raise DegenerateInputError(f"{obj.instance_id}: no surface points")
    hulls = []
    for idx in _connected_components(pts, tau_link):
        cluster = pts[idx]
        try:
            hulls.append(convex_hull_3d(cluster))
        except DegenerateInputError:
            hulls.append(_extruded_hull(cluster))
    return CollisionBody(
        instance_id=obj.instance_id,
        hulls=hulls,
        is_static=obj.mobility == Mobility.STATIC,
    )


# ---------------------------------------------------------------------------
# 2D convex polygons


@dataclass
class ConvexPolygon2:
    """Strictly convex CCW polygon."""

    vertices: np.ndarray  # (k, 2)

    def __post_init__(self) -> None:
        self.vertices = np.asarray(self.vertices, dtype=float)

    @property
    def area(self) -> float:
        x, y = self.vertices[:, 0], self.vertices[:, 1]
        return float(0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))

    @property
    def centroid(self) -> np.ndarray:
        return self.vertices.mean(axis=0)

    def is_strictly_convex(self, tol: float = 1e-12) -> bool:
        v = self.vertices
        k = len(v)
        if k < 3:
            return False
        for i in range(k):
            a, b, c = v[i], v[(i + 1) % k], v[(i + 2) % k]
            if _cross2(b - a, c - b) <= tol:
                return False
        return True

    def contains_point(self, p: np.ndarray, tol: float = 0.0) -> bool:
        v = self.vertices
        k = len(v)
        p = np.asarray(p, dtype=float)
        for i in range(k):
            a, b = v[i], v[(i + 1) % k]
            if _cross2(b - a, p - a) < -tol:
                return False
        return True


def convex_hull_2d(points: np.ndarray) -> ConvexPolygon2:
    """CCW 2D convex hull; DegenerateInputError if collinear."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 3:
        raise DegenerateInputError(f"need >=3 2D points, got shape {pts.shape}")
    try:
        hull = _SciHull(pts)
    except QhullError as exc:
        raise DegenerateInputError(f"collinear 2D points: {exc}") from exc
    return ConvexPolygon2(pts[hull.vertices])  # scipy emits CCW order in 2D


def thin_rectangle(points: np.ndarray, epsilon: float = 1e-3) -> ConvexPolygon2:
    """Rectangle of width epsilon along the dominant segment of collinear points."""
    pts = np.asarray(points, dtype=float)
    lo = pts[np.argmin(pts @ np.ones(2))]
    hi = pts[np.argmax(pts @ np.ones(2))]
    d = hi - lo
    norm = np.linalg.norm(d)
    if norm < _EPS:  # all points coincide
        d = np.array([1.0, 0.0])
        norm = 1.0
        hi = lo + d * epsilon
    u = d / norm
    n = np.array([-u[1], u[0]]) * (epsilon / 2)
    return ConvexPolygon2(np.array([lo - n, hi - n, hi + n, lo + n]))


# ---------------------------------------------------------------------------
# Contact queries


@dataclass
class Contact2D:
    """Disc-vs-shape contact: push-out normal points toward the disc center."""

    in_contact: bool
    penetration_depth: float
    normal: np.ndarray  # (2,) unit

    @classmethod
    def none(cls) -> "Contact2D":
        return cls(False, 0.0, np.array([1.0, 0.0]))


def _closest_on_segment(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ab = b - a
    denom = float(ab @ ab)
    if denom < _EPS:
        return a
    t = float(np.clip((p - a) @ ab / denom, 0.0, 1.0))
    return a + t * ab


def disc_vs_polygon(center: np.ndarray, radius: float, poly: ConvexPolygon2) -> Contact2D:
    """Contact between a disc and a convex polygon.

    Distance is signed (negative inside), so a disc whose center sits inside
    the polygon reports depth = radius + interior distance to the boundary.
    The normal is the push-out direction: from the closest boundary point
    toward the center when outside, the nearest edge's outward normal when
    the center is inside or exactly on the boundary (at a vertex the
    vertex-to-center direction is used).
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    c = np.asarray(center, dtype=float)
    v = poly.vertices
    k = len(v)

    best_d = np.inf
    best_point = v[0]
    best_edge = 0
    for i in range(k):
        a, b = v[i], v[(i + 1) % k]
        q = _closest_on_segment(c, a, b)
        d = float(np.linalg.norm(c - q))
        if d < best_d:
            best_d, best_point, best_edge = d, q, i

    inside = poly.contains_point(c)
    signed = -best_d if inside else best_d
    depth = max(0.0, radius - signed)
    in_contact = signed < radius

    if not inside and best_d > _EPS:
        normal = (c - best_point) / best_d
    else:
        a, b = v[best_edge], v[(best_edge + 1) % k]
        e = b - a
        normal = np.array([e[1], -e[0]])  # outward for CCW winding
        n = np.linalg.norm(normal)
        normal = normal / n if n > _EPS else np.array([1.0, 0.0])
    return Contact2D(in_contact, depth if in_contact else 0.0, normal)


def disc_vs_segment(center: np.ndarray, radius: float, a: np.ndarray, b: np.ndarray) -> Contact2D:
    """Contact between a disc and a wall segment."""
    c = np.asarray(center, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    q = _closest_on_segment(c, a, b)
    d = float(np.linalg.norm(c - q))
    if d >= radius:
        return Contact2D.none()
    if d > _EPS:
        normal = (c - q) / d
    else:  # center on the segment: pick its left-hand normal
        e = b - a
        n = np.array([-e[1], e[0]])
        nn = np.linalg.norm(n)
        normal = n / nn if nn > _EPS else np.array([1.0, 0.0])
    return Contact2D(True, radius - d, normal)


# ---------------------------------------------------------------------------
# Ray casting


@dataclass
class RayHit:
    t: float
    instance_id: str
    normal: np.ndarray  # (3,) unit, of the struck face


def _ray_vs_hull(origin: np.ndarray, direction: np.ndarray, hull: ConvexHull3):
    """Slab clip against the hull's face planes.

    Returns (t, face_index) of the nearest positive intersection or None.
    A ray starting inside reports its exit point.
    """
    a = hull.normals @ direction          # (F,)
    b = hull.offsets - hull.normals @ origin
    t_lo, t_hi = 0.0, np.inf
    face_lo = face_hi = -1
    for k in range(len(a)):
        ak, bk = a[k], b[k]
        if abs(ak) < _EPS:
            if bk < 0:
                return None  # parallel and outside this plane
            continue
        t = bk / ak
        if ak > 0:  # exiting constraint
            if t < t_hi:
                t_hi, face_hi = t, k
        else:       # entering constraint
            if t > t_lo:
                t_lo, face_lo = t, k
    if t_lo > t_hi or t_hi < _EPS:
        return None
    if face_lo >= 0 and t_lo > _EPS:
        return t_lo, face_lo
    return t_hi, face_hi


def raycast(origin: np.ndarray, direction: np.ndarray, bodies: list[CollisionBody]) -> RayHit | None:
    """Nearest positive-t hull intersection across all bodies."""
    origin = np.asarray(origin, dtype=float)
    direction = np.asarray(direction, dtype=float)
    if abs(np.linalg.norm(direction) - 1.0) > 1e-6:
        raise ValueError("direction must be unit-norm")
    best: RayHit | None = None
    for body in bodies:
        for hull in body.hulls:
            res = _ray_vs_hull(origin, direction, hull)
            if res is None:
                continue
            t, face = res
            if best is None or t < best.t:
                normal = hull.normals[face] if face >= 0 else -direction
                best = RayHit(t=float(t), instance_id=body.instance_id, normal=normal)
    return best


# ---------------------------------------------------------------------------
# Distance helpers


def _point_triangle_distance(p: np.ndarray, a: np.ndarray, b: np.ndarray, c: np.ndarray) -> float:
    ab, ac, ap = b - a, c - a, p - a
    d1, d2 = ab @ ap, ac @ ap
    if d1 <= 0 and d2 <= 0:
        return float(np.linalg.norm(p - a))
    bp = p - b
    d3, d4 = ab @ bp, ac @ bp
    if d3 >= 0 and d4 <= d3:
        return float(np.linalg.norm(p - b))
    vc = d1 * d4 - d3 * d2
    if vc <= 0 and d1 >= 0 and d3 <= 0:
        t = d1 / (d1 - d3)
        return float(np.linalg.norm(p - (a + t * ab)))
    cp = p - c
    d5, d6 = ab @ cp, ac @ cp
    if d6 >= 0 and d5 <= d6:
        return float(np.linalg.norm(p - c))
    vb = d5 * d2 - d1 * d6
    if vb <= 0 and d2 >= 0 and d6 <= 0:
        t = d2 / (d2 - d6)
        return float(np.linalg.norm(p - (a + t * ac)))
    va = d3 * d6 - d5 * d4
    if va <= 0 and (d4 - d3) >= 0 and (d5 - d6) >= 0:
        t = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        return float(np.linalg.norm(p - (b + t * (c - b))))
    n = np.cross(ab, ac)
    nn = np.linalg.norm(n)
    if nn < _EPS:
        return float(np.linalg.norm(p - a))
    return float(abs(ap @ (n / nn)))


def distance_to_hull(point: np.ndarray, hull: ConvexHull3) -> float:
    """Euclidean distance from a 3D point to the hull (0 when inside)."""
    p = np.asarray(point, dtype=float)
    if bool(hull.contains(p[None, :], tol=0.0)[0]):
        return 0.0
    return min(
        _point_triangle_distance(p, hull.vertices[i], hull.vertices[j], hull.vertices[k])
        for i, j, k in hull.faces
    )


def distance_to_bodies(point: np.ndarray, bodies: list[CollisionBody]) -> float:
    """Distance to the nearest hull over all bodies (inf when none)."""
    best = np.inf
    for body in bodies:
        for hull in body.hulls:
            best = min(best, distance_to_hull(point, hull))
            if best == 0.0:
                return 0.0
    return best


def hull_cross_section(hull: ConvexHull3, z: float) -> ConvexPolygon2 | None:
    """Convex polygon where the horizontal plane at height `z` cuts the hull.

    None when the plane misses the hull or touches it only at a point/edge.
    """
    lo, hi = hull.z_range
    if z < lo or z > hi:
        return None
    pts = []
    verts = hull.vertices
    for i, j in hull.edges():
        zi, zj = verts[i, 2], verts[j, 2]
        if abs(zi - z) < 1e-12:
            pts.append(verts[i, :2])
        if abs(zj - z) < 1e-12:
            pts.append(verts[j, :2])
        if (zi < z < zj) or (zj < z < zi):
            t = (z - zi) / (zj - zi)
            pts.append(verts[i, :2] + t * (verts[j, :2] - verts[i, :2]))
    if len(pts) < 3:
        return None
    arr = np.unique(np.round(np.asarray(pts), 12), axis=0)
    if len(arr) < 3:
        return None
    try:
        return convex_hull_2d(arr)
    except DegenerateInputError:
        return None
