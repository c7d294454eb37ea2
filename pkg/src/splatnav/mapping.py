"""Top-down semantic map and height-slice occupancy grid.

Object footprints are convex hulls of vertically projected surface points;
the occupancy grid is cut from the collision hulls at a fixed slice height
(default 1.2 m), inflated by the agent radius, with walls non-traversable
and doors blocking only while closed.  Rasterization is conservative: any
overlap blocks the cell.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import shapely
from shapely.geometry import LineString, Polygon
from shapely.ops import unary_union

from .errors import DegenerateInputError
from .geometry import CollisionBody, ConvexPolygon2, convex_hull_2d, hull_cross_section, thin_rectangle
from .scene import DoorState, ObjectInstance, Scene, is_door_category, object_surface_points


def project_footprint(obj: ObjectInstance, points: np.ndarray, epsilon: float = 1e-3) -> ConvexPolygon2:
    """2D convex hull of the vertically projected surface points.

    Collinear projections degrade to a thin rectangle of width `epsilon`
    along the segment so every object owns a usable footprint.
    """
    flat = np.asarray(points, dtype=float)[:, :2]
    try:
        return convex_hull_2d(flat)
    except DegenerateInputError:
        return thin_rectangle(flat, epsilon)


def fuse_masks(masks: list[ConvexPolygon2]):
    """Geometric union of footprint masks, as a shapely polygon set."""
    if not masks:
        raise ValueError("masks must be non-empty")
    return unary_union([Polygon(m.vertices) for m in masks])


@dataclass
class SemanticTopDownMap:
    """Per-object footprints plus door states and wall segments."""

    footprints: dict[str, ConvexPolygon2]
    door_marks: dict[str, DoorState]
    wall_segments: list[np.ndarray]
    bounds: tuple[np.ndarray, np.ndarray]  # (min2, max2)
    categories: dict[str, str] = field(default_factory=dict)
    attributes: dict[str, dict[str, str]] = field(default_factory=dict)


def build_semantic_map(scene: Scene, points_per_object: int = 256) -> SemanticTopDownMap:
    """Project every object into the ground plane."""
    footprints: dict[str, ConvexPolygon2] = {}
    door_marks: dict[str, DoorState] = {}
    categories: dict[str, str] = {}
    attributes: dict[str, dict[str, str]] = {}
    for obj in sorted(scene.objects, key=lambda o: o.instance_id):
        pts = object_surface_points(obj, points_per_object)
        footprints[obj.instance_id] = project_footprint(obj, pts)
        categories[obj.instance_id] = obj.category
        attributes[obj.instance_id] = dict(obj.attributes)
        if is_door_category(obj.category) and obj.door_state is not None:
            door_marks[obj.instance_id] = obj.door_state
    return SemanticTopDownMap(
        footprints=footprints,
        door_marks=door_marks,
        wall_segments=[np.asarray(w, dtype=float) for w in scene.walls],
        bounds=scene.bounds(),
        categories=categories,
        attributes=attributes,
    )


@dataclass
class OccupancyGrid:
    """Binary traversability raster at a height slice."""

    resolution: float
    origin: np.ndarray          # world coords of the (0, 0) cell corner
    blocked: np.ndarray         # (ny, nx) bool, True = blocked
    slice_height: float
    narrow: np.ndarray | None = None  # cells traversable but flagged tight

    @property
    def cells(self) -> np.ndarray:
        return self.blocked

    @property
    def shape(self) -> tuple[int, int]:
        return self.blocked.shape

    def world_to_cell(self, p) -> tuple[int, int]:
        x, y = float(p[0]), float(p[1])
        ix = int(np.floor((x - self.origin[0]) / self.resolution))
        iy = int(np.floor((y - self.origin[1]) / self.resolution))
        return iy, ix

    def cell_center(self, iy: int, ix: int) -> np.ndarray:
        return self.origin + (np.array([ix, iy]) + 0.5) * self.resolution

    def in_bounds(self, iy: int, ix: int) -> bool:
        ny, nx = self.blocked.shape
        return 0 <= iy < ny and 0 <= ix < nx

    def is_free(self, p) -> bool:
        iy, ix = self.world_to_cell(p)
        return self.in_bounds(iy, ix) and not self.blocked[iy, ix]

    def free_cell_count(self) -> int:
        return int((~self.blocked).sum())


def _rasterize(geom, grid_blocked: np.ndarray, origin: np.ndarray, res: float) -> None:
    """Mark every cell whose box overlaps `geom` (conservative)."""
    ny, nx = grid_blocked.shape
    minx, miny, maxx, maxy = geom.bounds
    # one extra ring so cells that merely touch the boundary are tested too
    ix0 = max(0, int(np.floor((minx - origin[0]) / res)) - 1)
    ix1 = min(nx - 1, int(np.floor((maxx - origin[0]) / res)) + 1)
    iy0 = max(0, int(np.floor((miny - origin[1]) / res)) - 1)
    iy1 = min(ny - 1, int(np.floor((maxy - origin[1]) / res)) + 1)
    if ix1 < ix0 or iy1 < iy0:
        return
    xs = origin[0] + np.arange(ix0, ix1 + 1) * res
    ys = origin[1] + np.arange(iy0, iy1 + 1) * res
    gx, gy = np.meshgrid(xs, ys)
    boxes = shapely.box(gx.ravel(), gy.ravel(), gx.ravel() + res, gy.ravel() + res)
    shapely.prepare(geom)
    hits = shapely.intersects(geom, boxes).reshape(gy.shape)
    grid_blocked[iy0:iy1 + 1, ix0:ix1 + 1] |= hits


def build_occupancy(
    scene: Scene,
    bodies: dict[str, CollisionBody],
    slice_height: float = 1.2,
    agent_radius: float = 0.25,
    resolution: float = 0.05,
    inflate: bool = True,
) -> OccupancyGrid:
    """Rasterize the navigation substrate.

    A cell is blocked iff it intersects (a) any non-door hull's cross
    section at `slice_height`, inflated by the agent radius, (b) any wall
    segment, same inflation, or (c) a closed door's footprint.  Open and
    half-open doors stay traversable; half-open footprints are flagged
    narrow for planner penalties.
    """
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    lo, hi = scene.bounds()
    pad = (agent_radius if inflate else 0.0) + 2 * resolution
    origin = lo - pad
    extent = (hi - lo) + 2 * pad
    nx = max(1, int(np.ceil(extent[0] / resolution)))
    ny = max(1, int(np.ceil(extent[1] / resolution)))
    blocked = np.zeros((ny, nx), dtype=bool)
    narrow = np.zeros((ny, nx), dtype=bool)

    grow = agent_radius if inflate else 0.0
    door_state: dict[str, DoorState | None] = {
        o.instance_id: o.door_state for o in scene.objects if is_door_category(o.category)
    }

    for instance_id in sorted(bodies):
        if instance_id in door_state:
            continue  # doors handled by state below
        body = bodies[instance_id]
        for hull in body.hulls:
            section = hull_cross_section(hull, slice_height)
            if section is None:
                continue
            geom = Polygon(section.vertices)
            if grow > 0:
                geom = geom.buffer(grow, quad_segs=16)
            _rasterize(geom, blocked, origin, resolution)

    for wall in scene.walls:
        geom = LineString(np.asarray(wall, dtype=float))
        if grow > 0:
            geom = geom.buffer(grow, quad_segs=16)
        _rasterize(geom, blocked, origin, resolution)

    for obj in sorted(scene.objects, key=lambda o: o.instance_id):
        state = door_state.get(obj.instance_id)
        if state is None:
            continue
        pts = object_surface_points(obj, 64)
        foot = Polygon(project_footprint(obj, pts).vertices)
        if state == DoorState.CLOSED:
            _rasterize(foot, blocked, origin, resolution)
        elif state == DoorState.HALF_OPEN:
            _rasterize(foot, narrow, origin, resolution)

    narrow &= ~blocked
    return OccupancyGrid(
        resolution=resolution,
        origin=origin.astype(float),
        blocked=blocked,
        slice_height=slice_height,
        narrow=narrow,
    )


# ---------------------------------------------------------------------------
# Exports


def write_occupancy_pgm(grid: OccupancyGrid, path: str | Path) -> None:
    """P5 PGM (0 = blocked, 255 = free) plus a JSON sidecar."""
    path = Path(path)
    ny, nx = grid.blocked.shape
    img = np.where(grid.blocked, 0, 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{nx} {ny}\n255\n".encode("ascii"))
        fh.write(img.tobytes())
    sidecar = {
        "resolution": grid.resolution,
        "origin": [float(grid.origin[0]), float(grid.origin[1])],
        "slice_height": grid.slice_height,
    }
    path.with_suffix(".json").write_text(
        json.dumps(sidecar, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )


def read_occupancy_pgm(path: str | Path) -> OccupancyGrid:
    path = Path(path)
    raw = path.read_bytes()
    if not raw.startswith(b"P5"):
        raise ValueError(f"{path}: not a P5 PGM")
    parts = raw.split(b"\n", 3)
    nx, ny = (int(v) for v in parts[1].split())
    img = np.frombuffer(parts[3], dtype=np.uint8, count=nx * ny).reshape(ny, nx)
    sidecar = json.loads(path.with_suffix(".json").read_text(encoding="utf-8"))
    return OccupancyGrid(
        resolution=float(sidecar["resolution"]),
        origin=np.asarray(sidecar["origin"], dtype=float),
        blocked=img == 0,
        slice_height=float(sidecar["slice_height"]),
    )


def semantic_map_to_json(sem: SemanticTopDownMap) -> str:
    """GeoJSON-flavored polygon list for downstream consumers."""
    payload = {
        "bounds": [list(map(float, sem.bounds[0])), list(map(float, sem.bounds[1]))],
        "walls": [[[float(x), float(y)] for x, y in w] for w in sem.wall_segments],
        "features": [
            {
                "instance_id": iid,
                "category": sem.categories.get(iid, ""),
                "attributes": sem.attributes.get(iid, {}),
                "polygon": [[float(x), float(y)] for x, y in poly.vertices],
                **(
                    {"door_state": sem.door_marks[iid].value}
                    if iid in sem.door_marks
                    else {}
                ),
            }
            for iid, poly in sorted(sem.footprints.items())
        ],
    }
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def write_semantic_map(sem: SemanticTopDownMap, path: str | Path) -> None:
    Path(path).write_text(semantic_map_to_json(sem), encoding="utf-8")
