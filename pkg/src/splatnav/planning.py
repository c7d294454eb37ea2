"""Grid path search with clearance-aware costs, plus endpoint sampling.

The planner runs 8-connected A* over the occupancy grid.  Each step pays
for distance, for squeezing through low-clearance cells, and for leaving a
preferred area; with the narrow and area weights at zero it reduces to
plain shortest-path search.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np
import shapely
from scipy import ndimage
from shapely.geometry import Polygon

from ._util import largest_remainder, stable_seed
from .errors import ExhaustionError, InvalidEndpointError, UnreachableError
from .mapping import OccupancyGrid
from .scene import Scene, is_door_category

_SQRT2 = float(np.sqrt(2.0))

# 8-connected neighborhood: (dy, dx, diagonal?)
_MOVES = [
    (-1, 0, False), (1, 0, False), (0, -1, False), (0, 1, False),
    (-1, -1, True), (-1, 1, True), (1, -1, True), (1, 1, True),
]


@dataclass(frozen=True)
class PlanCost:
    """Step-cost weights.

    Per step of length s into a cell with clearance c:
        w_dist * s
      + w_narrow * max(0, clearance_soft - c) / clearance_soft * s
      + w_area * s if the cell is outside the preferred area.
    """

    w_dist: float = 1.0
    w_narrow: float = 2.0
    w_area: float = 0.5
    clearance_soft: float = 0.6

    def __post_init__(self) -> None:
        for name in ("w_dist", "w_narrow", "w_area", "clearance_soft"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


@dataclass
class Path2:
    """Ordered 2D waypoints; length is the sum of segment lengths."""

    waypoints: np.ndarray  # (k, 2)
    cost: float | None = None

    def __post_init__(self) -> None:
        self.waypoints = np.asarray(self.waypoints, dtype=float).reshape(-1, 2)

    @property
    def length(self) -> float:
        if len(self.waypoints) < 2:
            return 0.0
        return float(np.linalg.norm(np.diff(self.waypoints, axis=0), axis=1).sum())

    @property
    def start(self) -> np.ndarray:
        return self.waypoints[0]

    @property
    def goal(self) -> np.ndarray:
        return self.waypoints[-1]


def distance_transform(grid: OccupancyGrid) -> np.ndarray:
    """Per-cell Euclidean clearance (m) to the nearest blocked cell.

    The grid border counts as blocked; blocked cells report 0.
    """
    free = ~grid.blocked
    padded = np.zeros((free.shape[0] + 2, free.shape[1] + 2), dtype=bool)
    padded[1:-1, 1:-1] = free
    dist = ndimage.distance_transform_edt(padded, sampling=grid.resolution)
    return dist[1:-1, 1:-1]


def _effective_clearance(clearance: np.ndarray, grid: OccupancyGrid, soft: float) -> np.ndarray:
    """Clamp clearance inside narrow-flagged cells so they draw a penalty."""
    if grid.narrow is None or not grid.narrow.any():
        return clearance
    eff = clearance.copy()
    eff[grid.narrow] = np.minimum(eff[grid.narrow], soft * 0.5)
    return eff


def _simplify_collinear(cells: list[tuple[int, int]]) -> list[tuple[int, int]]:
    if len(cells) < 3:
        return cells
    out = [cells[0]]
    for nxt in cells[1:]:
        if len(out) >= 2:
            ay, ax = out[-2]
            by, bx = out[-1]
            if (by - ay) * (nxt[1] - bx) == (bx - ax) * (nxt[0] - by):
                out[-1] = nxt
                continue
        out.append(nxt)
    return out


def astar(
    grid: OccupancyGrid,
    clearance: np.ndarray,
    cost: PlanCost,
    start,
    goal,
    area_mask: np.ndarray | None = None,
) -> Path2:
    """8-connected A* from `start` to `goal` (world coordinates).

    `area_mask`, when given, marks cells inside the preferred area; steps
    into any other cell pay the w_area surcharge.  Returns cell-center
    waypoints with collinear runs merged, and the accumulated path cost.
    Ties break on (f, h, cell index) so results are reproducible.
    """
    res = grid.resolution
    blocked = grid.blocked
    ny, nx = blocked.shape
    sy, sx = grid.world_to_cell(start)
    gy, gx = grid.world_to_cell(goal)
    for (cy, cx), tag in (((sy, sx), "start"), ((gy, gx), "goal")):
        if not grid.in_bounds(cy, cx):
            raise InvalidEndpointError(f"{tag} cell ({cy},{cx}) outside the grid")
        if blocked[cy, cx]:
            raise InvalidEndpointError(f"{tag} cell ({cy},{cx}) is blocked")

    eff_clear = _effective_clearance(clearance, grid, cost.clearance_soft)
    straight = cost.w_dist * res
    diagonal = cost.w_dist * res * _SQRT2

    def heuristic(cy: int, cx: int) -> float:
        dy = abs(cy - gy)
        dx = abs(cx - gx)
        lo, hi = (dy, dx) if dy < dx else (dx, dy)
        return ((hi - lo) * straight + lo * diagonal) * (1.0 - 1e-12)

    def step_cost(cy: int, cx: int, diag: bool) -> float:
        s = res * (_SQRT2 if diag else 1.0)
        total = cost.w_dist * s
        if cost.w_narrow > 0:
            gap = cost.clearance_soft - eff_clear[cy, cx]
            if gap > 0:
                total += cost.w_narrow * gap / cost.clearance_soft * s
        if cost.w_area > 0 and area_mask is not None and not area_mask[cy, cx]:
            total += cost.w_area * s
        return total

    g_score = {(sy, sx): 0.0}
    came: dict[tuple[int, int], tuple[int, int]] = {}
    h0 = heuristic(sy, sx)
    open_heap: list[tuple[float, float, int, int]] = [(h0, h0, sy, sx)]
    closed: set[tuple[int, int]] = set()

    while open_heap:
        f, h, cy, cx = heapq.heappop(open_heap)
        if (cy, cx) in closed:
            continue
        closed.add((cy, cx))
        if (cy, cx) == (gy, gx):
            cells = [(cy, cx)]
            while cells[-1] in came:
                cells.append(came[cells[-1]])
            cells.reverse()
            cells = _simplify_collinear(cells)
            waypoints = np.array([grid.cell_center(y, x) for y, x in cells])
            return Path2(waypoints=waypoints, cost=g_score[(gy, gx)])
        g_here = g_score[(cy, cx)]
        for dy, dx, diag in _MOVES:
            ty, tx = cy + dy, cx + dx
            if not (0 <= ty < ny and 0 <= tx < nx) or blocked[ty, tx]:
                continue
            if diag and (blocked[cy, tx] or blocked[ty, cx]):
                continue  # no squeezing between blocked corners
            tentative = g_here + step_cost(ty, tx, diag)
            if tentative < g_score.get((ty, tx), np.inf):
                g_score[(ty, tx)] = tentative
                came[(ty, tx)] = (cy, cx)
                th = heuristic(ty, tx)
                heapq.heappush(open_heap, (tentative + th, th, ty, tx))

    raise UnreachableError(f"no path from cell ({sy},{sx}) to ({gy},{gx})")


def geodesic_distance(grid: OccupancyGrid, start, goal) -> float:
    """Shortest traversable distance between two world points (inf if cut off)."""
    try:
        flat = astar(grid, np.zeros(grid.shape), PlanCost(1.0, 0.0, 0.0), start, goal)
    except UnreachableError:
        return float("inf")
    except InvalidEndpointError:
        return float("inf")
    return flat.length


def room_mask(grid: OccupancyGrid, polygon: np.ndarray) -> np.ndarray:
    """Cells whose centers fall inside the room polygon."""
    ny, nx = grid.shape
    ys, xs = np.mgrid[0:ny, 0:nx]
    centers_x = grid.origin[0] + (xs + 0.5) * grid.resolution
    centers_y = grid.origin[1] + (ys + 0.5) * grid.resolution
    poly = Polygon(np.asarray(polygon, dtype=float))
    shapely.prepare(poly)
    pts = shapely.points(centers_x.ravel(), centers_y.ravel())
    return shapely.covers(poly, pts).reshape(ny, nx)


@dataclass
class EndpointSample:
    start: np.ndarray          # (2,) world
    goal: np.ndarray           # (2,) world
    target_instance: str | None
    start_room: str | None = None
    goal_room: str | None = None
    geodesic: float = 0.0


@dataclass
class EndpointConstraints:
    min_geodesic: float = 2.0
    min_safety: float = 0.5
    attempts: int = 200


def sample_endpoints(
    scene: Scene,
    grid: OccupancyGrid,
    constraints: EndpointConstraints,
    seed: int = 0,
    clearance: np.ndarray | None = None,
) -> EndpointSample:
    """Draw a start/goal pair with safety clearance and a minimum geodesic.

    Goals gravitate to object instances and starts to a different room when
    the scene offers one, so batches spread across rooms, areas and
    instances.  Fully deterministic for a given seed.
    """
    if clearance is None:
        clearance = distance_transform(grid)
    rng = np.random.default_rng(stable_seed("endpoints", scene.scene_id, seed))
    eligible = (~grid.blocked) & (clearance >= constraints.min_safety)
    if not eligible.any():
        raise ExhaustionError("no cells satisfy the safety clearance")
    masks = {room.name: room_mask(grid, room.polygon) & eligible for room in scene.rooms}
    masks = {name: m for name, m in masks.items() if m.any()}
    candidates = [
        o.instance_id
        for o in sorted(scene.objects, key=lambda o: o.instance_id)
        if not is_door_category(o.category)
    ]

    def room_of(cell: tuple[int, int]) -> str | None:
        for name, m in masks.items():
            if m[cell]:
                return name
        return None

    def pick_cell(mask: np.ndarray) -> tuple[int, int] | None:
        ys, xs = np.nonzero(mask)
        if len(ys) == 0:
            return None
        i = int(rng.integers(len(ys)))
        return int(ys[i]), int(xs[i])

    for _ in range(constraints.attempts):
        target = candidates[int(rng.integers(len(candidates)))] if candidates else None
        if target is not None:
            centroid = scene.object_by_id(target).centroid[:2]
            goal_cell = _nearest_eligible(grid, eligible, centroid)
        else:
            goal_cell = pick_cell(eligible)
        if goal_cell is None:
            continue
        goal_room = room_of(goal_cell)
        other_rooms = [n for n in masks if n != goal_room]
        if other_rooms:
            start_room = other_rooms[int(rng.integers(len(other_rooms)))]
            start_cell = pick_cell(masks[start_room])
        else:
            start_room = goal_room
            start_cell = pick_cell(eligible)
        if start_cell is None or start_cell == goal_cell:
            continue
        start_pt = grid.cell_center(*start_cell)
        goal_pt = grid.cell_center(*goal_cell)
        geo = geodesic_distance(grid, start_pt, goal_pt)
        if geo < constraints.min_geodesic or not np.isfinite(geo):
            continue
        return EndpointSample(
            start=start_pt,
            goal=goal_pt,
            target_instance=target,
            start_room=start_room,
            goal_room=goal_room,
            geodesic=geo,
        )
    raise ExhaustionError(
        f"no endpoint pair found in {constraints.attempts} attempts "
        f"(min_geodesic={constraints.min_geodesic}, min_safety={constraints.min_safety})"
    )


def _nearest_eligible(grid: OccupancyGrid, eligible: np.ndarray, point) -> tuple[int, int] | None:
    """BFS ring search for the eligible cell nearest a world point."""
    cy, cx = grid.world_to_cell(point)
    ny, nx = grid.shape
    cy = min(max(cy, 0), ny - 1)
    cx = min(max(cx, 0), nx - 1)
    if eligible[cy, cx]:
        return cy, cx
    max_r = max(ny, nx)
    for r in range(1, max_r):
        best = None
        for dy in range(-r, r + 1):
            for dx in range(-r, r + 1):
                if max(abs(dy), abs(dx)) != r:
                    continue
                ty, tx = cy + dy, cx + dx
                if 0 <= ty < ny and 0 <= tx < nx and eligible[ty, tx]:
                    d = dy * dy + dx * dx
                    if best is None or d < best[0]:
                        best = (d, ty, tx)
        if best is not None:
            return best[1], best[2]
    return None


def allocate_budget(weights, total: int) -> np.ndarray:
    """Proportional integer allocation (largest remainder)."""
    return largest_remainder(weights, total)
