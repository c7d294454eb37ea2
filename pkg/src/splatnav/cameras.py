"""Capture-planning for splat reconstruction: where to put the cameras.

Two complementary policies: perimeter-aware sweeps walk inwardly offset
rings of each room with inward-facing cameras at three heights and three
tangential baselines, and volume-uniform sampling scatters Poisson-disk
positions with a six-way canonical orientation template.  A final pass
rejects poses that sit too close to collision geometry.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import shapely
from shapely.geometry import LineString, Polygon
from shapely.geometry.polygon import orient

from ._util import largest_remainder, stable_seed
from .errors import DegenerateInputError
from .geometry import CollisionBody, distance_to_bodies
from .scene import Room


@dataclass
class CameraPose:
    position: np.ndarray  # (3,)
    yaw: float            # rad
    pitch: float          # rad, positive up
    policy: str           # "perimeter" | "volume"
    tier: str             # "lower" | "middle" | "upper" | "volume"
    room: str = ""

    def to_dict(self, accepted: bool = True, reason: str | None = None) -> dict:
        out = {
            "position": [float(v) for v in self.position],
            "yaw_deg": float(np.rad2deg(self.yaw)),
            "pitch_deg": float(np.rad2deg(self.pitch)),
            "policy": self.policy,
            "tier": self.tier,
            "room": self.room,
            "accepted": accepted,
        }
        if reason is not None:
            out["reason"] = reason
        return out


@dataclass
class CameraPlan:
    poses: list[CameraPose] = field(default_factory=list)
    rejected: list[tuple[CameraPose, str]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.poses)


def inward_offset(polygon: np.ndarray, distances) -> list[np.ndarray]:
    """Inward offsets of a simple polygon at each distance in the schedule.

    Offsets that collapse the polygon are dropped; when an offset splits
    the polygon the largest piece is kept.
    """
    poly = orient(Polygon(np.asarray(polygon, dtype=float)))
    out: list[np.ndarray] = []
    for d in distances:
        shrunk = poly.buffer(-float(d), join_style="mitre")
        if shrunk.is_empty:
            continue
        if shrunk.geom_type == "MultiPolygon":
            shrunk = max(shrunk.geoms, key=lambda g: g.area)
        if shrunk.area <= 0:
            continue
        ring = orient(shrunk)
        coords = np.asarray(ring.exterior.coords)[:-1]  # drop closing dup
        out.append(coords)
    return out


_OUTER_PITCHES = (np.deg2rad(30.0), 0.0, np.deg2rad(-30.0))
_INNER_PITCHES = (np.deg2rad(15.0), 0.0, np.deg2rad(-15.0))
_TIER_TAGS = ("lower", "middle", "upper")


def tier_heights(floor_z: float, ceiling_z: float) -> tuple[float, float, float]:
    """Outer-ring tier heights: just above the floor, mid, below the ceiling."""
    return (floor_z + 0.15, (floor_z + ceiling_z) / 2.0, ceiling_z - 0.5)


def perimeter_sweep(
    rooms: list[Room],
    floor_z: float,
    ceiling_z: float,
    budget: int,
    offsets=(0.3, 0.9),
    baseline: float = 0.15,
) -> CameraPlan:
    """Perimeter-proportional sweep placements along inward offset rings.

    The global placement budget splits across rooms proportionally to their
    perimeters (largest remainder), then across each room's rings by ring
    perimeter.  Every placement emits 9 poses: three tangential baselines
    (left/center/right along the ring) times three vertical tiers.  Outer
    rings pitch +-30 degrees at the lower/upper tiers, inner rings +-15
    with heights pulled toward mid.
    """
    if budget < len(rooms):
        raise ValueError(f"budget {budget} below room count {len(rooms)}")
    ring_sets = []
    for room in rooms:
        rings = inward_offset(room.polygon, offsets)
        if not rings:
            raise DegenerateInputError(
                f"room {room.name!r}: offset schedule {tuple(offsets)} collapses the polygon"
            )
        ring_sets.append(rings)

    perims = [float(Polygon(np.asarray(r.polygon, float)).length) for r in rooms]
    per_room = largest_remainder(perims, budget)
    h_low, h_mid, h_up = tier_heights(floor_z, ceiling_z)
    m = len(offsets)

    plan = CameraPlan()
    for room, rings, count in zip(rooms, ring_sets, per_room):
        if count == 0:
            continue
        ring_lines = [LineString(np.vstack([ring, ring[:1]])) for ring in rings]
        per_ring = largest_remainder([ln.length for ln in ring_lines], int(count))
        for j, (line, k) in enumerate(zip(ring_lines, per_ring), start=1):
            if k == 0:
                continue
            frac = (j - 1) / m
            heights = (
                h_low + frac * (h_mid - h_low),
                h_mid,
                h_up + frac * (h_mid - h_up),
            )
            pitches = _OUTER_PITCHES if j == 1 else _INNER_PITCHES
            L = line.length
            for i in range(k):
                s = (i + 0.5) / k * L
                for ds in (-baseline, 0.0, baseline):
                    p = line.interpolate((s + ds) % L)
                    ahead = line.interpolate((s + ds + 1e-4) % L)
                    tangent = np.array([ahead.x - p.x, ahead.y - p.y])
                    norm = np.linalg.norm(tangent)
                    if norm < 1e-12:
                        tangent = np.array([1.0, 0.0])
                        norm = 1.0
                    tangent /= norm
                    inward = np.array([-tangent[1], tangent[0]])  # left of CCW travel
                    yaw = float(np.arctan2(inward[1], inward[0]))
                    for tag, height, pitch_lp in zip(_TIER_TAGS, heights, (pitches[0], pitches[1], pitches[2])):
                        plan.poses.append(
                            CameraPose(
                                position=np.array([p.x, p.y, height]),
                                yaw=yaw,
                                pitch=float(pitch_lp),
                                policy="perimeter",
                                tier=tag,
                                room=room.name,
                            )
                        )
    return plan


DEFAULT_TEMPLATES = (
    (0.0, 0.0), (90.0, 0.0), (180.0, 0.0), (270.0, 0.0),
    (0.0, 60.0), (0.0, -60.0),
)  # canonical (yaw_deg, pitch_deg) six-pack


def volume_uniform(
    rooms: list[Room],
    floor_z: float,
    ceiling_z: float,
    budget: int,
    min_dist: float,
    templates=DEFAULT_TEMPLATES,
    seed: int = 0,
    z_margin: float = 0.3,
    max_attempts_per_sample: int = 30,
    perturb_deg: float = 5.0,
) -> CameraPlan:
    """Volume-proportional Poisson-disk positions, six templated poses each.

    Dart throwing keeps every accepted position at least `min_dist` from
    all others (across rooms).  All six poses at a position share one small
    random orientation perturbation.  Warns on saturation when a room's
    share cannot be met at this radius.
    """
    if min_dist <= 0:
        raise ValueError("min_dist must be positive")
    rng = np.random.default_rng(stable_seed("volume-uniform", seed))
    heights = ceiling_z - floor_z
    volumes = [float(Polygon(np.asarray(r.polygon, float)).area) * heights for r in rooms]
    per_room = largest_remainder(volumes, budget)
    z_lo = floor_z + z_margin
    z_hi = max(z_lo, ceiling_z - z_margin)

    plan = CameraPlan()
    accepted: list[np.ndarray] = []
    for room, want in zip(rooms, per_room):
        poly = Polygon(np.asarray(room.polygon, float))
        shapely.prepare(poly)
        minx, miny, maxx, maxy = poly.bounds
        placed = 0
        attempts = 0
        limit = max_attempts_per_sample * max(1, int(want))
        while placed < want and attempts < limit:
            attempts += 1
            x = rng.uniform(minx, maxx)
            y = rng.uniform(miny, maxy)
            z = rng.uniform(z_lo, z_hi)
            if not poly.covers(shapely.points(x, y)):
                continue
            p = np.array([x, y, z])
            if any(np.linalg.norm(p - q) < min_dist for q in accepted):
                continue
            accepted.append(p)
            placed += 1
            dyaw = np.deg2rad(rng.uniform(-perturb_deg, perturb_deg))
            dpitch = np.deg2rad(rng.uniform(-perturb_deg, perturb_deg))
            for yaw_deg, pitch_deg in templates:
                plan.poses.append(
                    CameraPose(
                        position=p.copy(),
                        yaw=float(np.deg2rad(yaw_deg) + dyaw),
                        pitch=float(np.deg2rad(pitch_deg) + dpitch),
                        policy="volume",
                        tier="volume",
                        room=room.name,
                    )
                )
        if placed < want:
            warnings.warn(
                f"volume_uniform: room {room.name!r} saturated at {placed}/{want} "
                f"positions for radius {min_dist}",
                stacklevel=2,
            )
    return plan


def reject_near_surface(
    plan: CameraPlan, bodies: list[CollisionBody], d_min: float
) -> CameraPlan:
    """Move poses closer than `d_min` to any hull into the rejected list."""
    if d_min <= 0:
        raise ValueError("d_min must be positive")
    out = CameraPlan(rejected=list(plan.rejected))
    for pose in plan.poses:
        d = distance_to_bodies(pose.position, bodies)
        if d < d_min:
            out.rejected.append((pose, f"distance {d:.3f} m below threshold {d_min} m"))
        else:
            out.poses.append(pose)
    return out


def save_plan_jsonl(plan: CameraPlan, path: str | Path) -> None:
    lines = [json.dumps(p.to_dict(accepted=True), sort_keys=True) for p in plan.poses]
    lines += [
        json.dumps(p.to_dict(accepted=False, reason=reason), sort_keys=True)
        for p, reason in plan.rejected
    ]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def save_plan_svg(plan: CameraPlan, rooms: list[Room], path: str | Path, scale: float = 60.0) -> None:
    """Top-down debug rendering: green accepted poses, red rejected."""
    pts = np.vstack([np.asarray(r.polygon, float) for r in rooms]) if rooms else np.zeros((1, 2))
    lo = pts.min(axis=0) - 0.5
    hi = pts.max(axis=0) + 0.5
    size = (hi - lo) * scale

    def sx(x: float) -> float:
        return (x - lo[0]) * scale

    def sy(y: float) -> float:
        return (hi[1] - y) * scale  # flip so +y is up

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size[0]:.0f}" height="{size[1]:.0f}">',
        f'<rect width="{size[0]:.0f}" height="{size[1]:.0f}" fill="white"/>',
    ]
    for room in rooms:
        coords = " ".join(f"{sx(x):.1f},{sy(y):.1f}" for x, y in np.asarray(room.polygon, float))
        parts.append(f'<polygon points="{coords}" fill="none" stroke="black" stroke-width="1.5"/>')
    for pose, _ in plan.rejected:
        parts.append(
            f'<circle cx="{sx(pose.position[0]):.1f}" cy="{sy(pose.position[1]):.1f}" r="3" fill="red"/>'
        )
    for pose in plan.poses:
        x, y = sx(pose.position[0]), sy(pose.position[1])
        dx = 8 * np.cos(pose.yaw)
        dy = -8 * np.sin(pose.yaw)
        parts.append(f'<circle cx="{x:.1f}" cy="{y:.1f}" r="3" fill="green"/>')
        parts.append(
            f'<line x1="{x:.1f}" y1="{y:.1f}" x2="{x + dx:.1f}" y2="{y + dy:.1f}" '
            'stroke="green" stroke-width="1"/>'
        )
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n", encoding="utf-8")
