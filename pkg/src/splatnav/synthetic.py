"""Deterministic synthetic desk-scale scenes for tests, demos and fixtures.

Real captures are annotated reconstructions; these generators produce
small apartments with the same interchange format so the whole pipeline
can run hermetically.  Everything is seeded: the same call always emits
byte-identical scene files.
"""

from __future__ import annotations

import numpy as np

from ._util import largest_remainder, stable_seed
from .scene import (
    DoorState,
    GaussianCloud,
    Mobility,
    ObjectInstance,
    Room,
    Scene,
    object_surface_points,
)

_PALETTE = {
    "sofa": (0.75, 0.15, 0.15),
    "coffee_table": (0.55, 0.35, 0.20),
    "bookshelf": (0.45, 0.30, 0.15),
    "tv_stand": (0.20, 0.20, 0.25),
    "bed": (0.90, 0.90, 0.95),
    "wardrobe": (0.50, 0.40, 0.30),
    "desk": (0.60, 0.45, 0.25),
    "chair": (0.20, 0.35, 0.70),
    "lamp": (0.95, 0.90, 0.60),
    "plant": (0.20, 0.55, 0.25),
    "door": (0.70, 0.55, 0.35),
    "crate": (0.60, 0.50, 0.30),
}
_FLOOR_COLOR = (0.82, 0.78, 0.72)
_WALL_COLOR = (0.92, 0.92, 0.90)


def _obj(iid, category, mn, mx, attrs=None, door=None, mobility=Mobility.STATIC):
    return ObjectInstance(
        instance_id=iid,
        category=category,
        aabb_min=np.asarray(mn, dtype=float),
        aabb_max=np.asarray(mx, dtype=float),
        attributes=dict(attrs or {}),
        door_state=door,
        mobility=mobility,
    )


def _splat_cloud(scene: Scene, count: int, seed: int) -> GaussianCloud:
    """Scatter splats over floor, walls and object boxes with flat colors."""
    rng = np.random.default_rng(stable_seed("splats", scene.scene_id, seed))
    lo, hi = scene.bounds()

    surfaces = []  # (weight, sampler, color)
    floor_area = float(np.prod(hi - lo))

    def floor_sampler(n):
        pts = np.column_stack(
            [rng.uniform(lo[0], hi[0], n), rng.uniform(lo[1], hi[1], n), np.full(n, scene.floor_z)]
        )
        return pts

    surfaces.append((floor_area, floor_sampler, _FLOOR_COLOR))

    wall_h = scene.ceiling_z - scene.floor_z
    for wall in scene.walls:
        a, b = np.asarray(wall, dtype=float)
        length = float(np.linalg.norm(b - a))

        def wall_sampler(n, a=a, b=b):
            t = rng.uniform(0, 1, n)
            z = rng.uniform(scene.floor_z, scene.ceiling_z, n)
            xy = a[None, :] + t[:, None] * (b - a)[None, :]
            return np.column_stack([xy, z])

        surfaces.append((length * wall_h, wall_sampler, _WALL_COLOR))

    for obj in scene.objects:
        ext = np.asarray(obj.aabb_max) - np.asarray(obj.aabb_min)
        area = 2 * (ext[0] * ext[1] + ext[0] * ext[2] + ext[1] * ext[2])
        color = _PALETTE.get(obj.category, (0.5, 0.5, 0.5))

        def obj_sampler(n, obj=obj):
            pts = object_surface_points(obj, max(8, n))
            if len(pts) > n:
                pts = pts[rng.choice(len(pts), n, replace=False)]
            return pts

        surfaces.append((max(area, 1e-6), obj_sampler, color))

    weights = np.array([s[0] for s in surfaces])
    counts = largest_remainder(weights, count)
    means, colors = [], []
    for (w, sampler, color), k in zip(surfaces, counts):
        if k == 0:
            continue
        pts = sampler(int(k))
        means.append(pts)
        jitter = rng.normal(0, 0.04, size=(len(pts), 3))
        colors.append(np.clip(np.asarray(color)[None, :] + jitter, 0, 1))
    means = np.vstack(means) if means else np.zeros((0, 3))
    n = len(means)

    quats = rng.normal(size=(n, 4))
    quats /= np.linalg.norm(quats, axis=1, keepdims=True)
    cloud = GaussianCloud(
        means=means.astype(np.float32),
        scales=rng.uniform(0.01, 0.05, size=(n, 3)).astype(np.float32),
        rotations=quats.astype(np.float32),
        opacities=rng.uniform(0.7, 1.0, size=n).astype(np.float32),
        colors=np.vstack(colors).astype(np.float32) if n else np.zeros((0, 3), np.float32),
    )
    return cloud


def make_apartment_small(seed: int = 7, gaussian_count: int = 5000) -> Scene:
    """Two-room apartment: 12 objects, a doored interior wall, 5k splats."""
    taxonomy = sorted(set(_PALETTE) - {"crate"})
    objects = [
        _obj("door_0", "door", (5.95, 2.2, 0.0), (6.05, 3.4, 2.1),
             attrs={"material": "wood"}, door=DoorState.OPEN, mobility=Mobility.ARTICULATED),
        # living room (x < 6)
        _obj("sofa_0", "sofa", (1.0, 4.3, 0.0), (3.0, 5.3, 1.3), attrs={"color": "red"}),
        _obj("coffee_table_0", "coffee_table", (1.8, 2.6, 0.0), (2.8, 3.2, 0.45),
             attrs={"material": "oak"}),
        _obj("bookshelf_0", "bookshelf", (0.15, 0.15, 0.0), (1.15, 0.55, 2.0),
             attrs={"contents": "books"}),
        _obj("tv_stand_0", "tv_stand", (4.4, 5.4, 0.0), (5.7, 5.85, 0.5), attrs={"color": "black"}),
        _obj("chair_1", "chair", (3.5, 2.7, 0.0), (4.0, 3.2, 0.95), attrs={"color": "green"},
             mobility=Mobility.MOVABLE),
        _obj("plant_0", "plant", (0.25, 5.4, 0.0), (0.65, 5.8, 1.4), attrs={"state": "healthy"}),
        # bedroom (x > 6)
        _obj("bed_0", "bed", (8.1, 3.6, 0.0), (9.85, 5.85, 0.6), attrs={"color": "white"}),
        _obj("wardrobe_0", "wardrobe", (9.35, 0.15, 0.0), (9.85, 1.65, 2.2),
             attrs={"state": "closed"}),
        _obj("desk_0", "desk", (6.35, 0.15, 0.0), (7.55, 0.75, 0.75), attrs={"material": "pine"}),
        _obj("chair_0", "chair", (6.9, 0.95, 0.0), (7.4, 1.45, 0.95), attrs={"color": "blue"},
             mobility=Mobility.MOVABLE),
        _obj("lamp_0", "lamp", (9.6, 5.6, 0.0), (9.85, 5.85, 1.5), attrs={"state": "on"}),
    ]
    scene = Scene(
        scene_id="apartment_small",
        objects=objects,
        gaussians=GaussianCloud.empty(),
        rooms=[
            Room("living room", "living", np.array([[0.0, 0.0], [6.0, 0.0], [6.0, 6.0], [0.0, 6.0]])),
            Room("bedroom", "sleeping", np.array([[6.0, 0.0], [10.0, 0.0], [10.0, 6.0], [6.0, 6.0]])),
        ],
        walls=[
            np.array([[0.0, 0.0], [10.0, 0.0]]),
            np.array([[10.0, 0.0], [10.0, 6.0]]),
            np.array([[10.0, 6.0], [0.0, 6.0]]),
            np.array([[0.0, 6.0], [0.0, 0.0]]),
            np.array([[6.0, 0.0], [6.0, 2.2]]),
            np.array([[6.0, 3.4], [6.0, 6.0]]),
        ],
        floor_z=0.0,
        ceiling_z=2.5,
        taxonomy=taxonomy,
    )
    scene.gaussians = _splat_cloud(scene, gaussian_count, seed)
    scene.validate()
    return scene


def make_sealed_box(size: float = 5.0, seed: int = 3, gaussian_count: int = 200) -> Scene:
    """Empty square room with four sealing walls (tunneling stress scene)."""
    s = float(size)
    scene = Scene(
        scene_id="sealed_box",
        objects=[
            _obj("crate_0", "crate", (s / 2 - 0.2, s / 2 - 0.2, 0.0),
                 (s / 2 + 0.2, s / 2 + 0.2, 0.4)),
        ],
        gaussians=GaussianCloud.empty(),
        rooms=[Room("box", "test", np.array([[0.0, 0.0], [s, 0.0], [s, s], [0.0, s]]))],
        walls=[
            np.array([[0.0, 0.0], [s, 0.0]]),
            np.array([[s, 0.0], [s, s]]),
            np.array([[s, s], [0.0, s]]),
            np.array([[0.0, s], [0.0, 0.0]]),
        ],
        floor_z=0.0,
        ceiling_z=2.5,
        taxonomy=["crate"],
    )
    scene.gaussians = _splat_cloud(scene, gaussian_count, seed)
    scene.validate()
    return scene
