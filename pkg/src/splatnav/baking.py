"""Offline artifact cache: collision bodies, occupancy, semantic map.

Baking a scene directory writes derived artifacts into `<scene>/cache/`
stamped with a content hash; later loads reuse them when the stamp still
matches and silently rebuild (with a warning) when it does not.

`collision.bin`: magic ``SCLB``, u32 version, u32 body count, then per
body: u16 id length + utf-8 id, u8 static flag, u32 hull count; per hull
u32 vertex count, u32 face count, vertices as little-endian f64 triples,
faces as u32 triples (outward winding).
"""

from __future__ import annotations

import json
import logging
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import Config, DEFAULT_CONFIG
from .errors import SceneFormatError
from .geometry import CollisionBody, ConvexHull3, build_collision_body
from .mapping import (
    OccupancyGrid,
    build_occupancy,
    build_semantic_map,
    read_occupancy_pgm,
    write_occupancy_pgm,
    write_semantic_map,
)
from .scene import Scene, load_scene, object_surface_points, scene_content_hash

log = logging.getLogger(__name__)

COLLISION_MAGIC = b"SCLB"
COLLISION_VERSION = 1
BAKE_VERSION = 1


def _sample_count_for_linkage(obj, tau_link: float) -> int:
    """Points needed so box-face sampling stays denser than the linkage
    threshold (worst-case jittered spacing 2*cell <= tau)."""
    ext = np.asarray(obj.aabb_max, float) - np.asarray(obj.aabb_min, float)
    area = 2.0 * (ext[0] * ext[1] + ext[0] * ext[2] + ext[1] * ext[2])
    need = 4.0 * area / (tau_link * tau_link)
    return int(np.clip(need, 256, 60000))


def build_all_bodies(
    scene: Scene, tau_link: float = 0.05, points_per_object: int | None = None
) -> dict[str, CollisionBody]:
    bodies = {}
    for obj in sorted(scene.objects, key=lambda o: o.instance_id):
        n = points_per_object or _sample_count_for_linkage(obj, tau_link)
        pts = object_surface_points(obj, n)
        bodies[obj.instance_id] = build_collision_body(obj, pts, tau_link=tau_link)
    return bodies


def wall_bodies(scene: Scene, thickness: float = 0.05) -> list[CollisionBody]:
    """Thin floor-to-ceiling slabs for the wall segments.

    Walls collide as 2D segments during simulation; these hulls exist so
    ray-cast observation channels see them.
    """
    from .geometry import convex_hull_3d, thin_rectangle

    out = []
    for i, wall in enumerate(scene.walls):
        seg = np.asarray(wall, dtype=float)
        footprint = thin_rectangle(seg, epsilon=thickness)
        corners = footprint.vertices
        prism = np.vstack(
            [
                np.column_stack([corners, np.full(len(corners), scene.floor_z)]),
                np.column_stack([corners, np.full(len(corners), scene.ceiling_z)]),
            ]
        )
        out.append(CollisionBody(instance_id=f"wall_{i}", hulls=[convex_hull_3d(prism)]))
    return out


def write_collision_bin(bodies: dict[str, CollisionBody], path: str | Path) -> None:
    with open(path, "wb") as fh:
        fh.write(COLLISION_MAGIC)
        fh.write(struct.pack("<I", COLLISION_VERSION))
        fh.write(struct.pack("<I", len(bodies)))
        for iid in sorted(bodies):
            body = bodies[iid]
            raw = iid.encode("utf-8")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<B", 1 if body.is_static else 0))
            fh.write(struct.pack("<I", len(body.hulls)))
            for hull in body.hulls:
                fh.write(struct.pack("<II", len(hull.vertices), len(hull.faces)))
                fh.write(hull.vertices.astype("<f8").tobytes())
                fh.write(hull.faces.astype("<u4").tobytes())


def _hull_from_mesh(vertices: np.ndarray, faces: np.ndarray) -> ConvexHull3:
    """Rebuild plane data and volume from stored vertices + winding."""
    normals = np.zeros((len(faces), 3))
    offsets = np.zeros(len(faces))
    volume = 0.0
    for k, (a, b, c) in enumerate(faces):
        va, vb, vc = vertices[a], vertices[b], vertices[c]
        n = np.cross(vb - va, vc - va)
        nn = np.linalg.norm(n)
        if nn > 0:
            n = n / nn
        normals[k] = n
        offsets[k] = n @ va
        volume += float(va @ np.cross(vb, vc)) / 6.0
    return ConvexHull3(
        vertices=vertices, faces=faces, normals=normals, offsets=offsets, volume=abs(volume)
    )


def read_collision_bin(path: str | Path) -> dict[str, CollisionBody]:
    data = Path(path).read_bytes()
    if data[:4] != COLLISION_MAGIC:
        raise SceneFormatError(f"{path}: bad magic for collision cache")
    (version,) = struct.unpack_from("<I", data, 4)
    if version != COLLISION_VERSION:
        raise SceneFormatError(f"{path}: unsupported collision cache version {version}")
    (count,) = struct.unpack_from("<I", data, 8)
    off = 12
    bodies: dict[str, CollisionBody] = {}
    for _ in range(count):
        (id_len,) = struct.unpack_from("<H", data, off)
        off += 2
        iid = data[off:off + id_len].decode("utf-8")
        off += id_len
        is_static = bool(data[off])
        off += 1
        (n_hulls,) = struct.unpack_from("<I", data, off)
        off += 4
        hulls = []
        for _ in range(n_hulls):
            nv, nf = struct.unpack_from("<II", data, off)
            off += 8
            verts = np.frombuffer(data, dtype="<f8", count=nv * 3, offset=off).reshape(nv, 3).copy()
            off += nv * 24
            faces = np.frombuffer(data, dtype="<u4", count=nf * 3, offset=off).reshape(nf, 3).astype(int)
            off += nf * 12
            hulls.append(_hull_from_mesh(verts, faces))
        bodies[iid] = CollisionBody(instance_id=iid, hulls=hulls, is_static=is_static)
    return bodies


@dataclass
class BakedScene:
    scene: Scene
    bodies: dict[str, CollisionBody]
    grid: OccupancyGrid
    used_cache: bool


def _stamp(scene_dir: Path, config: Config) -> dict:
    return {
        "bake_version": BAKE_VERSION,
        "scene_hash": scene_content_hash(scene_dir),
        "map_config": {
            "resolution": config.map.resolution,
            "slice_height": config.map.slice_height,
            "inflate": config.map.inflate,
            "tau_link": config.map.tau_link,
            "agent_radius": config.agent.radius,
        },
    }


def bake_scene(scene_dir: str | Path, config: Config = DEFAULT_CONFIG) -> Path:
    """Build and cache all derived artifacts for a scene directory."""
    scene_dir = Path(scene_dir)
    scene = load_scene(scene_dir)
    cache = scene_dir / "cache"
    cache.mkdir(exist_ok=True)
    bodies = build_all_bodies(scene, tau_link=config.map.tau_link)
    grid = build_occupancy(
        scene,
        bodies,
        slice_height=config.map.slice_height,
        agent_radius=config.agent.radius,
        resolution=config.map.resolution,
        inflate=config.map.inflate,
    )
    write_collision_bin(bodies, cache / "collision.bin")
    write_occupancy_pgm(grid, cache / "occupancy.pgm")
    if grid.narrow is not None:
        np.save(cache / "narrow.npy", grid.narrow)
    write_semantic_map(build_semantic_map(scene), cache / "semantic.json")
    (cache / "stamp.json").write_text(
        json.dumps(_stamp(scene_dir, config), sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    return cache


def load_baked(scene_dir: str | Path, config: Config = DEFAULT_CONFIG) -> BakedScene:
    """Load a scene, reusing cached artifacts when the stamp matches."""
    scene_dir = Path(scene_dir)
    scene = load_scene(scene_dir)
    cache = scene_dir / "cache"
    stamp_path = cache / "stamp.json"
    if stamp_path.is_file():
        try:
            stamp = json.loads(stamp_path.read_text(encoding="utf-8"))
            if stamp == _stamp(scene_dir, config):
                bodies = read_collision_bin(cache / "collision.bin")
                grid = _read_grid(cache)
                log.info("cache hit for %s (skipping hull construction)", scene_dir.name)
                return BakedScene(scene=scene, bodies=bodies, grid=grid, used_cache=True)
            log.warning("stale cache for %s: content changed, rebuilding", scene_dir.name)
        except (SceneFormatError, OSError, ValueError, KeyError) as exc:
            log.warning("corrupt cache for %s (%s), rebuilding", scene_dir.name, exc)
    bake_scene(scene_dir, config)
    bodies = read_collision_bin(cache / "collision.bin")
    grid = _read_grid(cache)
    return BakedScene(scene=scene, bodies=bodies, grid=grid, used_cache=False)


def _read_grid(cache: Path) -> OccupancyGrid:
    grid = read_occupancy_pgm(cache / "occupancy.pgm")
    narrow_path = cache / "narrow.npy"
    if narrow_path.is_file():
        grid.narrow = np.load(narrow_path)
    else:
        grid.narrow = np.zeros_like(grid.blocked)
    return grid
