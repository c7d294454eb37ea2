"""Scene interchange model: annotated objects, Gaussian cloud, rooms, walls.

A scene on disk is a directory holding ``scene.json`` (objects, taxonomy,
rooms, walls, vertical extent) and ``gaussians.bin`` (packed splat
primitives).  Loading validates every invariant; a loaded Scene is immutable
by convention and safe to share across threads.

``scene.json`` layout (version 1)::

    {version, floor_z, ceiling_z, taxonomy:[...],
     rooms:[{name, label, polygon:[[x,y],...]}],
     walls:[[[x1,y1],[x2,y2]], ...],
     objects:[{instance_id, category, aabb:{min:[x,y,z], max:[x,y,z]},
               attributes:{...}, door_state?, mobility, surface_points?}]}

``gaussians.bin``: magic ``SGSB``, u32 version, u64 count, then per
primitive 14 little-endian f32: mean(3), scale(3), quat wxyz(4), opacity,
rgb(3).
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable

import numpy as np

from ._util import largest_remainder
from .errors import SceneFormatError, SceneValidationError, SceneVersionError

SCENE_VERSION = 1
GAUSSIAN_MAGIC = b"SGSB"
GAUSSIAN_VERSION = 1
_GAUSSIAN_RECORD = struct.Struct("<14f")

QUAT_NORM_TOL = 1e-6


class DoorState(Enum):
    OPEN = "open"
    CLOSED = "closed"
    HALF_OPEN = "half_open"


class Mobility(Enum):
    STATIC = "static"
    MOVABLE = "movable"
    ARTICULATED = "articulated"


def is_door_category(category: str) -> bool:
    """Door classes are any taxonomy entry containing 'door'."""
    return "door" in category.lower()


@dataclass
class ObjectInstance:
    """One annotated object: category, axis-aligned box, attributes."""

    instance_id: str
    category: str
    aabb_min: np.ndarray  # (3,) meters
    aabb_max: np.ndarray  # (3,) meters
    attributes: dict[str, str] = field(default_factory=dict)
    door_state: DoorState | None = None
    mobility: Mobility = Mobility.STATIC
    surface_points: np.ndarray | None = None  # (k, 3) meters, optional

    def validate(self) -> None:
        if not self.instance_id:
            raise SceneValidationError("objects.instance_id: empty")
        where = f"objects[{self.instance_id}]"
        mn = np.asarray(self.aabb_min, dtype=float)
        mx = np.asarray(self.aabb_max, dtype=float)
        if mn.shape != (3,) or mx.shape != (3,):
            raise SceneValidationError(f"{where}.aabb: corners must be 3-vectors")
        if np.any(mn > mx):
            axis = "xyz"[int(np.argmax(mn > mx))]
            raise SceneValidationError(
                f"{where}.aabb: min.{axis} > max.{axis} (instance_id={self.instance_id})"
            )
        if is_door_category(self.category):
            if self.door_state is None:
                raise SceneValidationError(f"{where}.door_state: required for door category")
        elif self.door_state is not None:
            raise SceneValidationError(
                f"{where}.door_state: only allowed on door categories, got {self.category!r}"
            )
        if self.surface_points is not None:
            pts = np.asarray(self.surface_points, dtype=float)
            if pts.ndim != 2 or pts.shape[1] != 3:
                raise SceneValidationError(f"{where}.surface_points: expected (k, 3) array")

    @property
    def centroid(self) -> np.ndarray:
        return (np.asarray(self.aabb_min) + np.asarray(self.aabb_max)) / 2.0


@dataclass
class GaussianCloud:
    """Packed splat primitives (degree-0 color only)."""

    means: np.ndarray      # (n, 3) f32
    scales: np.ndarray     # (n, 3) f32, strictly positive
    rotations: np.ndarray  # (n, 4) f32, unit quaternions wxyz
    opacities: np.ndarray  # (n,) f32 in [0, 1]
    colors: np.ndarray     # (n, 3) f32 in [0, 1]

    @classmethod
    def empty(cls) -> "GaussianCloud":
        return cls(
            means=np.zeros((0, 3), np.float32),
            scales=np.zeros((0, 3), np.float32),
            rotations=np.zeros((0, 4), np.float32),
            opacities=np.zeros((0,), np.float32),
            colors=np.zeros((0, 3), np.float32),
        )

    def __len__(self) -> int:
        return self.means.shape[0]

    def validate(self) -> None:
        n = len(self)
        shapes = {
            "means": (n, 3), "scales": (n, 3), "rotations": (n, 4),
            "opacities": (n,), "colors": (n, 3),
        }
        for name, want in shapes.items():
            got = getattr(self, name).shape
            if got != want:
                raise SceneValidationError(f"gaussians.{name}: shape {got}, expected {want}")
        if n == 0:
            return
        if np.any(self.opacities < 0) or np.any(self.opacities > 1):
            raise SceneValidationError("gaussians.opacities: values outside [0, 1]")
        if np.any(self.scales <= 0):
            raise SceneValidationError("gaussians.scales: non-positive scale")
        norms = np.linalg.norm(self.rotations.astype(np.float64), axis=1)
        bad = np.abs(norms - 1.0) > QUAT_NORM_TOL
        if np.any(bad):
            raise SceneValidationError(
                f"gaussians.rotations: {int(bad.sum())} quaternions not unit-norm within {QUAT_NORM_TOL}"
            )


@dataclass
class Room:
    """Named floor region with a functional label."""

    name: str
    label: str
    polygon: np.ndarray  # (k, 2) vertices, meters

    def validate(self) -> None:
        poly = np.asarray(self.polygon, dtype=float)
        if poly.ndim != 2 or poly.shape[1] != 2 or poly.shape[0] < 3:
            raise SceneValidationError(f"rooms[{self.name}].polygon: need >=3 2D vertices")
        if _self_intersects(poly):
            raise SceneValidationError(f"rooms[{self.name}].polygon: self-intersecting")


@dataclass
class Scene:
    """Immutable world record shared by every downstream stage."""

    scene_id: str
    objects: list[ObjectInstance]
    gaussians: GaussianCloud
    rooms: list[Room]
    walls: list[np.ndarray]  # each (2, 2): segment endpoints
    floor_z: float
    ceiling_z: float
    taxonomy: list[str]

    def validate(self) -> None:
        if self.floor_z >= self.ceiling_z:
            raise SceneValidationError("floor_z: must be below ceiling_z")
        taxa = set(self.taxonomy)
        seen: set[str] = set()
        for obj in self.objects:
            obj.validate()
            if obj.instance_id in seen:
                raise SceneValidationError(
                    f"objects.instance_id: duplicate {obj.instance_id!r}"
                )
            seen.add(obj.instance_id)
            if obj.category not in taxa:
                raise SceneValidationError(
                    f"objects[{obj.instance_id}].category: {obj.category!r} not in taxonomy"
                )
        for room in self.rooms:
            room.validate()
        for i, wall in enumerate(self.walls):
            seg = np.asarray(wall, dtype=float)
            if seg.shape != (2, 2):
                raise SceneValidationError(f"walls[{i}]: expected two 2D endpoints")
        self.gaussians.validate()

    def object_by_id(self, instance_id: str) -> ObjectInstance:
        for obj in self.objects:
            if obj.instance_id == instance_id:
                return obj
        raise KeyError(instance_id)

    @property
    def asset_count(self) -> int:
        return len(self.objects)

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """2D (min, max) over rooms, walls and object footprints."""
        pts = [np.asarray(r.polygon, float) for r in self.rooms]
        pts += [np.asarray(w, float) for w in self.walls]
        for obj in self.objects:
            pts.append(np.asarray([obj.aabb_min[:2], obj.aabb_max[:2]], float))
        if not pts:
            return np.zeros(2), np.zeros(2)
        allp = np.vstack(pts)
        return allp.min(axis=0), allp.max(axis=0)


def _self_intersects(poly: np.ndarray) -> bool:
    """Check a closed polygon for edge self-intersection (O(k^2), k is tiny)."""
    k = len(poly)
    edges = [(poly[i], poly[(i + 1) % k]) for i in range(k)]

    def cross2(u, v):
        return u[0] * v[1] - u[1] * v[0]

    def seg_cross(p, q, a, b):
        d1 = cross2(q - p, a - p)
        d2 = cross2(q - p, b - p)
        d3 = cross2(b - a, p - a)
        d4 = cross2(b - a, q - a)
        return d1 * d2 < 0 and d3 * d4 < 0

    for i in range(k):
        for j in range(i + 1, k):
            if j == i or (j + 1) % k == i or (i + 1) % k == j:
                continue  # adjacent edges share a vertex
            if seg_cross(edges[i][0], edges[i][1], edges[j][0], edges[j][1]):
                return True
    return False


# ---------------------------------------------------------------------------
# Serialization


def _object_payload(obj: ObjectInstance) -> dict:
    payload: dict = {
        "instance_id": obj.instance_id,
        "category": obj.category,
        "aabb": {
            "min": [float(v) for v in obj.aabb_min],
            "max": [float(v) for v in obj.aabb_max],
        },
        "attributes": dict(obj.attributes),
        "mobility": obj.mobility.value,
    }
    if obj.door_state is not None:
        payload["door_state"] = obj.door_state.value
    if obj.surface_points is not None:
        payload["surface_points"] = [[float(v) for v in p] for p in obj.surface_points]
    return payload


def scene_to_json(scene: Scene) -> str:
    """Canonical (sorted-key) JSON text for scene.json."""
    payload = {
        "version": SCENE_VERSION,
        "scene_id": scene.scene_id,
        "floor_z": float(scene.floor_z),
        "ceiling_z": float(scene.ceiling_z),
        "taxonomy": list(scene.taxonomy),
        "rooms": [
            {
                "name": r.name,
                "label": r.label,
                "polygon": [[float(x), float(y)] for x, y in np.asarray(r.polygon, float)],
            }
            for r in scene.rooms
        ],
        "walls": [
            [[float(x), float(y)] for x, y in np.asarray(w, float)] for w in scene.walls
        ],
        "objects": [_object_payload(o) for o in scene.objects],
    }
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def save_scene(scene: Scene, path: str | Path) -> Path:
    """Write scene.json + gaussians.bin into directory `path`."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    (path / "scene.json").write_text(scene_to_json(scene), encoding="utf-8")
    write_gaussians(scene.gaussians, path / "gaussians.bin")
    return path


def write_gaussians(cloud: GaussianCloud, path: str | Path) -> None:
    n = len(cloud)
    rows = np.hstack(
        [
            cloud.means.astype("<f4"),
            cloud.scales.astype("<f4"),
            cloud.rotations.astype("<f4"),
            cloud.opacities.astype("<f4").reshape(n, 1),
            cloud.colors.astype("<f4"),
        ]
    ) if n else np.zeros((0, 14), "<f4")
    with open(path, "wb") as fh:
        fh.write(GAUSSIAN_MAGIC)
        fh.write(struct.pack("<I", GAUSSIAN_VERSION))
        fh.write(struct.pack("<Q", n))
        fh.write(rows.tobytes())


def read_gaussians(path: str | Path) -> GaussianCloud:
    data = Path(path).read_bytes()
    if len(data) < 16 or data[:4] != GAUSSIAN_MAGIC:
        raise SceneFormatError(f"{path}: bad magic, not a gaussians.bin file")
    (version,) = struct.unpack_from("<I", data, 4)
    if version != GAUSSIAN_VERSION:
        raise SceneVersionError(f"{path}: unsupported gaussians version {version}")
    (count,) = struct.unpack_from("<Q", data, 8)
    body = data[16:]
    if len(body) != count * _GAUSSIAN_RECORD.size:
        raise SceneFormatError(
            f"{path}: payload is {len(body)} bytes, expected {count * _GAUSSIAN_RECORD.size}"
        )
    rows = np.frombuffer(body, dtype="<f4").reshape(count, 14)
    return GaussianCloud(
        means=rows[:, 0:3].copy(),
        scales=rows[:, 3:6].copy(),
        rotations=rows[:, 6:10].copy(),
        opacities=rows[:, 10].copy(),
        colors=rows[:, 11:14].copy(),
    )


def _parse_object(entry: dict, idx: int) -> ObjectInstance:
    try:
        aabb = entry["aabb"]
        door = entry.get("door_state")
        surf = entry.get("surface_points")
        return ObjectInstance(
            instance_id=entry["instance_id"],
            category=entry["category"],
            aabb_min=np.asarray(aabb["min"], dtype=float),
            aabb_max=np.asarray(aabb["max"], dtype=float),
            attributes=dict(entry.get("attributes", {})),
            door_state=DoorState(door) if door is not None else None,
            mobility=Mobility(entry.get("mobility", "static")),
            surface_points=np.asarray(surf, dtype=float) if surf is not None else None,
        )
    except SceneValidationError:
        raise
    except (KeyError, ValueError, TypeError) as exc:
        raise SceneFormatError(f"objects[{idx}]: {exc}") from exc


def load_scene(path: str | Path) -> Scene:
    """Load and fully validate a scene directory.

    Raises SceneFormatError on malformed files, SceneVersionError on an
    unsupported version, SceneValidationError (naming the field) on any
    invariant violation.
    """
    path = Path(path)
    json_path = path / "scene.json"
    bin_path = path / "gaussians.bin"
    if not json_path.is_file():
        raise SceneFormatError(f"{json_path}: missing scene.json")
    try:
        data = json.loads(json_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SceneFormatError(f"{json_path}: invalid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise SceneFormatError(f"{json_path}: top level must be an object")
    version = data.get("version")
    if version != SCENE_VERSION:
        raise SceneVersionError(f"{json_path}: unsupported scene version {version!r}")

    try:
        rooms = [
            Room(name=r["name"], label=r["label"], polygon=np.asarray(r["polygon"], float))
            for r in data.get("rooms", [])
        ]
        walls = [np.asarray(w, dtype=float) for w in data.get("walls", [])]
        scene = Scene(
            scene_id=data.get("scene_id", path.name),
            objects=[_parse_object(o, i) for i, o in enumerate(data.get("objects", []))],
            gaussians=read_gaussians(bin_path) if bin_path.is_file() else GaussianCloud.empty(),
            rooms=rooms,
            walls=walls,
            floor_z=float(data["floor_z"]),
            ceiling_z=float(data["ceiling_z"]),
            taxonomy=list(data["taxonomy"]),
        )
    except SceneFormatError:
        raise
    except (KeyError, ValueError, TypeError) as exc:
        raise SceneFormatError(f"{json_path}: {exc}") from exc
    scene.validate()
    return scene


def scene_content_hash(path: str | Path) -> str:
    """Hash of the raw scene files, used to stamp derived caches."""
    path = Path(path)
    h = hashlib.sha256()
    for name in ("scene.json", "gaussians.bin"):
        fp = path / name
        if fp.is_file():
            h.update(name.encode())
            h.update(fp.read_bytes())
    return h.hexdigest()[:16]


# ---------------------------------------------------------------------------
# Surface sampling


def _face_seed(instance_id: str, face: int, n: int) -> int:
    digest = hashlib.sha256(f"{instance_id}:{face}:{n}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def object_surface_points(obj: ObjectInstance, n: int) -> np.ndarray:
    """Sample `n` points on the object surface.

    Annotated surface points win when present.  Otherwise the points are
    stratified over the six aabb faces: each face receives a share of `n`
    proportional to its area (largest-remainder rounding), then gets a
    jittered-grid sample seeded by the instance id — repeat calls are
    identical.
    """
    if n < 8:
        raise ValueError("n must be >= 8")
    if obj.surface_points is not None and len(obj.surface_points) > 0:
        return np.asarray(obj.surface_points, dtype=float)

    mn = np.asarray(obj.aabb_min, dtype=float)
    mx = np.asarray(obj.aabb_max, dtype=float)
    ext = mx - mn
    # Face order: -x, +x, -y, +y, -z, +z.  (axis, fixed value, u axis, v axis)
    faces = [
        (0, mn[0], 1, 2), (0, mx[0], 1, 2),
        (1, mn[1], 0, 2), (1, mx[1], 0, 2),
        (2, mn[2], 0, 1), (2, mx[2], 0, 1),
    ]
    areas = np.array([ext[u] * ext[v] for _, _, u, v in faces], dtype=float)
    counts = largest_remainder(areas, n)

    points = []
    for face_idx, ((axis, value, u, v), count) in enumerate(zip(faces, counts)):
        if count == 0:
            continue
        rng = np.random.default_rng(_face_seed(obj.instance_id, face_idx, n))
        corners = []
        if count >= 4:  # pin the face corners so hulls and footprints are tight
            for fu, fv in ((0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)):
                corners.append((fu, fv))
        remaining = count - len(corners)
        grid = max(1, int(np.ceil(np.sqrt(remaining)))) if remaining else 1
        cells = [(i, j) for i in range(grid) for j in range(grid)][:remaining]
        fractions = corners + [
            ((i + rng.random()) / grid, (j + rng.random()) / grid) for i, j in cells
        ]
        for fu, fv in fractions:
            p = np.empty(3)
            p[axis] = value
            p[u] = mn[u] + fu * ext[u]
            p[v] = mn[v] + fv * ext[v]
            points.append(p)
    return np.asarray(points)


def iter_door_objects(scene: Scene) -> Iterable[ObjectInstance]:
    for obj in scene.objects:
        if is_door_category(obj.category):
            yield obj
