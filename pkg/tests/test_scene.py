import json
from pathlib import Path

import numpy as np
import pytest

from splatnav.errors import SceneFormatError, SceneValidationError, SceneVersionError
from splatnav.scene import (
    DoorState,
    GaussianCloud,
    Mobility,
    ObjectInstance,
    Room,
    Scene,
    load_scene,
    object_surface_points,
    save_scene,
    scene_to_json,
)
from splatnav.synthetic import make_apartment_small

FIXTURE_DIR = Path(__file__).resolve().parents[1] / "scenes" / "apartment_small"


def _minimal_scene(**overrides) -> Scene:
    fields = dict(
        scene_id="mini",
        objects=[
            ObjectInstance(
                instance_id="crate_0",
                category="crate",
                aabb_min=np.array([0.0, 0.0, 0.0]),
                aabb_max=np.array([1.0, 1.0, 1.0]),
            )
        ],
        gaussians=GaussianCloud.empty(),
        rooms=[Room("room", "test", np.array([[0, 0], [4, 0], [4, 4], [0, 4]], float))],
        walls=[np.array([[0.0, 0.0], [4.0, 0.0]])],
        floor_z=0.0,
        ceiling_z=2.5,
        taxonomy=["crate"],
    )
    fields.update(overrides)
    return Scene(**fields)


def test_minimal_scene_roundtrip(tmp_path):
    scene = _minimal_scene()
    save_scene(scene, tmp_path / "mini")
    loaded = load_scene(tmp_path / "mini")
    assert len(loaded.objects) == 1
    assert len(loaded.gaussians) == 0
    assert loaded.objects[0].instance_id == "crate_0"


def test_save_load_save_is_byte_identical(tmp_path):
    scene = make_apartment_small(gaussian_count=50)
    save_scene(scene, tmp_path / "apt")
    first = (tmp_path / "apt" / "scene.json").read_bytes()
    reloaded = load_scene(tmp_path / "apt")
    save_scene(reloaded, tmp_path / "apt2")
    second = (tmp_path / "apt2" / "scene.json").read_bytes()
    assert first == second
    assert (tmp_path / "apt" / "gaussians.bin").read_bytes() == (
        tmp_path / "apt2" / "gaussians.bin"
    ).read_bytes()


def test_invalid_aabb_names_instance(tmp_path):
    scene = _minimal_scene()
    save_scene(scene, tmp_path / "bad")
    data = json.loads((tmp_path / "bad" / "scene.json").read_text())
    data["objects"][0]["aabb"]["min"][0] = 5.0  # min.x > max.x
    (tmp_path / "bad" / "scene.json").write_text(json.dumps(data))
    with pytest.raises(SceneValidationError, match="crate_0"):
        load_scene(tmp_path / "bad")


def test_unknown_category_rejected():
    scene = _minimal_scene(taxonomy=["other"])
    with pytest.raises(SceneValidationError, match="category"):
        scene.validate()


def test_duplicate_instance_id_rejected():
    base = _minimal_scene()
    dup = ObjectInstance(
        instance_id="crate_0",
        category="crate",
        aabb_min=np.zeros(3),
        aabb_max=np.ones(3),
    )
    scene = _minimal_scene(objects=base.objects + [dup])
    with pytest.raises(SceneValidationError, match="duplicate"):
        scene.validate()


def test_door_state_required_iff_door_category():
    door = ObjectInstance(
        instance_id="door_1",
        category="door",
        aabb_min=np.zeros(3),
        aabb_max=np.ones(3),
    )
    with pytest.raises(SceneValidationError, match="door_state"):
        door.validate()
    crate = ObjectInstance(
        instance_id="crate_1",
        category="crate",
        aabb_min=np.zeros(3),
        aabb_max=np.ones(3),
        door_state=DoorState.OPEN,
    )
    with pytest.raises(SceneValidationError, match="door_state"):
        crate.validate()


def test_version_error(tmp_path):
    scene = _minimal_scene()
    save_scene(scene, tmp_path / "v")
    data = json.loads((tmp_path / "v" / "scene.json").read_text())
    data["version"] = 99
    (tmp_path / "v" / "scene.json").write_text(json.dumps(data))
    with pytest.raises(SceneVersionError):
        load_scene(tmp_path / "v")


def test_malformed_json(tmp_path):
    (tmp_path / "m").mkdir()
    (tmp_path / "m" / "scene.json").write_text("{nonsense")
    with pytest.raises(SceneFormatError):
        load_scene(tmp_path / "m")


def test_bad_quaternions_rejected():
    cloud = GaussianCloud(
        means=np.zeros((1, 3), np.float32),
        scales=np.ones((1, 3), np.float32),
        rotations=np.array([[1.0, 1.0, 0.0, 0.0]], np.float32),  # norm sqrt(2)
        opacities=np.array([0.5], np.float32),
        colors=np.zeros((1, 3), np.float32),
    )
    with pytest.raises(SceneValidationError, match="unit-norm"):
        cloud.validate()


def test_bundled_fixture_counts():
    scene = load_scene(FIXTURE_DIR)
    assert scene.asset_count == 12
    assert len(scene.gaussians) == 5000


def test_bundled_fixture_matches_generator():
    assert scene_to_json(make_apartment_small()) == (FIXTURE_DIR / "scene.json").read_text()


def test_scene_validates_on_load(apartment):
    # every loaded object satisfies all type invariants
    for obj in apartment.objects:
        obj.validate()
    apartment.validate()


# ---------------------------------------------------------------------------
# Surface sampling


def _cube(iid="box_0"):
    return ObjectInstance(
        instance_id=iid,
        category="crate",
        aabb_min=np.zeros(3),
        aabb_max=np.ones(3),
    )


def test_surface_points_on_faces():
    pts = object_surface_points(_cube(), 8)
    assert len(pts) == 8
    # each point must pin at least one coordinate to a face plane
    on_face = np.isclose(pts, 0.0, atol=1e-12) | np.isclose(pts, 1.0, atol=1e-12)
    assert on_face.any(axis=1).all()
    inside = (pts >= -1e-9).all() and (pts <= 1 + 1e-9).all()
    assert inside


def test_surface_points_deterministic():
    a = object_surface_points(_cube(), 64)
    b = object_surface_points(_cube(), 64)
    np.testing.assert_array_equal(a, b)
    c = object_surface_points(_cube("box_1"), 64)
    assert not np.array_equal(a, c)  # seeded by instance id


def test_surface_points_area_weighted():
    obj = ObjectInstance(
        instance_id="slab_0",
        category="crate",
        aabb_min=np.zeros(3),
        aabb_max=np.array([2.0, 1.0, 1.0]),
    )
    n = 1000
    pts = object_surface_points(obj, n)
    assert len(pts) == n
    # oracle: per-face allocation proportional to face area within +-1.
    # Points interior to a face sit on exactly one face plane; each face also
    # pins its 4 corners (which lie on three planes), so allocation_f =
    # exclusive_f + 4.
    areas = np.array([1.0, 1.0, 2.0, 2.0, 2.0, 2.0])
    expect = areas / areas.sum() * n
    planes = [(0, 0.0), (0, 2.0), (1, 0.0), (1, 1.0), (2, 0.0), (2, 1.0)]
    exclusive = np.zeros(6)
    for p in pts:
        members = [k for k, (axis, value) in enumerate(planes) if np.isclose(p[axis], value)]
        if len(members) == 1:
            exclusive[members[0]] += 1
    counts = exclusive + 4
    assert (np.abs(counts - expect) <= 1 + 1e-9).all()


def test_surface_points_respect_annotation():
    pts = np.array([[0.5, 0.5, 0.5], [0.2, 0.2, 0.2]])
    obj = ObjectInstance(
        instance_id="annotated",
        category="crate",
        aabb_min=np.zeros(3),
        aabb_max=np.ones(3),
        surface_points=pts,
    )
    np.testing.assert_array_equal(object_surface_points(obj, 8), pts)


def test_surface_points_distance_to_boundary_zero(apartment):
    for obj in apartment.objects[:4]:
        pts = object_surface_points(obj, 128)
        mn, mx = np.asarray(obj.aabb_min), np.asarray(obj.aabb_max)
        # distance to the box boundary: zero iff on some face and inside box
        inside = np.minimum(pts - mn, mx - pts).min(axis=1)
        assert np.abs(inside).min() >= -1e-9
        face_dist = np.minimum(np.abs(pts - mn), np.abs(mx - pts)).min(axis=1)
        assert (face_dist <= 1e-9).all()


def test_mobility_mapping():
    obj = _cube()
    assert obj.mobility == Mobility.STATIC
