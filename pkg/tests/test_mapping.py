import numpy as np
import pytest
from shapely.geometry import Polygon, box

from splatnav.geometry import ConvexPolygon2, convex_hull_3d
from splatnav.mapping import (
    build_occupancy,
    build_semantic_map,
    fuse_masks,
    project_footprint,
    read_occupancy_pgm,
    write_occupancy_pgm,
)
from splatnav.scene import (
    DoorState,
    GaussianCloud,
    ObjectInstance,
    Room,
    Scene,
    object_surface_points,
)
from splatnav.baking import build_all_bodies
from splatnav.geometry import CollisionBody


def _unit_box_obj(iid="box_0"):
    return ObjectInstance(
        instance_id=iid, category="crate", aabb_min=np.zeros(3), aabb_max=np.ones(3)
    )


# ---------------------------------------------------------------------------
# project_footprint


def test_unit_cube_footprint_area():
    obj = _unit_box_obj()
    pts = object_surface_points(obj, 2000)
    poly = project_footprint(obj, pts)
    assert poly.area == pytest.approx(1.0, abs=1e-9)


def test_sphere_footprint_area(rng):
    # 500 points on a radius-0.5 sphere: hull area approximates pi/4
    n = 500
    v = rng.normal(size=(n, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    pts = 0.5 * v
    poly = project_footprint(_unit_box_obj(), pts)
    assert poly.area == pytest.approx(np.pi * 0.25, rel=0.05)


def test_footprint_contains_all_projected_points(rng):
    pts = rng.uniform(-1, 1, size=(200, 3))
    poly = project_footprint(_unit_box_obj(), pts)
    for p in pts[:, :2]:
        assert poly.contains_point(p, tol=1e-9)


def test_collinear_footprint_thin_rectangle():
    pts = np.array([[0, 0, 0], [0.5, 0, 0.3], [1.0, 0, 0.7]], dtype=float)
    poly = project_footprint(_unit_box_obj(), pts, epsilon=1e-3)
    assert poly.area == pytest.approx(1e-3, rel=1e-6)
    assert poly.is_strictly_convex()


def test_l_shape_union_smaller_than_bounding_hull():
    a = ConvexPolygon2(np.array([[0, 0], [2, 0], [2, 1], [0, 1]], float))
    b = ConvexPolygon2(np.array([[0, 1], [1, 1], [1, 3], [0, 3]], float))
    fused = fuse_masks([a, b])
    bounding = Polygon([(0, 0), (2, 0), (2, 3), (0, 3)])
    assert fused.area == pytest.approx(a.area + b.area, abs=1e-9)
    assert fused.area < bounding.area


# ---------------------------------------------------------------------------
# fuse_masks


def test_fuse_single_mask_identity():
    a = ConvexPolygon2(np.array([[0, 0], [1, 0], [1, 1], [0, 1]], float))
    assert fuse_masks([a]).area == pytest.approx(1.0, abs=1e-12)


def test_fuse_disjoint_sum():
    a = ConvexPolygon2(np.array([[0, 0], [1, 0], [1, 1], [0, 1]], float))
    b = ConvexPolygon2(np.array([[5, 5], [6, 5], [6, 6], [5, 6]], float))
    assert fuse_masks([a, b]).area == pytest.approx(2.0, abs=1e-12)


def test_fuse_half_overlap():
    a = ConvexPolygon2(np.array([[0, 0], [1, 0], [1, 1], [0, 1]], float))
    b = ConvexPolygon2(np.array([[0.5, 0], [1.5, 0], [1.5, 1], [0.5, 1]], float))
    assert fuse_masks([a, b]).area == pytest.approx(1.5, abs=1e-12)


def test_fuse_empty_raises():
    with pytest.raises(ValueError):
        fuse_masks([])


# ---------------------------------------------------------------------------
# build_occupancy


def _empty_room_scene(size=4.0, objects=(), taxonomy=("crate", "door")):
    return Scene(
        scene_id="room",
        objects=list(objects),
        gaussians=GaussianCloud.empty(),
        rooms=[Room("room", "test", np.array([[0, 0], [size, 0], [size, size], [0, size]], float))],
        walls=[
            np.array([[0.0, 0.0], [size, 0.0]]),
            np.array([[size, 0.0], [size, size]]),
            np.array([[size, size], [0.0, size]]),
            np.array([[0.0, size], [0.0, 0.0]]),
        ],
        floor_z=0.0,
        ceiling_z=2.5,
        taxonomy=list(taxonomy),
    )


def test_empty_room_blocked_ring_free_interior():
    scene = _empty_room_scene()
    grid = build_occupancy(scene, {}, agent_radius=0.25, resolution=0.1)
    assert grid.is_free((2.0, 2.0))
    assert not grid.is_free((0.0, 2.0))   # on a wall
    assert not grid.is_free((2.0, 0.2))   # within the inflated band
    assert grid.is_free((2.0, 0.5))


def test_tall_table_slice_semantics():
    # legs cross the 1.2 m slice, the slab above it does not
    legs = []
    for i, (lx, ly) in enumerate([(1.0, 1.0), (2.0, 1.0), (1.0, 2.0), (2.0, 2.0)]):
        corners = np.array([
            [lx, ly, 0.0], [lx + 0.1, ly, 0.0], [lx, ly + 0.1, 0.0], [lx + 0.1, ly + 0.1, 0.0],
            [lx, ly, 1.3], [lx + 0.1, ly, 1.3], [lx, ly + 0.1, 1.3], [lx + 0.1, ly + 0.1, 1.3],
        ])
        legs.append(convex_hull_3d(corners))
    slab = convex_hull_3d(np.array([
        [0.9, 0.9, 1.3], [2.2, 0.9, 1.3], [0.9, 2.2, 1.3], [2.2, 2.2, 1.3],
        [0.9, 0.9, 1.35], [2.2, 0.9, 1.35], [0.9, 2.2, 1.35], [2.2, 2.2, 1.35],
    ]))
    body = CollisionBody(instance_id="table_0", hulls=legs + [slab])
    scene = _empty_room_scene(size=4.0, objects=[
        ObjectInstance("table_0", "crate", np.array([0.9, 0.9, 0]), np.array([2.2, 2.2, 1.35]))
    ])
    grid = build_occupancy(scene, {"table_0": body}, slice_height=1.2,
                           agent_radius=0.0, resolution=0.05)

    # oracle: expected blocked cells from first principles (slice through each
    # hull; slab's z-range misses 1.2 entirely, legs cut to their rectangles)
    def cell_blocked_oracle(cx, cy):
        cell = box(cx - 0.025, cy - 0.025, cx + 0.025, cy + 0.025)
        for lx, ly in [(1.0, 1.0), (2.0, 1.0), (1.0, 2.0), (2.0, 2.0)]:
            if cell.intersects(box(lx, ly, lx + 0.1, ly + 0.1)):
                return True
        return False

    center_slab_only = (1.55, 1.55)  # under the slab, between the legs
    assert grid.is_free(center_slab_only)
    leg_center = (1.05, 1.05)
    assert not grid.is_free(leg_center)
    for cx in np.arange(0.925, 2.3, 0.05):
        for cy in np.arange(0.925, 2.3, 0.05):
            iy, ix = grid.world_to_cell((cx, cy))
            got = bool(grid.blocked[iy, ix])
            want = cell_blocked_oracle(round(cx, 3), round(cy, 3))
            # conservative rasterization may block a hair more at exact edges
            if got != want:
                assert got and not want
                edge = min(
                    abs(cx - v) for v in (1.0, 1.1, 2.0, 2.1)
                ) < 0.051 or min(abs(cy - v) for v in (1.0, 1.1, 2.0, 2.1)) < 0.051
                assert edge


def _door_scene(state: DoorState):
    door = ObjectInstance(
        "door_0", "door",
        np.array([1.95, 1.0, 0.0]), np.array([2.05, 2.0, 2.1]),
        door_state=state,
    )
    scene = _empty_room_scene(objects=[door])
    bodies = build_all_bodies(scene)
    return scene, bodies


def test_closed_door_blocks_open_door_frees():
    scene_c, bodies_c = _door_scene(DoorState.CLOSED)
    grid_c = build_occupancy(scene_c, bodies_c, agent_radius=0.0, resolution=0.05)
    assert not grid_c.is_free((2.0, 1.5))

    scene_o, bodies_o = _door_scene(DoorState.OPEN)
    grid_o = build_occupancy(scene_o, bodies_o, agent_radius=0.0, resolution=0.05)
    assert grid_o.is_free((2.0, 1.5))


def test_half_open_door_traversable_but_narrow():
    scene_h, bodies_h = _door_scene(DoorState.HALF_OPEN)
    grid = build_occupancy(scene_h, bodies_h, agent_radius=0.0, resolution=0.05)
    assert grid.is_free((2.0, 1.5))
    iy, ix = grid.world_to_cell((2.0, 1.5))
    assert grid.narrow is not None and grid.narrow[iy, ix]


def test_inflation_monotonicity(apartment, apartment_bodies, rng):
    # grids for different radii have different extents; compare at world points
    radii = [0.0, 0.15, 0.3]
    grids = [
        build_occupancy(apartment, apartment_bodies, agent_radius=r, resolution=0.1)
        for r in radii
    ]
    lo, hi = apartment.bounds()
    points = rng.uniform(lo, hi, size=(500, 2))
    for smaller, larger in zip(grids, grids[1:]):
        for p in points:
            if not smaller.is_free(p):
                assert not larger.is_free(p)


def test_occupancy_deterministic(apartment, apartment_bodies):
    a = build_occupancy(apartment, apartment_bodies)
    b = build_occupancy(apartment, apartment_bodies)
    np.testing.assert_array_equal(a.blocked, b.blocked)
    np.testing.assert_array_equal(a.origin, b.origin)


def test_pgm_roundtrip(tmp_path, apartment_grid):
    write_occupancy_pgm(apartment_grid, tmp_path / "occ.pgm")
    back = read_occupancy_pgm(tmp_path / "occ.pgm")
    np.testing.assert_array_equal(back.blocked, apartment_grid.blocked)
    assert back.resolution == apartment_grid.resolution
    np.testing.assert_allclose(back.origin, apartment_grid.origin)
    assert back.slice_height == apartment_grid.slice_height


def test_semantic_map_contents(apartment):
    sem = build_semantic_map(apartment)
    assert set(sem.footprints) == {o.instance_id for o in apartment.objects}
    assert "door_0" in sem.door_marks
    assert sem.door_marks["door_0"] == DoorState.OPEN
    lo, hi = sem.bounds
    for poly in sem.footprints.values():
        assert (poly.vertices >= lo - 1e-6).all()
        assert (poly.vertices <= hi + 1e-6).all()
