"""
Top-down maps and path planning
===============================

Project object footprints, rasterize the height-slice occupancy grid, and
run clearance-aware A* between sampled endpoints.
"""

from splatnav import build_occupancy, build_semantic_map, make_apartment_small
from splatnav.baking import build_all_bodies
from splatnav.mapping import write_occupancy_pgm, write_semantic_map
from splatnav.planning import (
    EndpointConstraints,
    PlanCost,
    astar,
    distance_transform,
    sample_endpoints,
)
from pathlib import Path

Path("demos/out").mkdir(parents=True, exist_ok=True)

scene = make_apartment_small()
bodies = build_all_bodies(scene)

sem = build_semantic_map(scene)
print(f"semantic map: {len(sem.footprints)} footprints, "
      f"{len(sem.door_marks)} door(s), {len(sem.wall_segments)} wall segments")

# the 1.2 m slice: low furniture disappears, tall furniture blocks
grid = build_occupancy(scene, bodies, slice_height=1.2, agent_radius=0.25, resolution=0.05)
ny, nx = grid.shape
print(f"occupancy: {nx}x{ny} cells at {grid.resolution} m, "
      f"{grid.free_cell_count()} free")

clearance = distance_transform(grid)
print(f"max clearance {clearance.max():.2f} m")

sample = sample_endpoints(scene, grid, EndpointConstraints(min_geodesic=4.0), seed=1)
print(f"\nendpoints: {sample.start.round(2)} ({sample.start_room}) -> "
      f"{sample.goal.round(2)} ({sample.goal_room}), target={sample.target_instance}")

path = astar(grid, clearance, PlanCost(w_dist=1.0, w_narrow=2.0, clearance_soft=0.6),
             sample.start, sample.goal)
print(f"path: {len(path.waypoints)} waypoints, length {path.length:.2f} m, "
      f"cost {path.cost:.2f}")

write_occupancy_pgm(grid, "demos/out/occupancy.pgm")
write_semantic_map(sem, "demos/out/semantic.json")
print("\nwrote demos/out/occupancy.pgm (+ .json sidecar) and demos/out/semantic.json")

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(8, 5))
    extent = [grid.origin[0], grid.origin[0] + nx * grid.resolution,
              grid.origin[1], grid.origin[1] + ny * grid.resolution]
    ax.imshow(~grid.blocked, origin="lower", extent=extent, cmap="gray")
    ax.plot(path.waypoints[:, 0], path.waypoints[:, 1], "r-o", markersize=3)
    ax.set_title("occupancy at 1.2 m with planned path")
    fig.savefig("demos/out/plan.png", dpi=120)
    print("wrote demos/out/plan.png")
except ImportError:
    print("matplotlib not installed, skipping plan.png")
