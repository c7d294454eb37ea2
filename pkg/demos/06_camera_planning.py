"""
Capture-camera planning
=======================

Perimeter-aware ring sweeps and volume-uniform Poisson-disk sampling, with
near-surface rejection and an SVG top-down debug view.
"""

import numpy as np

from splatnav import make_apartment_small
from splatnav.baking import build_all_bodies
from splatnav.cameras import (
    inward_offset,
    perimeter_sweep,
    reject_near_surface,
    save_plan_jsonl,
    save_plan_svg,
    tier_heights,
    volume_uniform,
)
from pathlib import Path

Path("demos/out").mkdir(parents=True, exist_ok=True)

scene = make_apartment_small()
bodies = list(build_all_bodies(scene).values())

room = scene.rooms[0]
rings = inward_offset(room.polygon, [0.3, 0.9])
print(f"room '{room.name}': {len(rings)} offset rings "
      f"({[len(r) for r in rings]} vertices each)")
print(f"tier heights for floor {scene.floor_z} / ceiling {scene.ceiling_z}: "
      f"{tuple(round(h, 2) for h in tier_heights(scene.floor_z, scene.ceiling_z))}")

sweep = perimeter_sweep(scene.rooms, scene.floor_z, scene.ceiling_z, budget=30)
print(f"\nperimeter sweep: {len(sweep.poses)} poses "
      f"({len(sweep.poses) // 9} placements x 9)")

vol = volume_uniform(scene.rooms, scene.floor_z, scene.ceiling_z,
                     budget=40, min_dist=0.8, seed=2)
positions = {tuple(np.round(p.position, 6)) for p in vol.poses}
print(f"volume-uniform: {len(vol.poses)} poses at {len(positions)} Poisson positions")

plan = sweep
plan.poses.extend(vol.poses)
plan = reject_near_surface(plan, bodies, d_min=0.25)
print(f"after near-surface rejection: {len(plan.poses)} accepted, "
      f"{len(plan.rejected)} rejected")

save_plan_jsonl(plan, "demos/out/camera_plan.jsonl")
save_plan_svg(plan, scene.rooms, "demos/out/camera_plan.svg")
print("wrote demos/out/camera_plan.jsonl and demos/out/camera_plan.svg "
      "(green accepted / red rejected)")
