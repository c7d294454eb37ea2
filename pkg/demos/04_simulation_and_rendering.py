"""
Simulation and observations
===========================

Drive the oracle agent along a generated episode, recording contacts and a
trajectory log, then render what the agent saw at the goal.
"""

import numpy as np

from splatnav import Camera, build_occupancy, make_apartment_small
from splatnav.agents import OracleAgent
from splatnav.baking import build_all_bodies, wall_bodies
from splatnav.episodes import generate_episodes
from splatnav.rendering import render_frame, save_frame
from splatnav.simulator import Environment
from pathlib import Path

Path("demos/out").mkdir(parents=True, exist_ok=True)

scene = make_apartment_small()
bodies = build_all_bodies(scene)
grid = build_occupancy(scene, bodies)

episode = generate_episodes(scene, grid, count=1, seed=12)[0]
print(f"episode {episode.episode_id}: \"{episode.instruction.text}\"")
print(f"reference path {episode.reference_path.length:.2f} m, "
      f"labels ({episode.scene_complexity}, {episode.path_complexity})")

env = Environment(scene, bodies, grid)
agent = OracleAgent()
state, obs = env.reset(episode)
agent.reset(episode)
steps = 0
while not env.done:
    action = agent.act(obs, {"position": state.position, "heading": state.heading})
    state, result = env.step(action)
    steps += 1

log = env.finalize()
log.save("demos/out/oracle.jsonl")
print(f"finished in {steps} actions / {log.sample_count} samples, "
      f"done_reason={log.done_reason}")
print(f"agent path {log.path_length():.2f} m vs reference "
      f"{episode.reference_path.length:.2f} m; contacts: {len(log.contact_intervals())}")

# render the goal-pose observation: splats for RGB, hulls for depth/semantics
camera = Camera(
    position=np.array([state.position[0], state.position[1], 1.2]),
    yaw=state.heading, pitch=0.0, width=224, height=224, vfov=np.deg2rad(90),
)
render_bodies = [bodies[k] for k in sorted(bodies)] + wall_bodies(scene)
frame = render_frame(camera, scene.gaussians, render_bodies)
finite = np.isfinite(frame.depth)
print(f"rendered 224x224 frame: depth {frame.depth[finite].min():.2f}.."
      f"{frame.depth[finite].max():.2f} m, "
      f"{len(np.unique(frame.semantic)) - 1} visible instances")
paths = save_frame(frame, "demos/out", "goal_view")
print("wrote", ", ".join(str(p) for p in paths))
