"""
Scoring trajectories
====================

Endpoint metrics (SR/OSR/SPL/CR) next to the continuity metrics (CSR, ICP,
PS), including the regime where a long scrape keeps CR at 1 while the
integrated penalty approaches 1.
"""

import numpy as np

from splatnav.episodes import Episode, Goal, Instruction, InstructionLevel, InstructionType
from splatnav.metrics import Corridor, csr, icp, nogoal_metrics, ps, standard_metrics
from splatnav.planning import Path2
from splatnav.simulator import TrajectoryLog


def make_log(pos, theta, depth=None, done="stop_issued", dt=0.05):
    pos = np.asarray(pos, float)
    n = len(pos)
    depth = np.zeros(n) if depth is None else np.asarray(depth, float)
    return TrajectoryLog(
        scene_id="demo", episode_id="demo", config_hash="demo", done_reason=done,
        t=np.arange(n) * dt, pos=pos, theta=np.asarray(theta, float),
        contact_depth=depth, contact_ids=[None if d <= 0 else "wall_0" for d in depth],
        actions=[],
    )


path = Path2(np.array([[0.0, 0.0], [8.0, 0.0]]))
episode = Episode(
    episode_id="demo", scene_id="demo",
    instruction=Instruction(InstructionLevel.LOW, InstructionType.SINGLE_GOAL, "Go.", {}),
    start_pose=(0.0, 0.0, 0.0),
    goal=Goal(position=np.array([8.0, 0.0]), success_radius=3.0),
    reference_path=path,
)

# a clean retrace: everything perfect
n = 160
clean = make_log(np.column_stack([np.linspace(0, 8, n), np.zeros(n)]), np.zeros(n))
print("clean retrace:", standard_metrics(clean, episode),
      f"csr={csr(clean, Corridor(path, 1.5)):.2f} icp={icp(clean):.2f} ps={ps(clean):.2f}")

# hugging the wall: ONE contact interval spanning 87% of the run
depth = np.zeros(n)
depth[int(n * 0.05):int(n * 0.92)] = 0.03
scrape = make_log(np.column_stack([np.linspace(0, 8, n), np.full(n, 0.4)]),
                  np.zeros(n), depth=depth)
m = standard_metrics(scrape, episode)
print(f"wall hugger:   CR={m['cr']:.0f} but ICP={icp(scrape):.2f} "
      "(a single interval hides a sustained scrape)")

# zig-zag motion: same endpoints, poor smoothness
theta = np.where(np.arange(n) % 2 == 0, 0.9, -0.9)
zigzag = make_log(clean.pos, theta)
print(f"zig-zag:       ps={ps(zigzag):.2f} vs straight {ps(clean):.2f}")

# exploration scoring: survival time capped at 120 s, visited 0.5 m cells
walk = make_log(np.column_stack([np.linspace(0, 10, 2600), np.zeros(2600)]),
                np.zeros(2600), done="timeout")
print("exploration:  ", nogoal_metrics(walk))
