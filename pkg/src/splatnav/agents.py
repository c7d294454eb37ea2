"""Built-in baseline agents so the harness runs with no external model.

The oracle replays the reference path exactly (its commands are sized to
whole integration substeps, so the traveled length equals the reference
length); random walks are seeded per episode; greedy-goal turns toward the
goal and steps when the cell ahead is free.  Built-in agents are
privileged: they receive the agent pose in `info`, which wire-protocol
agents never see.
"""

from __future__ import annotations

import numpy as np

from ._util import stable_seed, wrap_angle
from .config import Config, DEFAULT_CONFIG
from .episodes import Episode
from .mapping import OccupancyGrid
from .simulator import Action

_HEADING_TOL = 1e-6
_WAYPOINT_TOL = 1e-6


class OracleAgent:
    """Follows the episode's reference path segment by segment, then stops."""

    name = "oracle"

    def __init__(self, config: Config = DEFAULT_CONFIG):
        self.config = config
        self._waypoints: np.ndarray | None = None
        self._index = 0

    def reset(self, episode: Episode) -> None:
        self._waypoints = episode.reference_path.waypoints
        self._goal_heading = episode.goal.heading
        self._index = 1  # waypoint 0 is the start pose

    def act(self, obs: dict, info: dict) -> Action:
        assert self._waypoints is not None, "reset() first"
        pos = np.asarray(info["position"], dtype=float)
        heading = float(info["heading"])
        dt = self.config.sim.dt
        agent = self.config.agent

        while self._index < len(self._waypoints):
            target = self._waypoints[self._index]
            delta = target - pos
            dist = float(np.linalg.norm(delta))
            if dist <= _WAYPOINT_TOL:
                self._index += 1
                continue
            want = float(np.arctan2(delta[1], delta[0]))
            err = wrap_angle(want - heading)
            if abs(err) > _HEADING_TOL:
                k = max(1, int(np.ceil(abs(err) / (agent.omega_max * dt))))
                return Action.continuous(0.0, err / (k * dt), k * dt)
            k = max(1, int(np.ceil(dist / (agent.v_max * dt))))
            return Action.continuous(dist / (k * dt), 0.0, k * dt)

        if self._goal_heading is not None:
            err = wrap_angle(self._goal_heading - heading)
            if abs(err) > _HEADING_TOL:
                k = max(1, int(np.ceil(abs(err) / (agent.omega_max * dt))))
                return Action.continuous(0.0, err / (k * dt), k * dt)
        return Action.stop()


class RandomAgent:
    """Seeded discrete random walk; never stops on its own."""

    name = "random"

    def __init__(self, seed: int = 0, config: Config = DEFAULT_CONFIG):
        self.seed = seed
        self._rng = np.random.default_rng(seed)

    def reset(self, episode: Episode) -> None:
        self._rng = np.random.default_rng(stable_seed("random-agent", self.seed, episode.episode_id))

    def act(self, obs: dict, info: dict) -> Action:
        roll = self._rng.random()
        if roll < 0.6:
            return Action.forward()
        if roll < 0.8:
            return Action.turn_left()
        return Action.turn_right()


class GreedyGoalAgent:
    """Turn toward the goal; step forward when the next cell is free."""

    name = "greedy-goal"

    def __init__(self, grid: OccupancyGrid, config: Config = DEFAULT_CONFIG):
        self.grid = grid
        self.config = config
        self._goal: np.ndarray | None = None
        self._radius = 0.0

    def reset(self, episode: Episode) -> None:
        self._goal = np.asarray(episode.goal.position, dtype=float)
        self._radius = float(episode.goal.success_radius)

    def act(self, obs: dict, info: dict) -> Action:
        assert self._goal is not None
        pos = np.asarray(info["position"], dtype=float)
        heading = float(info["heading"])
        delta = self._goal - pos
        if float(np.linalg.norm(delta)) <= self._radius:
            return Action.stop()
        want = float(np.arctan2(delta[1], delta[0]))
        err = wrap_angle(want - heading)
        step = np.deg2rad(self.config.agent.turn_angle_deg)
        if abs(err) > step / 2:
            return Action.turn_left() if err > 0 else Action.turn_right()
        ahead = pos + self.config.agent.step_length * np.array([np.cos(heading), np.sin(heading)])
        if self.grid.is_free(ahead):
            return Action.forward()
        return Action.turn_left()


def make_builtin_agent(name: str, *, grid: OccupancyGrid, seed: int, config: Config):
    if name == "oracle":
        return OracleAgent(config)
    if name == "random":
        return RandomAgent(seed=seed, config=config)
    if name == "greedy-goal":
        return GreedyGoalAgent(grid, config)
    raise ValueError(f"unknown builtin agent {name!r}")
