"""Trajectory scoring: endpoint metrics plus motion-continuity metrics.

Alongside the usual success family (SR, OSR, SPL) and interval-counted
collision rate, three continuity scores grade the whole trajectory: the
fraction of time spent inside a corridor around the reference path, the
time-averaged collision intensity, and a heading-change smoothness score.
Exploration episodes report survival time and visited area instead.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import shapely
from shapely.geometry import LineString, Point

from ._util import wrap_angle
from .config import MetricConfig
from .episodes import Episode, TaskType
from .planning import Path2
from .simulator import TrajectoryLog


@dataclass
class Corridor:
    """Reference path buffered by r_tol (a Minkowski sum with a disc)."""

    reference_path: Path2
    r_tol: float
    region: object = field(init=False)

    def __post_init__(self) -> None:
        if self.r_tol <= 0:
            raise ValueError("r_tol must be positive")
        pts = self.reference_path.waypoints
        geom = Point(pts[0]) if len(pts) < 2 else LineString(pts)
        self.region = geom.buffer(self.r_tol, quad_segs=32)
        shapely.prepare(self.region)

    def contains(self, positions: np.ndarray) -> np.ndarray:
        pts = shapely.points(positions[:, 0], positions[:, 1])
        return shapely.covers(self.region, pts)


def csr(log: TrajectoryLog, corridor: Corridor, condition=None) -> float:
    """Fraction of samples inside the corridor with task conditions holding.

    `condition(i, t)` may veto individual samples; by default the task
    condition is trivially true and only containment matters.
    """
    if log.sample_count == 0:
        raise ValueError("empty trajectory log")
    inside = corridor.contains(log.pos)
    if condition is not None:
        ok = np.array([bool(condition(i, float(log.t[i]))) for i in range(log.sample_count)])
        inside = inside & ok
    return float(inside.mean())


def icp(log: TrajectoryLog, mode: str = "binary", agent_radius: float = 0.25) -> float:
    """Time-averaged collision intensity in [0, 1].

    Binary mode scores 1 for any in-contact sample; depth mode scales by
    penetration depth capped at the agent radius.
    """
    if log.sample_count == 0:
        raise ValueError("empty trajectory log")
    if mode == "binary":
        c = (log.contact_depth > 0).astype(float)
    elif mode == "depth":
        c = np.minimum(log.contact_depth / agent_radius, 1.0)
    else:
        raise ValueError(f"unknown icp mode {mode!r}")
    return float(c.mean())


def ps(log: TrajectoryLog) -> float:
    """Smoothness: 1 minus the mean per-step heading change normalized by pi.

    Heading deltas are wrapped to (-pi, pi] and saturate at pi; a
    single-sample log is perfectly smooth by definition.
    """
    n = log.sample_count
    if n == 0:
        raise ValueError("empty trajectory log")
    if n < 2:
        return 1.0
    deltas = np.array([wrap_angle(float(d)) for d in np.diff(log.theta)])
    return float(1.0 - np.mean(np.minimum(np.abs(deltas) / np.pi, 1.0)))


def standard_metrics(log: TrajectoryLog, episode: Episode, config: MetricConfig = MetricConfig()) -> dict:
    """SR, OSR, SPL and interval-counted CR for one episode."""
    goal = np.asarray(episode.goal.position, dtype=float)
    radius = float(episode.goal.success_radius or config.success_radius)
    dists = np.linalg.norm(log.pos - goal[None, :], axis=1)
    at_goal_end = bool(dists[-1] <= radius)
    stopped = log.done_reason == "stop_issued"
    success = at_goal_end and (stopped or not config.require_stop)
    if episode.goal.heading is not None and success:
        tol = episode.goal.heading_tolerance or 0.1
        success = abs(wrap_angle(float(log.theta[-1]) - episode.goal.heading)) <= tol
    sr = 1.0 if success else 0.0
    osr = 1.0 if bool((dists <= radius).any()) else 0.0
    ref_len = episode.reference_path.length
    agent_len = log.path_length()
    denom = max(agent_len, ref_len)
    spl = sr * (ref_len / denom) if denom > 0 else sr
    cr = float(len(log.contact_intervals()))
    return {"sr": sr, "osr": osr, "spl": spl, "cr": cr}


def nogoal_metrics(log: TrajectoryLog, config: MetricConfig = MetricConfig(), time_limit: float = 120.0) -> dict:
    """Exploration scores: survival time (capped) and visited area in m^2.

    Area counts distinct cells of an `explore_cell`-sized lattice that the
    agent center visited.
    """
    episode_time = min(log.duration, time_limit)
    cell = config.explore_cell
    cells = set()
    for x, y in log.pos:
        cells.add((int(np.floor(x / cell)), int(np.floor(y / cell))))
    explored_area = len(cells) * cell * cell
    return {"episode_time": float(episode_time), "explored_area": float(explored_area)}


def score_episode(log: TrajectoryLog, episode: Episode, config: MetricConfig = MetricConfig()) -> dict:
    """All metrics for one episode, keyed for report rows."""
    row: dict = {"episode_id": episode.episode_id, "scene_id": episode.scene_id}
    corridor = Corridor(episode.reference_path, config.r_tol)
    row["csr"] = csr(log, corridor)
    row["icp"] = icp(log, mode=config.icp_mode)
    row["ps"] = ps(log)
    row.update(standard_metrics(log, episode, config))
    if episode.task_type == TaskType.NOGOAL:
        row.update(nogoal_metrics(log, config))
    return row


_MEAN_FIELDS = ("sr", "osr", "spl", "cr", "csr", "icp", "ps", "episode_time", "explored_area")


def aggregate(rows: list[dict]) -> dict:
    """Mean of every metric over the rows that report it."""
    out: dict = {"episodes": len(rows)}
    for name in _MEAN_FIELDS:
        values = [r[name] for r in rows if name in r]
        if values:
            out[name] = float(np.mean(values))
    return out
