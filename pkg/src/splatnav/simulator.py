"""Continuous kinematic simulation: agent motion, contacts, episode lifecycle.

The agent is a disc gliding on the floor plane.  Discrete commands expand
to short continuous (v, omega) segments; motion integrates on a fixed
substep so a wall can never be crossed between samples (substep travel at
v_max stays below the agent radius).  On contact the agent is projected
out along the contact normal and keeps sliding; exploration episodes
instead terminate on first touch.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._util import wrap_angle
from .config import Config, DEFAULT_CONFIG
from .errors import EpisodeFinishedError, SceneValidationError
from .episodes import Episode, TaskType
from .geometry import (
    CollisionBody,
    Contact2D,
    ConvexPolygon2,
    disc_vs_polygon,
    disc_vs_segment,
    hull_cross_section,
)
from .mapping import OccupancyGrid
from .scene import DoorState, Scene, is_door_category

_DISCRETE = ("turn_left", "turn_right", "forward", "stop")


@dataclass(frozen=True)
class Action:
    """Either one discrete command or a continuous velocity segment."""

    discrete: str | None = None
    v: float = 0.0
    omega: float = 0.0
    duration: float = 0.0

    @classmethod
    def forward(cls) -> "Action":
        return cls(discrete="forward")

    @classmethod
    def turn_left(cls) -> "Action":
        return cls(discrete="turn_left")

    @classmethod
    def turn_right(cls) -> "Action":
        return cls(discrete="turn_right")

    @classmethod
    def stop(cls) -> "Action":
        return cls(discrete="stop")

    @classmethod
    def continuous(cls, v: float, omega: float, duration: float) -> "Action":
        return cls(discrete=None, v=v, omega=omega, duration=duration)

    def to_dict(self) -> dict:
        if self.discrete is not None:
            return {"discrete": self.discrete}
        return {"continuous": {"v": self.v, "omega": self.omega, "duration": self.duration}}

    @classmethod
    def from_dict(cls, data: dict) -> "Action":
        if "discrete" in data and data["discrete"] is not None:
            name = data["discrete"]
            if name not in _DISCRETE:
                raise ValueError(f"unknown discrete action {name!r}")
            return cls(discrete=name)
        cont = data["continuous"]
        return cls.continuous(float(cont["v"]), float(cont["omega"]), float(cont["duration"]))


@dataclass
class AgentState:
    position: np.ndarray  # (2,)
    heading: float        # rad, wrapped to (-pi, pi]
    height: float
    radius: float
    time: float = 0.0

    def copy(self) -> "AgentState":
        return AgentState(self.position.copy(), self.heading, self.height, self.radius, self.time)


@dataclass
class ContactEvent:
    instance_id: str
    penetration_depth: float
    t: float


@dataclass
class StepResult:
    observation: dict
    contact_events: list[ContactEvent]
    done: bool
    done_reason: str | None  # stop_issued | timeout | collision_terminated | max_steps


@dataclass
class ContactInterval:
    instance_id: str
    t_start: float
    t_end: float
    max_depth: float


@dataclass
class TrajectoryLog:
    """Immutable record of one episode; the sole input to the metrics."""

    scene_id: str
    episode_id: str
    config_hash: str
    done_reason: str
    t: np.ndarray               # (n,)
    pos: np.ndarray             # (n, 2)
    theta: np.ndarray           # (n,)
    contact_depth: np.ndarray   # (n,) max penetration at the sample, 0 = free
    contact_ids: list[str | None]
    actions: list[dict]         # [{"t": ..., "action": {...}}]

    @property
    def duration(self) -> float:
        return float(self.t[-1]) if len(self.t) else 0.0

    @property
    def sample_count(self) -> int:
        return len(self.t)

    @property
    def step_count(self) -> int:
        """Agent-issued actions; automatic recovery nudges don't count."""
        return sum(1 for a in self.actions if "recover" not in a["action"])

    def contact_intervals(self) -> list[ContactInterval]:
        """Maximal contiguous in-contact runs, split on instance change."""
        out: list[ContactInterval] = []
        current: ContactInterval | None = None
        for i in range(len(self.t)):
            depth = float(self.contact_depth[i])
            iid = self.contact_ids[i]
            if depth > 0 and iid is not None:
                if current is not None and current.instance_id == iid:
                    current.t_end = float(self.t[i])
                    current.max_depth = max(current.max_depth, depth)
                else:
                    if current is not None:
                        out.append(current)
                    current = ContactInterval(iid, float(self.t[i]), float(self.t[i]), depth)
            else:
                if current is not None:
                    out.append(current)
                    current = None
        if current is not None:
            out.append(current)
        return out

    def path_length(self) -> float:
        if len(self.pos) < 2:
            return 0.0
        return float(np.linalg.norm(np.diff(self.pos, axis=0), axis=1).sum())

    # -- serialization ------------------------------------------------------

    def to_jsonl(self) -> str:
        # actions attach to the first sample they produced ("i"); timestamps
        # alone cannot key them since recovery shares its t with neighbors
        actions_by_sample = {a["i"]: a["action"] for a in self.actions}
        lines = [json.dumps(
            {
                "type": "header",
                "scene_id": self.scene_id,
                "episode_id": self.episode_id,
                "config_hash": self.config_hash,
                "done_reason": self.done_reason,
            },
            sort_keys=True,
        )]
        for i in range(len(self.t)):
            rec: dict = {
                "t": float(self.t[i]),
                "x": float(self.pos[i, 0]),
                "y": float(self.pos[i, 1]),
                "theta": float(self.theta[i]),
            }
            action = actions_by_sample.get(i)
            if action is not None:
                rec["action"] = action
            if self.contact_depth[i] > 0:
                rec["contacts"] = [
                    {"instance_id": self.contact_ids[i], "depth": float(self.contact_depth[i])}
                ]
            lines.append(json.dumps(rec, sort_keys=True))
        return "\n".join(lines) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_jsonl(), encoding="utf-8")

    @classmethod
    def from_jsonl(cls, text: str) -> "TrajectoryLog":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        header = json.loads(lines[0])
        t, xs, ys, th, depth, ids, actions = [], [], [], [], [], [], []
        for i, ln in enumerate(lines[1:]):
            rec = json.loads(ln)
            t.append(rec["t"])
            xs.append(rec["x"])
            ys.append(rec["y"])
            th.append(rec["theta"])
            contacts = rec.get("contacts", [])
            if contacts:
                depth.append(contacts[0]["depth"])
                ids.append(contacts[0]["instance_id"])
            else:
                depth.append(0.0)
                ids.append(None)
            if "action" in rec:
                actions.append({"i": i, "t": rec["t"], "action": rec["action"]})
        return cls(
            scene_id=header["scene_id"],
            episode_id=header["episode_id"],
            config_hash=header["config_hash"],
            done_reason=header["done_reason"],
            t=np.asarray(t, dtype=float),
            pos=np.column_stack([xs, ys]) if t else np.zeros((0, 2)),
            theta=np.asarray(th, dtype=float),
            contact_depth=np.asarray(depth, dtype=float),
            contact_ids=ids,
            actions=actions,
        )

    @classmethod
    def load(cls, path: str | Path) -> "TrajectoryLog":
        return cls.from_jsonl(Path(path).read_text(encoding="utf-8"))


def build_contact_set(
    scene: Scene, bodies: dict[str, CollisionBody], slice_height: float
) -> list[tuple[str, object]]:
    """2D obstacle shapes the agent disc collides with.

    Non-door hulls contribute their cross-sections at the slice height;
    doors contribute their footprint only while closed; every wall segment
    participates.  Entries are (instance_id, polygon-or-segment) in a fixed
    deterministic order.
    """
    from .mapping import project_footprint  # local import to avoid a cycle
    from .scene import object_surface_points

    obstacles: list[tuple[str, object]] = []
    door_state = {
        o.instance_id: o.door_state for o in scene.objects if is_door_category(o.category)
    }
    for iid in sorted(bodies):
        if iid in door_state:
            continue
        for hull in bodies[iid].hulls:
            section = hull_cross_section(hull, slice_height)
            if section is not None:
                obstacles.append((iid, section))
    for obj in sorted(scene.objects, key=lambda o: o.instance_id):
        if door_state.get(obj.instance_id) == DoorState.CLOSED:
            pts = object_surface_points(obj, 64)
            obstacles.append((obj.instance_id, project_footprint(obj, pts)))
    for i, wall in enumerate(scene.walls):
        seg = np.asarray(wall, dtype=float)
        obstacles.append((f"wall_{i}", seg))
    return obstacles


def _probe(center: np.ndarray, radius: float, shape) -> Contact2D:
    if isinstance(shape, ConvexPolygon2):
        return disc_vs_polygon(center, radius, shape)
    seg = shape
    return disc_vs_segment(center, radius, seg[0], seg[1])


class Environment:
    """One episode in one scene; single-threaded mutation per instance."""

    def __init__(
        self,
        scene: Scene,
        bodies: dict[str, CollisionBody],
        grid: OccupancyGrid,
        config: Config = DEFAULT_CONFIG,
        observe=None,
    ):
        self.scene = scene
        self.grid = grid
        self.config = config
        self.contact_set = build_contact_set(scene, bodies, config.map.slice_height)
        self._observe = observe  # callable(AgentState) -> dict of channels
        self.episode: Episode | None = None
        self._done = False

    # -- lifecycle ----------------------------------------------------------

    def reset(self, episode: Episode) -> tuple[AgentState, dict]:
        if episode.scene_id != self.scene.scene_id:
            raise SceneValidationError(
                f"episode scene {episode.scene_id!r} != loaded scene {self.scene.scene_id!r}"
            )
        start = np.asarray(episode.start_pose[:2], dtype=float)
        if not self.grid.is_free(start):
            raise SceneValidationError(
                f"episode {episode.episode_id}: start pose {start.tolist()} is blocked"
            )
        self.episode = episode
        self._done = False
        self._done_reason: str | None = None
        self._steps = 0
        self.state = AgentState(
            position=start.copy(),
            heading=wrap_angle(float(episode.start_pose[2])),
            height=self.config.agent.height,
            radius=self.config.agent.radius,
            time=0.0,
        )
        self._t = [0.0]
        self._pos = [start.copy()]
        self._theta = [self.state.heading]
        self._depth = [0.0]
        self._ids: list[str | None] = [None]
        self._actions: list[dict] = []
        self._cmd_v: list[float] = [0.0]
        return self.state.copy(), self._observation()

    def _observation(self) -> dict:
        if self._observe is None:
            return {}
        return self._observe(self.state)

    @property
    def done(self) -> bool:
        return self._done

    @property
    def done_reason(self) -> str | None:
        return self._done_reason

    # -- stepping -----------------------------------------------------------

    def _expand(self, action: Action) -> tuple[float, float, float]:
        """Map an action to (v, omega, duration), validating limits."""
        cfg = self.config.agent
        if action.discrete is not None:
            if action.discrete == "forward":
                duration = cfg.step_length / cfg.v_max
                return cfg.v_max, 0.0, duration
            angle = np.deg2rad(cfg.turn_angle_deg)
            omega = angle / 0.25  # quarter-second in-place turn
            if action.discrete == "turn_left":
                return 0.0, omega, 0.25
            if action.discrete == "turn_right":
                return 0.0, -omega, 0.25
            raise ValueError(f"unexpected discrete action {action.discrete!r}")
        if abs(action.v) > cfg.v_max + 1e-9:
            raise ValueError(f"|v|={abs(action.v)} exceeds v_max={cfg.v_max}")
        if abs(action.omega) > cfg.omega_max + 1e-9:
            raise ValueError(f"|omega|={abs(action.omega)} exceeds omega_max={cfg.omega_max}")
        if action.duration <= 0:
            raise ValueError("duration must be positive")
        return action.v, action.omega, action.duration

    def _integrate(self, v: float, omega: float, dt: float) -> None:
        th = self.state.heading
        if abs(omega) < 1e-12:
            self.state.position = self.state.position + v * dt * np.array([np.cos(th), np.sin(th)])
        else:
            th2 = th + omega * dt
            r = v / omega
            self.state.position = self.state.position + np.array(
                [r * (np.sin(th2) - np.sin(th)), -r * (np.cos(th2) - np.cos(th))]
            )
            self.state.heading = wrap_angle(th2)

    def _resolve_contacts(self, t: float) -> list[ContactEvent]:
        """Project the disc out of any penetration; report what was touched."""
        events: list[ContactEvent] = []
        radius = self.state.radius
        for _ in range(4):
            deepest: tuple[float, str, Contact2D] | None = None
            for iid, shape in self.contact_set:
                contact = _probe(self.state.position, radius, shape)
                if contact.in_contact and (deepest is None or contact.penetration_depth > deepest[0]):
                    deepest = (contact.penetration_depth, iid, contact)
            if deepest is None:
                break
            depth, iid, contact = deepest
            if not any(e.instance_id == iid for e in events):
                events.append(ContactEvent(iid, depth, t))
            self.state.position = self.state.position + contact.normal * depth
        return events

    def step(self, action: Action) -> tuple[AgentState, StepResult]:
        if self.episode is None:
            raise EpisodeFinishedError("reset() must be called before step()")
        if self._done:
            raise EpisodeFinishedError("episode already finished")
        sim = self.config.sim
        nogoal = self.episode.task_type == TaskType.NOGOAL
        # the action owns the first sample it produces (stop appends its own)
        self._actions.append(
            {"i": len(self._t), "t": round(self.state.time, 9), "action": action.to_dict()}
        )
        all_events: list[ContactEvent] = []

        if action.discrete == "stop":
            self._done = True
            self._done_reason = "stop_issued"
            self._append_sample(0.0)
        else:
            v, omega, duration = self._expand(action)
            substeps = max(1, int(round(duration / sim.dt)))
            for _ in range(substeps):
                self._integrate(v, omega, sim.dt)
                self.state.time += sim.dt
                t = self.state.time
                events = self._resolve_contacts(t)
                self._append_sample(v, events)
                for ev in events:
                    if not any(
                        e.instance_id == ev.instance_id and abs(e.t - ev.t) <= sim.dt * 1.5
                        for e in all_events
                    ):
                        all_events.append(ev)
                if nogoal and events:
                    self._done = True
                    self._done_reason = "collision_terminated"
                    break
                if nogoal and self.state.time >= sim.nogoal_time_limit - 1e-9:
                    self._done = True
                    self._done_reason = "timeout"
                    break
            if not self._done and sim.auto_recover and self._is_stuck():
                self._recover()

        self._steps += 1
        if not self._done and self._steps >= sim.max_steps:
            self._done = True
            self._done_reason = "max_steps"

        result = StepResult(
            observation=self._observation(),
            contact_events=all_events,
            done=self._done,
            done_reason=self._done_reason,
        )
        return self.state.copy(), result

    def _append_sample(self, commanded_v: float, events: list[ContactEvent] | None = None) -> None:
        self._t.append(self.state.time)
        self._pos.append(self.state.position.copy())
        self._theta.append(self.state.heading)
        self._cmd_v.append(commanded_v)
        if events:
            worst = max(events, key=lambda e: e.penetration_depth)
            self._depth.append(worst.penetration_depth)
            self._ids.append(worst.instance_id)
        else:
            self._depth.append(0.0)
            self._ids.append(None)

    # -- stuck handling -----------------------------------------------------

    def _is_stuck(self) -> bool:
        # only the trailing window matters; keep this O(window), not O(log)
        k = int(self.config.sim.stuck_window / self.config.sim.dt) + 2
        return detect_stuck(
            np.asarray(self._t[-k:]),
            np.asarray(self._pos[-k:]),
            np.asarray(self._cmd_v[-k:]),
            window=self.config.sim.stuck_window,
            threshold=self.config.sim.stuck_displacement,
        )

    def _recover(self) -> None:
        th = self.state.heading
        candidate = self.state.position - self.config.sim.recovery_backoff * np.array(
            [np.cos(th), np.sin(th)]
        )
        for _, shape in self.contact_set:
            if _probe(candidate, self.state.radius, shape).in_contact:
                return  # backing off would hit something: stay put
        self.state.position = candidate
        self._actions.append(
            {"i": len(self._t), "t": round(self.state.time, 9), "action": {"recover": True}}
        )
        self._append_sample(0.0)

    # -- finalize -----------------------------------------------------------

    def finalize(self) -> TrajectoryLog:
        if not self._done:
            raise EpisodeFinishedError("episode still running; finalize() needs done=True")
        assert self.episode is not None
        return TrajectoryLog(
            scene_id=self.scene.scene_id,
            episode_id=self.episode.episode_id,
            config_hash=self.config.content_hash(),
            done_reason=self._done_reason or "max_steps",
            t=np.asarray(self._t, dtype=float),
            pos=np.asarray(self._pos, dtype=float),
            theta=np.asarray(self._theta, dtype=float),
            contact_depth=np.asarray(self._depth, dtype=float),
            contact_ids=list(self._ids),
            actions=list(self._actions),
        )


def detect_stuck(
    t: np.ndarray,
    pos: np.ndarray,
    commanded_v: np.ndarray,
    window: float = 2.0,
    threshold: float = 0.05,
) -> bool:
    """Stuck iff displacement over the last `window` seconds stays under
    `threshold` while nonzero translation was commanded.  Pure rotation is
    not stuck."""
    if len(t) < 2 or t[-1] - t[0] < window:
        return False
    start = int(np.searchsorted(t, t[-1] - window, side="left"))
    if t[-1] - t[start] < window - 1e-9:
        start = max(0, start - 1)
    displacement = float(np.linalg.norm(pos[-1] - pos[start]))
    moved_cmd = bool(np.any(np.abs(commanded_v[start + 1:]) > 1e-12))
    return displacement < threshold and moved_cmd
