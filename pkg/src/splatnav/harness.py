"""Run orchestration: execute episode suites, score them, write reports.

One agent source per run: a named built-in baseline, a spawned subprocess
speaking protocol v1 on its pipes, or a socket peer.  Built-in runs
parallelize across episodes; results are keyed and sorted by episode id so
reports are byte-identical regardless of worker count.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import shlex
import socket
import subprocess
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from ._util import stable_seed
from .agents import make_builtin_agent
from .baking import BakedScene, load_baked
from .config import Config, DEFAULT_CONFIG, config_from_dict
from .episodes import Episode, load_episodes
from .errors import ProtocolError, SplatNavError
from .metrics import aggregate, score_episode
from .protocol import (
    LineChannel,
    channel_from_socket,
    encode_obs,
    end_message,
    handshake_server,
    parse_action,
    reset_message,
    step_message,
)
from .rendering import Camera, render_frame
from .simulator import Action, Environment, TrajectoryLog

log = logging.getLogger(__name__)

SLICE_AXES = ("task_type", "instruction_level", "scene_complexity", "path_complexity")


@dataclass(frozen=True)
class EvalSlice:
    """One cell of the task x level x complexity evaluation lattice."""

    task_type: str
    instruction_level: str
    scene_complexity: str
    path_complexity: str

    @classmethod
    def of(cls, episode: Episode) -> "EvalSlice":
        return cls(
            task_type=episode.task_type.value,
            instruction_level=episode.instruction.level.value,
            scene_complexity=episode.scene_complexity,
            path_complexity=episode.path_complexity,
        )

    def key(self) -> str:
        return "|".join(
            (self.task_type, self.instruction_level, self.scene_complexity, self.path_complexity)
        )


@dataclass
class RunConfig:
    scene_dir: str
    episode_file: str
    agent: str = "builtin:oracle"   # builtin:<name> | subprocess:<cmd> | socket:<port>
    seed: int = 0
    jobs: int = 1
    out_dir: str = "runs/out"
    observe: bool = False           # render observations for builtin agents
    action_timeout: float = 30.0
    config: Config = field(default_factory=lambda: DEFAULT_CONFIG)

    @classmethod
    def from_json(cls, path: str | Path) -> "RunConfig":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        cfg = config_from_dict(data.pop("config", {}))
        return cls(config=cfg, **data)


def make_observer(baked: BakedScene, config: Config):
    """Camera-at-agent renderer producing the configured channels."""
    from .baking import wall_bodies

    channels = tuple(config.render.channels)
    if not channels:
        return None
    bodies = [baked.bodies[k] for k in sorted(baked.bodies)] + wall_bodies(baked.scene)
    gaussians = baked.scene.gaussians

    def observe(state) -> dict:
        camera = Camera.from_agent(
            state.position, state.heading, config.agent.camera_height, config.render
        )
        frame = render_frame(camera, gaussians, bodies, channels=channels, tile=config.render.tile)
        out: dict = {}
        if frame.rgb is not None:
            out["rgb"] = frame.rgb
        if frame.depth is not None:
            out["depth"] = frame.depth
        if frame.semantic is not None:
            out["semantic"] = frame.semantic
        if frame.instance_ids is not None:
            out["instance_ids"] = frame.instance_ids
        return out

    return observe


# ---------------------------------------------------------------------------
# Episode execution


def run_episode_builtin(baked: BakedScene, episode: Episode, agent, config: Config,
                        observe=None) -> TrajectoryLog:
    env = Environment(baked.scene, baked.bodies, baked.grid, config, observe=observe)
    state, obs = env.reset(episode)
    agent.reset(episode)
    while not env.done:
        action = agent.act(obs, {"position": state.position, "heading": state.heading})
        state, result = env.step(action)
        obs = result.observation
    return env.finalize()


def serve_episode(env: Environment, channel: LineChannel, episode: Episode,
                  action_timeout: float = 30.0) -> TrajectoryLog:
    """Drive one episode over the wire.

    A silent agent counts as stop; a malformed message aborts the episode
    (the caller logs it as a protocol failure and moves on).
    """
    state, obs = env.reset(episode)
    channel.send(reset_message(episode.episode_id, episode.instruction.text, encode_obs(obs)))
    while not env.done:
        try:
            msg = channel.recv(timeout=action_timeout)
            action = parse_action(msg)
        except TimeoutError:
            log.warning("episode %s: agent timed out, issuing stop", episode.episode_id)
            action = Action.stop()
        try:
            state, result = env.step(action)
        except ValueError as exc:
            raise ProtocolError(f"rejected action: {exc}") from exc
        channel.send(
            step_message(encode_obs(result.observation), result.contact_events,
                         result.done, result.done_reason)
        )
    trajectory = env.finalize()
    channel.send(end_message(trajectory.episode_id))
    return trajectory


# ---------------------------------------------------------------------------
# Suite runner


def _run_builtin_suite(baked: BakedScene, episodes: list[Episode], run_cfg: RunConfig):
    agent_name = run_cfg.agent.split(":", 1)[1]
    observe = make_observer(baked, run_cfg.config) if run_cfg.observe else None
    logs: dict[str, TrajectoryLog | None] = {}

    def one(episode: Episode):
        agent = make_builtin_agent(
            agent_name,
            grid=baked.grid,
            seed=stable_seed(run_cfg.seed, episode.episode_id),
            config=run_cfg.config,
        )
        try:
            return episode.episode_id, run_episode_builtin(
                baked, episode, agent, run_cfg.config, observe=observe
            )
        except SplatNavError as exc:
            log.error("episode %s failed: %s", episode.episode_id, exc)
            return episode.episode_id, None

    if run_cfg.jobs > 1:
        with ThreadPoolExecutor(max_workers=run_cfg.jobs) as pool:
            for eid, trajectory in pool.map(one, episodes):
                logs[eid] = trajectory
    else:
        for episode in episodes:
            eid, trajectory = one(episode)
            logs[eid] = trajectory
    return logs


def _run_channel_suite(baked: BakedScene, episodes: list[Episode], run_cfg: RunConfig,
                       channel: LineChannel):
    observe = make_observer(baked, run_cfg.config)
    logs: dict[str, TrajectoryLog | None] = {}
    for episode in episodes:
        env = Environment(baked.scene, baked.bodies, baked.grid, run_cfg.config, observe=observe)
        try:
            logs[episode.episode_id] = serve_episode(
                env, channel, episode, action_timeout=run_cfg.action_timeout
            )
        except ProtocolError as exc:
            log.error("episode %s: protocol failure: %s", episode.episode_id, exc)
            logs[episode.episode_id] = None
            break  # the channel is unusable once desynchronized
    return logs


def run_suite(run_cfg: RunConfig) -> dict:
    """Execute every episode, score, and write reports.

    Returns {"rows", "summary", "out_dir", "failures"}.
    """
    baked = load_baked(run_cfg.scene_dir, run_cfg.config)
    episodes = load_episodes(run_cfg.episode_file)
    out_dir = Path(run_cfg.out_dir)
    (out_dir / "logs").mkdir(parents=True, exist_ok=True)

    kind, _, arg = run_cfg.agent.partition(":")
    if kind == "builtin":
        logs = _run_builtin_suite(baked, episodes, run_cfg)
    elif kind == "subprocess":
        proc = subprocess.Popen(shlex.split(arg), stdin=subprocess.PIPE, stdout=subprocess.PIPE)
        channel = LineChannel(reader=proc.stdout, writer=proc.stdin)
        try:
            handshake_server(channel)
            logs = _run_channel_suite(baked, episodes, run_cfg, channel)
        finally:
            channel.close()
            proc.terminate()
            proc.wait(timeout=10)
    elif kind == "socket":
        server = socket.create_server(("127.0.0.1", int(arg)))
        server.settimeout(run_cfg.action_timeout)
        conn = channel = None
        try:
            # port probes and dropped dials are common; keep accepting until
            # a peer completes the version handshake
            while channel is None:
                conn, _ = server.accept()
                candidate = channel_from_socket(conn)
                try:
                    handshake_server(candidate)
                    channel = candidate
                except ProtocolError as exc:
                    log.info("rejecting connection before handshake: %s", exc)
                    candidate.close()
                    conn.close()
            logs = _run_channel_suite(baked, episodes, run_cfg, channel)
        finally:
            if channel is not None:
                channel.close()
            if conn is not None:
                conn.close()
            server.close()
    else:
        raise ValueError(f"unknown agent source {run_cfg.agent!r}")

    for eid, trajectory in sorted(logs.items()):
        if trajectory is not None:
            trajectory.save(out_dir / "logs" / f"{eid}.jsonl")

    rows = score_suite(episodes, logs, run_cfg.config)
    summary = write_report(rows, out_dir, run_cfg)
    failures = [r["episode_id"] for r in rows if r.get("status") != "ok"]
    if failures:
        log.warning("partial failure: %d/%d episodes aborted", len(failures), len(rows))
    return {"rows": rows, "summary": summary, "out_dir": out_dir, "failures": failures}


def score_suite(episodes: list[Episode], logs: dict[str, TrajectoryLog | None],
                config: Config) -> list[dict]:
    rows = []
    by_id = {ep.episode_id: ep for ep in episodes}
    for eid in sorted(by_id):
        episode = by_id[eid]
        trajectory = logs.get(eid)
        s = EvalSlice.of(episode)
        row: dict = {
            "episode_id": eid,
            "scene_id": episode.scene_id,
            "task_type": s.task_type,
            "instruction_level": s.instruction_level,
            "scene_complexity": s.scene_complexity,
            "path_complexity": s.path_complexity,
        }
        if trajectory is None:
            row.update({"status": "protocol_failure", "sr": 0.0, "osr": 0.0, "spl": 0.0})
        else:
            row["status"] = "ok"
            row.update(score_episode(trajectory, episode, config.metric))
        rows.append(row)
    return rows


_CSV_COLUMNS = [
    "episode_id", "scene_id", "task_type", "instruction_level", "scene_complexity",
    "path_complexity", "status", "sr", "osr", "spl", "cr", "csr", "icp", "ps",
    "episode_time", "explored_area",
]


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def rows_to_csv(rows: list[dict], columns: list[str]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_format_cell(row.get(c)) for c in columns])
    return buf.getvalue()


def write_report(rows: list[dict], out_dir: str | Path, run_cfg: RunConfig | None = None) -> dict:
    """episodes.csv + per-slice slices.csv + summary.json."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "episodes.csv").write_text(rows_to_csv(rows, _CSV_COLUMNS), encoding="utf-8")

    slices: dict[str, list[dict]] = {}
    for row in rows:
        key = "|".join(str(row[a]) for a in SLICE_AXES)
        slices.setdefault(key, []).append(row)
    slice_rows = []
    for key in sorted(slices):
        agg = aggregate(slices[key])
        srow = dict(zip(SLICE_AXES, key.split("|")))
        srow.update(agg)
        slice_rows.append(srow)
    slice_columns = list(SLICE_AXES) + ["episodes", "sr", "osr", "spl", "cr", "csr", "icp", "ps",
                                        "episode_time", "explored_area"]
    (out_dir / "slices.csv").write_text(rows_to_csv(slice_rows, slice_columns), encoding="utf-8")

    summary = {
        "overall": aggregate(rows),
        "slices": {key: aggregate(group) for key, group in sorted(slices.items())},
    }
    if run_cfg is not None:
        # worker count deliberately omitted: results must not depend on it
        summary["run"] = {
            "agent": run_cfg.agent,
            "seed": run_cfg.seed,
            "config_hash": run_cfg.config.content_hash(),
            "metric_config": {
                "r_tol": run_cfg.config.metric.r_tol,
                "success_radius": run_cfg.config.metric.success_radius,
                "explore_cell": run_cfg.config.metric.explore_cell,
            },
        }
    (out_dir / "summary.json").write_text(
        json.dumps(summary, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    return summary


def score_logs(episode_file: str | Path, logs_dir: str | Path, config: Config) -> list[dict]:
    """Re-score previously written logs (the `score` verb)."""
    episodes = load_episodes(episode_file)
    logs: dict[str, TrajectoryLog | None] = {}
    for ep in episodes:
        path = Path(logs_dir) / f"{ep.episode_id}.jsonl"
        logs[ep.episode_id] = TrajectoryLog.load(path) if path.is_file() else None
    return score_suite(episodes, logs, config)
