"""Tunable parameters, with the defaults used throughout the library.

Everything an episode's outcome depends on lives here so that runs can be
reproduced from a single record.  All distances are meters, angles radians,
times seconds unless a name says otherwise.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field


@dataclass(frozen=True)
class AgentConfig:
    """Embodiment of the simulated ground agent."""

    radius: float = 0.25
    height: float = 1.5
    camera_height: float = 1.2
    v_max: float = 1.0          # m/s
    omega_max: float = 2.0 * 3.141592653589793  # rad/s
    step_length: float = 0.25   # discrete `forward` travel
    turn_angle_deg: float = 15.0  # discrete turn increment


@dataclass(frozen=True)
class MapConfig:
    """Occupancy-grid construction parameters."""

    resolution: float = 0.05
    slice_height: float = 1.2
    inflate: bool = True        # grow obstacles by the agent radius
    tau_link: float = 0.05      # single-linkage clustering threshold
    footprint_epsilon: float = 1e-3  # thin-rectangle width for collinear footprints


@dataclass(frozen=True)
class PlanConfig:
    """Path-search cost weights (see planning.PlanCost for semantics)."""

    w_dist: float = 1.0
    w_narrow: float = 2.0
    w_area: float = 0.5
    clearance_soft: float = 0.6
    min_geodesic: float = 2.0
    min_safety: float = 0.5
    sample_attempts: int = 200


@dataclass(frozen=True)
class SimConfig:
    """Simulation stepping and lifecycle."""

    dt: float = 0.05            # integration substep
    max_steps: int = 500
    nogoal_time_limit: float = 120.0
    stuck_window: float = 2.0
    stuck_displacement: float = 0.05
    recovery_backoff: float = 0.1
    auto_recover: bool = True


@dataclass(frozen=True)
class MetricConfig:
    """Scoring parameters stamped into every report."""

    r_tol: float = 1.5
    success_radius: float = 3.0
    require_stop: bool = True
    icp_mode: str = "binary"    # or "depth"
    explore_cell: float = 0.5   # exploration cell edge for area accounting


@dataclass(frozen=True)
class RenderConfig:
    """Observation rendering parameters."""

    width: int = 224
    height: int = 224
    vfov_deg: float = 90.0
    near: float = 0.05
    far: float = 50.0
    tile: int = 16
    channels: tuple[str, ...] = ("rgb", "depth", "semantic")


@dataclass(frozen=True)
class Config:
    """Bundle of all parameter groups."""

    agent: AgentConfig = field(default_factory=AgentConfig)
    map: MapConfig = field(default_factory=MapConfig)
    plan: PlanConfig = field(default_factory=PlanConfig)
    sim: SimConfig = field(default_factory=SimConfig)
    metric: MetricConfig = field(default_factory=MetricConfig)
    render: RenderConfig = field(default_factory=RenderConfig)

    def to_dict(self) -> dict:
        return asdict(self)

    def content_hash(self) -> str:
        """Stable hash of every parameter, for cache stamps and log headers."""
        blob = json.dumps(self.to_dict(), sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()[:16]


DEFAULT_CONFIG = Config()


def config_from_dict(data: dict) -> Config:
    """Rebuild a Config from (a subset of) its to_dict() form."""
    groups = {}
    for name, cls in (
        ("agent", AgentConfig),
        ("map", MapConfig),
        ("plan", PlanConfig),
        ("sim", SimConfig),
        ("metric", MetricConfig),
        ("render", RenderConfig),
    ):
        sub = dict(data.get(name, {}))
        if name == "render" and "channels" in sub:
            sub["channels"] = tuple(sub["channels"])
        groups[name] = cls(**sub)
    return Config(**groups)
