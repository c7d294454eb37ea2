"""splatnav: executable navigation environments over annotated splat scenes.

Load an annotated scene, derive convex collision bodies and a height-slice
occupancy grid, plan reference trajectories, generate instruction-bearing
episodes, simulate disc agents with contact events, render observations,
and score runs with endpoint and motion-continuity metrics.
"""

from .baking import BakedScene, bake_scene, build_all_bodies, load_baked
from .cameras import (
    CameraPlan,
    CameraPose,
    inward_offset,
    perimeter_sweep,
    reject_near_surface,
    volume_uniform,
)
from .config import Config, DEFAULT_CONFIG
from .episodes import (
    Episode,
    Goal,
    Instruction,
    InstructionLevel,
    InstructionType,
    SingleGoalKind,
    TaskType,
    base_action_episode,
    gen_high_level,
    generate_episodes,
    label_complexity,
    load_episodes,
    save_episodes,
    template_low_level,
)
from .geometry import (
    CollisionBody,
    Contact2D,
    ConvexHull3,
    ConvexPolygon2,
    build_collision_body,
    convex_hull_2d,
    convex_hull_3d,
    disc_vs_polygon,
    raycast,
)
from .harness import EvalSlice, RunConfig, run_suite, serve_episode
from .mapping import (
    OccupancyGrid,
    SemanticTopDownMap,
    build_occupancy,
    build_semantic_map,
    fuse_masks,
    project_footprint,
)
from .metrics import Corridor, csr, icp, nogoal_metrics, ps, score_episode, standard_metrics
from .planning import (
    EndpointConstraints,
    Path2,
    PlanCost,
    astar,
    distance_transform,
    sample_endpoints,
)
from .rendering import Camera, Frame, render_depth_semantic, render_frame, render_rgb
from .scene import (
    DoorState,
    GaussianCloud,
    Mobility,
    ObjectInstance,
    Room,
    Scene,
    load_scene,
    object_surface_points,
    save_scene,
)
from .simulator import Action, AgentState, Environment, StepResult, TrajectoryLog, detect_stuck
from .synthetic import make_apartment_small, make_sealed_box

__version__ = "0.1.0"
