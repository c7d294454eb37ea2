"""Episodes and instructions: templating, labeling, and generated text.

Low-level instructions come from a fixed template table over scene names.
High-level instructions are fetched from an instruction service (an HTTP
endpoint or the bundled deterministic stub) fed with a textual map of the
scene; replies are schema-checked and entries that leak internal IDs or
miss the word budget are dropped.
"""

from __future__ import annotations

import json
import logging
import os
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from ._util import stable_seed, wrap_angle
from .errors import (
    EmptyResultError,
    ResponseSchemaError,
    TransportError,
    UnknownNameError,
)
from .planning import Path2

log = logging.getLogger(__name__)

WORD_MIN, WORD_MAX = 5, 20

SCENE_MANY_ASSETS = 376   # strictly more -> "many"
SCENE_FEW_ASSETS = 184    # strictly fewer -> "few"
PATH_LONG_M = 29.0        # strictly longer -> "long"
PATH_SHORT_M = 8.4        # strictly shorter -> "short"


class InstructionLevel(Enum):
    HIGH = "high"
    LOW = "low"


class InstructionType(Enum):
    # high-level
    ADD_OBJECT = "AddObject"
    SCENARIO_DRIVEN = "ScenarioDriven"
    RELATIVE_RELATIONSHIP = "RelativeRelationship"
    ATTRIBUTE_BASED = "AttributeBased"
    AREA_BASED = "AreaBased"
    # low-level
    BASE_ACTION = "BaseAction"
    SINGLE_GOAL = "SingleGoal"


HIGH_TYPES = (
    InstructionType.ADD_OBJECT,
    InstructionType.SCENARIO_DRIVEN,
    InstructionType.RELATIVE_RELATIONSHIP,
    InstructionType.ATTRIBUTE_BASED,
    InstructionType.AREA_BASED,
)
LOW_TYPES = (InstructionType.BASE_ACTION, InstructionType.SINGLE_GOAL)

# Wire names used by the instruction service (accepted on input, emitted in
# requests); maps to the canonical enum.
_SERVICE_TYPE_NAMES = {
    "Add_Object": InstructionType.ADD_OBJECT,
    "Scenario_Driven": InstructionType.SCENARIO_DRIVEN,
    "Relative_Relationship": InstructionType.RELATIVE_RELATIONSHIP,
    "Attribute-based": InstructionType.ATTRIBUTE_BASED,
    "Area-based": InstructionType.AREA_BASED,
}
_TYPE_TO_SERVICE = {v: k for k, v in _SERVICE_TYPE_NAMES.items()}


class TaskType(Enum):
    VLN = "VLN"
    NOGOAL = "NogoalNav"


@dataclass
class Instruction:
    level: InstructionLevel
    type: InstructionType
    text: str
    slots: dict[str, str] = field(default_factory=dict)

    def validate(self, forbidden_ids: list[str] | None = None) -> None:
        if self.level == InstructionLevel.HIGH and self.type not in HIGH_TYPES:
            raise ValueError(f"{self.type} is not a high-level type")
        if self.level == InstructionLevel.LOW and self.type not in LOW_TYPES:
            raise ValueError(f"{self.type} is not a low-level type")
        if forbidden_ids:
            for iid in forbidden_ids:
                if iid and iid in self.text:
                    raise ValueError(f"instruction leaks internal id {iid!r}: {self.text!r}")
        if self.level == InstructionLevel.HIGH:
            words = len(self.text.split())
            if not (WORD_MIN <= words <= WORD_MAX):
                raise ValueError(f"high-level text must be {WORD_MIN}-{WORD_MAX} words, got {words}")

    def to_dict(self) -> dict:
        return {
            "level": self.level.value,
            "type": self.type.value,
            "text": self.text,
            "slots": dict(self.slots),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Instruction":
        return cls(
            level=InstructionLevel(data["level"]),
            type=InstructionType(data["type"]),
            text=data["text"],
            slots=dict(data.get("slots", {})),
        )


@dataclass
class Goal:
    position: np.ndarray            # (2,)
    success_radius: float
    target_instance: str | None = None
    heading: float | None = None    # for in-place turns
    heading_tolerance: float | None = None

    def to_dict(self) -> dict:
        out: dict = {
            "position": [float(self.position[0]), float(self.position[1])],
            "success_radius": float(self.success_radius),
        }
        if self.target_instance is not None:
            out["target_instance"] = self.target_instance
        if self.heading is not None:
            out["heading"] = float(self.heading)
            out["heading_tolerance"] = float(self.heading_tolerance or 0.1)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "Goal":
        return cls(
            position=np.asarray(data["position"], dtype=float),
            success_radius=float(data["success_radius"]),
            target_instance=data.get("target_instance"),
            heading=data.get("heading"),
            heading_tolerance=data.get("heading_tolerance"),
        )


@dataclass
class Episode:
    episode_id: str
    scene_id: str
    instruction: Instruction
    start_pose: tuple[float, float, float]  # x, y, heading
    goal: Goal
    reference_path: Path2
    scene_complexity: str = "mid"   # many | mid | few
    path_complexity: str = "mid"    # long | mid | short
    task_type: TaskType = TaskType.VLN
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "episode_id": self.episode_id,
            "scene_id": self.scene_id,
            "instruction": self.instruction.to_dict(),
            "start_pose": [float(v) for v in self.start_pose],
            "goal": self.goal.to_dict(),
            "reference_path": [[float(x), float(y)] for x, y in self.reference_path.waypoints],
            "labels": {
                "scene_complexity": self.scene_complexity,
                "path_complexity": self.path_complexity,
            },
            "task_type": self.task_type.value,
            "metadata": dict(self.metadata),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Episode":
        labels = data.get("labels", {})
        return cls(
            episode_id=data["episode_id"],
            scene_id=data["scene_id"],
            instruction=Instruction.from_dict(data["instruction"]),
            start_pose=tuple(float(v) for v in data["start_pose"]),
            goal=Goal.from_dict(data["goal"]),
            reference_path=Path2(np.asarray(data["reference_path"], dtype=float)),
            scene_complexity=labels.get("scene_complexity", "mid"),
            path_complexity=labels.get("path_complexity", "mid"),
            task_type=TaskType(data.get("task_type", "VLN")),
            metadata=dict(data.get("metadata", {})),
        )


def save_episodes(episodes: list[Episode], path: str | Path) -> None:
    """One episode per JSON line."""
    text = "".join(json.dumps(ep.to_dict(), sort_keys=True) + "\n" for ep in episodes)
    Path(path).write_text(text, encoding="utf-8")


def load_episodes(path: str | Path) -> list[Episode]:
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            out.append(Episode.from_dict(json.loads(line)))
    return out


# ---------------------------------------------------------------------------
# Complexity labels


def label_complexity(scene_asset_count: int, path_length: float) -> tuple[str, str]:
    """(scene_complexity, path_complexity) from asset count and path length.

    Thresholds are strict: boundary values land in "mid".
    """
    if scene_asset_count > SCENE_MANY_ASSETS:
        scene = "many"
    elif scene_asset_count < SCENE_FEW_ASSETS:
        scene = "few"
    else:
        scene = "mid"
    if path_length > PATH_LONG_M:
        path = "long"
    elif path_length < PATH_SHORT_M:
        path = "short"
    else:
        path = "mid"
    return scene, path


# ---------------------------------------------------------------------------
# Low-level templating


class SingleGoalKind(Enum):
    ROOM_TO_ROOM = "Room-to-Room"
    ROOM_TO_OBJECT = "Room-to-Object"
    OBJECT_TO_OBJECT = "Object-to-Object"
    OBJECT_TO_ROOM = "Object-to-Room"
    ZONE_TO_ZONE = "Zone-to-Zone"


_SINGLE_GOAL_TEMPLATES = {
    SingleGoalKind.ROOM_TO_ROOM: "Go from the {a} to the {b}.",
    SingleGoalKind.ROOM_TO_OBJECT: "Walk to the {b} in the {a}.",
    SingleGoalKind.OBJECT_TO_OBJECT: "Walk from the {a} to the {b}.",
    SingleGoalKind.OBJECT_TO_ROOM: "Go from the {a} to the {b}.",
    SingleGoalKind.ZONE_TO_ZONE: "Walk from the {a} to the {b}.",
}


def template_low_level(
    start_ref: str,
    end_ref: str,
    kind: SingleGoalKind,
    vocabulary: set[str] | None = None,
    forbidden_ids: list[str] | None = None,
) -> Instruction:
    """Deterministic point-to-point instruction from the template table.

    `vocabulary` (taxonomy + room/zone names) guards against references to
    names the scene does not contain.
    """
    if vocabulary is not None:
        for name in (start_ref, end_ref):
            if name not in vocabulary:
                raise UnknownNameError(f"{name!r} is not a known room/object/zone name")
    text = _SINGLE_GOAL_TEMPLATES[kind].format(a=start_ref, b=end_ref)
    instr = Instruction(
        level=InstructionLevel.LOW,
        type=InstructionType.SINGLE_GOAL,
        text=text,
        slots={"start_ref": start_ref, "end_ref": end_ref, "kind": kind.value},
    )
    instr.validate(forbidden_ids)
    return instr


_NUMBER_WORDS = {
    1: "one", 2: "two", 3: "three", 4: "four", 5: "five", 6: "six",
    7: "seven", 8: "eight", 9: "nine", 10: "ten", 11: "eleven", 12: "twelve",
}


def _count_word(n: int) -> str:
    return _NUMBER_WORDS.get(n, str(n))


def base_action_episode(
    kind: str,
    *,
    scene_id: str,
    start_pose: tuple[float, float, float],
    steps: int = 1,
    degrees: int = 90,
    episode_id: str = "base_action",
    step_length: float = 0.25,
) -> Episode:
    """Primitive-motion episode: the reference path is the analytic result.

    `kind` is one of forward_steps / backward_steps / turn_deg.  Positive
    degrees turn left, negative right; only +-90 and +-180 are allowed.
    """
    x, y, th = float(start_pose[0]), float(start_pose[1]), float(start_pose[2])
    start = np.array([x, y])
    if kind in ("forward_steps", "backward_steps"):
        if steps < 1:
            raise ValueError("steps must be >= 1")
        sign = 1.0 if kind == "forward_steps" else -1.0
        offset = sign * steps * step_length * np.array([np.cos(th), np.sin(th)])
        goal_pos = start + offset
        verb = "forward" if sign > 0 else "backward"
        noun = "step" if steps == 1 else "steps"
        text = f"Move {verb} {_count_word(steps)} {noun}."
        path = Path2(np.vstack([start, goal_pos]))
        goal = Goal(position=goal_pos, success_radius=0.2)
    elif kind == "turn_deg":
        if abs(degrees) not in (90, 180):
            raise ValueError("turn_deg supports +-90 and +-180 only")
        side = "left" if degrees > 0 else "right"
        text = f"Turn {abs(degrees)} degrees to the {side} in place."
        goal_heading = wrap_angle(th + np.deg2rad(degrees))
        path = Path2(start.reshape(1, 2))
        goal = Goal(
            position=start.copy(),
            success_radius=0.2,
            heading=goal_heading,
            heading_tolerance=np.deg2rad(10.0),
        )
    else:
        raise ValueError(f"unknown base action kind {kind!r}")

    instr = Instruction(
        level=InstructionLevel.LOW,
        type=InstructionType.BASE_ACTION,
        text=text,
        slots={"kind": kind},
    )
    scene_label, path_label = label_complexity(0, path.length)
    return Episode(
        episode_id=episode_id,
        scene_id=scene_id,
        instruction=instr,
        start_pose=(x, y, th),
        goal=goal,
        reference_path=path,
        scene_complexity=scene_label,
        path_complexity=path_label,
        task_type=TaskType.VLN,
    )


# ---------------------------------------------------------------------------
# Text map + spatial relations


@dataclass(frozen=True)
class RelationThresholds:
    next_to_gap: float = 0.5
    relation_range: float = 1.5
    opposition_deg: float = 30.0


def _polygon_gap(a: np.ndarray, b: np.ndarray) -> float:
    from shapely.geometry import Polygon

    return float(Polygon(a).distance(Polygon(b)))


def _segment_free(grid, p: np.ndarray, q: np.ndarray, step: float = 0.1) -> bool:
    n = max(2, int(np.ceil(np.linalg.norm(q - p) / step)))
    for t in np.linspace(0.0, 1.0, n):
        if not grid.is_free(p + t * (q - p)):
            return False
    return True


def extract_relations(sem_map, grid=None, thresholds: RelationThresholds = RelationThresholds()):
    """Pairwise spatial relations between footprints within range.

    Gap below `next_to_gap` reads "next to"; otherwise pairs whose centroid
    segment crosses only free space and whose mutual facing directions are
    within `opposition_deg` of head-on read "across from"; the rest read
    "in front of".
    """
    ids = sorted(sem_map.footprints)
    relations: list[tuple[str, str, str]] = []
    for i, a in enumerate(ids):
        for b in ids[i + 1:]:
            pa = sem_map.footprints[a]
            pb = sem_map.footprints[b]
            gap = _polygon_gap(pa.vertices, pb.vertices)
            if gap >= thresholds.relation_range:
                continue
            if gap < thresholds.next_to_gap:
                relations.append((a, b, "next to"))
                continue
            ca, cb = pa.centroid, pb.centroid
            free = grid is None or _segment_free(grid, ca, cb)
            if free:
                relations.append((a, b, "across from"))
            else:
                relations.append((a, b, "in front of"))
    return relations


def build_text_map(scene, sem_map, grid=None) -> str:
    """Plain-text scene description fed to the instruction service."""
    lines = [f"Scene {scene.scene_id}."]
    for room in scene.rooms:
        lines.append(f"Area {room.name} (function: {room.label}).")
    for iid in sorted(sem_map.footprints):
        cat = sem_map.categories.get(iid, "object")
        attrs = sem_map.attributes.get(iid, {})
        attr_text = ", ".join(f"{k}: {v}" for k, v in sorted(attrs.items()))
        line = f"{iid}: a {cat}"
        if attr_text:
            line += f" ({attr_text})"
        if iid in sem_map.door_marks:
            line += f", door {sem_map.door_marks[iid].value}"
        lines.append(line + ".")
    for a, b, rel in extract_relations(sem_map, grid):
        lines.append(f"{a} is {rel} {b}.")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Instruction service clients


@dataclass
class MlmRequest:
    text_map: str
    starting_point: str
    end_point: str
    prompt_version: str = "v1"

    def to_dict(self) -> dict:
        return {
            "text_map": self.text_map,
            "starting_point": self.starting_point,
            "end_point": self.end_point,
            "prompt_version": self.prompt_version,
        }


_RESPONSE_KEYS = {"instruction_type", "start", "end", "generated_instruction"}


def validate_response_schema(entries) -> None:
    """Entries must be a list of records with the four required fields and
    a known instruction type."""
    if not isinstance(entries, list):
        raise ResponseSchemaError(f"expected a list, got {type(entries).__name__}")
    for i, entry in enumerate(entries):
        if not isinstance(entry, dict):
            raise ResponseSchemaError(f"entry {i}: expected object, got {type(entry).__name__}")
        missing = _RESPONSE_KEYS - set(entry)
        if missing:
            raise ResponseSchemaError(f"entry {i}: missing fields {sorted(missing)}")
        name = entry["instruction_type"]
        if name not in _SERVICE_TYPE_NAMES and name not in {t.value for t in HIGH_TYPES}:
            raise ResponseSchemaError(f"entry {i}: unknown instruction_type {name!r}")
        if not isinstance(entry["generated_instruction"], str):
            raise ResponseSchemaError(f"entry {i}: generated_instruction must be a string")


def _entry_type(entry: dict) -> InstructionType:
    name = entry["instruction_type"]
    if name in _SERVICE_TYPE_NAMES:
        return _SERVICE_TYPE_NAMES[name]
    return InstructionType(name)


def build_prompt(request: MlmRequest) -> str:
    """Instruction-generation prompt shipped to the service."""
    type_list = ", ".join(_TYPE_TO_SERVICE[t] for t in HIGH_TYPES)
    return (
        "You write natural-language navigation instructions for a home robot.\n"
        f"TEXT MAP:\n{request.text_map}\n"
        f"STARTING POINT: {request.starting_point}\n"
        f"END POINT: {request.end_point}\n"
        f"Produce 2-4 instructions for each type: {type_list}.\n"
        "Rules: never mention internal object IDs; keep each instruction "
        f"between {WORD_MIN} and {WORD_MAX} words; stay grounded in the map; "
        "do not invent intermediate waypoints or turns.\n"
        'Reply with a JSON array of objects with fields "instruction_type", '
        '"start", "end", "generated_instruction".'
    )


class HttpMlmClient:
    """POSTs requests to an instruction service endpoint.

    Sends MlmRequest JSON to {base_url}/v1/instructions with a bearer token
    from the MLLM_API_TOKEN environment variable.
    """

    def __init__(self, base_url: str, timeout: float = 30.0, token_env: str = "MLLM_API_TOKEN"):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self.token_env = token_env

    def generate(self, request: MlmRequest):
        import requests

        headers = {"Content-Type": "application/json"}
        token = os.environ.get(self.token_env)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        payload = dict(request.to_dict(), prompt=build_prompt(request))
        try:
            resp = requests.post(
                f"{self.base_url}/v1/instructions",
                json=payload,
                headers=headers,
                timeout=self.timeout,
            )
        except requests.RequestException as exc:
            raise TransportError(f"instruction service unreachable: {exc}") from exc
        if resp.status_code != 200:
            raise TransportError(f"instruction service returned {resp.status_code}: {resp.text[:200]}")
        return resp.json()


class StubMlmClient:
    """Offline deterministic stand-in for the instruction service."""

    _CAUSAL_OBJECTS = ("book", "teacup", "vase", "towel", "bottle of water")
    _MOTIVES = ("I want to rest", "I am thirsty", "I need to tidy up", "I feel like reading")

    def __init__(self, seed: int = 0):
        self.seed = seed

    def generate(self, request: MlmRequest):
        rng = np.random.default_rng(
            stable_seed("stub-mlm", self.seed, request.starting_point, request.end_point)
        )
        start = _display_name(request.starting_point)
        end = _display_name(request.end_point)
        causal = self._CAUSAL_OBJECTS[int(rng.integers(len(self._CAUSAL_OBJECTS)))]
        motive = self._MOTIVES[int(rng.integers(len(self._MOTIVES)))]
        variants = {
            "Add_Object": [
                f"Please carry the {causal} from the {start} over to the {end}.",
                f"Take the {causal} sitting near the {start} and leave it by the {end}.",
            ],
            "Scenario_Driven": [
                f"{motive}, so please head from the {start} to the {end}.",
                f"We have guests coming, walk from the {start} across to the {end}.",
            ],
            "Relative_Relationship": [
                f"Go to the {end} that sits closest to the {start}.",
                f"Walk over to the {end} directly across from the {start}.",
            ],
            "Attribute-based": [
                f"Find the large {end} and wait right beside it.",
                f"Head toward the {end} standing near the wall and stop there.",
            ],
            "Area-based": [
                f"Make your way to the area around the {end}.",
                f"Leave the {start} and move into the zone near the {end}.",
            ],
        }
        count = 2 + int(rng.integers(3))  # 2-4 per type
        entries = []
        for type_name, texts in variants.items():
            for k in range(count):
                entries.append(
                    {
                        "instruction_type": type_name,
                        "start": request.starting_point,
                        "end": request.end_point,
                        "generated_instruction": texts[k % len(texts)],
                    }
                )
        return entries


def _display_name(instance_id: str) -> str:
    """chair_5 -> chair; safe for plain category names too."""
    return re.sub(r"_\d+$", "", instance_id).replace("_", " ")


def gen_high_level(
    client,
    scene,
    sem_map,
    start_instance: str,
    end_instance: str,
    grid=None,
    max_retries: int = 3,
) -> list[Instruction]:
    """Fetch, validate and filter high-level instructions for one pair.

    Schema failures retry up to `max_retries` times; entries that leak an
    instance id or miss the 5-20 word budget are dropped with a warning.
    """
    request = MlmRequest(
        text_map=build_text_map(scene, sem_map, grid),
        starting_point=start_instance,
        end_point=end_instance,
    )
    last_error: Exception | None = None
    entries = None
    for attempt in range(max_retries + 1):
        raw = client.generate(request)
        try:
            validate_response_schema(raw)
            entries = raw
            break
        except ResponseSchemaError as exc:
            last_error = exc
            log.warning("schema failure from instruction service (attempt %d): %s", attempt + 1, exc)
    if entries is None:
        raise ResponseSchemaError(f"schema invalid after {max_retries + 1} attempts: {last_error}")

    forbidden = [o.instance_id for o in scene.objects]
    instructions = []
    for entry in entries:
        instr = Instruction(
            level=InstructionLevel.HIGH,
            type=_entry_type(entry),
            text=entry["generated_instruction"].strip(),
            slots={"start_ref": entry["start"], "end_ref": entry["end"]},
        )
        try:
            instr.validate(forbidden)
        except ValueError as exc:
            log.warning("dropping generated instruction: %s", exc)
            continue
        instructions.append(instr)
    if not instructions:
        raise EmptyResultError("every generated instruction was dropped by validation")
    return instructions


# ---------------------------------------------------------------------------
# Episode-set generation


def generate_episodes(
    scene,
    grid,
    *,
    count: int,
    seed: int = 0,
    config=None,
    client=None,
    levels=("low", "high"),
    nogoal_count: int = 0,
    base_action_count: int = 0,
) -> list[Episode]:
    """Produce a deterministic episode set over one scene.

    Alternates instruction levels across episodes, cycles high-level
    categories to keep the type distribution balanced, and derives every
    random choice from `seed`.
    """
    from .config import DEFAULT_CONFIG
    from .mapping import build_semantic_map
    from .planning import EndpointConstraints, PlanCost, astar, distance_transform, sample_endpoints

    config = config or DEFAULT_CONFIG
    client = client or StubMlmClient(seed=seed)
    clearance = distance_transform(grid)
    sem_map = build_semantic_map(scene)
    constraints = EndpointConstraints(
        min_geodesic=config.plan.min_geodesic,
        min_safety=config.plan.min_safety,
        attempts=config.plan.sample_attempts,
    )
    cost = PlanCost(
        w_dist=config.plan.w_dist,
        w_narrow=config.plan.w_narrow,
        w_area=config.plan.w_area,
        clearance_soft=config.plan.clearance_soft,
    )
    vocabulary = set(scene.taxonomy) | {r.name for r in scene.rooms} | {r.label for r in scene.rooms}
    forbidden = [o.instance_id for o in scene.objects]
    plan_meta = {
        "w_dist": cost.w_dist, "w_narrow": cost.w_narrow,
        "w_area": cost.w_area, "clearance_soft": cost.clearance_soft,
    }

    episodes: list[Episode] = []
    high_cycle = 0
    for i in range(count):
        endpoints = sample_endpoints(
            scene, grid, constraints, seed=stable_seed(seed, "vln", i), clearance=clearance
        )
        path = astar(grid, clearance, cost, endpoints.start, endpoints.goal)
        first = path.waypoints[min(1, len(path.waypoints) - 1)]
        heading = float(np.arctan2(first[1] - path.waypoints[0][1], first[0] - path.waypoints[0][0]))
        scene_label, path_label = label_complexity(scene.asset_count, path.length)
        level = levels[i % len(levels)]

        if level == "low":
            target_cat = (
                _display_name(endpoints.target_instance).replace(" ", "_")
                if endpoints.target_instance
                else None
            )
            if target_cat and target_cat in vocabulary and endpoints.goal_room:
                # the room names where the target object sits
                instr = template_low_level(
                    endpoints.goal_room, target_cat, SingleGoalKind.ROOM_TO_OBJECT,
                    vocabulary, forbidden,
                )
            elif endpoints.start_room and endpoints.goal_room:
                instr = template_low_level(
                    endpoints.start_room, endpoints.goal_room, SingleGoalKind.ROOM_TO_ROOM,
                    vocabulary, forbidden,
                )
            else:
                instr = template_low_level(
                    _display_name(forbidden[0]), _display_name(forbidden[-1]),
                    SingleGoalKind.OBJECT_TO_OBJECT, None, forbidden,
                )
        else:
            start_ref = endpoints.start_room or "start"
            generated = gen_high_level(
                client, scene, sem_map, start_ref, endpoints.target_instance or "goal", grid=grid
            )
            wanted = HIGH_TYPES[high_cycle % len(HIGH_TYPES)]
            high_cycle += 1
            instr = next((g for g in generated if g.type == wanted), generated[0])

        episodes.append(
            Episode(
                episode_id=f"{scene.scene_id}-{i:04d}",
                scene_id=scene.scene_id,
                instruction=instr,
                start_pose=(float(endpoints.start[0]), float(endpoints.start[1]), heading),
                goal=Goal(
                    position=endpoints.goal,
                    success_radius=config.metric.success_radius,
                    target_instance=endpoints.target_instance,
                ),
                reference_path=path,
                scene_complexity=scene_label,
                path_complexity=path_label,
                task_type=TaskType.VLN,
                metadata={
                    "start_room": endpoints.start_room or "",
                    "goal_room": endpoints.goal_room or "",
                    "geodesic": endpoints.geodesic,
                    "plan_cost": path.cost,
                    "plan_weights": plan_meta,
                },
            )
        )

    for j in range(nogoal_count):
        endpoints = sample_endpoints(
            scene, grid, constraints, seed=stable_seed(seed, "nogoal", j), clearance=clearance
        )
        start = endpoints.start
        episodes.append(
            Episode(
                episode_id=f"{scene.scene_id}-ng{j:04d}",
                scene_id=scene.scene_id,
                instruction=Instruction(
                    level=InstructionLevel.LOW,
                    type=InstructionType.SINGLE_GOAL,
                    text="Explore the reachable space without touching anything.",
                    slots={"kind": "explore"},
                ),
                start_pose=(float(start[0]), float(start[1]), 0.0),
                goal=Goal(position=start.copy(), success_radius=0.0),
                reference_path=Path2(start.reshape(1, 2)),
                scene_complexity=label_complexity(scene.asset_count, 0.0)[0],
                path_complexity="short",
                task_type=TaskType.NOGOAL,
            )
        )

    for k in range(base_action_count):
        endpoints = sample_endpoints(
            scene, grid,
            EndpointConstraints(min_geodesic=constraints.min_geodesic, min_safety=0.8,
                                attempts=constraints.attempts),
            seed=stable_seed(seed, "base", k), clearance=clearance,
        )
        kinds = ("forward_steps", "turn_deg", "backward_steps")
        kind = kinds[k % len(kinds)]
        heading = float(np.arctan2(
            endpoints.goal[1] - endpoints.start[1], endpoints.goal[0] - endpoints.start[0]
        ))
        episodes.append(
            base_action_episode(
                kind,
                scene_id=scene.scene_id,
                start_pose=(float(endpoints.start[0]), float(endpoints.start[1]), heading),
                steps=1 + k % 2,
                degrees=(90, -90, 180, -180)[k % 4],
                episode_id=f"{scene.scene_id}-ba{k:04d}",
            )
        )
    return episodes


def balance_report(episodes: list[Episode], ratio_band: float = 0.25) -> dict:
    """Instruction-type distribution per level and whether it stays balanced.

    Within each instruction level, balanced means
    min_count >= ratio_band * max_count across the types that occur.
    """
    counts: dict[str, dict[str, int]] = {}
    for ep in episodes:
        level = counts.setdefault(ep.instruction.level.value, {})
        level[ep.instruction.type.value] = level.get(ep.instruction.type.value, 0) + 1
    balanced = all(
        min(types.values()) >= ratio_band * max(types.values())
        for types in counts.values()
        if types
    )
    return {"counts": counts, "balanced": balanced, "ratio_band": ratio_band}
