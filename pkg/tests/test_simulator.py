import numpy as np
import pytest

from splatnav.baking import build_all_bodies
from splatnav.config import Config, SimConfig
from splatnav.episodes import base_action_episode, Episode, Goal, Instruction, InstructionLevel, InstructionType, TaskType
from splatnav.errors import EpisodeFinishedError, SceneValidationError
from splatnav.mapping import build_occupancy
from splatnav.planning import Path2
from splatnav.simulator import Action, Environment, TrajectoryLog, detect_stuck
from splatnav.synthetic import make_sealed_box


@pytest.fixture(scope="module")
def box_env_parts():
    scene = make_sealed_box()
    bodies = build_all_bodies(scene)
    grid = build_occupancy(scene, bodies)
    return scene, bodies, grid


def make_env(parts, config=None):
    scene, bodies, grid = parts
    return Environment(scene, bodies, grid, config or Config())


def vln_episode(start=(1.0, 1.0, 0.0), goal=(4.0, 4.0), task=TaskType.VLN):
    instr = Instruction(InstructionLevel.LOW, InstructionType.SINGLE_GOAL, "Go.", {})
    return Episode(
        episode_id="t0",
        scene_id="sealed_box",
        instruction=instr,
        start_pose=start,
        goal=Goal(position=np.asarray(goal, float), success_radius=0.5),
        reference_path=Path2(np.array([start[:2], goal], dtype=float)),
        task_type=task,
    )


def test_reset_deterministic(box_env_parts):
    env = make_env(box_env_parts)
    s1, o1 = env.reset(vln_episode())
    s2, o2 = env.reset(vln_episode())
    np.testing.assert_array_equal(s1.position, s2.position)
    assert s1.heading == s2.heading and s1.time == s2.time == 0.0
    assert o1 == {} and o2 == {}  # no observer configured


def test_reset_scene_mismatch(box_env_parts):
    env = make_env(box_env_parts)
    ep = vln_episode()
    ep.scene_id = "other_scene"
    with pytest.raises(SceneValidationError):
        env.reset(ep)


def test_reset_blocked_start(box_env_parts):
    env = make_env(box_env_parts)
    ep = vln_episode(start=(0.0, 0.0, 0.0))  # on the wall corner
    with pytest.raises(SceneValidationError):
        env.reset(ep)


def test_forward_advances_quarter_meter(box_env_parts):
    env = make_env(box_env_parts)
    env.reset(vln_episode())
    state, result = env.step(Action.forward())
    np.testing.assert_allclose(state.position, [1.25, 1.0], atol=1e-9)
    assert not result.contact_events
    assert state.time == pytest.approx(0.25)


def test_turns_are_fifteen_degrees(box_env_parts):
    env = make_env(box_env_parts)
    env.reset(vln_episode())
    state, _ = env.step(Action.turn_left())
    assert state.heading == pytest.approx(np.deg2rad(15.0), abs=1e-9)
    state, _ = env.step(Action.turn_right())
    assert state.heading == pytest.approx(0.0, abs=1e-9)
    np.testing.assert_allclose(state.position, [1.0, 1.0], atol=1e-12)


def test_continuous_action_exact_integration(box_env_parts):
    env = make_env(box_env_parts)
    env.reset(vln_episode())
    state, _ = env.step(Action.continuous(0.5, 0.0, 0.4))
    np.testing.assert_allclose(state.position, [1.2, 1.0], atol=1e-9)
    # arc motion conserves speed * time as arc length
    env.reset(vln_episode())
    v, omega, duration = 0.8, 1.0, 1.0
    state, _ = env.step(Action.continuous(v, omega, duration))
    log = None
    # chord length of a unit-radius-scaled arc
    radius = v / omega
    chord = 2 * radius * np.sin(omega * duration / 2)
    dist = np.linalg.norm(state.position - np.array([1.0, 1.0]))
    assert dist == pytest.approx(chord, abs=1e-9)


def test_continuous_limits_enforced(box_env_parts):
    env = make_env(box_env_parts)
    env.reset(vln_episode())
    with pytest.raises(ValueError):
        env.step(Action.continuous(5.0, 0.0, 1.0))
    with pytest.raises(ValueError):
        env.step(Action.continuous(0.5, 100.0, 1.0))
    with pytest.raises(ValueError):
        env.step(Action.continuous(0.5, 0.0, -1.0))


def test_wall_contact_slides_flush(box_env_parts):
    env = make_env(box_env_parts)
    # start 0.35 m from the east wall (x=5), facing it: contact on step 2
    env.reset(vln_episode(start=(4.65, 2.5, 0.0)))
    state, r1 = env.step(Action.forward())
    events = list(r1.contact_events)
    state, r2 = env.step(Action.forward())
    events += r2.contact_events
    assert events, "expected a wall contact"
    assert all(e.instance_id == "wall_1" for e in events)
    # flush: center exactly radius away from the wall plane
    assert state.position[0] == pytest.approx(5.0 - 0.25, abs=1e-9)
    assert not env.done  # VLN episodes keep running after contact


def test_nogoal_collision_terminates(box_env_parts):
    env = make_env(box_env_parts)
    env.reset(vln_episode(start=(4.65, 2.5, 0.0), task=TaskType.NOGOAL))
    done = False
    for _ in range(3):
        state, result = env.step(Action.forward())
        if result.done:
            done = True
            break
    assert done
    assert result.done_reason == "collision_terminated"
    with pytest.raises(EpisodeFinishedError):
        env.step(Action.forward())


def test_nogoal_time_cap(box_env_parts):
    config = Config(sim=SimConfig(max_steps=10_000))
    env = make_env(box_env_parts, config)
    env.reset(vln_episode(start=(2.5, 2.5, 0.0), task=TaskType.NOGOAL))
    # rotate in place forever: no collision, so the 120 s cap must fire
    while not env.done:
        env.step(Action.continuous(0.0, 0.5, 10.0))
    assert env.done_reason == "timeout"
    log = env.finalize()
    assert log.duration == pytest.approx(120.0, abs=1e-6)


def test_stop_sets_done(box_env_parts):
    env = make_env(box_env_parts)
    env.reset(vln_episode())
    state, result = env.step(Action.stop())
    assert result.done and result.done_reason == "stop_issued"


def test_max_steps(box_env_parts):
    config = Config(sim=SimConfig(max_steps=3))
    env = make_env(box_env_parts, config)
    env.reset(vln_episode())
    for _ in range(3):
        state, result = env.step(Action.turn_left())
    assert result.done and result.done_reason == "max_steps"


# ---------------------------------------------------------------------------
# stuck detection


def test_detect_stuck_pressing_into_corner():
    t = np.arange(0, 3.05, 0.05)
    pos = np.tile([1.0, 1.0], (len(t), 1)) + np.random.default_rng(0).normal(0, 0.001, (len(t), 2))
    v = np.full(len(t), 1.0)
    assert detect_stuck(t, pos, v, window=2.0, threshold=0.05)


def test_detect_stuck_rotation_excluded():
    t = np.arange(0, 3.05, 0.05)
    pos = np.tile([1.0, 1.0], (len(t), 1))
    v = np.zeros(len(t))  # only rotation commanded
    assert not detect_stuck(t, pos, v, window=2.0, threshold=0.05)


def test_detect_stuck_moving_agent():
    t = np.arange(0, 3.05, 0.05)
    pos = np.column_stack([np.linspace(0, 0.5, len(t)), np.zeros(len(t))])
    v = np.full(len(t), 1.0)
    assert not detect_stuck(t, pos, v, window=2.0, threshold=0.05)


def test_detect_stuck_short_window():
    t = np.arange(0, 1.0, 0.05)
    pos = np.tile([1.0, 1.0], (len(t), 1))
    v = np.full(len(t), 1.0)
    assert not detect_stuck(t, pos, v, window=2.0)


def test_stuck_recovery_backs_off(box_env_parts):
    env = make_env(box_env_parts)
    env.reset(vln_episode(start=(4.3, 2.5, 0.0)))
    # press into the east wall long enough to trip the stuck detector
    positions = []
    for _ in range(12):
        state, _ = env.step(Action.forward())
        positions.append(state.position[0])
    assert min(positions[-3:]) < 4.75 - 1e-6  # recovery pulled it off the wall


# ---------------------------------------------------------------------------
# logging


def test_log_monotone_time_and_samples(box_env_parts):
    env = make_env(box_env_parts)
    env.reset(vln_episode())
    for _ in range(10):
        env.step(Action.forward())
    env.step(Action.stop())
    log = env.finalize()
    assert log.step_count == 11
    assert (np.diff(log.t) >= -1e-12).all()
    # reset pose + 5 substeps per forward + the terminal stop sample
    assert log.sample_count == 1 + 10 * 5 + 1
    with_action = sum(1 for a in log.actions)
    assert with_action == 11


def test_log_contact_intervals_merge(box_env_parts):
    env = make_env(box_env_parts)
    env.reset(vln_episode(start=(4.4, 2.5, 0.0)))
    for _ in range(4):
        env.step(Action.forward())
    env.step(Action.stop())
    log = env.finalize()
    intervals = log.contact_intervals()
    assert len(intervals) == 1  # continuous pressing merges into one interval
    iv = intervals[0]
    assert iv.t_end > iv.t_start
    assert iv.max_depth > 0


def test_log_roundtrip_byte_identical(tmp_path, box_env_parts):
    env = make_env(box_env_parts)
    env.reset(vln_episode(start=(4.5, 2.5, 0.0)))
    for _ in range(5):
        env.step(Action.forward())
    env.step(Action.stop())
    log = env.finalize()
    p1 = tmp_path / "log.jsonl"
    log.save(p1)
    back = TrajectoryLog.load(p1)
    p2 = tmp_path / "log2.jsonl"
    back.save(p2)
    assert p1.read_bytes() == p2.read_bytes()
    np.testing.assert_array_equal(back.t, log.t)
    np.testing.assert_array_equal(back.pos, log.pos)
    assert back.done_reason == log.done_reason


def test_recovery_log_roundtrip_preserves_step_count(tmp_path, box_env_parts):
    # recovery nudges share timestamps with neighboring actions; the file
    # format must still round-trip actions one-to-one
    env = make_env(box_env_parts)
    env.reset(vln_episode(start=(4.3, 2.5, 0.0)))
    for _ in range(14):  # press into the wall long enough to trigger recovery
        env.step(Action.forward())
    env.step(Action.stop())
    log = env.finalize()
    assert any("recover" in a["action"] for a in log.actions)
    path = tmp_path / "rec.jsonl"
    log.save(path)
    back = TrajectoryLog.load(path)
    assert back.step_count == log.step_count == 15
    assert len(back.actions) == len(log.actions)
    back.save(tmp_path / "rec2.jsonl")
    assert path.read_bytes() == (tmp_path / "rec2.jsonl").read_bytes()


def test_step_events_appear_in_final_log(box_env_parts):
    env = make_env(box_env_parts)
    env.reset(vln_episode(start=(4.5, 2.5, 0.0)))
    step_events = []
    for _ in range(4):
        _, res = env.step(Action.forward())
        step_events.extend(res.contact_events)
    env.step(Action.stop())
    log = env.finalize()
    intervals = log.contact_intervals()
    for ev in step_events:
        assert any(iv.t_start - 1e-9 <= ev.t <= iv.t_end + 1e-9 and iv.instance_id == ev.instance_id
                   for iv in intervals)
    for iv in intervals:
        assert any(iv.instance_id == ev.instance_id for ev in step_events)


def test_energy_free_kinematics(box_env_parts):
    env = make_env(box_env_parts)
    env.reset(vln_episode(start=(1.0, 1.0, 0.7)))
    state, _ = env.step(Action.continuous(0.6, 0.0, 0.5))
    log_pos = np.asarray(env._pos)
    deltas = np.linalg.norm(np.diff(log_pos, axis=0), axis=1)
    np.testing.assert_allclose(deltas, 0.6 * 0.05, atol=1e-9)


def test_no_tunneling_random_walk_short(box_env_parts):
    scene, bodies, grid = box_env_parts
    config = Config(sim=SimConfig(max_steps=100_000))
    env = Environment(scene, bodies, grid, config)
    env.reset(vln_episode(start=(2.5, 2.5, 0.3)))
    rng = np.random.default_rng(7)
    for _ in range(500):
        roll = rng.random()
        action = Action.forward() if roll < 0.7 else (
            Action.turn_left() if roll < 0.85 else Action.turn_right())
        state, _ = env.step(action)
        assert 0.2 <= state.position[0] <= 4.8
        assert 0.2 <= state.position[1] <= 4.8


def test_base_action_episode_runs(box_env_parts):
    env = make_env(box_env_parts)
    ep = base_action_episode("forward_steps", scene_id="sealed_box",
                             start_pose=(1.0, 1.0, 0.0), steps=2, episode_id="ba0")
    env.reset(ep)
    state, _ = env.step(Action.forward())
    state, _ = env.step(Action.forward())
    state, result = env.step(Action.stop())
    assert result.done_reason == "stop_issued"
    np.testing.assert_allclose(state.position, ep.goal.position, atol=1e-9)
