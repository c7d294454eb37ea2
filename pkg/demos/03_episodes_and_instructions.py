"""
Episode generation and instruction text
=======================================

Template low-level instructions, synthesize high-level ones with the
offline stub client, and assemble a balanced episode set.
"""

from splatnav import build_occupancy, make_apartment_small
from splatnav.baking import build_all_bodies
from splatnav.episodes import (
    SingleGoalKind,
    StubMlmClient,
    balance_report,
    base_action_episode,
    build_text_map,
    gen_high_level,
    generate_episodes,
    label_complexity,
    save_episodes,
    template_low_level,
)
from splatnav.mapping import build_semantic_map
from pathlib import Path

Path("demos/out").mkdir(parents=True, exist_ok=True)

scene = make_apartment_small()
bodies = build_all_bodies(scene)
grid = build_occupancy(scene, bodies)

# deterministic templates over scene vocabulary
print(template_low_level("table", "door", SingleGoalKind.OBJECT_TO_OBJECT).text)
print(template_low_level("kitchen", "living room", SingleGoalKind.ROOM_TO_ROOM).text)
print(base_action_episode("turn_deg", scene_id=scene.scene_id,
                          start_pose=(1, 1, 0), degrees=-90).instruction.text)

# complexity labels (thresholds are strict; boundaries land in "mid")
for assets, length in [(400, 30.0), (184, 8.4), (100, 5.0)]:
    print(f"assets={assets:4d} length={length:5.1f} -> {label_complexity(assets, length)}")

# high-level generation via the offline stub: schema-checked and filtered
sem = build_semantic_map(scene)
text_map = build_text_map(scene, sem, grid)
print("\ntext map (first lines):")
print("\n".join(text_map.splitlines()[:6]))

instructions = gen_high_level(StubMlmClient(seed=0), scene, sem, "living room", "bed_0", grid=grid)
print(f"\n{len(instructions)} generated high-level instructions, e.g.:")
for instr in instructions[:5]:
    print(f"  [{instr.type.value}] {instr.text}")

episodes = generate_episodes(scene, grid, count=10, seed=0, nogoal_count=2,
                             base_action_count=3)
save_episodes(episodes, "demos/out/episodes.jsonl")
print(f"\nwrote {len(episodes)} episodes to demos/out/episodes.jsonl")
print("balance:", balance_report(episodes))
