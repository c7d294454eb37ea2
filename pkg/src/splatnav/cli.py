"""Command-line entry points: bake, gen-episodes, plan-cameras, serve, run,
score, report."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .baking import bake_scene, load_baked
from .cameras import perimeter_sweep, reject_near_surface, save_plan_jsonl, save_plan_svg, volume_uniform
from .config import Config, DEFAULT_CONFIG, config_from_dict
from .episodes import HttpMlmClient, StubMlmClient, generate_episodes, save_episodes
from .harness import RunConfig, rows_to_csv, run_suite, score_logs, write_report, _CSV_COLUMNS


def _load_config(path: str | None) -> Config:
    if path is None:
        return DEFAULT_CONFIG
    return config_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file overriding defaults")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--jobs", type=int, default=1)


def _seed(args) -> int:
    return 0 if args.seed is None else args.seed


def cmd_bake(args) -> int:
    config = _load_config(args.config)
    cache = bake_scene(args.scene, config)
    print(f"baked {args.scene} -> {cache}")
    return 0


def cmd_gen_episodes(args) -> int:
    config = _load_config(args.config)
    baked = load_baked(args.scene, config)
    client = HttpMlmClient(args.mlm_endpoint) if args.mlm_endpoint else StubMlmClient(seed=_seed(args))
    episodes = generate_episodes(
        baked.scene,
        baked.grid,
        count=args.count,
        seed=_seed(args),
        config=config,
        client=client,
        nogoal_count=args.nogoal,
        base_action_count=args.base_actions,
    )
    save_episodes(episodes, args.out)
    print(f"wrote {len(episodes)} episodes -> {args.out}")
    return 0


def cmd_plan_cameras(args) -> int:
    config = _load_config(args.config)
    baked = load_baked(args.scene, config)
    scene = baked.scene
    if args.policy == "perimeter":
        plan = perimeter_sweep(scene.rooms, scene.floor_z, scene.ceiling_z, args.budget)
    else:
        plan = volume_uniform(
            scene.rooms, scene.floor_z, scene.ceiling_z, args.budget,
            min_dist=args.min_dist, seed=_seed(args),
        )
    plan = reject_near_surface(plan, list(baked.bodies.values()), d_min=args.safety)
    save_plan_jsonl(plan, args.out)
    if args.svg:
        save_plan_svg(plan, scene.rooms, args.svg)
    print(f"{len(plan.poses)} accepted, {len(plan.rejected)} rejected -> {args.out}")
    return 0


def cmd_serve(args) -> int:
    config = _load_config(args.config)
    run_cfg = RunConfig(
        scene_dir=args.scene,
        episode_file=args.episodes,
        agent=f"socket:{args.port}",
        seed=_seed(args),
        jobs=1,
        out_dir=args.out,
        action_timeout=args.timeout,
        config=config,
    )
    print(f"serving {args.episodes} on 127.0.0.1:{args.port}", flush=True)
    result = run_suite(run_cfg)
    print(f"served {len(result['rows'])} episodes, reports in {result['out_dir']}")
    return 0


def cmd_run(args) -> int:
    if args.run_config:
        run_cfg = RunConfig.from_json(args.run_config)
        if args.seed is not None:
            run_cfg.seed = args.seed
        run_cfg.jobs = args.jobs
    else:
        config = _load_config(args.config)
        run_cfg = RunConfig(
            scene_dir=args.scene,
            episode_file=args.episodes,
            agent=args.agent,
            seed=_seed(args),
            jobs=args.jobs,
            out_dir=args.out,
            config=config,
        )
    result = run_suite(run_cfg)
    overall = result["summary"]["overall"]
    print(json.dumps(overall, sort_keys=True))
    if result["failures"]:
        print(f"WARNING: {len(result['failures'])} episodes failed", file=sys.stderr)
    return 0


def cmd_score(args) -> int:
    config = _load_config(args.config)
    rows = score_logs(args.episodes, args.logs, config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "episodes.csv").write_text(rows_to_csv(rows, _CSV_COLUMNS), encoding="utf-8")
    print(f"scored {len(rows)} episodes -> {out / 'episodes.csv'}")
    return 0


def cmd_report(args) -> int:
    import csv as _csv

    with open(args.scores, newline="", encoding="utf-8") as fh:
        raw_rows = list(_csv.DictReader(fh))
    rows = []
    for row in raw_rows:
        parsed = {}
        for key, value in row.items():
            if value == "":
                continue
            try:
                parsed[key] = float(value) if key in {
                    "sr", "osr", "spl", "cr", "csr", "icp", "ps", "episode_time", "explored_area"
                } else value
            except ValueError:
                parsed[key] = value
        rows.append(parsed)
    write_report(rows, args.out)
    print(f"aggregated {len(rows)} rows -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="splatnav", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bake", help="build and cache scene artifacts")
    p.add_argument("scene")
    _common(p)
    p.set_defaults(func=cmd_bake)

    p = sub.add_parser("gen-episodes", help="generate an episode set")
    p.add_argument("--scene", required=True)
    p.add_argument("--count", type=int, default=20)
    p.add_argument("--nogoal", type=int, default=0)
    p.add_argument("--base-actions", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--mlm-endpoint", help="instruction service base URL (default: offline stub)")
    _common(p)
    p.set_defaults(func=cmd_gen_episodes)

    p = sub.add_parser("plan-cameras", help="plan capture cameras for a scene")
    p.add_argument("--scene", required=True)
    p.add_argument("--policy", choices=["perimeter", "volume"], default="perimeter")
    p.add_argument("--budget", type=int, default=60)
    p.add_argument("--min-dist", type=float, default=0.8)
    p.add_argument("--safety", type=float, default=0.2)
    p.add_argument("--out", required=True)
    p.add_argument("--svg")
    _common(p)
    p.set_defaults(func=cmd_plan_cameras)

    p = sub.add_parser("serve", help="serve episodes to one protocol-v1 agent")
    p.add_argument("--scene", required=True)
    p.add_argument("--episodes", required=True)
    p.add_argument("--port", type=int, required=True)
    p.add_argument("--out", default="runs/serve")
    p.add_argument("--timeout", type=float, default=30.0)
    _common(p)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("run", help="run a suite with a builtin or external agent")
    p.add_argument("--run-config", help="RunConfig JSON (overrides the flags below)")
    p.add_argument("--scene")
    p.add_argument("--episodes")
    p.add_argument("--agent", default="builtin:oracle")
    p.add_argument("--out", default="runs/out")
    _common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("score", help="score existing trajectory logs")
    p.add_argument("--episodes", required=True)
    p.add_argument("--logs", required=True)
    p.add_argument("--out", default="runs/score")
    _common(p)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("report", help="aggregate a per-episode score CSV")
    p.add_argument("--scores", required=True)
    p.add_argument("--out", default="runs/report")
    _common(p)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
