"""`sage-agent run`: attach a policy to a serving harness."""

from __future__ import annotations

import argparse
import importlib
import json
import sys

from .client import connect, run_all
from .policies import random_policy


def load_policy(spec: str):
    """Resolve `module:function`; a factory taking no args is called once."""
    module_name, _, attr = spec.partition(":")
    if not attr:
        raise SystemExit(f"--policy must be module:function, got {spec!r}")
    obj = getattr(importlib.import_module(module_name), attr)
    return obj


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="sage-agent")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="drive episodes from a serving harness")
    run.add_argument("--policy", default="sage_agent.policies:always_stop",
                     help="module:function policy (instruction, obs) -> action")
    run.add_argument("--endpoint", default="stdio",
                     help='"host:port" or "stdio" (default) when spawned by the harness')
    run.add_argument("--seed", type=int, default=None,
                     help="use the built-in seeded random policy instead of --policy")
    args = parser.parse_args(argv)

    policy = random_policy(args.seed) if args.seed is not None else load_policy(args.policy)
    client = connect(args.endpoint)
    try:
        summaries = run_all(client, policy)
    finally:
        client.close()
    print(json.dumps(summaries), file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
