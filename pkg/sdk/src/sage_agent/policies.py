"""Reference policies: enough to smoke-test a harness without any model."""

from __future__ import annotations

import numpy as np


def always_stop(instruction, obs):
    return "stop"


def random_policy(seed: int = 0, stop_after: int = 15):
    """Seeded discrete random walk that stops after `stop_after` steps."""
    rng = np.random.default_rng(seed)
    state = {"steps": 0}

    def policy(instruction, obs):
        if state["steps"] >= stop_after:
            state["steps"] = 0
            return "stop"
        state["steps"] += 1
        roll = rng.random()
        if roll < 0.6:
            return "forward"
        if roll < 0.8:
            return "turn_left"
        return "turn_right"

    return policy


def forward_only(instruction, obs):
    return "forward"
