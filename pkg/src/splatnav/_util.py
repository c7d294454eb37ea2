"""Small shared helpers."""

from __future__ import annotations

import hashlib

import numpy as np


def largest_remainder(weights, total: int) -> np.ndarray:
    """Integer allocation proportional to weights, summing exactly to total.

    Ties go to the lowest index; each share differs from its exact quota by
    less than one.
    """
    weights = np.asarray(weights, dtype=float)
    if len(weights) == 0:
        return np.zeros(0, dtype=int)
    if weights.sum() <= 0:
        counts = np.zeros(len(weights), dtype=int)
        counts[0] = total
        return counts
    quotas = weights / weights.sum() * total
    counts = np.floor(quotas).astype(int)
    remainder = total - int(counts.sum())
    order = sorted(range(len(weights)), key=lambda i: (-(quotas[i] - counts[i]), i))
    for i in order[:remainder]:
        counts[i] += 1
    return counts


def wrap_angle(theta: float) -> float:
    """Wrap to (-pi, pi]."""
    out = (theta + np.pi) % (2.0 * np.pi) - np.pi
    if out == -np.pi:
        out = np.pi
    return float(out)


def stable_seed(*parts) -> int:
    """Deterministic 64-bit seed from arbitrary string/int parts."""
    digest = hashlib.sha256(":".join(str(p) for p in parts).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")
