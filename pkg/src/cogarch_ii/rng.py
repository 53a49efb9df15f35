"""Counter-based, splittable random streams.

Every stream is a Philox generator keyed by a master seed plus an integer
spawn key (purpose tag, replication, path).  Draws therefore depend only on
the key, never on which worker or in which order a task runs.  Inside a
stream the sub-step index is the position of the draw.
"""
from __future__ import annotations

from typing import Sequence, Union

import numpy as np

Seed = Union[int, Sequence[int]]

# purpose tags, first element of the spawn key
DATA = 0
SIM = 1
BINDING = 2
RESTART = 3


def as_key(seed: Seed) -> tuple[int, ...]:
    if isinstance(seed, (int, np.integer)):
        key = (int(seed),)
    else:
        key = tuple(int(s) for s in seed)
    if not key or any(k < 0 for k in key):
        raise ValueError(f"seed must be a non-empty tuple of non-negative ints, got {seed!r}")
    return key


def child(seed: Seed, *key: int) -> tuple[int, ...]:
    """Extend a stream id by further key components."""
    return as_key(seed) + tuple(int(k) for k in key)


def stream(seed: Seed, *key: int) -> np.random.Generator:
    full = child(seed, *key)
    ss = np.random.SeedSequence(entropy=full[0], spawn_key=full[1:])
    return np.random.Generator(np.random.Philox(ss))
