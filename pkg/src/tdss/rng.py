"""Seed derivation.

Every random stream in the package descends from a single integer seed.
Sub-seeds are derived with the splitmix64 finaliser so that each component
(weight init, dropout, sampler, generator) can be reproduced on its own:

    derive_seed(seed, "init")          -> weight initialisation
    derive_seed(seed, "dropout", t)    -> dropout masks of epoch t
    derive_seed(seed, "sampler")       -> random-walk sampler master seed

Random walks use a per-node stream ``node_state(seed, v)`` followed by
repeated ``splitmix64`` draws.  The compiled kernels implement the same
arithmetic, so both backends produce identical walks.
"""

from __future__ import annotations

import zlib

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def node_state(seed: int, node: int) -> int:
    """Initial splitmix64 state of the walk stream owned by ``node``."""
    return mix64((seed & MASK64) ^ mix64(node + GOLDEN))


def next_draw(state: int) -> tuple[int, int]:
    """Advance a splitmix64 state; returns ``(new_state, output)``."""
    state = (state + GOLDEN) & MASK64
    return state, mix64(state)


def derive_seed(seed: int, *tags) -> int:
    """Deterministic 64-bit sub-seed for ``seed`` and a sequence of tags."""
    h = mix64(seed)
    for tag in tags:
        if isinstance(tag, str):
            tag = zlib.crc32(tag.encode("utf-8"))
        h = mix64(h ^ mix64(int(tag) + GOLDEN))
    return h


def generator(seed: int, *tags) -> np.random.Generator:
    return np.random.default_rng(derive_seed(seed, *tags))
