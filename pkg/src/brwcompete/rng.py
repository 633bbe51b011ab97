"""Seed derivation for reproducible, order-independent random streams.

Every random draw in a run comes from a numpy ``Philox4x64`` generator, a
counter-based bit generator whose 128-bit key is derived from
``(master_seed, replication, generation, tag)`` by chaining the SplitMix64
finaliser. Two streams with different coordinates are therefore unrelated,
and a replication's randomness does not depend on which worker ran it or in
what order.
"""
from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1

# stream tags, so that the engine and the per-particle oracle never share keys
ENGINE = 0x454E47
ORACLE = 0x4F5243
SHAPE = 0x534850


def splitmix64(x: int) -> int:
    """SplitMix64 output function (Steele, Lea & Flood); a 64-bit avalanche mix."""
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def mix(*words: int) -> int:
    h = 0
    for w in words:
        h = splitmix64(h ^ (int(w) & MASK64))
    return h


def stream_key(master: int, *coords: int) -> list[int]:
    k0 = mix(master, *coords)
    k1 = mix(k0, 0xA5A5A5A5A5A5A5A5, *coords)
    return [k0, k1]


def generator(master: int, *coords: int) -> np.random.Generator:
    """A Philox-backed Generator for the stream at ``coords`` under ``master``."""
    return np.random.Generator(np.random.Philox(key=stream_key(master, *coords)))


def replication_seed(master: int, replication: int) -> int:
    """Per-replication 64-bit seed; replication ``r`` always maps to the same value."""
    return mix(master, 0x5245504C, replication)
