"""Deterministic RNG stream splitting.

A stream seed is obtained by folding each key into the master seed with the
SplitMix64 finaliser (increment ``0x9E3779B97F4A7C15``, multipliers
``0xBF58476D1CE4E5B9`` and ``0x94D049BB133111EB``).  Grid values are keyed
by their IEEE-754 bit pattern, so adding grid points never changes the
stream of an existing cell.
"""

import struct

import numpy as np

MASK = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15

# stream tags
RULES = 1
SAMPLE = 2
NOISE = 3


def splitmix64(x: int) -> int:
    x = (x + GOLDEN) & MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK
    return x ^ (x >> 31)


def mix_seed(master: int, *keys: int) -> int:
    h = splitmix64(int(master) & MASK)
    for k in keys:
        h = splitmix64(h ^ (int(k) & MASK))
    return h


def value_key(x: float) -> int:
    return struct.unpack("<Q", struct.pack("<d", float(x)))[0]


def make_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)
