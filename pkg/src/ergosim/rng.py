"""Seed splitting.

Every random stream is derived from one 64-bit root seed plus an integer key
path, using the counter-based Philox generator. Streams for different keys are
independent, so work split across threads reproduces the serial result.
"""

import numpy as np


def generator(seed: int, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))
