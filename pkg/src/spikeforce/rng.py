"""Named random sub-streams derived from one top-level seed.

``substream(seed, "training", 3)`` always yields the same generator, and
streams with different names are statistically independent, so any component
(data generation, initialisation, training, omission) can be reproduced in
isolation.
"""
import zlib

import numpy as np


def _key(name) -> int:
    return zlib.crc32(str(name).encode("utf-8"))


def substream(seed: int, *names) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(_key(n) for n in names))
    return np.random.Generator(np.random.PCG64(ss))


def subseed(seed: int, *names) -> int:
    """A 63-bit integer seed for the named stream (for APIs that take ints)."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(_key(n) for n in names))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))
