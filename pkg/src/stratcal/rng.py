"""Seeded random streams.

Every random quantity comes from a PCG64 generator keyed through numpy's
``SeedSequence`` with a ``spawn_key``. The key is the tuple
``(purpose tag, index...)``, so stream ``k`` of a master seed can be rebuilt
without touching streams ``0..k-1``; results do not depend on the order in
which streams are consumed or on the number of worker threads.
"""
import numpy as np

MASK64 = (1 << 64) - 1

# purpose tags, part of the spawn key
SYNTHETIC = 0
TIES = 1
DRAWS = 2


def _sequence(seed, key):
    return np.random.SeedSequence(int(seed) & MASK64, spawn_key=tuple(int(k) for k in key))


def substream(seed, *key):
    """Generator for the substream ``key`` of ``seed``."""
    return np.random.Generator(np.random.PCG64(_sequence(seed, key)))


def derive_seed(master_seed, *key):
    """A 64-bit integer seed for substream ``key`` of ``master_seed``."""
    return int(_sequence(master_seed, key).generate_state(1, dtype=np.uint64)[0])
