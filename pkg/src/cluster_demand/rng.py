"""Deterministic PRNG substream derivation.

Every randomized operation in this package derives its random numbers from
an integer root seed through ``numpy.random.SeedSequence`` spawn keys.  A
unit of independent work (one k-means restart, one gap-statistic reference
draw, one validation repetition) is addressed by an integer key tuple, so
the unit consumes the same stream no matter in which order, or on how many
threads, the units execute.  This is what makes parallel and serial runs
bit-identical.

Key namespaces are owned by the function that receives the seed: a caller
that needs several independent streams must hand each callee a distinct
child (via :func:`subseed`), never the root itself plus the root again.
"""

from __future__ import annotations

from typing import Union

import numpy as np

Seed = Union[int, np.random.SeedSequence]


def seed_sequence(seed: Seed) -> np.random.SeedSequence:
    """Normalize an integer seed or an existing SeedSequence to a SeedSequence."""
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(int(seed))


def subseed(seed: Seed, *key: int) -> np.random.SeedSequence:
    """Child SeedSequence of ``seed`` addressed by an integer key tuple."""
    root = seed_sequence(seed)
    return np.random.SeedSequence(
        entropy=root.entropy, spawn_key=tuple(root.spawn_key) + tuple(int(k) for k in key)
    )


def substream(seed: Seed, *key: int) -> np.random.Generator:
    """Generator for the child stream of ``seed`` addressed by ``key``."""
    return np.random.Generator(np.random.PCG64(subseed(seed, *key)))
