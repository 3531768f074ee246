"""Named, independent random streams derived from one seed.

Every consumer asks for ``stream(seed, purpose, *key)`` (for example
``stream(seed, "ssl", epoch, batch)``). Streams are pure functions of their
arguments, so skipping one sampler never shifts another, and resuming at
(epoch, batch) needs no saved generator state beyond the seed.
"""

from __future__ import annotations

import numpy as np

PURPOSES = {
    "init": 1,
    "shuffle": 2,
    "rec": 3,
    "ssl": 4,
    "dropout": 5,
    "noise": 6,
    "synthetic": 7,
    "eval": 8,
}


def stream(seed: int, purpose: str, *key: int) -> np.random.Generator:
    if purpose not in PURPOSES:
        raise KeyError(f"unknown random stream purpose {purpose!r}")
    entropy = [int(seed), PURPOSES[purpose], *(int(k) for k in key)]
    return np.random.default_rng(np.random.SeedSequence(entropy))
