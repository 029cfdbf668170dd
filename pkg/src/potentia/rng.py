"""Counter-based random streams.

Every stream is addressed by a tuple of non-negative integers (master seed,
chunk index, block index, purpose).  The same address always yields the same
Philox generator, so results never depend on how work is split across threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# purpose tags
KILL = 0
EVENTS = 1
STEPS = 2
DUAL = 3
SAMPLE = 4
SKELETON = 5


@dataclass(frozen=True)
class StreamFactory:
    """Hands out independent generators keyed by integer coordinates."""

    seed: int

    def __post_init__(self):
        if int(self.seed) < 0:
            raise ValueError("seed must be non-negative")

    def generator(self, *key: int) -> np.random.Generator:
        words = [int(self.seed)] + [int(k) for k in key]
        return np.random.Generator(np.random.Philox(np.random.SeedSequence(words)))


def stream(seed: int, *key: int) -> np.random.Generator:
    """Shortcut for ``StreamFactory(seed).generator(*key)``."""
    return StreamFactory(seed).generator(*key)
