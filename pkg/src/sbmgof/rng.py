"""Seeded, counter-derived random streams.

A stream is identified by a master seed and a key tuple of non-negative
integers. The numpy generator for a stream is built from
``SeedSequence(entropy=seed, spawn_key=key)``, so the bits a stream produces
depend only on ``(seed, key)`` and never on which other streams were created
before it, or in which process. Replicate ``r`` of an experiment uses the key
``(r,)`` extended by whatever sub-stream tags the operation needs.
"""

from __future__ import annotations

import numpy as np

from .errors import ParameterError

# Sub-stream tags used by library operations.
GRAPH = 1
MEMBERSHIP = 2
PARAMS = 3
CLUSTER = 4
BOOTSTRAP = 5
STAGE = 6
TEST = 7

_SEED_LIMIT = 2**64


class SeededRng:
    """A reproducible random stream keyed by ``(seed, key)``."""

    __slots__ = ("seed", "key", "_generator")

    def __init__(self, seed: int, key: tuple[int, ...] = ()):
        seed = int(seed)
        if not 0 <= seed < _SEED_LIMIT:
            raise ParameterError(f"seed must be a 64-bit unsigned integer, got {seed}")
        if any(int(k) < 0 for k in key):
            raise ParameterError(f"stream key entries must be non-negative, got {key}")
        self.seed = seed
        self.key = tuple(int(k) for k in key)
        self._generator = None

    @property
    def generator(self) -> np.random.Generator:
        if self._generator is None:
            ss = np.random.SeedSequence(self.seed, spawn_key=self.key)
            self._generator = np.random.Generator(np.random.PCG64(ss))
        return self._generator

    def child(self, *key: int) -> SeededRng:
        """Derived stream; a pure function of ``(seed, self.key + key)``."""
        return SeededRng(self.seed, self.key + tuple(key))

    def replicate(self, r: int) -> SeededRng:
        return self.child(r)

    def __repr__(self) -> str:
        return f"SeededRng(seed={self.seed}, key={self.key})"


def as_rng(rng: SeededRng | int | None, default_seed: int = 0) -> SeededRng:
    if rng is None:
        return SeededRng(default_seed)
    if isinstance(rng, SeededRng):
        return rng
    return SeededRng(int(rng))
