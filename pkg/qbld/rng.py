"""Seedable random streams.

Every stochastic routine takes a `RandomStream` explicitly. Child streams come
from `numpy.random.SeedSequence.spawn`, so a whole chain (and every per-chunk
substream inside it) is reproducible from one integer seed.
"""
from __future__ import annotations

from typing import List, Optional, Union

import numpy as np


class RandomStream:
    def __init__(self, seed: Union[int, np.random.SeedSequence, None] = None):
        if isinstance(seed, np.random.SeedSequence):
            self._seq = seed
        else:
            self._seq = np.random.SeedSequence(seed)
        self.generator = np.random.Generator(np.random.PCG64(self._seq))

    @property
    def seed(self) -> Optional[int]:
        entropy = self._seq.entropy
        return int(entropy) if isinstance(entropy, int) else None

    @property
    def spawn_key(self) -> tuple:
        return tuple(self._seq.spawn_key)

    def spawn(self, n: int) -> List["RandomStream"]:
        return [RandomStream(child) for child in self._seq.spawn(n)]

    # thin pass-throughs, so kernels read like numpy code
    def uniform(self, low=0.0, high=1.0, size=None):
        return self.generator.uniform(low, high, size)

    def standard_normal(self, size=None):
        return self.generator.standard_normal(size)

    def standard_exponential(self, size=None):
        return self.generator.standard_exponential(size)

    def gamma(self, shape, scale=1.0, size=None):
        return self.generator.gamma(shape, scale, size)

    def __repr__(self) -> str:
        return f"RandomStream(seed={self.seed}, spawn_key={self.spawn_key})"
