"""Reproducible random-number streams.

Every sampler in the package takes an :class:`RngStream` rather than a bare
generator so that runs are reproducible and streams can be fanned out across
workers without overlap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class RngStream:
    """A (seed, stream_id) pair identifying one independent random stream.

    Identical pairs reproduce identical draws; distinct ``stream_id`` values
    give statistically independent streams (SeedSequence spawning).
    """

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence([self.seed, self.stream_id]))

    def split(self, n: int) -> list["RngStream"]:
        """Derive n child streams, deterministic in (seed, stream_id)."""
        base = (self.stream_id + 1) * 1_000_003
        return [RngStream(self.seed, base + i) for i in range(n)]

    def state_words(self, n: int = 4) -> np.ndarray:
        """Raw uint64 state material, for samplers with their own generators."""
        ss = np.random.SeedSequence([self.seed, self.stream_id])
        return ss.generate_state(n, dtype=np.uint64)
