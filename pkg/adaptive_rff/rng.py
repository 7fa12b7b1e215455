"""Seeded random streams shared by every stochastic operation."""

import numpy as np

SEED_BITS = 64


class RngStream:
    """Counter-based random stream with an explicit 64-bit seed.

    Every draw in the package goes through one of these; there is no global
    generator. Child streams are derived with :meth:`spawn`, so two parts of
    a run that draw independently never perturb each other's sequence.
    """

    def __init__(self, seed: int, spawn_key: tuple[int, ...] = ()):
        if not 0 <= int(seed) < 2**SEED_BITS:
            raise ValueError(f"seed must be a {SEED_BITS}-bit unsigned integer")
        self.seed = int(seed)
        self.spawn_key = tuple(int(k) for k in spawn_key)
        sequence = np.random.SeedSequence(self.seed, spawn_key=self.spawn_key)
        self.generator = np.random.Generator(np.random.Philox(sequence))

    def spawn(self, index: int) -> "RngStream":
        """Return the child stream number ``index`` of this stream."""
        return RngStream(self.seed, self.spawn_key + (int(index),))

    def normal(self, size: int | tuple[int, ...]) -> np.ndarray:
        """Draw standard normal variates."""
        return self.generator.standard_normal(size)

    def uniform(self, size: int | tuple[int, ...]) -> np.ndarray:
        """Draw uniform variates on [0, 1)."""
        return self.generator.random(size)

    def permutation(self, n: int) -> np.ndarray:
        """Return a random permutation of ``range(n)``."""
        return self.generator.permutation(n)

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, spawn_key={self.spawn_key})"
