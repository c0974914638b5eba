"""SplitMix64: the pinned pseudo-random generator of the data pipeline.

Each draw advances the state by the golden-ratio increment
``0x9E3779B97F4A7C15`` and mixes it with the two multipliers
``0xBF58476D1CE4E5B9`` / ``0x94D049BB133111EB`` and shifts 30, 27, 31.
Floats take the top 53 bits. Everything is plain integer arithmetic modulo
2**64, so sequences are identical on every platform.
"""

from __future__ import annotations

import numpy as np

MASK = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
MUL1 = 0xBF58476D1CE4E5B9
MUL2 = 0x94D049BB133111EB


def mix64(z: int) -> int:
    z = ((z ^ (z >> 30)) * MUL1) & MASK
    z = ((z ^ (z >> 27)) * MUL2) & MASK
    return z ^ (z >> 31)


class SplitMix64:
    def __init__(self, seed: int = 0):
        self.state = int(seed) & MASK

    @classmethod
    def derive(cls, seed: int, *keys: int) -> "SplitMix64":
        """Independent substream for (seed, key, key, ...)."""
        state = int(seed) & MASK
        for key in keys:
            state = mix64((state ^ mix64((int(key) + GOLDEN) & MASK)) & MASK)
        return cls(state)

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN) & MASK
        return mix64(self.state)

    def random(self) -> float:
        """Uniform float in [0, 1)."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.random()

    def randint(self, lo: int, hi: int) -> int:
        """Integer in [lo, hi] inclusive."""
        return lo + int(self.random() * (hi - lo + 1))

    def shuffle(self, items: list) -> list:
        """Fisher-Yates in place; returns ``items``."""
        for i in range(len(items) - 1, 0, -1):
            j = int(self.random() * (i + 1))
            items[i], items[j] = items[j], items[i]
        return items

    def random_array(self, shape) -> np.ndarray:
        """The next ``prod(shape)`` floats as an array (same values as repeated ``random()``)."""
        n = int(np.prod(shape))
        steps = np.arange(1, n + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            z = np.uint64(self.state) + steps * np.uint64(GOLDEN)
            z = (z ^ (z >> np.uint64(30))) * np.uint64(MUL1)
            z = (z ^ (z >> np.uint64(27))) * np.uint64(MUL2)
            z = z ^ (z >> np.uint64(31))
        self.state = (self.state + n * GOLDEN) & MASK
        return ((z >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))).reshape(shape)
