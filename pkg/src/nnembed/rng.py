"""SplitMix64 pseudo-random generator.

A tiny, fully specified generator so that seeded topologies and requests are
reproducible independently of numpy or Python release changes.
"""

from __future__ import annotations

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15


class SplitMix64:
    def __init__(self, seed: int) -> None:
        self.state = seed & _MASK

    def next_u64(self) -> int:
        self.state = (self.state + _GAMMA) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def uniform(self, low: float = 0.0, high: float = 1.0) -> float:
        """Float in [low, high) built from the top 53 bits."""
        return low + (high - low) * ((self.next_u64() >> 11) * 2.0**-53)

    def below(self, n: int) -> int:
        """Integer in [0, n) by rejection, free of modulo bias."""
        if n <= 0:
            raise ValueError("n must be positive")
        limit = (_MASK + 1) - ((_MASK + 1) % n)
        while True:
            r = self.next_u64()
            if r < limit:
                return r % n

    def sample(self, population, k: int) -> list:
        """k distinct items, partial Fisher-Yates over a copy."""
        items = list(population)
        if k > len(items):
            raise ValueError("sample larger than population")
        for i in range(k):
            j = i + self.below(len(items) - i)
            items[i], items[j] = items[j], items[i]
        return items[:k]
