"""Deterministic 64-bit PRNG (splitmix64) shared by the policy layer and the simulator.

The compiled simulator kernel re-implements the same generator so that the
pure-Python reference loop and the fast path consume identical draw
sequences for a given seed.
"""

from __future__ import annotations

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_SEED_TWEAK = 0x5DEECE66D
_DOUBLE_SCALE = 1.0 / (1 << 53)


class SplitMix64:
    """Seeded splitmix64 stream with the few draw primitives the toolkit needs."""

    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = (seed ^ _SEED_TWEAK) & _MASK

    def next_u64(self) -> int:
        self.state = (self.state + _GAMMA) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * _MIX1) & _MASK
        z = ((z ^ (z >> 27)) * _MIX2) & _MASK
        return z ^ (z >> 31)

    def randbelow(self, span: int) -> int:
        """Uniform integer in [0, span), exact via rejection sampling."""
        if span <= 0:
            raise ValueError(f"randbelow span must be positive, got {span}")
        limit = (_MASK // span) * span
        while True:
            z = self.next_u64()
            if z < limit:
                return z % span

    def randrange(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi)."""
        return lo + self.randbelow(hi - lo)

    def random(self) -> float:
        """Uniform float in [0, 1) with 53 bits of precision."""
        return (self.next_u64() >> 11) * _DOUBLE_SCALE
