"""Seedable, portable random streams.

Every random draw in this package flows through SplitMix64 (Steele et al.'s
64-bit generator: state advances by the golden-gamma constant, output is the
murmur-style finalizer of the state). The algorithm is a dozen lines in any
language, so sampled sequences are reproducible across platforms and
reimplementations, which plain `random.Random` does not promise.

Streams are derived, never shared: each logical draw site builds its own
generator from `mix(...)` over (seed, purpose tag, indices). That makes every
label, retry, and augmentation a pure function of the run seed plus its
coordinates, with no global generator state to checkpoint.
"""

from __future__ import annotations

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15

# Stream-purpose tags. Changing a value changes every derived sequence.
TAG_LABEL = 1
TAG_SYNTH = 2
TAG_BRAND_MODES = 3
TAG_ROTATION = 4
TAG_BASE_POOL = 5


def mix64(z: int) -> int:
    """SplitMix64 output finalizer: a 64-bit avalanche permutation."""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def mix(*parts: int) -> int:
    """Collapse integers into one scrambled 64-bit stream seed (order matters)."""
    h = 0
    for p in parts:
        h = mix64((h + _GOLDEN + (p & _MASK64)) & _MASK64)
    return h


def fnv1a64(data: bytes) -> int:
    """FNV-1a 64-bit hash; used wherever text must hash identically everywhere."""
    h = 0xCBF29CE484222325
    for b in data:
        h = ((h ^ b) * 0x100000001B3) & _MASK64
    return h


class SplitMix64:
    """Minimal SplitMix64 stream."""

    __slots__ = ("_state",)

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _GOLDEN) & _MASK64
        return mix64(self._state)

    def randbelow(self, n: int) -> int:
        """Exactly uniform integer in [0, n) via rejection sampling."""
        if n <= 0:
            raise ValueError("randbelow() needs n >= 1")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            v = self.next_u64()
            if v < limit:
                return v % n

    def uniform(self) -> float:
        """Uniform float in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * 2.0**-53

    def choice(self, seq):
        return seq[self.randbelow(len(seq))]

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randbelow(i + 1)
            items[i], items[j] = items[j], items[i]
