"""Deterministic 64-bit random generator used everywhere randomness is needed.

Audit runs must reproduce bit-exactly across platforms and across
reimplementations, so we pin a tiny generator instead of relying on a
library RNG whose stream is an implementation detail.

The generator is splitmix64 (Steele, Lea & Flood).  State advances by the
additive constant 0x9E3779B97F4A7C15 (the golden ratio in 64-bit fixed
point); each output is the finalizer

    z ^= z >> 30; z *= 0xBF58476D1CE4E5B9
    z ^= z >> 27; z *= 0x94D049BB133111EB
    z ^= z >> 31

applied to the new state, all arithmetic mod 2**64.  Floats take the top
53 bits; bounded ints use rejection sampling, so both are unbiased and
identical in any conforming implementation.
"""

from __future__ import annotations

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15


def mix64(z: int) -> int:
    """splitmix64 finalizer: a bijective 64-bit hash."""
    z = (z + _GAMMA) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def derive_seed(master_seed: int, *path: int) -> int:
    """Derive an independent stream seed from a master seed and index path.

    Each path component is hashed into the running state, so
    derive_seed(s, i) for i = 0..n-1 gives n decorrelated per-trial seeds
    and results do not depend on execution order.
    """
    s = mix64(master_seed & _MASK)
    for p in path:
        s = mix64(s ^ mix64(p & _MASK))
    return s


def seed_from_text(master_seed: int, text: str) -> int:
    """Fold a string (e.g. a subgroup id) into a derived seed."""
    s = mix64(master_seed & _MASK)
    for b in text.encode("utf-8"):
        s = mix64(s ^ b)
    return s


class Rng:
    """Sequential splitmix64 stream."""

    def __init__(self, seed: int):
        self._state = seed & _MASK

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def random(self) -> float:
        """Uniform float in [0, 1) with 53 bits of precision."""
        return (self.next_u64() >> 11) * (2.0 ** -53)

    def randrange(self, n: int) -> int:
        """Uniform int in [0, n), unbiased via rejection sampling."""
        if n <= 0:
            raise ValueError("randrange bound must be positive")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            r = self.next_u64()
            if r < limit:
                return r % n

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.random()

    def randint(self, lo: int, hi: int) -> int:
        """Uniform int in [lo, hi] inclusive."""
        if hi < lo:
            raise ValueError("empty range")
        return lo + self.randrange(hi - lo + 1)

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randrange(i + 1)
            items[i], items[j] = items[j], items[i]
