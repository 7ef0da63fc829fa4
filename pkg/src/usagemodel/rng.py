"""Portable seeded random numbers.

All stochastic components of this package draw from SplitMix64, a counter
based 64-bit generator with a fixed published constant set. Pure integer
arithmetic keeps sequences bit-identical across platforms and Python
versions, which the reproducibility contracts of the search and the trace
generator rely on.

Draw conventions used by callers are documented where the draws happen
(see ``split_search.binary_split`` and ``synth_eval.generate_traces``).
"""

from __future__ import annotations

import hashlib

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15


def mix64(z: int) -> int:
    """SplitMix64 finalizer: avalanche a 64-bit value."""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


class SplitMix64:
    """Deterministic 64-bit generator; state advances by a fixed increment."""

    __slots__ = ("_state",)

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK64
        return mix64(self._state)

    def random(self) -> float:
        """Uniform float in [0, 1) with 53 bits of precision."""
        return (self.next_u64() >> 11) * (2.0 ** -53)

    def randrange(self, n: int) -> int:
        """Uniform integer in [0, n), unbiased via rejection sampling."""
        if n <= 0:
            raise ValueError("randrange needs n >= 1")
        bound = ((1 << 64) // n) * n
        while True:
            r = self.next_u64()
            if r < bound:
                return r % n

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randrange(i + 1)
            items[i], items[j] = items[j], items[i]


def derive_seed(seed: int, label: str) -> int:
    """Derive a child seed from a parent seed and a text label.

    The label is hashed with BLAKE2b to 64 bits, xor-combined with the
    parent seed, and scrambled through the SplitMix64 finalizer. Stable
    across platforms, so per-label child streams are independent of the
    order labels are processed in.
    """
    h = int.from_bytes(
        hashlib.blake2b(label.encode("utf-8"), digest_size=8).digest(), "big"
    )
    return mix64((seed & _MASK64) ^ h)
