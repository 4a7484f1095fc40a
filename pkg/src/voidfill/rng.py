"""PCG32 (XSH-RR 64/32) so that generated masks and scenes are reproducible byte for byte."""

from __future__ import annotations

MULTIPLIER = 6364136223846793005
_MASK64 = (1 << 64) - 1
_MASK32 = (1 << 32) - 1


class PCG32:
    """Minimal PCG32 generator seeded with ``initstate = initseq = seed``."""

    __slots__ = ("state", "inc")

    def __init__(self, seed: int, stream: int | None = None):
        seed &= _MASK64
        stream = seed if stream is None else stream & _MASK64
        self.state = 0
        self.inc = ((stream << 1) | 1) & _MASK64
        self.next_uint32()
        self.state = (self.state + seed) & _MASK64
        self.next_uint32()

    def next_uint32(self) -> int:
        old = self.state
        self.state = (old * MULTIPLIER + self.inc) & _MASK64
        xorshifted = (((old >> 18) ^ old) >> 27) & _MASK32
        rot = old >> 59
        return ((xorshifted >> rot) | (xorshifted << ((-rot) & 31))) & _MASK32

    def next_uint64(self) -> int:
        hi = self.next_uint32()
        return (hi << 32) | self.next_uint32()

    def bounded(self, bound: int) -> int:
        """Unbiased integer in ``[0, bound)``."""
        if not 0 < bound <= 1 << 32:
            raise ValueError("bound must lie in 1..2**32")
        threshold = ((1 << 32) - bound) % bound
        while True:
            r = self.next_uint32()
            if r >= threshold:
                return r % bound

    def randint(self, lo: int, hi: int) -> int:
        """Integer in ``[lo, hi]`` inclusive."""
        if hi < lo:
            raise ValueError("empty integer range")
        return lo + self.bounded(hi - lo + 1)

    def random(self) -> float:
        """Float in ``[0, 1)`` with 32 bits of resolution."""
        return self.next_uint32() / 4294967296.0

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.random()

    def shuffle(self, items: list) -> list:
        """Fisher-Yates, in place; returns ``items``."""
        for i in range(len(items) - 1, 0, -1):
            j = self.bounded(i + 1)
            items[i], items[j] = items[j], items[i]
        return items
