"""Deterministic 64-bit generator shared by both training backends.

The compiled kernel implements the identical splitmix64 step, so the two
backends consume bit-identical integer streams (shuffles, corruption sides,
entity draws) for the same seed.
"""

from __future__ import annotations

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


class SplitMix64:
    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = seed & _MASK

    def next_u64(self) -> int:
        self.state = (self.state + _GOLDEN) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def below(self, n: int) -> int:
        """Uniform draw in [0, n); modulo bias is ~n/2**64 and ignored."""
        return self.next_u64() % n

    def coin(self) -> int:
        return self.next_u64() & 1

    def shuffle(self, seq) -> None:
        """In-place Fisher-Yates; mirrored exactly by the compiled kernel."""
        for i in range(len(seq) - 1, 0, -1):
            j = self.below(i + 1)
            seq[i], seq[j] = seq[j], seq[i]


def derive_seed(master: int, stream: int) -> int:
    """Independent sub-seed for a named stream of a single master seed."""
    return SplitMix64((master ^ (stream * _GOLDEN)) & _MASK).next_u64()


# stream tags for the pipeline's subsystems
STREAM_INIT = 1
STREAM_TRAIN = 2
STREAM_TC_VALID = 3
STREAM_TC_TEST = 4
