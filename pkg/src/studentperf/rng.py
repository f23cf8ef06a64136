"""Deterministic pseudo-random number generation.

All randomness in the pipeline (weight initialization, shuffles, dropout
masks) flows through xoshiro256** so that a seed fully pins every run,
independent of interpreter or platform RNG state.

Seeding scheme: a single splitmix64 sequence started at the user seed is
cut into consecutive 4-word blocks; stream `k` takes words 4k..4k+3 as its
xoshiro256** state. Distinct stream indices therefore yield independent
generators from one seed, which is how the pipeline separates weight
initialization, row shuffling, and dropout without correlated draws.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15

# Stream indices reserved by the pipeline (documented, not configurable).
STREAM_INIT = 0
STREAM_SHUFFLE = 1
STREAM_DROPOUT = 2  # vectorized lanes occupy streams 2, 3, 4, ...

# Lane count of the vectorized dropout generator. Part of the mask
# algorithm: changing it changes mask sequences for a given seed.
DROPOUT_LANES = 64


class SplitMix64:
    """64-bit splitmix sequence; used only to seed xoshiro256** states."""

    def __init__(self, seed: int):
        self._x = seed & _MASK64

    def next_u64(self) -> int:
        self._x = (self._x + _GOLDEN) & _MASK64
        z = self._x
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)


def _state_words(seed: int, stream: int) -> list[int]:
    sm = SplitMix64(seed)
    for _ in range(4 * stream):
        sm.next_u64()
    words = [sm.next_u64() for _ in range(4)]
    if not any(words):  # all-zero state is the one invalid xoshiro state
        words[0] = _GOLDEN
    return words


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK64


class Xoshiro256StarStar:
    """Scalar xoshiro256** generator.

    `random()` maps the top 53 bits of the output word to [0, 1), the
    conventional double construction. `randbelow()` uses rejection
    sampling, so bounded draws carry no modulo bias.
    """

    def __init__(self, seed: int, stream: int = STREAM_INIT):
        self._s = _state_words(seed, stream)

    def next_u64(self) -> int:
        s = self._s
        result = (_rotl((s[1] * 5) & _MASK64, 7) * 9) & _MASK64
        t = (s[1] << 17) & _MASK64
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = _rotl(s[3], 45)
        return result

    def random(self) -> float:
        return (self.next_u64() >> 11) * 2.0 ** -53

    def uniform(self, low: float, high: float) -> float:
        return low + (high - low) * self.random()

    def randbelow(self, n: int) -> int:
        if n <= 0:
            raise ValueError("randbelow() requires n >= 1")
        limit = (_MASK64 + 1) - ((_MASK64 + 1) % n)
        while True:
            u = self.next_u64()
            if u < limit:
                return u % n

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randbelow(i + 1)
            items[i], items[j] = items[j], items[i]

    def permutation(self, n: int) -> list[int]:
        items = list(range(n))
        self.shuffle(items)
        return items


class VectorXoshiro:
    """Lane-parallel xoshiro256** for bulk double generation.

    Lane `j` is the scalar generator at stream `first_stream + j`, so the
    vectorized output is checkable lane-by-lane against the scalar class.
    Blocks are emitted lane-major per step: step r contributes outputs
    (lane 0, lane 1, ..., lane L-1), and a request of n doubles takes the
    first n values of the concatenated steps.
    """

    def __init__(self, seed: int, lanes: int = DROPOUT_LANES,
                 first_stream: int = STREAM_DROPOUT):
        sm = SplitMix64(seed)
        for _ in range(4 * first_stream):
            sm.next_u64()
        words = np.array(
            [[sm.next_u64() for _ in range(4)] for _ in range(lanes)],
            dtype=np.uint64,
        )
        for lane in range(lanes):
            if not words[lane].any():
                words[lane, 0] = np.uint64(_GOLDEN)
        self._s = [words[:, i].copy() for i in range(4)]
        self.lanes = lanes

    def _step_u64(self) -> np.ndarray:
        s0, s1, s2, s3 = self._s
        five = np.uint64(5)
        nine = np.uint64(9)
        k7, k17, k45 = np.uint64(7), np.uint64(17), np.uint64(45)
        k57, k47, k19 = np.uint64(57), np.uint64(47), np.uint64(19)
        r = s1 * five
        result = ((r << k7) | (r >> k57)) * nine
        t = s1 << k17
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = (s3 << k45) | (s3 >> k19)
        self._s = [s0, s1, s2, s3]
        return result

    def random_block(self, n: int) -> np.ndarray:
        """n doubles in [0, 1), in the documented lane-major order."""
        steps = -(-n // self.lanes)
        out = np.empty((steps, self.lanes), dtype=np.uint64)
        for r in range(steps):
            out[r] = self._step_u64()
        return (out.reshape(-1)[:n] >> np.uint64(11)) * 2.0 ** -53

    def keep_mask(self, shape: tuple[int, ...], keep_prob: float) -> np.ndarray:
        """Boolean mask, True with probability keep_prob per entry."""
        flat = self.random_block(int(np.prod(shape)))
        return (flat < keep_prob).reshape(shape)
