"""Deterministic random streams: splitmix64 seeding and xoshiro256++ generation.

The generator core is compiled with numba so that bulk draws (and the batch
shuffling done inside the training loop) use exactly the same arithmetic as
single draws from Python.
"""
from __future__ import annotations

import numba as nb
import numpy as np

from .errors import PreconditionError

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15


def splitmix64(state: int) -> tuple[int, int]:
    """Advance a splitmix64 state; return ``(new_state, output)``."""
    state = (state + GOLDEN_GAMMA) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return state, z ^ (z >> 31)


def derive_seed(seed: int, purpose: str) -> int:
    """Derive an independent 64-bit sub-seed for a named purpose.

    Each byte of ``purpose`` is folded through a splitmix64 round, so
    ``derive_seed(s, "data") != derive_seed(s, "init")`` for every s.
    """
    state = seed & MASK64
    state, out = splitmix64(state)
    for byte in purpose.encode("utf-8"):
        state, out = splitmix64(state ^ byte ^ out)
    return out


@nb.njit(cache=True, inline="always")
def _rotl(x, k):
    return (x << np.uint64(k)) | (x >> np.uint64(64 - k))


@nb.njit(cache=True)
def next_u64(s):
    """xoshiro256++ step on a 4-word uint64 state array (modified in place)."""
    result = _rotl(s[0] + s[3], 23) + s[0]
    t = s[1] << np.uint64(17)
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = _rotl(s[3], 45)
    return result


@nb.njit(cache=True)
def next_double(s):
    # 53 high bits -> [0, 1)
    return np.float64(next_u64(s) >> np.uint64(11)) * (1.0 / 9007199254740992.0)


@nb.njit(cache=True)
def fill_uniform(s, out):
    for i in range(out.shape[0]):
        out[i] = next_double(s)


@nb.njit(cache=True)
def fill_gaussian(s, out):
    # Box-Muller; u1 is taken from (0, 1] so log never sees zero.
    n = out.shape[0]
    i = 0
    while i < n:
        u1 = 1.0 - next_double(s)
        u2 = next_double(s)
        r = np.sqrt(-2.0 * np.log(u1))
        out[i] = r * np.cos(2.0 * np.pi * u2)
        if i + 1 < n:
            out[i + 1] = r * np.sin(2.0 * np.pi * u2)
        i += 2


@nb.njit(cache=True)
def shuffle_inplace(s, arr):
    # Fisher-Yates, top down
    for i in range(arr.shape[0] - 1, 0, -1):
        j = np.int64(next_double(s) * (i + 1))
        tmp = arr[i]
        arr[i] = arr[j]
        arr[j] = tmp


class RngStream:
    """A seeded xoshiro256++ stream.

    The 256-bit state is filled from four consecutive splitmix64 outputs of
    ``seed``. Streams must not be shared between concurrent tasks.
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & MASK64
        words = []
        sm = self.seed
        for _ in range(4):
            sm, out = splitmix64(sm)
            words.append(out)
        self.state = np.array(words, dtype=np.uint64)

    @classmethod
    def for_purpose(cls, seed: int, purpose: str) -> "RngStream":
        return cls(derive_seed(seed, purpose))

    def next_u64(self) -> int:
        return int(next_u64(self.state))

    def uniform(self, n: int, low: float = 0.0, high: float = 1.0) -> np.ndarray:
        out = np.empty(n, dtype=np.float64)
        fill_uniform(self.state, out)
        return low + (high - low) * out

    def gaussian(self, n: int) -> np.ndarray:
        return gaussian_sample(self, n)

    def permutation(self, n: int) -> np.ndarray:
        arr = np.arange(n, dtype=np.int64)
        shuffle_inplace(self.state, arr)
        return arr


def gaussian_sample(rng: RngStream, n: int) -> np.ndarray:
    """Draw ``n`` standard normal variates by Box-Muller."""
    if n < 1:
        raise PreconditionError(f"gaussian_sample needs n >= 1, got {n}")
    out = np.empty(n, dtype=np.float64)
    fill_gaussian(rng.state, out)
    return out
