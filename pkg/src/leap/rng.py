"""Seeded, platform-independent random streams.

Every stochastic step in the package (splits, anchor draws, holdout sampling,
negative sampling, weight init, synthetic data) draws from a SplitMix64
stream so results reproduce bit-for-bit on any platform.

Stream definition, for anyone reimplementing it elsewhere:

* state starts at ``seed mod 2**64``; each draw adds ``0x9E3779B97F4A7C15``
  and returns the standard SplitMix64 finalizer of the new state.
* ``randbelow(n)``: draw ``x``; accept iff ``x < 2**64 - (2**64 mod n)``;
  return ``x mod n``. Rejected draws are consumed.
* ``random()``: ``(x >> 11) * 2**-53``, in [0, 1).
* ``normal()``: Box-Muller over two consecutive uniforms ``u1, u2`` as
  ``sqrt(-2 ln(1 - u1)) * cos(2 pi u2)``; one normal per pair.
* ``shuffle``: Fisher-Yates from the last index down, ``j = randbelow(i + 1)``.
"""

from __future__ import annotations

import numpy as np

GOLDEN_GAMMA = 0x9E3779B97F4A7C15
_MASK = (1 << 64) - 1
_MUL1 = 0xBF58476D1CE4E5B9
_MUL2 = 0x94D049BB133111EB


def _mix(z: int) -> int:
    z = ((z ^ (z >> 30)) * _MUL1) & _MASK
    z = ((z ^ (z >> 27)) * _MUL2) & _MASK
    return z ^ (z >> 31)


def _mix_array(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MUL1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MUL2)
    return z ^ (z >> np.uint64(31))


def _fnv1a64(text: str) -> int:
    h = 0xCBF29CE484222325
    for byte in text.encode("utf-8"):
        h = ((h ^ byte) * 0x100000001B3) & _MASK
    return h


def derive_seed(seed: int, *labels: object) -> int:
    """Derive an independent child seed from ``seed`` and a label path."""
    h = seed & _MASK
    for label in labels:
        h = _mix(((h ^ _fnv1a64(str(label))) + GOLDEN_GAMMA) & _MASK)
    return h


class SplitMix64:
    """SplitMix64 generator with scalar and vectorized draws.

    Both paths consume the same stream: ``next_u64(size=m)`` returns exactly
    the next ``m`` values that ``m`` scalar calls would have produced.
    """

    def __init__(self, seed: int = 0):
        self.seed = seed & _MASK
        self.state = self.seed

    @classmethod
    def child(cls, seed: int, *labels: object) -> "SplitMix64":
        return cls(derive_seed(seed, *labels))

    def next_u64(self, size: int | None = None):
        if size is None:
            self.state = (self.state + GOLDEN_GAMMA) & _MASK
            return _mix(self.state)
        if size == 0:
            return np.empty(0, dtype=np.uint64)
        steps = np.arange(1, size + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            states = np.uint64(self.state) + steps * np.uint64(GOLDEN_GAMMA)
            out = _mix_array(states)
        self.state = (self.state + size * GOLDEN_GAMMA) & _MASK
        return out

    def randbelow(self, n: int) -> int:
        if n <= 0:
            raise ValueError(f"randbelow needs n >= 1, got {n}")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            x = self.next_u64()
            if x < limit:
                return x % n

    def integers(self, n: int, size: int) -> np.ndarray:
        """``size`` draws of ``randbelow(n)``, same stream as the scalar loop."""
        if n <= 0:
            raise ValueError(f"integers needs n >= 1, got {n}")
        limit = (1 << 64) - ((1 << 64) % n)
        out = np.empty(size, dtype=np.int64)
        filled = 0
        while filled < size:
            need = size - filled
            raw = self.next_u64(need)
            if limit == 1 << 64:
                accepted = raw
            else:
                ok = raw < np.uint64(limit)
                if not ok.all():
                    # Rewind to just after the last draw we actually consume.
                    cut = int(np.argmin(ok))
                    take = raw[:cut]
                    self.state = (self.state - (need - cut - 1) * GOLDEN_GAMMA) & _MASK
                    out[filled:filled + cut] = (take % np.uint64(n)).astype(np.int64)
                    filled += cut
                    continue
                accepted = raw
            out[filled:] = (accepted % np.uint64(n)).astype(np.int64)
            filled = size
        return out

    def random(self, size: int | None = None):
        if size is None:
            return (self.next_u64() >> 11) * 2.0**-53
        return (self.next_u64(size) >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def normal(self, size: int) -> np.ndarray:
        u = self.random(2 * size).reshape(size, 2)
        return np.sqrt(-2.0 * np.log1p(-u[:, 0])) * np.cos(2.0 * np.pi * u[:, 1])

    def uniform(self, low: float, high: float, size: int) -> np.ndarray:
        return low + (high - low) * self.random(size)

    def permutation(self, n: int) -> np.ndarray:
        out = np.arange(n, dtype=np.int64)
        self.shuffle(out)
        return out

    def shuffle(self, arr) -> None:
        for i in range(len(arr) - 1, 0, -1):
            j = self.randbelow(i + 1)
            arr[i], arr[j] = arr[j], arr[i]

    def sample(self, population, k: int) -> list:
        """``k`` distinct items in draw order (partial Fisher-Yates)."""
        pool = list(population)
        if k > len(pool):
            raise ValueError(f"cannot draw {k} distinct items from {len(pool)}")
        n = len(pool)
        for i in range(k):
            j = i + self.randbelow(n - i)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:k]
