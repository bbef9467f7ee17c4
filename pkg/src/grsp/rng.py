"""Counter-based random streams.

Every uniform draw is a pure function of ``(seed, a, b, sample_index,
step, slot)``, hashed with the SplitMix64 finalizer.  Walks can therefore
be simulated in any batch composition or worker split and still consume
exactly the same numbers.
"""
from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / (1 << 53)


def mix(x: np.ndarray) -> np.ndarray:
    """SplitMix64 finalizer on a uint64 array (wrapping arithmetic)."""
    with np.errstate(over="ignore"):
        z = np.asarray(x, dtype=np.uint64) + _GOLDEN
        z = (z ^ (z >> _S30)) * _M1
        z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def combine(keys: np.ndarray, value) -> np.ndarray:
    """Fold ``value`` (scalar or array) into ``keys``."""
    v = np.asarray(value, dtype=np.int64).astype(np.uint64)
    return mix(keys ^ mix(v))


def walk_keys(seed: int, a, b, sample_index) -> np.ndarray:
    """One 64-bit stream key per walk."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    s = np.asarray(sample_index, dtype=np.int64)
    shape = np.broadcast(a, b, s).shape
    base = mix(np.full(shape, seed & 0xFFFFFFFFFFFFFFFF, dtype=np.uint64))
    return combine(combine(combine(base, a), b), s)


class Draws:
    """Uniform draws for one step of a batch of walks.

    ``uniform(slot)`` gives one value per walk; distinct slots are
    independent.  ``child(tag)`` derives a disjoint namespace so nested
    kernels never reuse a parent's slots.  ``take(idx)`` restricts the
    batch without changing any walk's numbers.
    """

    __slots__ = ("keys",)

    def __init__(self, keys: np.ndarray):
        self.keys = keys

    @classmethod
    def for_step(cls, keys: np.ndarray, step: int) -> "Draws":
        return cls(combine(keys, step))

    def __len__(self) -> int:
        return len(self.keys)

    def uniform(self, slot: int) -> np.ndarray:
        bits = combine(self.keys, slot)
        return (bits >> _S11).astype(np.float64) * _INV53

    def child(self, tag: int) -> "Draws":
        return Draws(combine(self.keys, -1 - tag))

    def take(self, idx) -> "Draws":
        return Draws(self.keys[idx])

    def choice(self, slot: int, counts: np.ndarray) -> np.ndarray:
        """Uniform offsets in ``0..counts-1`` (counts must be positive)."""
        u = self.uniform(slot)
        off = (u * counts).astype(np.int64)
        return np.minimum(off, counts - 1)
