"""Monte Carlo estimation of the expected meeting score ``E[C^L]``.

Walks are simulated in vectorized batches.  Each walk draws its random
numbers from a stream keyed by ``(seed, a, b, sample_index)``, so the
result of any walk is independent of which batch or worker ran it.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ContractError
from .kernels import Kernel
from .rng import Draws, walk_keys

NOT_MET = -1
DEFAULT_SEED = 20190101


@dataclass(frozen=True)
class McConfig:
    samples: int = 200
    max_steps: int = 15
    C: float = 0.8
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        if self.samples < 1:
            raise ContractError("samples must be at least 1")
        if self.max_steps < 1:
            raise ContractError("max_steps must be at least 1")
        if not 0.0 < self.C < 1.0:
            raise ContractError(f"decay C must lie in (0, 1), got {self.C}")

    def powers(self) -> np.ndarray:
        """``C**t`` for ``t = 0..max_steps``."""
        return np.array([self.C ** t for t in range(self.max_steps + 1)])


@dataclass(frozen=True)
class WalkOutcome:
    meeting_length: int | None
    score: float

    @property
    def met(self) -> bool:
        return self.meeting_length is not None


@dataclass(frozen=True)
class Estimate:
    mean: float
    std_error: float
    samples_used: int


def meeting_lengths(kernel: Kernel, a, b, sample_index, cfg: McConfig) -> np.ndarray:
    """Meeting time of each walk, or ``NOT_MET``.

    ``a``, ``b`` and ``sample_index`` are broadcast together; each entry
    is one independent walk started at ``(a, b)``.
    """
    a, b, s = np.broadcast_arrays(np.asarray(a, dtype=np.int64),
                                  np.asarray(b, dtype=np.int64),
                                  np.asarray(sample_index, dtype=np.int64))
    a, b, s = a.ravel(), b.ravel(), s.ravel()
    n = kernel.graph.node_count
    if len(a) and (min(a.min(), b.min()) < 0 or max(a.max(), b.max()) >= n):
        raise ContractError("walk start outside the graph")
    length = np.where(a == b, 0, NOT_MET).astype(np.int64)
    keys = walk_keys(cfg.seed, a, b, s)
    live = np.flatnonzero(a != b)
    cur_a, cur_b = a[live], b[live]
    for step in range(1, cfg.max_steps + 1):
        if len(live) == 0:
            break
        draws = Draws.for_step(keys[live], step)
        cur_a, cur_b, stopped = kernel.sample_step(cur_a, cur_b, draws)
        met = ~stopped & (cur_a == cur_b)
        length[live[met]] = step
        keep = ~stopped & ~met
        live, cur_a, cur_b = live[keep], cur_a[keep], cur_b[keep]
    return length


def scores(lengths: np.ndarray, cfg: McConfig) -> np.ndarray:
    powers = cfg.powers()
    return np.where(lengths >= 0, powers[np.maximum(lengths, 0)], 0.0)


def sample_walk(kernel: Kernel, start: tuple[int, int], cfg: McConfig,
                sample_index: int) -> WalkOutcome:
    a, b = start
    t = int(meeting_lengths(kernel, a, b, sample_index, cfg)[0])
    if t == NOT_MET:
        return WalkOutcome(None, 0.0)
    return WalkOutcome(t, cfg.C ** t)


def summarize(values: Sequence[float]) -> Estimate:
    """Mean and standard error, with exact summation so the result does
    not depend on how the values were produced."""
    values = [float(v) for v in values]
    n = len(values)
    mean = math.fsum(values) / n
    if n < 2:
        return Estimate(mean, 0.0, n)
    var = math.fsum((v - mean) ** 2 for v in values) / (n - 1)
    return Estimate(mean, math.sqrt(var / n), n)


def _chunks(total: int, parts: int) -> list[tuple[int, int]]:
    parts = max(1, min(parts, total))
    bounds = np.linspace(0, total, parts + 1).astype(int)
    return [(int(lo), int(hi)) for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]


def estimate_many(kernel: Kernel, pairs: Sequence[tuple[int, int]], cfg: McConfig,
                  workers: int = 1, batch_walks: int = 1 << 18) -> list[Estimate]:
    """Estimates for several pairs, simulated together.

    Work is split into contiguous walk ranges; ``workers`` only changes
    who runs each range, never the numbers.
    """
    if not pairs:
        return []
    pa = np.array([p[0] for p in pairs], dtype=np.int64)
    pb = np.array([p[1] for p in pairs], dtype=np.int64)
    ns = cfg.samples
    total = len(pairs) * ns
    n_chunks = max(workers, -(-total // batch_walks))

    def run(bounds):
        lo, hi = bounds
        flat = np.arange(lo, hi)
        return meeting_lengths(kernel, pa[flat // ns], pb[flat // ns], flat % ns, cfg)

    ranges = _chunks(total, n_chunks)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, ranges))
    else:
        parts = [run(r) for r in ranges]
    lengths = np.concatenate(parts).reshape(len(pairs), ns)
    sc = scores(lengths, cfg)
    return [summarize(row) for row in sc]


def estimate(kernel: Kernel, pair: tuple[int, int], cfg: McConfig,
             workers: int = 1) -> Estimate:
    return estimate_many(kernel, [pair], cfg, workers=workers)[0]
