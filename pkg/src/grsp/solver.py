"""Exact all-pairs fixed-point iteration.

Iterates ``s_{k+1}(a,b) = C * sum p((a',b')|(a,b)) s_k(a',b')`` from the
identity table with the diagonal pinned to 1.  Coefficients come from
:meth:`Kernel.transition` and are assembled once into a sparse matrix
over the ``n*n`` pair states, so each sweep is one sparse mat-vec.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .errors import CapacityError, ContractError
from .graph import Graph
from .kernels import Kernel

MONOTONE_SLACK = 1e-12


@dataclass(frozen=True)
class SolveConfig:
    C: float = 0.8
    epsilon: float = 1e-9
    k_max: int = 100
    memory_gate: int = 20_000

    def __post_init__(self):
        if not 0.0 < self.C < 1.0:
            raise ContractError(f"decay C must lie in (0, 1), got {self.C}")
        if not self.epsilon > 0:
            raise ContractError("epsilon must be positive")
        if self.k_max < 1:
            raise ContractError("k_max must be at least 1")
        if self.memory_gate < 0:
            raise ContractError("memory_gate must be nonnegative")


@dataclass
class SimilarityTable:
    values: np.ndarray
    iterations_run: int
    final_delta: float
    deltas: list[float] = field(default_factory=list)

    @property
    def node_count(self) -> int:
        return self.values.shape[0]

    def __getitem__(self, pair):
        return float(self.values[pair])


def transition_matrix(g: Graph, kernel: Kernel) -> sp.csr_matrix:
    """Sparse ``n^2 x n^2`` matrix of pair-state transition coefficients.

    Row ``a*n+b`` holds the support of ``(a, b)``; diagonal rows are
    empty since those states are terminal.
    """
    n = g.node_count
    rows, cols, vals = [], [], []
    for a in range(n):
        for b in range(n):
            if a == b:
                continue
            r = a * n + b
            for (x, y), p in kernel.transition((a, b)).entries:
                rows.append(r)
                cols.append(x * n + y)
                vals.append(p)
    return sp.csr_matrix(
        (np.asarray(vals, dtype=np.float64),
         (np.asarray(rows, dtype=np.int64), np.asarray(cols, dtype=np.int64))),
        shape=(n * n, n * n))


def solve(
    g: Graph,
    kernel: Kernel,
    cfg: SolveConfig = SolveConfig(),
    on_iterate: Callable[[int, np.ndarray], None] | None = None,
) -> SimilarityTable:
    """Iterate to the fixed point (max-norm delta below ``cfg.epsilon``).

    ``on_iterate(k, table)`` sees every iterate including ``s_0``.
    Raises :class:`CapacityError` above ``cfg.memory_gate`` nodes and
    ``ArithmeticError`` if an iterate ever decreases.
    """
    n = g.node_count
    if n > cfg.memory_gate:
        raise CapacityError(
            f"{n} nodes exceeds the dense-solve memory gate of {cfg.memory_gate}")
    P = transition_matrix(g, kernel)
    diag = np.arange(n) * (n + 1)
    cur = np.zeros(n * n)
    cur[diag] = 1.0
    nxt = np.empty_like(cur)
    if on_iterate:
        on_iterate(0, cur.reshape(n, n))
    deltas: list[float] = []
    delta = math.inf
    k = 0
    while k < cfg.k_max:
        nxt[:] = P @ cur
        nxt *= cfg.C
        nxt[diag] = 1.0
        step = nxt - cur
        if n and step.min() < -MONOTONE_SLACK:
            raise ArithmeticError(f"iterate decreased by {-step.min():.3g} at sweep {k + 1}")
        delta = float(np.abs(step).max()) if n else 0.0
        cur, nxt = nxt, cur
        k += 1
        deltas.append(delta)
        if on_iterate:
            on_iterate(k, cur.reshape(n, n))
        if delta < cfg.epsilon:
            break
    return SimilarityTable(cur.reshape(n, n).copy(), k, delta if k else 0.0, deltas)


def residual(g: Graph, kernel: Kernel, table: SimilarityTable | np.ndarray, C: float) -> float:
    """Largest off-diagonal violation of the recursive equations."""
    values = table.values if isinstance(table, SimilarityTable) else np.asarray(table)
    n = g.node_count
    if values.shape != (n, n):
        raise ContractError(f"table shape {values.shape} does not match {n} nodes")
    if n < 2:
        return 0.0
    s = values.reshape(-1)
    rhs = C * (transition_matrix(g, kernel) @ s)
    gap = np.abs(s - rhs)
    gap[np.arange(n) * (n + 1)] = 0.0
    return float(gap.max())


def write_table(table: SimilarityTable, stream, names=None, threshold: float = 0.0,
                precision: int | None = 6) -> None:
    """Write ``a<TAB>b<TAB>value`` for off-diagonal entries above ``threshold``."""
    values = table.values
    n = values.shape[0]
    for a in range(n):
        for b in range(n):
            v = values[a, b]
            if a == b or v <= threshold:
                continue
            na = names[a] if names else str(a)
            nb = names[b] if names else str(b)
            text = repr(float(v)) if precision is None else f"{v:.{precision}f}"
            stream.write(f"{na}\t{nb}\t{text}\n")


def read_table(stream, g: Graph) -> np.ndarray:
    """Inverse of :func:`write_table`; missing entries read as 0."""
    out = np.eye(g.node_count)
    for line in stream:
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        a, b, v = line.split("\t")
        out[g.node_id(a), g.node_id(b)] = float(v)
    return out
