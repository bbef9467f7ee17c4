"""Top-k similarity queries over a radius-pruned candidate set."""
from __future__ import annotations

from dataclasses import dataclass

from .errors import ContractError
from .graph import Graph
from .kernels import Kernel
from .montecarlo import McConfig, estimate_many

DEFAULT_RADIUS = 4


@dataclass(frozen=True)
class QueryResult:
    query: int
    ranked: list[tuple[int, float, float]]
    candidates_considered: int


def topk(g: Graph, kernel: Kernel, query: int, k: int, radius: int = DEFAULT_RADIUS,
         cfg: McConfig = McConfig(), drop_zero: bool = False,
         workers: int = 1) -> QueryResult:
    """Rank the nodes within ``radius`` undirected hops of ``query``.

    Candidates are ordered by estimated similarity, descending, ties
    broken by node id.  Zero-score candidates stay in the tail unless
    ``drop_zero`` is set.
    """
    if k < 0:
        raise ContractError("k must be nonnegative")
    if radius < 0:
        raise ContractError("radius must be nonnegative")
    candidates = sorted(g.ball(query, radius) - {query})
    if k == 0 or not candidates:
        return QueryResult(query, [], len(candidates))
    ests = estimate_many(kernel, [(query, c) for c in candidates], cfg, workers=workers)
    rows = [(c, e.mean, e.std_error) for c, e in zip(candidates, ests)]
    if drop_zero:
        rows = [r for r in rows if r[1] > 0.0]
    rows.sort(key=lambda r: (-r[1], r[0]))
    return QueryResult(query, rows[:k], len(candidates))
