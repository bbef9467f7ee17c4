"""Immutable directed simple graphs in compressed sparse row form.

Both adjacency directions are stored: ``out`` rows list successors and
``in`` rows list predecessors, each sorted ascending.  Node ids are dense
integers ``0..n-1``; external string tokens are kept in ``names`` in
first-seen order.
"""
from __future__ import annotations

import gzip
import io
import logging
import os
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import BinaryIO, Iterable, Sequence

import numpy as np

from .errors import ContractError, GraphFormatError

log = logging.getLogger(__name__)

GZIP_MAGIC = b"\x1f\x8b"


def _csr(n: int, src: np.ndarray, dst: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row pointer and sorted column indices for rows ``src``."""
    order = np.lexsort((dst, src))
    indices = dst[order].astype(np.int64)
    counts = np.bincount(src, minlength=n)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    indices.setflags(write=False)
    indptr.setflags(write=False)
    return indptr, indices


@dataclass(frozen=True, eq=False)
class Graph:
    """Directed simple graph with forward and reverse CSR adjacency.

    Construct through :meth:`from_edges` or :func:`load_edge_list`; the
    raw constructor trusts its arguments.
    """

    node_count: int
    out_ptr: np.ndarray
    out_idx: np.ndarray
    in_ptr: np.ndarray
    in_idx: np.ndarray
    names: tuple[str, ...] = ()
    duplicate_edges: int = 0
    _index: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_edges(
        cls,
        n: int,
        edges: Iterable[tuple[int, int]],
        names: Sequence[str] | None = None,
    ) -> "Graph":
        pairs = np.asarray(list(edges), dtype=np.int64).reshape(-1, 2)
        if pairs.size and (pairs.min() < 0 or pairs.max() >= n):
            raise ContractError(f"edge endpoint outside 0..{n - 1}")
        raw = len(pairs)
        if raw:
            pairs = np.unique(pairs, axis=0)
        src, dst = pairs[:, 0], pairs[:, 1]
        out_ptr, out_idx = _csr(n, src, dst)
        in_ptr, in_idx = _csr(n, dst, src)
        if names is None:
            names = [str(i) for i in range(n)]
        if len(names) != n:
            raise ContractError("names must have one entry per node")
        names = tuple(names)
        return cls(
            node_count=n,
            out_ptr=out_ptr,
            out_idx=out_idx,
            in_ptr=in_ptr,
            in_idx=in_idx,
            names=names,
            duplicate_edges=raw - len(pairs),
            _index={name: i for i, name in enumerate(names)},
        )

    @property
    def edge_count(self) -> int:
        return len(self.out_idx)

    def _check(self, v: int) -> None:
        if not 0 <= v < self.node_count:
            raise ContractError(f"node id {v} outside 0..{self.node_count - 1}")

    def in_neighbors(self, v: int) -> np.ndarray:
        self._check(v)
        return self.in_idx[self.in_ptr[v]:self.in_ptr[v + 1]]

    def out_neighbors(self, v: int) -> np.ndarray:
        self._check(v)
        return self.out_idx[self.out_ptr[v]:self.out_ptr[v + 1]]

    @cached_property
    def in_degree(self) -> np.ndarray:
        return np.diff(self.in_ptr)

    @cached_property
    def out_degree(self) -> np.ndarray:
        return np.diff(self.out_ptr)

    @cached_property
    def in_lists(self) -> tuple[tuple[int, ...], ...]:
        """Predecessor tuples for every node, for per-state enumeration."""
        return tuple(
            tuple(int(x) for x in self.in_idx[self.in_ptr[v]:self.in_ptr[v + 1]])
            for v in range(self.node_count)
        )

    @cached_property
    def out_lists(self) -> tuple[tuple[int, ...], ...]:
        return tuple(
            tuple(int(x) for x in self.out_idx[self.out_ptr[v]:self.out_ptr[v + 1]])
            for v in range(self.node_count)
        )

    @cached_property
    def edge_keys(self) -> np.ndarray:
        """Sorted ``src * n + dst`` codes, for vectorized edge lookups."""
        src = np.repeat(np.arange(self.node_count, dtype=np.int64), self.out_degree)
        return src * self.node_count + self.out_idx

    def has_edge(self, src, dst):
        """Vectorized membership test for edges ``src -> dst``."""
        keys = np.asarray(src, dtype=np.int64) * self.node_count + np.asarray(dst, dtype=np.int64)
        table = self.edge_keys
        if len(table) == 0:
            return np.zeros(np.shape(keys), dtype=bool)
        pos = np.searchsorted(table, keys)
        pos = np.minimum(pos, len(table) - 1)
        return table[pos] == keys

    def edges(self) -> Iterable[tuple[int, int]]:
        for u in range(self.node_count):
            for v in self.out_idx[self.out_ptr[u]:self.out_ptr[u + 1]]:
                yield u, int(v)

    def node_id(self, token: str) -> int:
        try:
            return self._index[token]
        except KeyError:
            raise ContractError(f"unknown node {token!r}") from None

    def ball(self, center: int, radius: int) -> set[int]:
        """Nodes within ``radius`` undirected hops of ``center``."""
        self._check(center)
        if radius < 0:
            raise ContractError("radius must be nonnegative")
        seen = {center}
        frontier = deque([(center, 0)])
        while frontier:
            v, d = frontier.popleft()
            if d == radius:
                continue
            for w in self.out_lists[v] + self.in_lists[v]:
                if w not in seen:
                    seen.add(w)
                    frontier.append((w, d + 1))
        return seen

    def write_edge_list(self, stream) -> None:
        """Write ``src dst`` lines using the external node names."""
        for u, v in self.edges():
            stream.write(f"{self.names[u]}\t{self.names[v]}\n")


def open_text(source) -> io.TextIOBase:
    """Open a path or binary stream as UTF-8 text, inflating gzip input."""
    if isinstance(source, (str, os.PathLike)):
        raw: BinaryIO = open(source, "rb")
    else:
        raw = source
    buffered = raw if hasattr(raw, "peek") else io.BufferedReader(raw)
    if buffered.peek(2)[:2] == GZIP_MAGIC:
        buffered = gzip.GzipFile(fileobj=buffered)
    return io.TextIOWrapper(buffered, encoding="utf-8")


def load_edge_list(source, reverse: bool = False) -> Graph:
    """Parse a whitespace-separated ``src dst`` edge list.

    ``src dst`` means src references dst.  ``reverse`` flips every edge.
    Lines starting with ``#`` and blank lines are skipped.  Duplicate
    edges are collapsed and counted in ``Graph.duplicate_edges``.
    """
    index: dict[str, int] = {}
    edges: list[tuple[int, int]] = []
    with open_text(source) as text:
        for lineno, line in enumerate(text, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            tokens = stripped.split()
            if len(tokens) != 2:
                raise GraphFormatError(
                    f"expected 2 node tokens, found {len(tokens)}", lineno)
            ids = []
            for tok in tokens:
                if tok not in index:
                    index[tok] = len(index)
                ids.append(index[tok])
            if reverse:
                ids.reverse()
            edges.append((ids[0], ids[1]))
    g = Graph.from_edges(len(index), edges, names=list(index))
    if g.duplicate_edges:
        log.warning("collapsed %d duplicate edges", g.duplicate_edges)
    return g


@dataclass(frozen=True)
class LabelMap:
    """Partial map from node id to an interned integer label."""

    labels: dict[int, int]
    names: tuple[str, ...]
    unknown_nodes: int = 0

    def get(self, v: int) -> int | None:
        return self.labels.get(v)

    def __len__(self) -> int:
        return len(self.labels)

    def __contains__(self, v: int) -> bool:
        return v in self.labels


def load_labels(source, g: Graph) -> LabelMap:
    """Read ``node<TAB>label`` lines; tokens absent from ``g`` are skipped."""
    label_ids: dict[str, int] = {}
    labels: dict[int, int] = {}
    unknown = 0
    with open_text(source) as text:
        for lineno, line in enumerate(text, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            parts = stripped.split("\t")
            if len(parts) != 2:
                parts = stripped.split()
            if len(parts) != 2:
                raise GraphFormatError("expected node<TAB>label", lineno)
            node, label = parts
            if node not in g._index:
                unknown += 1
                continue
            lid = label_ids.setdefault(label, len(label_ids))
            labels[g._index[node]] = lid
    if unknown:
        log.warning("skipped %d labels for nodes absent from the graph", unknown)
    return LabelMap(labels, tuple(label_ids), unknown)
