"""Transition kernels over compound node-pair states.

A kernel defines, for every pair state ``(a, b)`` with ``a != b``, the
distribution over next pair states plus the mass that falls into the
absorbing stopped state.  Two views are offered and must agree:

* :meth:`Kernel.transition` enumerates the exact distribution.  The
  solver reads its coefficients from here.
* :meth:`Kernel.sample_step` draws one step for a whole batch of walks
  at once using O(1) work per walk.  The Monte Carlo estimator uses it.
"""
from __future__ import annotations

import math
import re
from collections import defaultdict
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .errors import ContractError, SpecError
from .graph import Graph
from .rng import Draws


class _Stopped:
    __slots__ = ()

    def __repr__(self):
        return "STOPPED"


STOPPED = _Stopped()

Pair = tuple[int, int]


# ---------------------------------------------------------------------------
# measure specifications


@dataclass(frozen=True)
class SimRank:
    label = "SimRank"


@dataclass(frozen=True)
class RvsSimRank:
    label = "rvs-SimRank"


@dataclass(frozen=True)
class PRank:
    lam: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise SpecError(f"P-Rank lambda must lie in [0, 1], got {self.lam}")

    @property
    def label(self):
        return f"P-Rank(lambda={self.lam:g})"


@dataclass(frozen=True)
class PSimRank:
    label = "PSimRank"


@dataclass(frozen=True)
class SimRankStar:
    label = "SimRank*"


@dataclass(frozen=True)
class PSimRankStar:
    label = "PSimRank*"


@dataclass(frozen=True)
class Convex:
    members: tuple[tuple["MeasureSpec", float], ...]

    def __post_init__(self):
        if not self.members:
            raise SpecError("convex combination needs at least one member")
        weights = [w for _, w in self.members]
        if any(w < 0 or not math.isfinite(w) for w in weights):
            raise SpecError("convex weights must be nonnegative")
        if abs(math.fsum(weights) - 1.0) > 1e-12:
            raise SpecError(f"convex weights sum to {math.fsum(weights)!r}, not 1")

    @property
    def label(self):
        inner = ",".join(f"{m.label}@{w:g}" for m, w in self.members)
        return f"Convex[{inner}]"


@dataclass(frozen=True)
class Product:
    first: "MeasureSpec"
    second: "MeasureSpec"

    def __post_init__(self):
        for m in (self.first, self.second):
            if not isinstance(m, (SimRank, RvsSimRank)):
                raise SpecError(
                    "product marginals must be simrank (backward) or rvs (forward)")

    @property
    def label(self):
        return f"Product[{self.first.label},{self.second.label}]"


MeasureSpec = Union[SimRank, RvsSimRank, PRank, PSimRank, SimRankStar,
                    PSimRankStar, Convex, Product]

BUILTIN_MEASURES: tuple[MeasureSpec, ...] = (
    SimRank(), RvsSimRank(), PRank(0.4), PSimRank(), SimRankStar(), PSimRankStar(),
)

_SIMPLE = {
    "simrank": SimRank,
    "rvs": RvsSimRank,
    "rvssimrank": RvsSimRank,
    "rvs-simrank": RvsSimRank,
    "psimrank": PSimRank,
    "simrankstar": SimRankStar,
    "simrank*": SimRankStar,
    "psimrankstar": PSimRankStar,
    "psimrank*": PSimRankStar,
}

SYNTAX = (
    ("simrank", "backward pair walk, uniform over I(a) x I(b)"),
    ("rvs", "forward pair walk, uniform over O(a) x O(b)"),
    ("prank:lambda=L", "backward with probability L, else forward (default L=0.5)"),
    ("psimrank", "jump to a common in-neighbor with Jaccard probability"),
    ("simrankstar", "fair coin picks one surfer to step backward"),
    ("psimrankstar", "Jaccard jump to a common in-neighbor, else one surfer steps"),
    ("convex:[SPEC@W,SPEC@W,...]", "mixture of kernels, weights sum to 1"),
    ("product:SPEC,SPEC", "independent marginals; SPEC is simrank or rvs"),
)


def _split_top(text: str) -> list[str]:
    """Split on commas not nested inside brackets."""
    parts, depth, start = [], 0, 0
    for i, ch in enumerate(text):
        if ch == "[":
            depth += 1
        elif ch == "]":
            depth -= 1
            if depth < 0:
                raise SpecError(f"unbalanced brackets in {text!r}")
        elif ch == "," and depth == 0:
            parts.append(text[start:i])
            start = i + 1
    if depth:
        raise SpecError(f"unbalanced brackets in {text!r}")
    parts.append(text[start:])
    return [p.strip() for p in parts]


def parse_measure(text: str) -> MeasureSpec:
    """Parse the compact text form, e.g. ``prank:lambda=0.4``."""
    text = text.strip()
    name, _, arg = text.partition(":")
    name = name.strip().lower()
    if name in _SIMPLE:
        if arg:
            raise SpecError(f"{name} takes no parameters")
        return _SIMPLE[name]()
    if name == "prank":
        if not arg:
            return PRank()
        m = re.fullmatch(r"\s*(?:lambda|lam|l)\s*=\s*([^\s]+)\s*", arg)
        if not m:
            raise SpecError(f"expected prank:lambda=VALUE, got {text!r}")
        try:
            return PRank(float(m.group(1)))
        except ValueError:
            raise SpecError(f"bad lambda in {text!r}") from None
    if name == "convex":
        arg = arg.strip()
        if not (arg.startswith("[") and arg.endswith("]")):
            raise SpecError(f"expected convex:[...], got {text!r}")
        members = []
        for item in _split_top(arg[1:-1]):
            spec, at, weight = item.rpartition("@")
            if not at:
                raise SpecError(f"convex member {item!r} lacks @weight")
            try:
                w = float(weight)
            except ValueError:
                raise SpecError(f"bad weight in {item!r}") from None
            members.append((parse_measure(spec), w))
        return Convex(tuple(members))
    if name == "product":
        parts = _split_top(arg)
        if len(parts) != 2:
            raise SpecError(f"product takes two marginals, got {text!r}")
        return Product(parse_measure(parts[0]), parse_measure(parts[1]))
    raise SpecError(f"unknown measure {text!r}")


def format_measure(spec: MeasureSpec) -> str:
    """Inverse of :func:`parse_measure`."""
    if isinstance(spec, PRank):
        return f"prank:lambda={spec.lam!r}"
    if isinstance(spec, Convex):
        return "convex:[" + ",".join(
            f"{format_measure(m)}@{w!r}" for m, w in spec.members) + "]"
    if isinstance(spec, Product):
        return f"product:{format_measure(spec.first)},{format_measure(spec.second)}"
    return {SimRank: "simrank", RvsSimRank: "rvs", PSimRank: "psimrank",
            SimRankStar: "simrankstar", PSimRankStar: "psimrankstar"}[type(spec)]


# ---------------------------------------------------------------------------
# exact distributions


@dataclass(frozen=True)
class TransitionDistribution:
    """Support set with probabilities, plus the mass sent to STOPPED."""

    entries: tuple[tuple[Pair, float], ...]
    stopped_mass: float

    def __post_init__(self):
        targets = [t for t, _ in self.entries]
        if len(set(targets)) != len(targets):
            raise ContractError("duplicate targets in distribution")
        if any(not 0.0 < p <= 1.0 for _, p in self.entries):
            raise ContractError("probabilities must lie in (0, 1]")
        if not 0.0 <= self.stopped_mass <= 1.0:
            raise ContractError("stopped mass must lie in [0, 1]")
        total = math.fsum([p for _, p in self.entries] + [self.stopped_mass])
        if abs(total - 1.0) > 1e-12:
            raise ContractError(f"distribution sums to {total!r}")

    def as_dict(self) -> dict[Pair, float]:
        return dict(self.entries)

    def swapped(self) -> "TransitionDistribution":
        return TransitionDistribution(
            tuple(sorted(((b, a), p) for (a, b), p in self.entries)),
            self.stopped_mass)


class _Accumulator:
    """Collects probability contributions; sums each target with fsum so
    the result does not depend on contribution order."""

    def __init__(self):
        self.parts: dict[Pair, list[float]] = defaultdict(list)
        self.stopped: list[float] = []

    def spread(self, mass: float, xs: Sequence[int], ys: Sequence[int]) -> None:
        """Give ``mass`` uniformly to ``xs x ys``, or to STOPPED if empty."""
        if mass == 0.0:
            return
        if not xs or not ys:
            self.stopped.append(mass)
            return
        p = mass / (len(xs) * len(ys))
        for x in xs:
            for y in ys:
                self.parts[(x, y)].append(p)

    def diagonal(self, mass: float, xs: Sequence[int]) -> None:
        if mass == 0.0:
            return
        if not xs:
            self.stopped.append(mass)
            return
        p = mass / len(xs)
        for x in xs:
            self.parts[(x, x)].append(p)

    def merge(self, dist: TransitionDistribution, weight: float) -> None:
        if weight == 0.0:
            return
        for t, p in dist.entries:
            self.parts[t].append(weight * p)
        if dist.stopped_mass:
            self.stopped.append(weight * dist.stopped_mass)

    def build(self) -> TransitionDistribution:
        entries = tuple(sorted((t, math.fsum(ps)) for t, ps in self.parts.items()))
        stopped = min(1.0, math.fsum(self.stopped))
        return TransitionDistribution(entries, stopped)


def _jaccard_parts(ia: tuple[int, ...], ib: tuple[int, ...]):
    sa, sb = set(ia), set(ib)
    common = sorted(sa & sb)
    only_a = [x for x in ia if x not in sb]
    only_b = [x for x in ib if x not in sa]
    union = len(sa | sb)
    return common, only_a, only_b, union


# ---------------------------------------------------------------------------
# kernels


class Kernel:
    """Base class: a closure over an immutable graph."""

    spec: MeasureSpec

    def __init__(self, graph: Graph, spec: MeasureSpec):
        self.graph = graph
        self.spec = spec

    def __repr__(self):
        return f"{type(self).__name__}({self.spec.label})"

    def transition(self, state) -> TransitionDistribution:
        if state is STOPPED:
            raise ContractError("STOPPED is absorbing; it has no transitions")
        a, b = state
        n = self.graph.node_count
        if not (0 <= a < n and 0 <= b < n):
            raise ContractError(f"state {state} outside the graph")
        if a == b:
            raise ContractError(f"state {state} is terminal")
        acc = _Accumulator()
        self._fill(acc, a, b)
        return acc.build()

    def _fill(self, acc: _Accumulator, a: int, b: int) -> None:
        raise NotImplementedError

    def sample_step(self, a: np.ndarray, b: np.ndarray, draws: Draws):
        """Advance a batch of walks one step.

        Returns ``(a_next, b_next, stopped)``; entries flagged ``stopped``
        have moved to the absorbing state and their positions are
        meaningless.
        """
        raise NotImplementedError


def _uniform_neighbor(ptr, idx, v, draws: Draws, slot: int):
    """Uniform pick from the CSR row of each ``v``; ``dead`` where empty."""
    deg = ptr[v + 1] - ptr[v]
    dead = deg == 0
    off = draws.choice(slot, np.maximum(deg, 1))
    pick = idx[np.minimum(ptr[v] + off, max(len(idx) - 1, 0))] if len(idx) else v
    return np.where(dead, v, pick), dead


class PairWalkKernel(Kernel):
    """Both surfers step along the same direction: SimRank (backward)
    or rvs-SimRank (forward)."""

    def __init__(self, graph, spec, forward: bool):
        super().__init__(graph, spec)
        self.forward = forward

    def _lists(self):
        return self.graph.out_lists if self.forward else self.graph.in_lists

    def _csr(self):
        g = self.graph
        return (g.out_ptr, g.out_idx) if self.forward else (g.in_ptr, g.in_idx)

    def _fill(self, acc, a, b):
        nb = self._lists()
        acc.spread(1.0, nb[a], nb[b])

    def sample_step(self, a, b, draws):
        ptr, idx = self._csr()
        na, dead_a = _uniform_neighbor(ptr, idx, a, draws, 0)
        nb, dead_b = _uniform_neighbor(ptr, idx, b, draws, 1)
        return na, nb, dead_a | dead_b


class PRankKernel(Kernel):
    """Coin with bias lambda: both surfers step backward, else forward.

    A dead direction sends its share to STOPPED rather than to the
    surviving direction.
    """

    def __init__(self, graph, spec: PRank):
        super().__init__(graph, spec)
        self.lam = spec.lam

    def _fill(self, acc, a, b):
        g = self.graph
        acc.spread(self.lam, g.in_lists[a], g.in_lists[b])
        acc.spread(1.0 - self.lam, g.out_lists[a], g.out_lists[b])

    def sample_step(self, a, b, draws):
        g = self.graph
        back = draws.uniform(0) < self.lam
        ia, dia = _uniform_neighbor(g.in_ptr, g.in_idx, a, draws, 1)
        ib, dib = _uniform_neighbor(g.in_ptr, g.in_idx, b, draws, 2)
        oa, doa = _uniform_neighbor(g.out_ptr, g.out_idx, a, draws, 3)
        ob, dob = _uniform_neighbor(g.out_ptr, g.out_idx, b, draws, 4)
        na = np.where(back, ia, oa)
        nb = np.where(back, ib, ob)
        stopped = np.where(back, dia | dib, doa | dob)
        return na, nb, stopped


def _sample_union(g: Graph, a, b, draws: Draws, max_rounds: int = 256):
    """Uniform element of I(a) | I(b) for each walk, by rejection.

    Draws uniformly from the concatenation I(a) + I(b) and rejects picks
    from the I(b) half that also belong to I(a).  Acceptance probability
    is at least 1/2 per round.  Returns ``(x, from_a, empty)``.
    """
    da = g.in_degree[a]
    db = g.in_degree[b]
    tot = da + db
    empty = tot == 0
    x = np.zeros(len(a), dtype=np.int64)
    from_a = np.zeros(len(a), dtype=bool)
    pending = np.flatnonzero(~empty)
    for r in range(max_rounds):
        if len(pending) == 0:
            break
        sub = draws.take(pending)
        pa, pb, dpa, tp = a[pending], b[pending], da[pending], tot[pending]
        pos = sub.choice(r, tp)
        fa = pos < dpa
        y = np.where(fa,
                     g.in_idx[np.minimum(g.in_ptr[pa] + pos, len(g.in_idx) - 1)],
                     g.in_idx[np.minimum(g.in_ptr[pb] + pos - dpa, len(g.in_idx) - 1)])
        accept = fa | ~g.has_edge(y, pa)
        done = pending[accept]
        x[done] = y[accept]
        from_a[done] = fa[accept]
        pending = pending[~accept]
    else:
        if len(pending):
            raise RuntimeError("rejection sampler failed to terminate")
    return x, from_a, empty


class PSimRankKernel(Kernel):
    """Jaccard-weighted coupled backward step.

    Mass |I(a)&I(b)|/|I(a)|I(b)| goes uniformly to the diagonal of
    common in-neighbors; the rest to (I(a)-I(b)) x I(b) and
    I(a) x (I(b)-I(a)) in proportion to the difference-set sizes.
    """

    def _fill(self, acc, a, b):
        g = self.graph
        ia, ib = g.in_lists[a], g.in_lists[b]
        common, only_a, only_b, union = _jaccard_parts(ia, ib)
        if union == 0:
            acc.stopped.append(1.0)
            return
        acc.diagonal(len(common) / union, common)
        acc.spread(len(only_a) / union, only_a, ib)
        acc.spread(len(only_b) / union, ia, only_b)

    def sample_step(self, a, b, draws):
        # x uniform over the union picks the subset with exactly the
        # required mass, then the partner is uniform within it
        g = self.graph
        x, from_a, empty = _sample_union(g, a, b, draws.child(0))
        in_both = from_a & g.has_edge(x, b)
        pb, dead_b = _uniform_neighbor(g.in_ptr, g.in_idx, b, draws, 1)
        pa, dead_a = _uniform_neighbor(g.in_ptr, g.in_idx, a, draws, 2)
        na = np.where(from_a, x, pa)
        nb = np.where(in_both, x, np.where(from_a, pb, x))
        stopped = empty | np.where(from_a, ~in_both & dead_b, dead_a)
        return na, nb, stopped


class SimRankStarKernel(Kernel):
    """Fair coin picks one surfer to step to a uniform in-neighbor."""

    def _fill(self, acc, a, b):
        g = self.graph
        acc.spread(0.5, (a,), g.in_lists[b])
        acc.spread(0.5, g.in_lists[a], (b,))

    def sample_step(self, a, b, draws):
        g = self.graph
        move_b = draws.uniform(0) < 0.5
        pa, dead_a = _uniform_neighbor(g.in_ptr, g.in_idx, a, draws, 1)
        pb, dead_b = _uniform_neighbor(g.in_ptr, g.in_idx, b, draws, 2)
        na = np.where(move_b, a, pa)
        nb = np.where(move_b, pb, b)
        return na, nb, np.where(move_b, dead_b, dead_a)


class PSimRankStarKernel(Kernel):
    """Jaccard jump to a common in-neighbor, otherwise a SimRank* step."""

    def _fill(self, acc, a, b):
        g = self.graph
        ia, ib = g.in_lists[a], g.in_lists[b]
        common, _, _, union = _jaccard_parts(ia, ib)
        jac = len(common) / union if union else 0.0
        acc.diagonal(jac, common)
        rest = (1.0 - jac) / 2.0
        acc.spread(rest, (a,), ib)
        acc.spread(rest, ia, (b,))

    def sample_step(self, a, b, draws):
        g = self.graph
        x, from_a, empty = _sample_union(g, a, b, draws.child(0))
        jump = ~empty & from_a & g.has_edge(x, b)
        move_b = draws.uniform(0) < 0.5
        pa, dead_a = _uniform_neighbor(g.in_ptr, g.in_idx, a, draws, 1)
        pb, dead_b = _uniform_neighbor(g.in_ptr, g.in_idx, b, draws, 2)
        na = np.where(jump, x, np.where(move_b, a, pa))
        nb = np.where(jump, x, np.where(move_b, pb, b))
        stopped = ~jump & np.where(move_b, dead_b, dead_a)
        return na, nb, stopped


class ConvexKernel(Kernel):
    def __init__(self, graph, spec: Convex):
        super().__init__(graph, spec)
        self.members = [make_kernel(m, graph) for m, _ in spec.members]
        self.weights = np.array([w for _, w in spec.members], dtype=np.float64)
        cum = np.cumsum(self.weights)
        self._cum = cum / cum[-1]
        self._last = int(np.flatnonzero(self.weights > 0)[-1])

    def _fill(self, acc, a, b):
        for k, w in zip(self.members, self.weights):
            if w > 0:
                acc.merge(k.transition((a, b)), float(w))

    def sample_step(self, a, b, draws):
        pick = np.searchsorted(self._cum, draws.uniform(0), side="right")
        pick = np.minimum(pick, self._last)
        na = np.empty_like(a)
        nb = np.empty_like(b)
        stopped = np.empty(len(a), dtype=bool)
        for j, k in enumerate(self.members):
            sel = np.flatnonzero(pick == j)
            if len(sel) == 0:
                continue
            ra, rb, rs = k.sample_step(a[sel], b[sel], draws.take(sel).child(j + 1))
            na[sel], nb[sel], stopped[sel] = ra, rb, rs
        return na, nb, stopped


class ProductKernel(Kernel):
    """Independent single-surfer marginals: p(a'|a) * p(b'|b)."""

    def __init__(self, graph, spec: Product):
        super().__init__(graph, spec)
        self.first_forward = isinstance(spec.first, RvsSimRank)
        self.second_forward = isinstance(spec.second, RvsSimRank)

    def _side(self, forward):
        g = self.graph
        if forward:
            return g.out_lists, g.out_ptr, g.out_idx
        return g.in_lists, g.in_ptr, g.in_idx

    def _fill(self, acc, a, b):
        la = self._side(self.first_forward)[0]
        lb = self._side(self.second_forward)[0]
        acc.spread(1.0, la[a], lb[b])

    def sample_step(self, a, b, draws):
        _, pa_, ia_ = self._side(self.first_forward)
        _, pb_, ib_ = self._side(self.second_forward)
        na, dead_a = _uniform_neighbor(pa_, ia_, a, draws, 0)
        nb, dead_b = _uniform_neighbor(pb_, ib_, b, draws, 1)
        return na, nb, dead_a | dead_b


def make_kernel(spec: MeasureSpec | str, graph: Graph) -> Kernel:
    """Build the kernel for ``spec`` over ``graph``."""
    if isinstance(spec, str):
        spec = parse_measure(spec)
    if isinstance(spec, SimRank):
        return PairWalkKernel(graph, spec, forward=False)
    if isinstance(spec, RvsSimRank):
        return PairWalkKernel(graph, spec, forward=True)
    if isinstance(spec, PRank):
        return PRankKernel(graph, spec)
    if isinstance(spec, PSimRank):
        return PSimRankKernel(graph, spec)
    if isinstance(spec, SimRankStar):
        return SimRankStarKernel(graph, spec)
    if isinstance(spec, PSimRankStar):
        return PSimRankStarKernel(graph, spec)
    if isinstance(spec, Convex):
        return ConvexKernel(graph, spec)
    if isinstance(spec, Product):
        return ProductKernel(graph, spec)
    raise SpecError(f"not a measure spec: {spec!r}")
