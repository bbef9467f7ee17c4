import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import chisquare

from grsp import (BUILTIN_MEASURES, STOPPED, ContractError, Convex, Graph, PRank,
                  Product, PSimRank, PSimRankStar, RvsSimRank, SimRank, SimRankStar,
                  SpecError, make_kernel, parse_measure)
from grsp.kernels import format_measure
from grsp.rng import Draws, walk_keys
from graphs import random_digraph, single_edge, star

G1 = star(4)
U, V = 4, 5
G2 = single_edge()
A, B = 0, 1


def all_pairs(g):
    return [(a, b) for a in range(g.node_count) for b in range(g.node_count) if a != b]


def test_simrank_star_graph():
    d = make_kernel(SimRank(), G1).transition((U, V))
    assert len(d.entries) == 16
    assert all(p == 1 / 16 for _, p in d.entries)
    assert d.stopped_mass == 0


def test_psimrank_star_graph():
    d = make_kernel(PSimRank(), G1).transition((U, V))
    assert d.as_dict() == {(i, i): 0.25 for i in range(4)}
    assert d.stopped_mass == 0


@pytest.mark.parametrize("spec", [SimRankStar(), PSimRankStar()])
def test_one_surfer_kernels_single_edge(spec):
    d = make_kernel(spec, G2).transition((A, B))
    assert d.as_dict() == {(B, B): 0.5}
    assert d.stopped_mass == 0.5


def test_simrank_dead_end():
    d = make_kernel(SimRank(), G2).transition((A, B))
    assert d.entries == ()
    assert d.stopped_mass == 1.0


def test_prank_dead_direction_goes_to_stopped():
    # I(a) = {b}, I(b) empty; O(b) = {a}, O(a) empty: both directions dead
    d = make_kernel(PRank(0.3), G2).transition((A, B))
    assert d.stopped_mass == pytest.approx(1.0)
    g = Graph.from_edges(4, [(2, 0), (2, 1), (0, 3)])
    d = make_kernel(PRank(0.3), g).transition((0, 1))
    # backward alive (0.3 to (2, 2)), forward dead since O(1) is empty
    assert d.as_dict() == {(2, 2): 0.3}
    assert d.stopped_mass == pytest.approx(0.7)


def test_psimrank_overlapping_subsets_merge():
    # I(a) = {x, y}, I(b) = {y, z}: (x, z) lies in both difference products
    g = Graph.from_edges(5, [(2, 0), (3, 0), (3, 1), (4, 1)])
    d = make_kernel(PSimRank(), g).transition((0, 1)).as_dict()
    # union 3: J = 1/3 to (3,3); x-part 1/3 over {2}x{3,4}; z-part 1/3 over {2,3}x{4}
    assert d[(3, 3)] == pytest.approx(1 / 3)
    assert d[(2, 3)] == pytest.approx(1 / 6)
    assert d[(2, 4)] == pytest.approx(1 / 6 + 1 / 6)
    assert d[(3, 4)] == pytest.approx(1 / 6)
    assert math.fsum(d.values()) == pytest.approx(1.0)


def test_terminal_and_stopped_rejected():
    k = make_kernel(SimRank(), G1)
    with pytest.raises(ContractError):
        k.transition((U, U))
    with pytest.raises(ContractError):
        k.transition(STOPPED)
    with pytest.raises(ContractError):
        k.transition((0, 99))


def dists(spec, g):
    k = make_kernel(spec, g)
    return {s: k.transition(s) for s in all_pairs(g)}


@pytest.mark.parametrize("seed", range(5))
def test_prank_edge_cases_exact(seed):
    g = random_digraph(12, 0.2, seed)
    assert dists(PRank(1.0), g) == dists(SimRank(), g)
    assert dists(PRank(0.0), g) == dists(RvsSimRank(), g)


def test_convex_identity():
    g = random_digraph(10, 0.3, 3)
    mixed = dists(Convex(((SimRank(), 0.3), (SimRank(), 0.7))), g)
    plain = dists(SimRank(), g)
    for s, d in plain.items():
        m = mixed[s]
        assert [t for t, _ in m.entries] == [t for t, _ in d.entries]
        np.testing.assert_allclose([p for _, p in m.entries], [p for _, p in d.entries],
                                   rtol=1e-15, atol=0)
        assert m.stopped_mass == pytest.approx(d.stopped_mass, abs=1e-15)


def test_prank_is_convex_of_simrank_and_rvs():
    g = random_digraph(10, 0.3, 4)
    a = dists(PRank(0.4), g)
    b = dists(Convex(((SimRank(), 0.4), (RvsSimRank(), 0.6))), g)
    for s in a:
        assert a[s].as_dict().keys() == b[s].as_dict().keys()
        for t, p in a[s].entries:
            assert p == pytest.approx(b[s].as_dict()[t], rel=1e-14)


def test_psimrankstar_reduces_without_common_parents():
    # a bipartite-ish chain where no two nodes share an in-neighbor
    g = Graph.from_edges(6, [(0, 1), (1, 2), (2, 3), (4, 5), (5, 0)])
    assert dists(PSimRankStar(), g) == dists(SimRankStar(), g)


def test_product_kernel():
    g = Graph.from_edges(4, [(2, 0), (3, 0), (1, 2)])
    k = make_kernel(Product(SimRank(), RvsSimRank()), g)
    # a = 0 steps backward to {2, 3}; b = 1 steps forward to {2}
    assert k.transition((0, 1)).as_dict() == {(2, 2): 0.5, (3, 2): 0.5}
    # forward from 0 is a dead end
    assert k.transition((1, 0)).stopped_mass == 1.0


def test_product_rejects_rich_marginals():
    with pytest.raises(SpecError):
        Product(PSimRank(), SimRank())


def test_convex_weight_validation():
    with pytest.raises(SpecError):
        Convex(((SimRank(), 0.5), (SimRankStar(), 0.6)))
    with pytest.raises(SpecError):
        Convex(((SimRank(), 1.5), (SimRankStar(), -0.5)))
    with pytest.raises(SpecError):
        PRank(1.2)


@pytest.mark.parametrize("text,spec", [
    ("simrank", SimRank()),
    ("rvs", RvsSimRank()),
    ("prank:lambda=0.4", PRank(0.4)),
    ("prank", PRank(0.5)),
    ("PSimRank", PSimRank()),
    ("simrankstar", SimRankStar()),
    ("psimrank*", PSimRankStar()),
    ("convex:[simrank@0.5,simrankstar@0.5]", Convex(((SimRank(), 0.5), (SimRankStar(), 0.5)))),
    ("product:simrank,rvs", Product(SimRank(), RvsSimRank())),
    ("convex:[convex:[simrank@0.5,rvs@0.5]@0.25,psimrank@0.75]",
     Convex(((Convex(((SimRank(), 0.5), (RvsSimRank(), 0.5))), 0.25), (PSimRank(), 0.75)))),
])
def test_parse(text, spec):
    assert parse_measure(text) == spec
    assert parse_measure(format_measure(spec)) == spec


@pytest.mark.parametrize("text", ["bogus", "prank:lambda=x", "prank:lambda=2",
                                  "convex:[simrank]", "convex:[simrank@0.2]",
                                  "product:simrank", "simrank:x", "convex:[simrank@1"])
def test_parse_errors(text):
    with pytest.raises(SpecError):
        parse_measure(text)


graphs = st.builds(random_digraph, st.integers(2, 14), st.floats(0.05, 0.5),
                   st.integers(0, 10_000), st.booleans())


@settings(max_examples=30, deadline=None)
@given(graphs)
def test_stochastic_and_symmetric(g):
    for spec in BUILTIN_MEASURES + (Convex(((SimRank(), 0.2), (PSimRankStar(), 0.8))),):
        k = make_kernel(spec, g)
        for a, b in all_pairs(g):
            d = k.transition((a, b))
            assert all(0 < p <= 1 for _, p in d.entries)
            assert abs(math.fsum([p for _, p in d.entries]) + d.stopped_mass - 1) <= 1e-12
            assert k.transition((b, a)) == d.swapped()


@settings(max_examples=30, deadline=None)
@given(graphs)
def test_psimrank_support_is_three_subsets(g):
    k = make_kernel(PSimRank(), g)
    for a, b in all_pairs(g):
        ia = set(g.in_neighbors(a).tolist())
        ib = set(g.in_neighbors(b).tolist())
        allowed = {(x, x) for x in ia & ib}
        allowed |= {(x, y) for x in ia - ib for y in ib}
        allowed |= {(x, y) for x in ia for y in ib - ia}
        support = set(k.transition((a, b)).as_dict())
        assert support == allowed


def test_symmetry_exhaustive_50_nodes():
    g = random_digraph(50, 0.08, 11, self_loops=True)
    for spec in BUILTIN_MEASURES:
        k = make_kernel(spec, g)
        for a in range(0, 50, 3):
            for b in range(50):
                if a != b:
                    assert k.transition((b, a)) == k.transition((a, b)).swapped()


# --- sampler versus enumeration ------------------------------------------

SAMPLER_SPECS = BUILTIN_MEASURES + (
    Convex(((SimRank(), 0.3), (PSimRankStar(), 0.5), (RvsSimRank(), 0.2))),
    Product(SimRank(), RvsSimRank()),
)


def sampled_counts(kernel, state, n_draws, seed=5):
    a = np.full(n_draws, state[0], dtype=np.int64)
    b = np.full(n_draws, state[1], dtype=np.int64)
    draws = Draws.for_step(walk_keys(seed, a, b, np.arange(n_draws)), 1)
    na, nb, stopped = kernel.sample_step(a, b, draws)
    counts = {}
    counts["stopped"] = int(stopped.sum())
    for x, y in zip(na[~stopped].tolist(), nb[~stopped].tolist()):
        counts[(x, y)] = counts.get((x, y), 0) + 1
    return counts


@pytest.mark.parametrize("spec", SAMPLER_SPECS, ids=lambda s: s.label)
def test_sampler_matches_enumeration(spec):
    g = Graph.from_edges(7, [(2, 0), (3, 0), (4, 0), (3, 1), (4, 1), (5, 1), (0, 6),
                             (1, 6), (6, 2), (1, 1), (0, 5)])
    kernel = make_kernel(spec, g)
    n_draws = 100_000
    for state in [(0, 1), (1, 0), (0, 6), (2, 5), (6, 3)]:
        d = kernel.transition(state)
        expected = dict(d.entries)
        if d.stopped_mass > 0:
            expected["stopped"] = d.stopped_mass
        counts = sampled_counts(kernel, state, n_draws)
        if counts["stopped"] == 0:
            del counts["stopped"]
        assert set(counts) <= set(expected), state
        keys = sorted(expected, key=str)
        if len(keys) == 1:
            assert counts[keys[0]] == n_draws
            continue
        obs = [counts.get(key, 0) for key in keys]
        exp = [expected[key] * n_draws for key in keys]
        assert chisquare(obs, exp).pvalue > 0.001, (state, obs, exp)
