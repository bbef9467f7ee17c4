import io
import math

import pytest

from grsp import (BUILTIN_MEASURES, ContractError, EvalConfig, Graph, InsufficientNodesError,
                  LabelMap, McConfig, PRankSweep, SimRank, SimRankStar, average_precision,
                  eval_map)
from grsp.evaluation import sample_queries, write_report
from graphs import random_digraph, two_clusters


@pytest.mark.parametrize("ranked,expected", [
    (["A", "A", "A"], 1.0),
    (["B", "B"], 0.0),
    (["A", "B", "A"], 5 / 6),
    ([None, "A", None, "B", "A"], 5 / 6),
    ([], 0.0),
    ([None, None], 0.0),
])
def test_average_precision(ranked, expected):
    assert average_precision(ranked, "A") == pytest.approx(expected)


def small_cfg(**kw):
    base = dict(k=10, num_queries=10, num_trials=5, min_in_degree=5, min_out_degree=5,
                radius=4, mc=McConfig(samples=200, max_steps=15), seed=3)
    base.update(kw)
    return EvalConfig(**base)


def label_map(d):
    return LabelMap(dict(d), tuple(sorted(set(d.values()))))


def test_two_clusters_perfect():
    g, labels = two_clusters()
    report = eval_map(g, label_map(labels), [SimRank(), SimRankStar()], small_cfg())
    for r in report.results:
        assert r.map == 1.0
        assert all(ap == 1.0 for trial in r.query_aps for ap in trial)


def test_single_label_perfect():
    g = random_digraph(30, 0.3, 1)
    report = eval_map(g, label_map({v: 0 for v in range(30)}), [SimRank()],
                      small_cfg(num_trials=2))
    assert report.results[0].map == 1.0


def test_partial_labels_are_skipped():
    g = random_digraph(30, 0.3, 2)
    labels = label_map({v: 0 for v in range(12)})
    cfg = small_cfg(num_trials=2, k=5, radius=1)
    report = eval_map(g, labels, [SimRank()], cfg)
    r = report.results[0]
    assert 0.0 <= r.map <= 1.0
    assert r.skipped_unlabeled > 0


def test_zero_when_every_answer_unlabeled():
    # queries are labeled hubs, every candidate is unlabeled
    edges = [(h, 10 + i) for h in range(2) for i in range(8)]
    edges += [(10 + i, h) for h in range(2) for i in range(8)]
    g = Graph.from_edges(18, edges)
    labels = label_map({0: 0, 1: 0})
    cfg = small_cfg(num_queries=2, num_trials=2, k=3, radius=1)
    r = eval_map(g, labels, [SimRank()], cfg).results[0]
    assert r.map == 0.0
    assert r.skipped_unlabeled == 2 * 2 * 3


def test_insufficient_nodes():
    g, labels = two_clusters()
    with pytest.raises(InsufficientNodesError):
        eval_map(g, label_map(labels), [SimRank()], small_cfg(num_queries=41))


def test_empty_labels():
    g, _ = two_clusters()
    with pytest.raises(ContractError):
        eval_map(g, label_map({}), [SimRank()], small_cfg())


def test_config_validation():
    with pytest.raises(ContractError):
        EvalConfig(k=0)


def test_pairing_and_reproducibility():
    g, labels = two_clusters(p=0.3, seed=4)
    # mislabel a few nodes so MAP varies by measure
    labels = dict(labels)
    for v in range(0, 40, 7):
        labels[v] = 1 - labels[v]
    cfg = small_cfg(num_trials=3)
    rep1 = eval_map(g, label_map(labels), list(BUILTIN_MEASURES), cfg)
    rep2 = eval_map(g, label_map(labels), list(BUILTIN_MEASURES), cfg, workers=3)
    assert rep1.queries == rep2.queries == sample_queries(g, label_map(labels), cfg)
    assert len({tuple(q) for q in rep1.queries}) > 1
    for a, b in zip(rep1.results, rep2.results):
        assert a.trial_maps == b.trial_maps
        assert a.map == pytest.approx(math.fsum(a.trial_maps) / 3)
        for trial in a.query_aps:
            assert all(0.0 <= ap <= 1.0 for ap in trial)


def test_prank_sweep():
    g, labels = two_clusters(p=0.3, seed=5)
    labels = dict(labels)
    for v in range(0, 40, 5):
        labels[v] = 1 - labels[v]
    report = eval_map(g, label_map(labels), [PRankSweep((0.0, 0.5, 1.0))],
                      small_cfg(num_trials=2))
    sweep = report.sweeps["P-Rank(best lambda)"]
    best = report.results[0]
    assert best.map == max(sweep.values())
    assert best.lam in sweep and sweep[best.lam] == best.map


def test_report_layout():
    g, labels = two_clusters()
    cfg = small_cfg(num_trials=2)
    report = eval_map(g, label_map(labels), [SimRank(), SimRankStar()], cfg)
    buf = io.StringIO()
    write_report(report, buf)
    rows = [line.split("\t") for line in buf.getvalue().splitlines()
            if not line.startswith("#")]
    assert rows[0] == ["trial", "SimRank", "SimRank*"]
    assert [r[0] for r in rows[1:]] == ["1", "2", "MAP"]
    assert rows[-1][1:] == ["1.000000", "1.000000"]
    assert "ap_denominator" in buf.getvalue()
