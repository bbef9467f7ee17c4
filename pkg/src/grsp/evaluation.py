"""Retrieval evaluation: MAP of top-k answers against topic labels.

Each trial samples labeled query nodes that meet minimum in/out degree,
runs a top-k query per measure, and scores the ranked answers by
average precision.  Unlabeled answers are dropped before scoring, and
the AP denominator is the number of relevant answers that remain.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Union

import numpy as np

from .errors import ContractError, InsufficientNodesError
from .graph import Graph, LabelMap
from .kernels import MeasureSpec, PRank, make_kernel
from .montecarlo import DEFAULT_SEED, McConfig
from .query import DEFAULT_RADIUS, topk

AP_DENOMINATOR = "relevant answers among labeled retrieved answers"
DEFAULT_LAMBDAS = tuple(round(0.1 * i, 1) for i in range(11))


@dataclass(frozen=True)
class PRankSweep:
    """Run P-Rank at every lambda and report the best one."""

    lambdas: tuple[float, ...] = DEFAULT_LAMBDAS
    label = "P-Rank(best lambda)"


EvalMeasure = Union[MeasureSpec, PRankSweep]


@dataclass(frozen=True)
class EvalConfig:
    k: int = 100
    num_queries: int = 50
    num_trials: int = 50
    min_in_degree: int = 5
    min_out_degree: int = 5
    radius: int = DEFAULT_RADIUS
    mc: McConfig = McConfig()
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        for name in ("k", "num_queries", "num_trials", "radius"):
            if getattr(self, name) < 1:
                raise ContractError(f"{name} must be positive")
        if self.min_in_degree < 0 or self.min_out_degree < 0:
            raise ContractError("degree filters must be nonnegative")


@dataclass
class MeasureResult:
    name: str
    trial_maps: list[float]
    query_aps: list[list[float]]
    skipped_unlabeled: int
    lam: Optional[float] = None

    @property
    def map(self) -> float:
        return math.fsum(self.trial_maps) / len(self.trial_maps)


@dataclass
class EvalReport:
    results: list[MeasureResult]
    queries: list[list[int]]
    config: EvalConfig
    sweeps: dict[str, dict[float, float]] = field(default_factory=dict)

    def by_name(self, name: str) -> MeasureResult:
        for r in self.results:
            if r.name == name:
                return r
        raise KeyError(name)


def average_precision(ranked_labels: Sequence, query_label) -> float:
    """AP over the labeled part of a ranked list; ``None`` marks unlabeled."""
    hits = 0
    total = 0.0
    position = 0
    for label in ranked_labels:
        if label is None:
            continue
        position += 1
        if label == query_label:
            hits += 1
            total += hits / position
    return total / hits if hits else 0.0


def eligible_queries(g: Graph, labels: LabelMap, cfg: EvalConfig) -> np.ndarray:
    nodes = np.array(sorted(labels.labels), dtype=np.int64)
    if len(nodes) == 0:
        return nodes
    ok = (g.in_degree[nodes] >= cfg.min_in_degree) & (g.out_degree[nodes] >= cfg.min_out_degree)
    return nodes[ok]


def sample_queries(g: Graph, labels: LabelMap, cfg: EvalConfig) -> list[list[int]]:
    pool = eligible_queries(g, labels, cfg)
    if len(pool) < cfg.num_queries:
        raise InsufficientNodesError(
            f"only {len(pool)} labeled nodes have in-degree >= {cfg.min_in_degree} "
            f"and out-degree >= {cfg.min_out_degree}; {cfg.num_queries} needed")
    out = []
    for trial in range(cfg.num_trials):
        rng = np.random.default_rng([cfg.seed, trial])
        out.append(sorted(int(v) for v in rng.choice(pool, cfg.num_queries, replace=False)))
    return out


def _trial_mc(cfg: EvalConfig, trial: int) -> McConfig:
    seed = int(np.random.SeedSequence([cfg.mc.seed, trial]).generate_state(1, np.uint64)[0])
    return replace(cfg.mc, seed=seed)


def _run_measure(g, labels, spec, queries, cfg, workers) -> MeasureResult:
    kernel = make_kernel(spec, g)
    trial_maps, query_aps, skipped = [], [], 0
    for trial, qs in enumerate(queries):
        mc = _trial_mc(cfg, trial)
        aps = []
        for q in qs:
            res = topk(g, kernel, q, cfg.k, cfg.radius, mc, workers=workers)
            ranked = [labels.get(node) for node, _, _ in res.ranked]
            skipped += sum(lab is None for lab in ranked)
            aps.append(average_precision(ranked, labels.get(q)))
        query_aps.append(aps)
        trial_maps.append(math.fsum(aps) / len(aps))
    return MeasureResult(spec.label, trial_maps, query_aps, skipped)


def eval_map(g: Graph, labels: LabelMap, specs: Sequence[EvalMeasure],
             cfg: EvalConfig = EvalConfig(), workers: int = 1) -> EvalReport:
    """Paired MAP comparison: every measure sees the same query sets."""
    if len(labels) == 0:
        raise ContractError("label map is empty")
    queries = sample_queries(g, labels, cfg)
    results, sweeps = [], {}
    for spec in specs:
        if isinstance(spec, PRankSweep):
            runs = [_run_measure(g, labels, PRank(lam), queries, cfg, workers)
                    for lam in spec.lambdas]
            sweeps[spec.label] = {lam: r.map for lam, r in zip(spec.lambdas, runs)}
            # first lambda wins ties
            best_i = max(range(len(runs)), key=lambda i: (runs[i].map, -i))
            best = runs[best_i]
            best.lam = spec.lambdas[best_i]
            best.name = f"P-Rank(best lambda={best.lam:g})"
            results.append(best)
        else:
            results.append(_run_measure(g, labels, spec, queries, cfg, workers))
    return EvalReport(results, queries, cfg, sweeps)


def write_report(report: EvalReport, stream, precision: int | None = 6) -> None:
    """Tab-separated table: one row per trial, one column per measure,
    then a ``MAP`` summary row.  ``#`` lines carry the metadata."""

    def fmt(v):
        return repr(float(v)) if precision is None else f"{v:.{precision}f}"

    cfg = report.config
    stream.write(f"# ap_denominator: {AP_DENOMINATOR}\n")
    stream.write(
        f"# k={cfg.k} queries={cfg.num_queries} trials={cfg.num_trials} "
        f"radius={cfg.radius} samples={cfg.mc.samples} max_steps={cfg.mc.max_steps} "
        f"C={cfg.mc.C:g} seed={cfg.seed} mc_seed={cfg.mc.seed}\n")
    for r in report.results:
        stream.write(f"# skipped_unlabeled[{r.name}]={r.skipped_unlabeled}\n")
    for label, sweep in report.sweeps.items():
        cells = " ".join(f"{lam:g}:{fmt(m)}" for lam, m in sweep.items())
        stream.write(f"# sweep[{label}] {cells}\n")
    stream.write("trial\t" + "\t".join(r.name for r in report.results) + "\n")
    for t in range(cfg.num_trials):
        stream.write(f"{t + 1}\t" + "\t".join(fmt(r.trial_maps[t]) for r in report.results) + "\n")
    stream.write("MAP\t" + "\t".join(fmt(r.map) for r in report.results) + "\n")
