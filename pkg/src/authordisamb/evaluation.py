"""Pairwise and best-match precision, recall and F1.

All metrics are computed from additive counts (:class:`Counts`) so the
overall figures pool raw counts over blocks instead of averaging ratios.
Empty denominators follow the vacuous-truth convention: no predicted pairs
gives pairwise precision 1, no true pairs gives pairwise recall 1.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, fields
from typing import Iterable, Mapping, Sequence

import numpy as np

from .clustering import Clustering

METRICS = ("p_pair", "r_pair", "f1_pair", "p_best", "r_best", "f1_best")


class EvaluationError(ValueError):
    pass


def _pairs(n: np.ndarray) -> int:
    return int((n * (n - 1) // 2).sum())


def f1(p: float, r: float) -> float:
    return 2 * p * r / (p + r) if p > 0 and r > 0 else 0.0


@dataclass(frozen=True)
class Counts:
    true_pairs: int = 0       # |pairs_author ∩ pairs_cluster|
    cluster_pairs: int = 0    # |pairs_cluster|
    author_pairs: int = 0     # |pairs_author|
    best_author: int = 0      # mentions belonging to their cluster's majority author
    best_cluster: int = 0     # mentions in their author's largest cluster
    n_mentions: int = 0
    n_gold_authors: int = 0
    n_clusters: int = 0

    def __add__(self, other: "Counts") -> "Counts":
        return Counts(*(getattr(self, f.name) + getattr(other, f.name) for f in fields(self)))

    @property
    def p_pair(self) -> float:
        return self.true_pairs / self.cluster_pairs if self.cluster_pairs else 1.0

    @property
    def r_pair(self) -> float:
        return self.true_pairs / self.author_pairs if self.author_pairs else 1.0

    @property
    def f1_pair(self) -> float:
        return f1(self.p_pair, self.r_pair)

    @property
    def p_best(self) -> float:
        return self.best_author / self.n_mentions if self.n_mentions else 1.0

    @property
    def r_best(self) -> float:
        return self.best_cluster / self.n_mentions if self.n_mentions else 1.0

    @property
    def f1_best(self) -> float:
        return f1(self.p_best, self.r_best)

    def objective(self, name: str) -> float:
        if name not in ("f1_pair", "f1_best"):
            raise ValueError(f"unknown objective {name!r}")
        return getattr(self, name)


def count(pred: Sequence[int], gold: Sequence) -> Counts:
    """Contingency counts for one block from parallel label sequences."""
    pred = np.asarray(pred)
    if len(pred) != len(gold):
        raise EvaluationError("prediction and gold differ in length")
    if len(pred) == 0:
        return Counts()
    gold = np.asarray(gold)
    if gold.dtype.kind not in "iu":
        gold = np.asarray(gold, dtype=object).astype(str)
    _, gold_idx = np.unique(gold, return_inverse=True)
    _, pred_idx = np.unique(pred, return_inverse=True)
    gold_idx, pred_idx = gold_idx.reshape(-1), pred_idx.reshape(-1)
    table = np.zeros((pred_idx.max() + 1, gold_idx.max() + 1), dtype=np.int64)
    np.add.at(table, (pred_idx, gold_idx), 1)
    return Counts(
        true_pairs=_pairs(table),
        cluster_pairs=_pairs(table.sum(axis=1)),
        author_pairs=_pairs(table.sum(axis=0)),
        best_author=int(table.max(axis=1).sum()),
        best_cluster=int(table.max(axis=0).sum()),
        n_mentions=len(pred),
        n_gold_authors=table.shape[1],
        n_clusters=table.shape[0],
    )


def clustering_counts(clustering: Clustering, gold: Mapping[str, str | None],
                      skip_unlabelled: bool = True) -> Counts:
    """Counts over the gold-annotated mentions of one clustering."""
    pred, truth = [], []
    for mid, label in zip(clustering.mention_ids, clustering.labels):
        g = gold.get(mid)
        if g is None:
            if skip_unlabelled:
                continue
            raise EvaluationError(f"mention {mid} has no gold author id")
        pred.append(label)
        truth.append(g)
    return count(pred, truth)


def pairwise_metrics(clustering: Clustering, gold: Mapping[str, str]) -> tuple[float, float, float]:
    c = clustering_counts(clustering, gold, skip_unlabelled=False)
    return c.p_pair, c.r_pair, c.f1_pair


def best_metrics(clustering: Clustering, gold: Mapping[str, str]) -> tuple[float, float, float]:
    c = clustering_counts(clustering, gold, skip_unlabelled=False)
    return c.p_best, c.r_best, c.f1_best


@dataclass(frozen=True)
class EvalReport:
    scope: str
    p_pair: float
    r_pair: float
    f1_pair: float
    p_best: float
    r_best: float
    f1_best: float
    n_mentions: int
    n_gold_authors: int
    n_clusters: int
    block_size: int = 0

    @classmethod
    def from_counts(cls, scope: str, c: Counts, block_size: int = 0) -> "EvalReport":
        return cls(scope, c.p_pair, c.r_pair, c.f1_pair, c.p_best, c.r_best, c.f1_best,
                   c.n_mentions, c.n_gold_authors, c.n_clusters, block_size)

    def metrics(self) -> tuple[float, ...]:
        return tuple(getattr(self, m) for m in METRICS)


def aggregate(per_block: Mapping[str, Counts], mode: str = "pooled",
              sizes: Mapping[str, int] | None = None) -> EvalReport | list[EvalReport]:
    """Overall report from pooled counts, or one report per block."""
    sizes = sizes or {}
    if mode == "pooled":
        total = sum(per_block.values(), Counts())
        return EvalReport.from_counts("overall", total)
    if mode == "per-block":
        return [EvalReport.from_counts(k, c, sizes.get(k, c.n_mentions))
                for k, c in per_block.items()]
    raise ValueError(f"unknown aggregation mode {mode!r}")


def mean_report(reports: Sequence[EvalReport], scope: str = "mean") -> EvalReport:
    """Unweighted mean of per-block metrics (the alternative to pooling)."""
    if not reports:
        raise ValueError("no reports to average")
    vals = [float(np.mean([getattr(r, m) for r in reports])) for m in METRICS]
    return EvalReport(scope, *vals, sum(r.n_mentions for r in reports),
                      sum(r.n_gold_authors for r in reports), sum(r.n_clusters for r in reports))


@dataclass(frozen=True)
class CurveRow:
    block_size: int
    mean_f1_pair: float
    mean_f1_best: float
    n_blocks: int


def quality_by_size(reports: Iterable[EvalReport]) -> list[CurveRow]:
    groups: dict[int, list[EvalReport]] = {}
    for r in reports:
        groups.setdefault(r.block_size or r.n_mentions, []).append(r)
    return [
        CurveRow(size, float(np.mean([r.f1_pair for r in rs])),
                 float(np.mean([r.f1_best for r in rs])), len(rs))
        for size, rs in sorted(groups.items())
    ]


def curve_csv(rows: Iterable[CurveRow], label: str | None = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    head = ["block_size", "mean_f1_pair", "mean_f1_best", "n_blocks"]
    w.writerow((["series"] if label else []) + head)
    for r in rows:
        w.writerow(([label] if label else []) + [r.block_size, f"{r.mean_f1_pair:.6f}",
                                                 f"{r.mean_f1_best:.6f}", r.n_blocks])
    return buf.getvalue()


def fmt(x: float) -> str:
    return f"{x:.6f}"
