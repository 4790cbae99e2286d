"""Clustering primitives: canonical partitions, union-find and greedy merging."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Callable, Iterable, Protocol, Sequence

import numpy as np


def canonical_labels(labels: Sequence[int] | np.ndarray) -> np.ndarray:
    """Relabel so cluster ids follow first appearance (0, 1, 2, ...)."""
    labels = np.asarray(labels)
    if labels.size == 0:
        return np.zeros(0, dtype=np.int64)
    _, first, inverse = np.unique(labels, return_index=True, return_inverse=True)
    rank = np.empty(len(first), dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(len(first))
    return rank[inverse.reshape(-1)]


@dataclass(frozen=True)
class Clustering:
    """Partition of one block's mentions, stored in canonical form.

    ``mention_ids`` is sorted and ``labels[i]`` is the cluster of
    ``mention_ids[i]``; cluster ids are dense and ordered by each cluster's
    smallest mention id, so equal partitions compare equal.
    """

    mention_ids: tuple[str, ...]
    labels: tuple[int, ...]

    @classmethod
    def from_labels(cls, mention_ids: Sequence[str], labels: Sequence[int]) -> "Clustering":
        if len(mention_ids) != len(labels):
            raise ValueError("mention_ids and labels differ in length")
        order = sorted(range(len(mention_ids)), key=mention_ids.__getitem__)
        mids = tuple(mention_ids[i] for i in order)
        if len(set(mids)) != len(mids):
            raise ValueError("duplicate mention ids in clustering")
        lab = canonical_labels([labels[i] for i in order])
        return cls(mids, tuple(int(x) for x in lab))

    @classmethod
    def from_groups(cls, groups: Iterable[Iterable[str]]) -> "Clustering":
        mids, labels = [], []
        for k, g in enumerate(groups):
            for m in g:
                mids.append(m)
                labels.append(k)
        return cls.from_labels(mids, labels)

    @classmethod
    def singletons(cls, mention_ids: Sequence[str]) -> "Clustering":
        return cls.from_labels(mention_ids, list(range(len(mention_ids))))

    @property
    def assignment(self) -> dict[str, int]:
        return dict(zip(self.mention_ids, self.labels))

    @property
    def n_clusters(self) -> int:
        return max(self.labels) + 1 if self.labels else 0

    def clusters(self) -> list[list[str]]:
        out: list[list[str]] = [[] for _ in range(self.n_clusters)]
        for m, c in zip(self.mention_ids, self.labels):
            out[c].append(m)
        return out

    def refines(self, other: "Clustering") -> bool:
        """True if every cluster here lies inside one cluster of ``other``."""
        if self.mention_ids != other.mention_ids:
            raise ValueError("clusterings cover different mentions")
        parent: dict[int, int] = {}
        for mine, theirs in zip(self.labels, other.labels):
            if parent.setdefault(mine, theirs) != theirs:
                return False
        return True

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["mention_id", "cluster_id"])
        w.writerows(zip(self.mention_ids, self.labels))
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "Clustering":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or rows[0] != ["mention_id", "cluster_id"]:
            raise ValueError("clustering CSV must start with mention_id,cluster_id")
        return cls.from_labels([r[0] for r in rows[1:]], [int(r[1]) for r in rows[1:]])


class UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        parent = self.parent
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if ra < rb:
            self.parent[rb] = ra
        else:
            self.parent[ra] = rb
        return True

    def labels(self) -> np.ndarray:
        return canonical_labels([self.find(i) for i in range(len(self.parent))])


def component_labels(n: int, rows: Iterable[int], cols: Iterable[int]) -> np.ndarray:
    """Canonical component labels of an index graph with ``n`` nodes."""
    uf = UnionFind(n)
    parent = uf.parent
    for a, b in zip(np.asarray(rows).tolist(), np.asarray(cols).tolist()):
        # inlined find with path halving; this loop dominates large blocks
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        while parent[b] != b:
            parent[b] = parent[parent[b]]
            b = parent[b]
        if a != b:
            if a < b:
                parent[b] = a
            else:
                parent[a] = b
    return uf.labels()


def connected_components(mention_ids: Sequence[str],
                         edges: Iterable[tuple[str, str]]) -> Clustering:
    mids = sorted(mention_ids)
    index = {m: i for i, m in enumerate(mids)}
    rows, cols = [], []
    for a, b in edges:
        if a not in index or b not in index:
            raise ValueError(f"edge ({a}, {b}) references a mention outside the block")
        rows.append(index[a])
        cols.append(index[b])
    labels = component_labels(len(mids), rows, cols)
    return Clustering(tuple(mids), tuple(int(x) for x in labels))


# --- greedy agglomerative merging -------------------------------------------

class ClusterSimilarity(Protocol):
    """Similarity between the current clusters of a greedy merge run.

    ``start`` receives the initial clusters as arrays of member indices and
    returns the full symmetric similarity matrix. ``merge(a, b)`` folds slot
    ``b`` into slot ``a`` and returns the new similarities of ``a`` against
    every slot (entries for retired slots are ignored).
    """

    def start(self, groups: list[np.ndarray]) -> np.ndarray: ...

    def merge(self, a: int, b: int) -> np.ndarray: ...


class PairFunctionSimilarity:
    """Adapter computing cluster similarity from member index lists."""

    def __init__(self, fn: Callable[[Sequence[int], Sequence[int]], float]):
        self.fn = fn

    def start(self, groups):
        self.groups = [list(g) for g in groups]
        k = len(groups)
        mat = np.zeros((k, k))
        for a in range(k):
            for b in range(a + 1, k):
                mat[a, b] = mat[b, a] = self.fn(self.groups[a], self.groups[b])
        return mat

    def merge(self, a, b):
        self.groups[a] = sorted(self.groups[a] + self.groups[b])
        self.groups[b] = []
        return np.array([self.fn(self.groups[a], g) if g and i != a else -np.inf
                         for i, g in enumerate(self.groups)])


@dataclass
class MergeTrace:
    """Record of greedy merges starting from ``initial``.

    ``levels`` is the running minimum of merge similarities: cutting at ``l``
    keeps exactly the merges whose level exceeds ``l``, which is what a
    greedy run stopping at ``l`` would have performed.
    """

    initial: Clustering
    merges: list[tuple[int, int, int, float]] = field(default_factory=list)
    levels: list[float] = field(default_factory=list)

    def append(self, a: int, b: int, sim: float) -> None:
        level = sim if not self.levels else min(self.levels[-1], sim)
        self.merges.append((len(self.merges), a, b, sim))
        self.levels.append(level)

    def __len__(self) -> int:
        return len(self.merges)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step", "cluster_a", "cluster_b", "similarity", "level"])
        for (step, a, b, s), lvl in zip(self.merges, self.levels):
            w.writerow([step, a, b, repr(float(s)), repr(float(lvl))])
        return buf.getvalue()


def _replay(initial: Clustering, merges: Iterable[tuple[int, int, int, float]]) -> Clustering:
    uf = UnionFind(initial.n_clusters)
    for _, a, b, _ in merges:
        uf.union(a, b)
    slot = [uf.find(c) for c in range(initial.n_clusters)]
    return Clustering.from_labels(initial.mention_ids, [slot[c] for c in initial.labels])


def greedy_max_merge(initial: Clustering, similarity: ClusterSimilarity,
                     stop: float = -np.inf) -> tuple[Clustering, MergeTrace]:
    """Repeatedly merge the most similar cluster pair while its similarity exceeds ``stop``.

    Ties go to the smallest (cluster_a, cluster_b) pair of slot ids, where
    slot ids are the initial canonical cluster ids and a merged cluster keeps
    the smaller id.
    """
    trace = MergeTrace(initial)
    groups = initial.clusters()
    k = len(groups)
    if k <= 1:
        return initial, trace
    index = {m: i for i, m in enumerate(initial.mention_ids)}
    sim = np.asarray(similarity.start([np.array([index[m] for m in g]) for g in groups]),
                     dtype=float)
    np.fill_diagonal(sim, -np.inf)
    active = np.ones(k, dtype=bool)
    best_j = sim.argmax(axis=1)
    best_v = sim[np.arange(k), best_j]
    remaining = k
    while remaining > 1:
        i = int(best_v.argmax())
        v = float(best_v[i])
        if not v > stop:
            break
        j = int(best_j[i])
        a, b = (i, j) if i < j else (j, i)
        trace.append(a, b, v)
        remaining -= 1
        active[b] = False
        sim[b, :] = -np.inf
        sim[:, b] = -np.inf
        best_v[b] = -np.inf
        row = np.array(similarity.merge(a, b), dtype=float)
        row[~active] = -np.inf
        row[a] = -np.inf
        sim[a, :] = row
        sim[:, a] = row

        stale = active & ((best_j == a) | (best_j == b))
        stale[a] = True
        fresh = active & ~stale
        better = fresh & ((row > best_v) | ((row == best_v) & (best_j > a)))
        best_v[better] = row[better]
        best_j[better] = a
        idx = np.flatnonzero(stale)
        if idx.size:
            sub = sim[idx]
            arg = sub.argmax(axis=1)
            best_j[idx] = arg
            best_v[idx] = sub[np.arange(idx.size), arg]
    return _replay(initial, trace.merges), trace


def cut_trace(trace: MergeTrace, l: float) -> Clustering:
    """Clustering after the merges a greedy run with stop ``l`` would perform."""
    levels = np.asarray(trace.levels)
    k = int(np.count_nonzero(levels > l)) if levels.size else 0
    return _replay(trace.initial, trace.merges[:k])


def cut_trace_prefix(trace: MergeTrace, k: int) -> Clustering:
    return _replay(trace.initial, trace.merges[:k])
