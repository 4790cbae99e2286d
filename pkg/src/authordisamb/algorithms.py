"""The disambiguation strategies: baseline, Cota, Schulz, Caron and Backes.

Every strategy maps one block to a canonical :class:`Clustering`. For threshold
fitting each strategy also has a ``prepare_*`` function that does the
expensive pair scoring once and returns an object whose ``labels(...)``
method re-clusters the block cheaply for any threshold setting.
"""

from __future__ import annotations

import bisect
import logging
import math
from dataclasses import asdict, dataclass, field, fields
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import minimum_spanning_tree

from . import _kernels
from .blocking import Block
from .clustering import (
    Clustering, MergeTrace, canonical_labels, component_labels, cut_trace, cut_trace_prefix,
    greedy_max_merge,
)
from .corpus import AuthorMention, Corpus, tokenize
from .features import (
    SPECIFICITY_FIELDS, FieldWeighting, RuleScorer, RuleScoreTable, incidence, mention_bundle,
    overlap_min_normalized, smooth_idf,
)

logger = logging.getLogger(__name__)

ALGORITHMS = ("baseline", "cota", "schulz", "caron", "backes")


class ParamsMixin:
    def to_dict(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, values: Mapping | None):
        values = dict(values or {})
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ValueError(f"unknown {cls.__name__} keys: {', '.join(sorted(unknown))}")
        for k, v in values.items():
            if isinstance(v, list):
                values[k] = tuple(v)
        return cls(**values)

    def replace(self, **changes):
        data = asdict(self)
        data.update(changes)
        return type(self)(**data)


@dataclass(frozen=True)
class BaselineParams(ParamsMixin):
    pass


@dataclass(frozen=True)
class CotaParams(ParamsMixin):
    title_threshold: float = 0.5
    journal_threshold: float = 0.5

    def __post_init__(self):
        # values above 1 are allowed and switch the corresponding test off
        for name in ("title_threshold", "journal_threshold"):
            v = getattr(self, name)
            if not v >= 0.0:
                raise ValueError(f"{name} must be >= 0, got {v}")


@dataclass(frozen=True)
class SchulzParams(ParamsMixin):
    alpha_A: float = 1.0
    alpha_S: float = 1.0
    alpha_R: float = 0.2
    alpha_C: float = 0.2
    beta1: float = 1.0
    beta2: float = 0.5
    beta3: float = 0.1
    beta4: float = 1.0

    def __post_init__(self):
        alphas = (self.alpha_A, self.alpha_S, self.alpha_R, self.alpha_C)
        if min(alphas) < 0 or max(alphas) <= 0:
            raise ValueError("alphas must be non-negative with at least one positive")


@dataclass(frozen=True)
class CaronParams(ParamsMixin):
    class_bounds: tuple[int, ...] = (500, 1000, 2000, 3000, 4500)
    class_thresholds: tuple[int, ...] = (21, 22, 25, 27, 29, 29)

    def __post_init__(self):
        if len(self.class_thresholds) != len(self.class_bounds) + 1:
            raise ValueError("need exactly one threshold per block-size class")
        if list(self.class_bounds) != sorted(self.class_bounds):
            raise ValueError("class_bounds must be ascending")
        if any(b > a for a, b in zip(self.class_thresholds[1:], self.class_thresholds)):
            logger.warning("Caron thresholds decrease with block size: %s", self.class_thresholds)

    def size_class(self, size: int) -> int:
        return bisect.bisect_left(self.class_bounds, size)

    def threshold_for(self, size: int) -> int:
        return self.class_thresholds[self.size_class(size)]


@dataclass(frozen=True)
class BackesParams(ParamsMixin):
    lam: float = 0.001

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lambda must be non-negative")

    def to_dict(self) -> dict:
        return {"lambda": self.lam}

    @classmethod
    def from_dict(cls, values):
        values = dict(values or {})
        if "lambda" in values:
            values["lam"] = values.pop("lambda")
        return super().from_dict(values)


PARAM_TYPES = {
    "baseline": BaselineParams,
    "cota": CotaParams,
    "schulz": SchulzParams,
    "caron": CaronParams,
    "backes": BackesParams,
}


@dataclass
class ScoringContext:
    """Corpus-wide inputs to rule scoring."""

    table: RuleScoreTable = field(default_factory=RuleScoreTable)
    general_names: frozenset[str] = frozenset()


def _upper(mat: sp.spmatrix) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    coo = sp.triu(mat, k=1).tocoo()
    return coo.row, coo.col, coo.data


# --- baseline ----------------------------------------------------------------

def run_baseline(block: Block) -> Clustering:
    return Clustering(block.mention_ids, (0,) * block.size)


# --- Cota: co-author components, then TF-IDF merging -------------------------

def coauthor_links(mention_ids: Sequence[str], corpus: Corpus) -> np.ndarray:
    """Step-one labels: mentions sharing a co-author name are linked."""
    inc, _ = incidence([corpus.coauthors[m] for m in mention_ids])
    r, c, _ = _upper(inc @ inc.T)
    return component_labels(len(mention_ids), r, c)


def _group_counts(groups: list[np.ndarray], docs: list[list[str]]) -> sp.csr_matrix:
    """Cluster-by-term count matrix."""
    vocab: dict[str, int] = {}
    rows, cols = [], []
    for g, members in enumerate(groups):
        for m in members:
            for t in docs[m]:
                rows.append(g)
                cols.append(vocab.setdefault(t, len(vocab)))
    return sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(len(groups), len(vocab)))


def _cosines(gram: np.ndarray, sq: np.ndarray, rows=None) -> np.ndarray:
    sub = gram if rows is None else gram[rows]
    norms = np.sqrt(sq)
    denom = (norms if rows is None else norms[rows])[..., None] * norms
    cos = np.divide(sub, denom, out=np.zeros(sub.shape), where=denom > 0)
    return np.clip(cos, 0.0, 1.0)


class TfidfState:
    """Title and journal TF-IDF state of the clusters entering the second Cota step.

    IDF weights are fixed here, from the clusters present when merging
    starts. Cluster vectors are sums of member term counts times IDF, so the
    Gram matrix of raw dot products is updated additively when clusters
    merge and never needs the vectors themselves again.
    """

    def __init__(self, groups: list[np.ndarray], title_docs: list[list[str]],
                 journal_docs: list[list[str]]):
        self.idf, self.gram, self.cos = [], [], []
        for docs in (title_docs, journal_docs):
            counts = _group_counts(groups, docs)
            idf = smooth_idf(np.bincount(counts.indices, minlength=counts.shape[1]), len(groups))
            x = counts @ sp.diags(idf)
            gram = (x @ x.T).toarray()
            self.idf.append(idf)
            self.gram.append(gram)
            self.cos.append(_cosines(gram, np.diag(gram).copy()))


class TfidfMergeSimilarity:
    """Cluster similarity for the second Cota step.

    A pair qualifies when its title cosine exceeds the title threshold or its
    journal cosine exceeds the journal threshold; its similarity is the
    larger of the qualifying cosines and -inf otherwise.
    """

    def __init__(self, state: TfidfState, title_threshold: float, journal_threshold: float):
        self.state = state
        self.tt = title_threshold
        self.tj = journal_threshold

    def _combine(self, cos_t: np.ndarray, cos_j: np.ndarray) -> np.ndarray:
        qt = np.where(cos_t > self.tt, cos_t, -np.inf)
        qj = np.where(cos_j > self.tj, cos_j, -np.inf)
        return np.maximum(qt, qj)

    def start(self, groups):
        if len(groups) != len(self.state.gram[0]):
            raise ValueError("groups do not match the prepared TF-IDF state")
        # the full matrices are only needed once the first merge happens
        self.gram = None
        return self._combine(*self.state.cos)

    def merge(self, a, b):
        if self.gram is None:
            self.gram = [g.copy() for g in self.state.gram]
            self.sq = [np.diag(g).copy() for g in self.gram]
        rows = []
        for gram, sq in zip(self.gram, self.sq):
            sq[a] = sq[a] + sq[b] + 2 * gram[a, b]
            sq[b] = 0.0
            row = gram[a] + gram[b]
            gram[a] = row
            gram[:, a] = row
            gram[b] = 0.0
            gram[:, b] = 0.0
            gram[a, a] = sq[a]
            rows.append(_cosines(gram, sq, a))
        return self._combine(*rows)


class CotaPrepared:
    def __init__(self, block: Block, corpus: Corpus):
        self.mention_ids = block.mention_ids
        papers = [corpus.paper_of(m) for m in block.mention_ids]
        self.step1 = coauthor_links(block.mention_ids, corpus)
        self.initial = Clustering(block.mention_ids, tuple(int(x) for x in self.step1))
        index = {m: i for i, m in enumerate(block.mention_ids)}
        groups = [np.array([index[m] for m in g]) for g in self.initial.clusters()]
        self.state = TfidfState(groups, [list(p.title_tokens) for p in papers],
                                [tokenize(p.journal) for p in papers])

    def run(self, params: CotaParams) -> Clustering:
        if self.initial.n_clusters <= 1:
            return self.initial
        st = self.state
        pairs, sims = _kernels.cota_greedy(st.cos[0], st.cos[1], st.gram[0].copy(), st.gram[1].copy(),
                                           float(params.title_threshold),
                                           float(params.journal_threshold))
        trace = MergeTrace(self.initial)
        for (a, b), v in zip(pairs.tolist(), sims.tolist()):
            trace.append(a, b, v)
        return cut_trace_prefix(trace, len(trace))

    def labels(self, params: CotaParams) -> np.ndarray:
        return np.asarray(self.run(params).labels)


def run_cota(block: Block, corpus: Corpus, params: CotaParams) -> Clustering:
    return CotaPrepared(block, corpus).run(params)


# --- Schulz: citation-network similarity, three linking steps ----------------

def mention_similarity_schulz(m1: AuthorMention, m2: AuthorMention, corpus: Corpus,
                              params: SchulzParams) -> float:
    p1, p2 = corpus.papers[m1.paper_id], corpus.papers[m2.paper_id]
    self_cites = int(p1.paper_id in p2.references) + int(p2.paper_id in p1.references)
    return (
        params.alpha_A * overlap_min_normalized(corpus.coauthors[m1.mention_id],
                                                corpus.coauthors[m2.mention_id])
        + params.alpha_S * self_cites
        + params.alpha_R * len(p1.references & p2.references)
        + params.alpha_C * overlap_min_normalized(corpus.citers_of(p1.paper_id),
                                                  corpus.citers_of(p2.paper_id))
    )


def cluster_similarity_schulz(gamma: Sequence, kappa: Sequence, pair_sims, beta2: float) -> float:
    """Mean over cross pairs of s_ij, counting only pairs with s_ij > beta2.

    ``pair_sims`` is a callable ``(i, j) -> s_ij`` or a mapping/array indexed
    by ``[i, j]``.
    """
    get = pair_sims if callable(pair_sims) else (lambda i, j: pair_sims[i, j])
    total = 0.0
    for i in gamma:
        for j in kappa:
            s = float(get(i, j))
            if s > beta2:
                total += s
    return total / (len(gamma) * len(kappa))


def _min_normalized_overlap(inc: sp.csr_matrix) -> sp.csr_matrix:
    counts = (inc @ inc.T).tocoo()
    sizes = np.asarray(inc.sum(axis=1)).ravel()
    denom = np.minimum(sizes[counts.row], sizes[counts.col])
    return sp.csr_matrix((counts.data / denom, (counts.row, counts.col)), shape=counts.shape)


def schulz_matrix(mention_ids: Sequence[str], corpus: Corpus, params: SchulzParams) -> sp.csr_matrix:
    """Symmetric sparse matrix of pairwise Schulz similarities (zero diagonal)."""
    n = len(mention_ids)
    papers = [corpus.paper_of(m) for m in mention_ids]
    total = sp.csr_matrix((n, n))
    if params.alpha_A:
        co, _ = incidence([corpus.coauthors[m] for m in mention_ids])
        total = total + params.alpha_A * _min_normalized_overlap(co)
    if params.alpha_C:
        ci, _ = incidence([corpus.citers_of(p.paper_id) for p in papers])
        total = total + params.alpha_C * _min_normalized_overlap(ci)
    if params.alpha_S or params.alpha_R:
        both, _ = incidence([list(p.references) for p in papers] + [[p.paper_id] for p in papers])
        refs, own = both[:n].tocsr(), both[n:].tocsr()
        if params.alpha_R:
            total = total + params.alpha_R * (refs @ refs.T).astype(float)
        if params.alpha_S:
            x = (own @ refs.T).astype(float)
            total = total + params.alpha_S * (x + x.T)
    total = sp.csr_matrix(total)
    total.setdiag(0.0)
    total.eliminate_zeros()
    return total


class SchulzPrepared:
    def __init__(self, block: Block, corpus: Corpus, params: SchulzParams):
        self.mention_ids = block.mention_ids
        self.n = block.size
        self.s = schulz_matrix(block.mention_ids, corpus, params)
        self.r, self.c, self.v = _upper(self.s)

    def step1(self, beta1: float) -> np.ndarray:
        if beta1 < 0:
            return np.zeros(self.n, dtype=np.int64)
        keep = self.v > beta1
        return component_labels(self.n, self.r[keep], self.c[keep])

    def step2(self, labels: np.ndarray, beta2: float, beta3: float) -> np.ndarray:
        k = int(labels.max()) + 1 if self.n else 0
        if k <= 1:
            return labels
        if beta3 < 0:
            return np.zeros(self.n, dtype=np.int64)
        gated = self.s.copy()
        gated.data = np.where(gated.data > beta2, gated.data, 0.0)
        gated.eliminate_zeros()
        member = sp.csr_matrix((np.ones(self.n), (np.arange(self.n), labels)), shape=(self.n, k))
        between = (member.T @ gated @ member).tocoo()
        sizes = np.bincount(labels, minlength=k).astype(float)
        vals = between.data / (sizes[between.row] * sizes[between.col])
        keep = (between.row < between.col) & (vals > beta3)
        cl = component_labels(k, between.row[keep], between.col[keep])
        return canonical_labels(cl[labels])

    def step3(self, labels: np.ndarray, beta4: float) -> np.ndarray:
        if math.isinf(beta4) and beta4 > 0:
            return labels
        sizes = np.bincount(labels)
        multi = sizes[labels] >= 2
        if not multi.any():
            return labels
        out = labels.copy()
        indptr, indices, data = self.s.indptr, self.s.indices, self.s.data
        smallest_multi = int(labels[multi].min())
        for i in np.flatnonzero(sizes[labels] == 1):
            cols = indices[indptr[i]:indptr[i + 1]]
            vals = data[indptr[i]:indptr[i + 1]]
            ok = multi[cols]
            cols, vals = cols[ok], vals[ok]
            best = vals.max() if vals.size else 0.0
            if vals.size and best > beta4:
                out[i] = labels[cols[vals == best]].min()
            elif beta4 < 0:
                # every multi cluster has a member at similarity 0 > beta4
                out[i] = smallest_multi
        return canonical_labels(out)

    def labels(self, params: SchulzParams) -> np.ndarray:
        lab = self.step1(params.beta1)
        lab = self.step2(lab, params.beta2, params.beta3)
        return self.step3(lab, params.beta4)

    def run(self, params: SchulzParams) -> Clustering:
        return Clustering(self.mention_ids, tuple(int(x) for x in self.labels(params)))


def run_schulz(block: Block, corpus: Corpus, params: SchulzParams) -> Clustering:
    return SchulzPrepared(block, corpus, params).run(params)


# --- Caron: rule scores, block-size dependent threshold ----------------------

def run_caron(block: Block, corpus: Corpus, params: CaronParams,
              context: ScoringContext | None = None) -> Clustering:
    context = context or ScoringContext()
    threshold = params.threshold_for(block.size)
    scorer = RuleScorer(block.mention_ids, corpus, context.table, context.general_names)
    r, c, _ = scorer.edges(threshold)
    labels = component_labels(block.size, r, c)
    return Clustering(block.mention_ids, tuple(int(x) for x in labels))


class CaronPrepared:
    """Maximum spanning forest of the rule-score graph.

    Components of {pairs with score >= t} equal the components of the forest
    edges with score >= t, so any threshold at or above ``floor`` is answered
    from at most n - 1 edges.
    """

    def __init__(self, block: Block, corpus: Corpus, context: ScoringContext, floor: int):
        self.mention_ids = block.mention_ids
        self.n = block.size
        self.floor = floor
        scorer = RuleScorer(block.mention_ids, corpus, context.table, context.general_names)
        r, c, s = scorer.edges(floor)
        if s.size:
            top = int(s.max()) + 1
            graph = sp.csr_matrix(((top - s).astype(float), (r, c)), shape=(self.n, self.n))
            forest = minimum_spanning_tree(graph).tocoo()
            self.r, self.c = forest.row, forest.col
            self.s = top - forest.data.astype(np.int64)
        else:
            self.r = self.c = np.zeros(0, dtype=np.int64)
            self.s = np.zeros(0, dtype=np.int64)

    def labels_at(self, threshold: float) -> np.ndarray:
        if threshold < self.floor:
            raise ValueError(f"threshold {threshold} below prepared floor {self.floor}")
        keep = self.s >= threshold
        return component_labels(self.n, self.r[keep], self.c[keep])

    def labels(self, params) -> np.ndarray:
        t = params if isinstance(params, (int, float, np.integer)) else params.threshold_for(self.n)
        return self.labels_at(t)


# --- Backes: specificity-weighted similarity, greedy max merging -------------

class SpecificitySimilarity:
    """Cluster similarity as the equal-weight mean of per-field specificity.

    Each cluster's field bundle is the union of its members' tokens. Shared
    weight between a merged cluster and every other cluster is gathered from
    the token postings, so one merge costs time proportional to the postings
    of the merged cluster's tokens.
    """

    def __init__(self, mention_ids: Sequence[str], corpus: Corpus):
        bundles = [mention_bundle(corpus, m) for m in mention_ids]
        self.weighting = FieldWeighting.from_bundles(bundles)
        self.n = len(mention_ids)
        self.fields = []
        for f in SPECIFICITY_FIELDS:
            wmap = self.weighting.weights[f]
            positive = [[t for t in b[f] if wmap.get(t, 0.0) > 0.0] for b in bundles]
            x, vocab = incidence(positive)
            w = np.array([wmap[t] for t in vocab], dtype=float)
            present = np.array([bool(b[f]) for b in bundles])
            self.fields.append({"x": x, "xc": x.tocsc(), "w": w, "present": present})

    def start(self, groups):
        k = len(groups)
        self.label = np.empty(self.n, dtype=np.int64)
        for g, members in enumerate(groups):
            self.label[members] = g
        self.members = [np.asarray(g, dtype=np.int64) for g in groups]
        member = sp.csr_matrix((np.ones(self.n), (np.arange(self.n), self.label)), shape=(self.n, k))
        acc = np.zeros((k, k))
        cnt = np.zeros((k, k))
        self.state = []
        self.present = np.zeros((k, len(self.fields)), dtype=bool)
        for f, fd in enumerate(self.fields):
            pres = ((member.T @ fd["x"]) > 0).astype(float).tocsr()
            w = fd["w"]
            tot = pres @ w
            present = (member.T @ fd["present"].astype(float)) > 0
            self.present[:, f] = present
            tokens = [pres.indices[pres.indptr[g]:pres.indptr[g + 1]].copy() for g in range(k)]
            weighted = pres.multiply(w[None, :]).tocsr()
            chunk = 1024
            for lo in range(0, k, chunk):
                hi = min(k, lo + chunk)
                shared = (weighted[lo:hi] @ pres.T).toarray()
                acc[lo:hi] += self._field_score(shared, tot[lo:hi, None], tot[None, :])
                cnt[lo:hi] += present[lo:hi, None] | present[None, :]
            self.state.append({"tot": tot, "tokens": tokens})
        self.mark, self.shared, self.touched = _kernels.scratch(k)
        self.stamp = 0
        return np.divide(acc, cnt, out=np.zeros_like(acc), where=cnt > 0)

    @staticmethod
    def _field_score(shared, ta, tb):
        denom = np.minimum(ta, tb)
        out = np.divide(shared, denom, out=np.zeros(np.broadcast(shared, denom).shape),
                        where=denom > 0)
        return np.clip(out, 0.0, 1.0)

    def merge(self, a, b):
        self.label[self.members[b]] = a
        self.members[a] = np.concatenate([self.members[a], self.members[b]])
        self.members[b] = self.members[b][:0]
        k = len(self.present)
        acc = np.zeros(k)
        for fd, st in zip(self.fields, self.state):
            toks = np.union1d(st["tokens"][a], st["tokens"][b])
            st["tokens"][a] = toks
            st["tokens"][b] = toks[:0]
            tot = st["tot"]
            tot[a] = fd["w"][toks].sum()
            tot[b] = 0.0
            if toks.size:
                # only clusters sharing a token can score above zero
                xc = fd["xc"]
                self.stamp = _kernels.add_field_scores(
                    xc.indptr, xc.indices, self.label, toks, fd["w"], tot, a,
                    self.mark, self.stamp, self.shared, self.touched, acc)
        self.present[a] |= self.present[b]
        self.present[b] = False
        cnt = (self.present | self.present[a]).sum(axis=1)
        return np.divide(acc, cnt, out=np.zeros(k), where=cnt > 0)


BACKES_TRACE_FLOOR = 0.0


def backes_trace(block: Block, corpus: Corpus) -> MergeTrace:
    """Full greedy trace down to the zero-similarity floor.

    Quality limits are non-negative (lambda >= 0), so merges at similarity
    <= 0 can never be selected and the trace stops there.
    """
    initial = Clustering.singletons(block.mention_ids)
    sim = SpecificitySimilarity(block.mention_ids, corpus)
    _, trace = greedy_max_merge(initial, sim, stop=BACKES_TRACE_FLOOR)
    return trace


def quality_limit(params: BackesParams, size: int) -> float:
    return params.lam * size


def run_backes(block: Block, corpus: Corpus, params: BackesParams) -> tuple[Clustering, MergeTrace]:
    trace = backes_trace(block, corpus)
    return cut_trace(trace, quality_limit(params, block.size)), trace


class BackesPrepared:
    def __init__(self, block: Block, corpus: Corpus):
        self.mention_ids = block.mention_ids
        self.n = block.size
        self.trace = backes_trace(block, corpus)

    def labels(self, params: BackesParams) -> np.ndarray:
        return np.asarray(cut_trace(self.trace, quality_limit(params, self.n)).labels)

    def cut_candidates(self) -> list[float]:
        """Quality limits reaching every distinct prefix of the trace."""
        return sorted({BACKES_TRACE_FLOOR, *self.trace.levels}, reverse=True)


# --- dispatch ----------------------------------------------------------------

def run_algorithm(name: str, block: Block, corpus: Corpus, params,
                  context: ScoringContext | None = None) -> tuple[Clustering, MergeTrace | None]:
    if name == "baseline":
        return run_baseline(block), None
    if name == "cota":
        return run_cota(block, corpus, params), None
    if name == "schulz":
        return run_schulz(block, corpus, params), None
    if name == "caron":
        return run_caron(block, corpus, params, context), None
    if name == "backes":
        return run_backes(block, corpus, params)
    raise ValueError(f"unknown algorithm {name!r}")
