"""Pairwise similarity primitives shared by the disambiguation algorithms.

Scalar functions (``rule_score``, ``tfidf_cosine``, ``specificity_score`` ...)
define the semantics; the ``*_edges``/matrix builders compute the same
quantities for a whole block at once with sparse products and are tested
against the scalar versions.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Hashable, Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .corpus import AuthorMention, Corpus

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib


@dataclass(frozen=True)
class RuleScoreTable:
    email_exact: int = 100
    initials_two: int = 5
    initials_more: int = 10
    initials_conflict: int = -10
    first_name_general: int = 3
    first_name_nongeneral: int = 6
    author_address: int = 4
    coauthor_1: int = 4
    coauthor_2: int = 7
    coauthor_gt2: int = 10
    grant: int = 10
    pub_address: int = 2
    subject_category: int = 3
    journal: int = 6
    self_citation: int = 10
    coupling_1: int = 2
    coupling_2: int = 4
    coupling_3: int = 6
    coupling_4: int = 8
    coupling_gt4: int = 10
    cocitation_1: int = 2
    cocitation_2: int = 3
    cocitation_3: int = 4
    cocitation_4: int = 5
    cocitation_gt4: int = 6

    @classmethod
    def from_mapping(cls, values: Mapping[str, object]) -> "RuleScoreTable":
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ValueError(f"unknown rule score keys: {', '.join(sorted(unknown))}")
        out = {}
        for k, v in values.items():
            if isinstance(v, bool) or not isinstance(v, int):
                raise ValueError(f"rule score {k} must be an integer, got {v!r}")
            out[k] = v
        return cls(**out)

    def coauthor_tiers(self) -> np.ndarray:
        return np.array([0, self.coauthor_1, self.coauthor_2, self.coauthor_gt2])

    def coupling_tiers(self) -> np.ndarray:
        return np.array([0, self.coupling_1, self.coupling_2, self.coupling_3,
                         self.coupling_4, self.coupling_gt4])

    def cocitation_tiers(self) -> np.ndarray:
        return np.array([0, self.cocitation_1, self.cocitation_2, self.cocitation_3,
                         self.cocitation_4, self.cocitation_gt4])


DEFAULT_GENERAL_NAME_THRESHOLD = 20


@dataclass(frozen=True)
class ScoringConfig:
    """Rule table plus the general-name threshold, loadable from a flat file."""

    table: RuleScoreTable = field(default_factory=RuleScoreTable)
    general_name_threshold: int = DEFAULT_GENERAL_NAME_THRESHOLD

    @classmethod
    def load(cls, path: str | Path | None) -> "ScoringConfig":
        if path is None:
            return cls()
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
        raw = dict(raw.get("scoring", raw))
        g = raw.pop("general_name_threshold", DEFAULT_GENERAL_NAME_THRESHOLD)
        if isinstance(g, bool) or not isinstance(g, int) or g < 1:
            raise ValueError("general_name_threshold must be a positive integer")
        return cls(RuleScoreTable.from_mapping(raw), g)


def build_general_names(corpus: Corpus, threshold: int = DEFAULT_GENERAL_NAME_THRESHOLD) -> frozenset[str]:
    """First names seen with at least ``threshold`` distinct surnames corpus-wide."""
    surnames: dict[str, set[str]] = {}
    for m in corpus.mentions.values():
        name = m.norm_first_name
        if name:
            surnames.setdefault(name, set()).add(m.key.rsplit(", ", 1)[0])
    return frozenset(name for name, s in surnames.items() if len(s) >= threshold)


# --- set and text similarity -------------------------------------------------

def overlap_min_normalized(a: Iterable, b: Iterable) -> float:
    a, b = set(a), set(b)
    if not a or not b:
        return 0.0
    return len(a & b) / min(len(a), len(b))


def smooth_idf(df: int | np.ndarray, n_docs: int):
    """ln((1 + N) / (1 + df)) + 1, so shared tokens never vanish entirely."""
    return np.log((1.0 + n_docs) / (1.0 + np.asarray(df, dtype=float))) + 1.0


def tfidf_cosine(doc_a: Sequence[str], doc_b: Sequence[str],
                 collection: Sequence[Sequence[str]]) -> float:
    if not doc_a or not doc_b:
        return 0.0
    df = Counter()
    for doc in collection:
        df.update(set(doc))
    n = len(collection)
    ta, tb = Counter(doc_a), Counter(doc_b)
    va = {t: c * float(smooth_idf(df[t], n)) for t, c in ta.items()}
    vb = {t: c * float(smooth_idf(df[t], n)) for t, c in tb.items()}
    dot = sum(v * vb[t] for t, v in va.items() if t in vb)
    na = math.sqrt(sum(v * v for v in va.values()))
    nb = math.sqrt(sum(v * v for v in vb.values()))
    return min(1.0, max(0.0, dot / (na * nb)))


# --- rule-based scoring ------------------------------------------------------

def initials_score(a: Sequence[str], b: Sequence[str], table: RuleScoreTable) -> int:
    """Compare initials position by position.

    Only applies when both sides carry more than one initial; a mismatch at
    any shared position is a conflict.
    """
    shared = min(len(a), len(b))
    if shared < 2:
        return 0
    if any(x != y for x, y in zip(a, b)):
        return table.initials_conflict
    return table.initials_two if shared == 2 else table.initials_more


def _tier(tiers: np.ndarray, count: int) -> int:
    return int(tiers[min(count, len(tiers) - 1)])


def rule_score(m1: AuthorMention, m2: AuthorMention, corpus: Corpus,
               table: RuleScoreTable | None = None,
               general_names: frozenset[str] = frozenset()) -> int:
    table = table or RuleScoreTable()
    p1, p2 = corpus.papers[m1.paper_id], corpus.papers[m2.paper_id]
    score = 0
    if m1.email and m1.email == m2.email:
        score += table.email_exact
    score += initials_score(m1.initials, m2.initials, table)
    f1, f2 = m1.norm_first_name, m2.norm_first_name
    if f1 and f1 == f2:
        score += table.first_name_general if f1 in general_names else table.first_name_nongeneral
    if m1.author_addresses & m2.author_addresses:
        score += table.author_address
    score += _tier(table.coauthor_tiers(),
                   len(corpus.coauthors[m1.mention_id] & corpus.coauthors[m2.mention_id]))
    if p1.grant_numbers & p2.grant_numbers:
        score += table.grant
    if p1.pub_addresses & p2.pub_addresses:
        score += table.pub_address
    if p1.subject_categories & p2.subject_categories:
        score += table.subject_category
    if p1.journal and p1.journal == p2.journal:
        score += table.journal
    if p1.paper_id in p2.references or p2.paper_id in p1.references:
        score += table.self_citation
    score += _tier(table.coupling_tiers(), len(p1.references & p2.references))
    score += _tier(table.cocitation_tiers(),
                   len(corpus.citers_of(p1.paper_id) & corpus.citers_of(p2.paper_id)))
    return score


def incidence(rows: Sequence[Iterable[Hashable]]) -> tuple[sp.csr_matrix, list]:
    """Binary row x item matrix and the sorted item vocabulary."""
    rows = [set(items) for items in rows]
    # sorted so column order (and float summation order) is independent of hashing
    vocab = {x: i for i, x in enumerate(sorted(set().union(*rows), key=repr))}
    indptr = [0]
    indices: list[int] = []
    for items in rows:
        indices.extend(sorted(vocab[x] for x in items))
        indptr.append(len(indices))
    mat = sp.csr_matrix(
        (np.ones(len(indices), dtype=np.int32), np.array(indices, dtype=np.int64), indptr),
        shape=(len(rows), len(vocab)),
    )
    return mat, list(vocab)


def _codes(values: Sequence[Hashable | None]) -> np.ndarray:
    """Dense integer codes; falsy values map to -1."""
    table: dict = {}
    return np.array([table.setdefault(v, len(table)) if v else -1 for v in values], dtype=np.int64)


class RuleScorer:
    """Vectorized ``rule_score`` over all pairs of a block."""

    def __init__(self, mention_ids: Sequence[str], corpus: Corpus,
                 table: RuleScoreTable | None = None,
                 general_names: frozenset[str] = frozenset()):
        self.table = table = table or RuleScoreTable()
        self.n = n = len(mention_ids)
        ms = [corpus.mentions[m] for m in mention_ids]
        ps = [corpus.papers[m.paper_id] for m in ms]

        self.email = _codes([m.email for m in ms])
        init_codes = _codes([m.initials or None for m in ms])
        uniq: dict[int, tuple[str, ...]] = {}
        for m, c in zip(ms, init_codes):
            uniq.setdefault(int(c), m.initials)
        k = max(uniq, default=-1) + 1
        self.init_table = np.zeros((k + 1, k + 1), dtype=np.int32)  # last row/col: no initials
        for a, ia in uniq.items():
            for b, ib in uniq.items():
                if a >= 0 and b >= 0:
                    self.init_table[a, b] = initials_score(ia, ib, table)
        self.init_codes = np.where(init_codes < 0, k, init_codes)

        names = [m.norm_first_name for m in ms]
        self.first = _codes(names)
        self.first_value = np.array(
            [(table.first_name_general if nm in general_names else table.first_name_nongeneral)
             if nm else 0 for nm in names], dtype=np.int32)
        self.journal = _codes([p.journal for p in ps])

        self.author_addr, _ = incidence([m.author_addresses for m in ms])
        self.coauth, _ = incidence([corpus.coauthors[m.mention_id] for m in ms])
        self.grants, _ = incidence([p.grant_numbers for p in ps])
        self.pub_addr, _ = incidence([p.pub_addresses for p in ps])
        self.subjects, _ = incidence([p.subject_categories for p in ps])
        self.cites, _ = incidence([corpus.citers_of(p.paper_id) for p in ps])
        # references and own paper ids share one vocabulary for the self-citation test
        ref_rows = [[("r", r) for r in p.references] for p in ps]
        own_rows = [[("r", p.paper_id)] for p in ps]
        both, _ = incidence(ref_rows + own_rows)
        self.refs = both[:n].tocsr()
        self.own = both[n:].tocsr()

        self.coauthor_tiers = table.coauthor_tiers()
        self.coupling_tiers = table.coupling_tiers()
        self.cocitation_tiers = table.cocitation_tiers()

    @staticmethod
    def _counts(mat: sp.csr_matrix, lo: int, hi: int) -> np.ndarray:
        return (mat[lo:hi] @ mat.T).toarray()

    @staticmethod
    def _eq(codes: np.ndarray, lo: int, hi: int) -> np.ndarray:
        sub = codes[lo:hi, None]
        return (sub == codes[None, :]) & (sub >= 0)

    def rows(self, lo: int, hi: int) -> np.ndarray:
        """Scores of mentions ``lo:hi`` against every mention in the block."""
        t = self.table
        s = np.zeros((hi - lo, self.n), dtype=np.int32)
        s += self._eq(self.email, lo, hi) * t.email_exact
        s += self.init_table[self.init_codes[lo:hi, None], self.init_codes[None, :]]
        s += self._eq(self.first, lo, hi) * self.first_value[lo:hi, None]
        s += self._eq(self.journal, lo, hi) * t.journal
        s += (self._counts(self.author_addr, lo, hi) > 0) * t.author_address
        s += (self._counts(self.grants, lo, hi) > 0) * t.grant
        s += (self._counts(self.pub_addr, lo, hi) > 0) * t.pub_address
        s += (self._counts(self.subjects, lo, hi) > 0) * t.subject_category
        s += self.coauthor_tiers[np.minimum(self._counts(self.coauth, lo, hi), 3)].astype(np.int32)
        s += self.coupling_tiers[np.minimum(self._counts(self.refs, lo, hi), 5)].astype(np.int32)
        s += self.cocitation_tiers[np.minimum(self._counts(self.cites, lo, hi), 5)].astype(np.int32)
        own_in_theirs = (self.own[lo:hi] @ self.refs.T).toarray()
        theirs_in_own = (self.refs[lo:hi] @ self.own.T).toarray()
        s += ((own_in_theirs + theirs_in_own) > 0) * t.self_citation
        return s

    def matrix(self) -> np.ndarray:
        return self.rows(0, self.n)

    def edges(self, floor: float, chunk: int = 512) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Upper-triangle pairs (i < j) with score >= floor, plus their scores."""
        ii, jj, ss = [], [], []
        for lo in range(0, self.n, chunk):
            hi = min(self.n, lo + chunk)
            rows = self.rows(lo, hi)
            r, c = np.nonzero(rows >= floor)
            keep = c > r + lo
            r, c = r[keep], c[keep]
            ii.append(r + lo)
            jj.append(c)
            ss.append(rows[r, c])
        if not ii:
            empty = np.zeros(0, dtype=np.int64)
            return empty, empty, np.zeros(0, dtype=np.int32)
        return np.concatenate(ii), np.concatenate(jj), np.concatenate(ss)


# --- specificity (field-weighted) similarity ---------------------------------

SPECIFICITY_FIELDS = (
    "title", "abstract", "affiliation", "subject_category",
    "keyword", "coauthor", "cited_author", "email",
)


def mention_bundle(corpus: Corpus, mention_id: str) -> dict[str, frozenset]:
    """Per-field token sets of one mention for specificity scoring."""
    m = corpus.mentions[mention_id]
    p = corpus.papers[m.paper_id]
    cited = set()
    for ref in p.references:
        mids = corpus.paper_mentions.get(ref)
        if mids:
            cited.update(corpus.mentions[x].key for x in mids)
        else:
            cited.add("ref:" + ref)
    return {
        "title": frozenset(p.title_tokens),
        "abstract": frozenset(p.abstract_tokens),
        "affiliation": frozenset(m.author_addresses),
        "subject_category": p.subject_categories,
        "keyword": p.keywords,
        "coauthor": corpus.coauthors[mention_id],
        "cited_author": frozenset(cited),
        "email": frozenset([m.email]) if m.email else frozenset(),
    }


def merge_bundles(bundles: Iterable[Mapping[str, frozenset]]) -> dict[str, frozenset]:
    out: dict[str, set] = {f: set() for f in SPECIFICITY_FIELDS}
    for b in bundles:
        for f in SPECIFICITY_FIELDS:
            out[f].update(b.get(f, ()))
    return {f: frozenset(v) for f, v in out.items()}


@dataclass
class FieldWeighting:
    """Token weights ln(N / df) per field, N = mentions carrying the field."""

    weights: dict[str, dict]

    @classmethod
    def from_bundles(cls, bundles: Sequence[Mapping[str, frozenset]]) -> "FieldWeighting":
        weights = {}
        for f in SPECIFICITY_FIELDS:
            df: Counter = Counter()
            carriers = 0
            for b in bundles:
                toks = b.get(f, ())
                if toks:
                    carriers += 1
                    df.update(toks)
            weights[f] = {t: math.log(carriers / c) for t, c in df.items()}
        return cls(weights)

    def weight(self, f: str, token) -> float:
        return self.weights[f].get(token, 0.0)


def field_specificity(a: frozenset, b: frozenset, w: Mapping) -> float:
    ta = math.fsum(w.get(t, 0.0) for t in a)
    tb = math.fsum(w.get(t, 0.0) for t in b)
    denom = min(ta, tb)
    if denom <= 0.0:
        return 0.0
    shared = math.fsum(w.get(t, 0.0) for t in a & b)
    return min(1.0, max(0.0, shared / denom))


def specificity_score(g1: Mapping[str, frozenset], g2: Mapping[str, frozenset],
                      weighting: FieldWeighting) -> float:
    """Equal-weight mean of per-field specificity over fields present on either side."""
    total, present = 0.0, 0
    for f in SPECIFICITY_FIELDS:
        a, b = g1.get(f, frozenset()), g2.get(f, frozenset())
        if not a and not b:
            continue
        present += 1
        total += field_specificity(a, b, weighting.weights[f])
    return total / present if present else 0.0


def block_weights_rows(mention_ids: Sequence[str], corpus: Corpus) -> list[tuple[str, str, int, float]]:
    """(field, token, df, weight) rows for inspection dumps."""
    bundles = [mention_bundle(corpus, m) for m in mention_ids]
    weighting = FieldWeighting.from_bundles(bundles)
    out = []
    for f in SPECIFICITY_FIELDS:
        df: Counter = Counter()
        for b in bundles:
            df.update(b[f])
        for tok, w in sorted(weighting.weights[f].items(), key=lambda kv: str(kv[0])):
            label = "|".join(tok) if isinstance(tok, tuple) else str(tok)
            out.append((f, label, df[tok], w))
    return out
