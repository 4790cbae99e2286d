"""Compiled inner loops for the greedy merge similarities."""

from __future__ import annotations

import numba
import numpy as np


@numba.njit(cache=True)
def add_field_scores(indptr, indices, label, toks, w, tot, a, mark, stamp, shared, touched, acc):
    """Add one field's specificity between cluster ``a`` and every cluster it shares a token with.

    ``indptr``/``indices`` are the token postings (CSC of the mention-by-token
    matrix) and ``label`` maps mentions to clusters; ``toks`` are the tokens of
    ``a``. ``mark`` keeps the last stamp seen per cluster so a token counts
    once per cluster, and weights are summed per cluster in ``toks`` order.
    Returns the next free stamp.
    """
    first = stamp
    n = 0
    for p in range(toks.size):
        t = toks[p]
        wt = w[t]
        for q in range(indptr[t], indptr[t + 1]):
            c = label[indices[q]]
            if mark[c] != stamp:
                if mark[c] < first:
                    touched[n] = c
                    n += 1
                    shared[c] = 0.0
                mark[c] = stamp
                shared[c] += wt
        stamp += 1
    ta = tot[a]
    for i in range(n):
        c = touched[i]
        d = min(ta, tot[c])
        s = 0.0
        if d > 0:
            s = min(max(shared[c] / d, 0.0), 1.0)
        acc[c] += s
    return stamp


def scratch(k: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Mark, shared-weight and touched-cluster buffers for ``k`` clusters."""
    return np.full(k, -1, dtype=np.int64), np.zeros(k), np.zeros(k, dtype=np.int64)


@numba.njit(cache=True)
def _qualify(ct, cj, tt, tj):
    qt = ct if ct > tt else -np.inf
    qj = cj if cj > tj else -np.inf
    return max(qt, qj)


@numba.njit(cache=True)
def _first_argmax(v):
    best = 0
    for x in range(1, v.size):
        if v[x] > v[best]:
            best = x
    return best


@numba.njit(cache=True)
def _merge_gram(gram, sq, a, b, out):
    """Fold cluster ``b`` into ``a`` and write the cosines of ``a`` to ``out``."""
    k = sq.size
    sq[a] = sq[a] + sq[b] + 2 * gram[a, b]
    sq[b] = 0.0
    for x in range(k):
        r = gram[a, x] + gram[b, x]
        gram[a, x] = r
        gram[x, a] = r
    for x in range(k):
        gram[b, x] = 0.0
        gram[x, b] = 0.0
    gram[a, a] = sq[a]
    na = np.sqrt(sq[a])
    for x in range(k):
        d = na * np.sqrt(sq[x])
        c = 0.0
        if d > 0:
            c = min(max(gram[a, x] / d, 0.0), 1.0)
        out[x] = c


@numba.njit(cache=True)
def cota_greedy(cos_t, cos_j, gram_t, gram_j, tt, tj):
    """Greedy TF-IDF merging of the second Cota step.

    Same merge order and tie-breaking as ``greedy_max_merge`` driving
    ``TfidfMergeSimilarity`` with no stop. The Gram matrices are updated in
    place. Returns the merged slot pairs and their similarities.
    """
    k = cos_t.shape[0]
    sim = np.empty((k, k))
    for x in range(k):
        for y in range(k):
            sim[x, y] = _qualify(cos_t[x, y], cos_j[x, y], tt, tj)
        sim[x, x] = -np.inf
    sq_t = np.diag(gram_t).copy()
    sq_j = np.diag(gram_j).copy()
    active = np.ones(k, dtype=np.bool_)
    best_j = np.empty(k, dtype=np.int64)
    best_v = np.empty(k)
    for x in range(k):
        best_j[x] = _first_argmax(sim[x])
        best_v[x] = sim[x, best_j[x]]
    row_t = np.empty(k)
    row_j = np.empty(k)
    row = np.empty(k)
    pairs = np.empty((max(k - 1, 0), 2), dtype=np.int64)
    sims = np.empty(max(k - 1, 0))
    n = 0
    remaining = k
    while remaining > 1:
        i = _first_argmax(best_v)
        v = best_v[i]
        if not v > -np.inf:
            break
        j = best_j[i]
        a, b = (i, j) if i < j else (j, i)
        pairs[n, 0] = a
        pairs[n, 1] = b
        sims[n] = v
        n += 1
        remaining -= 1
        active[b] = False
        for x in range(k):
            sim[b, x] = -np.inf
            sim[x, b] = -np.inf
        best_v[b] = -np.inf
        _merge_gram(gram_t, sq_t, a, b, row_t)
        _merge_gram(gram_j, sq_j, a, b, row_j)
        for x in range(k):
            row[x] = _qualify(row_t[x], row_j[x], tt, tj) if active[x] else -np.inf
        row[a] = -np.inf
        for x in range(k):
            sim[a, x] = row[x]
            sim[x, a] = row[x]
        for x in range(k):
            if not active[x]:
                continue
            if x == a or best_j[x] == a or best_j[x] == b:
                # every other entry of the row is at most the old best and
                # none before a equals it, so a row that did not drop keeps a
                if x != a and row[x] >= best_v[x]:
                    best_v[x] = row[x]
                    best_j[x] = a
                    continue
                best_j[x] = _first_argmax(sim[x])
                best_v[x] = sim[x, best_j[x]]
            elif row[x] > best_v[x] or (row[x] == best_v[x] and best_j[x] > a):
                best_v[x] = row[x]
                best_j[x] = a
    return pairs[:n], sims[:n]
