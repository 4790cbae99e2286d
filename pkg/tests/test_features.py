import math
import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from authordisamb.features import (
    SPECIFICITY_FIELDS, FieldWeighting, RuleScorer, RuleScoreTable, ScoringConfig,
    build_general_names, field_specificity, mention_bundle, merge_bundles,
    overlap_min_normalized, rule_score, specificity_score, tfidf_cosine,
)

from factories import corpus_of, mention, pair_corpus, paper, random_corpus
from formula_fixtures import RULE_FIXTURES


@pytest.mark.parametrize("name", list(RULE_FIXTURES))
def test_rule_score_fixture(name):
    kw, expected = RULE_FIXTURES[name]
    c, m1, m2 = pair_corpus(**kw)
    assert rule_score(m1, m2, c) == expected
    assert rule_score(m2, m1, c) == expected
    scorer = RuleScorer(["M1", "M2"], c)
    assert scorer.matrix()[0, 1] == expected


def test_general_first_name_scores_three():
    c, m1, m2 = pair_corpus(m1={"first_name": "Robert"}, m2={"first_name": "Robert"})
    assert rule_score(m1, m2, c, general_names=frozenset({"robert"})) == 3
    scorer = RuleScorer(["M1", "M2"], c, general_names=frozenset({"robert"}))
    assert scorer.matrix()[0, 1] == 3


def test_default_table_values():
    t = RuleScoreTable()
    assert (t.email_exact, t.initials_two, t.initials_more, t.initials_conflict) == (100, 5, 10, -10)
    assert (t.first_name_general, t.first_name_nongeneral, t.author_address) == (3, 6, 4)
    assert list(t.coauthor_tiers()) == [0, 4, 7, 10]
    assert list(t.coupling_tiers()) == [0, 2, 4, 6, 8, 10]
    assert list(t.cocitation_tiers()) == [0, 2, 3, 4, 5, 6]
    assert (t.grant, t.pub_address, t.subject_category, t.journal, t.self_citation) == (10, 2, 3, 6, 10)


def test_scoring_config_overrides(tmp_path):
    cfg = tmp_path / "scores.toml"
    cfg.write_text("email_exact = 50\ngeneral_name_threshold = 3\n", encoding="utf-8")
    loaded = ScoringConfig.load(cfg)
    assert loaded.table.email_exact == 50 and loaded.table.journal == 6
    assert loaded.general_name_threshold == 3
    cfg.write_text("bogus = 1\n", encoding="utf-8")
    with pytest.raises(ValueError, match="bogus"):
        ScoringConfig.load(cfg)


@pytest.mark.parametrize("seed", range(6))
def test_vectorized_rule_scores_match_scalar(seed):
    c = random_corpus(random.Random(seed), n_mentions=25)
    mids = [m for m, x in c.mentions.items() if x.key == "merton, r"]
    general = frozenset({"robert"})
    mat = RuleScorer(mids, c, general_names=general).matrix()
    for i, a in enumerate(mids):
        for j, b in enumerate(mids):
            expected = rule_score(c.mentions[a], c.mentions[b], c, general_names=general)
            assert mat[i, j] == expected
            assert mat[j, i] == expected


def test_edges_respect_floor():
    c = random_corpus(random.Random(9), n_mentions=30)
    mids = [m for m, x in c.mentions.items() if x.key == "merton, r"]
    scorer = RuleScorer(mids, c)
    mat = scorer.matrix()
    r, col, s = scorer.edges(8, chunk=7)
    got = {(int(a), int(b)): int(v) for a, b, v in zip(r, col, s)}
    want = {(i, j): int(mat[i, j]) for i in range(len(mids)) for j in range(i + 1, len(mids))
            if mat[i, j] >= 8}
    assert got == want


# --- set and text similarity ---------------------------------------------------

def test_overlap_min_normalized():
    assert overlap_min_normalized({"x"}, {"x"}) == 1.0
    assert overlap_min_normalized({"x"}, {"y"}) == 0.0
    assert overlap_min_normalized({"x", "y", "z"}, {"y", "z"}) == 1.0
    assert overlap_min_normalized(set(), {"y"}) == 0.0


def test_tfidf_cosine_hand_computed():
    coll = [["a", "b", "b"], ["b", "c"], ["c", "d"]]
    ia = math.log(4 / 2) + 1
    ib = math.log(4 / 3) + 1
    ic = ib
    dot = 2 * ib * ib
    na = math.sqrt(ia ** 2 + (2 * ib) ** 2)
    nb = math.sqrt(ib ** 2 + ic ** 2)
    assert tfidf_cosine(coll[0], coll[1], coll) == pytest.approx(dot / (na * nb), abs=1e-12)


def test_tfidf_cosine_trivial_cases():
    coll = [["a", "b"], ["c"]]
    assert tfidf_cosine(["a", "b"], ["a", "b"], coll) == pytest.approx(1.0)
    assert tfidf_cosine(["a"], ["c"], coll) == 0.0
    assert tfidf_cosine([], ["c"], coll) == 0.0


@settings(max_examples=60)
@given(st.lists(st.sampled_from("abcde"), max_size=6), st.lists(st.sampled_from("abcde"), max_size=6),
       st.lists(st.lists(st.sampled_from("abcdef"), max_size=5), max_size=4))
def test_tfidf_cosine_bounded_and_symmetric(a, b, extra):
    coll = [a, b, *extra]
    x, y = tfidf_cosine(a, b, coll), tfidf_cosine(b, a, coll)
    assert 0.0 <= x <= 1.0
    assert x == pytest.approx(y, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_rule_score_symmetric(seed):
    c = random_corpus(random.Random(seed), n_mentions=6)
    mids = [m for m, x in c.mentions.items() if x.key == "merton, r"]
    for a in mids:
        for b in mids:
            assert rule_score(c.mentions[a], c.mentions[b], c) == rule_score(c.mentions[b], c.mentions[a], c)


# --- general names -------------------------------------------------------------

def test_general_names():
    papers = [paper("P0")]
    mentions = [mention(f"W{i}", "P0", surname=f"Sur{i}", first_name="Wang") for i in range(50)]
    mentions.append(mention("X", "P0", surname="Solo", first_name="Xenia"))
    c = corpus_of(papers, mentions)
    assert build_general_names(c, 20) == frozenset({"wang"})
    assert build_general_names(c, 1) == frozenset({"wang", "xenia"})


# --- specificity -----------------------------------------------------------------

def _naive_weights(bundles):
    out = {}
    for f in SPECIFICITY_FIELDS:
        carriers = [b[f] for b in bundles if b[f]]
        out[f] = {}
        for tok in set().union(*carriers) if carriers else ():
            df = sum(1 for b in carriers if tok in b)
            out[f][tok] = math.log(len(carriers) / df)
    return out


def _naive_score(g1, g2, w):
    vals = []
    for f in SPECIFICITY_FIELDS:
        a, b = g1[f], g2[f]
        if not a and not b:
            continue
        ta = sum(w[f].get(t, 0.0) for t in a)
        tb = sum(w[f].get(t, 0.0) for t in b)
        shared = sum(w[f].get(t, 0.0) for t in a & b)
        d = min(ta, tb)
        vals.append(min(1.0, shared / d) if d > 0 else 0.0)
    return sum(vals) / len(vals) if vals else 0.0


def test_specificity_identical_and_zero_weight_cases():
    w = {"t": {"x": 0.7, "common": 0.0}}
    assert field_specificity(frozenset({"x"}), frozenset({"x"}), w["t"]) == 1.0
    assert field_specificity(frozenset({"common"}), frozenset({"common"}), w["t"]) == 0.0


@pytest.mark.parametrize("seed", range(4))
def test_specificity_matches_independent_reimplementation(seed):
    c = random_corpus(random.Random(100 + seed), n_mentions=5)
    mids = sorted(m for m, x in c.mentions.items() if x.key == "merton, r")
    bundles = [mention_bundle(c, m) for m in mids]
    weighting = FieldWeighting.from_bundles(bundles)
    naive_w = _naive_weights(bundles)
    for f in SPECIFICITY_FIELDS:
        assert weighting.weights[f] == pytest.approx(naive_w[f])
    for i in range(5):
        for j in range(5):
            got = specificity_score(bundles[i], bundles[j], weighting)
            assert got == pytest.approx(_naive_score(bundles[i], bundles[j], naive_w), abs=1e-12)
            assert 0.0 <= got <= 1.0
    merged = merge_bundles(bundles[:2])
    assert specificity_score(merged, bundles[2], weighting) == pytest.approx(
        _naive_score(merged, bundles[2], naive_w), abs=1e-12)


def test_weight_zero_for_ubiquitous_token_and_decreasing_in_df():
    bundles = [{f: frozenset() for f in SPECIFICITY_FIELDS} for _ in range(4)]
    for k, b in enumerate(bundles):
        b["keyword"] = frozenset({"all"} | ({"half"} if k < 2 else set()) | ({"one"} if k == 0 else set()))
    w = FieldWeighting.from_bundles(bundles).weights["keyword"]
    assert w["all"] == 0.0
    assert w["one"] > w["half"] > w["all"]
    assert np.isclose(w["one"], math.log(4))
