import json
import random

import pytest
from hypothesis import given, strategies as st

from authordisamb.corpus import (
    CorpusError, canonicalize, ingest_corpus, load_corpus_dir, normalize_text, tokenize,
    write_corpus,
)

from factories import random_corpus


def _write(path, rows):
    path.write_text("".join(json.dumps(r) + "\n" for r in rows), encoding="utf-8")


@pytest.mark.parametrize("surname, first, key", [
    ("Merton", "Robert", "merton, r"),
    ("Merton", "R.", "merton, r"),
    ("MÜLLER", "jörg", "muller, j"),
    ("  van  Dijk ", "Ann", "van dijk, a"),
])
def test_canonicalize_examples(surname, first, key):
    assert canonicalize(surname, first) == key


def test_canonicalize_rejects_empty_surname():
    with pytest.raises(CorpusError, match="M7"):
        canonicalize("  ", "Robert", mention_id="M7")


@given(st.text(min_size=1, max_size=20), st.text(max_size=10))
def test_canonicalize_idempotent_on_surname(surname, first):
    if not normalize_text(surname):
        return
    key = canonicalize(surname, first)
    norm_surname = key.rsplit(", ", 1)[0]
    assert canonicalize(norm_surname, first) == key


@pytest.mark.parametrize("text, tokens", [
    ("Social theory and social structure", ["social", "theory", "and", "social", "structure"]),
    ("", []),
    ("The Matthew effect in science", ["the", "matthew", "effect", "in", "science"]),
    ("a b-c ÉTUDE x2", ["etude", "x2"]),
])
def test_tokenize(text, tokens):
    assert tokenize(text) == tokens


def test_dangling_paper_reference_names_offender(tmp_path):
    _write(tmp_path / "p.jsonl", [{"paper_id": "P1"}, {"paper_id": "P2"}])
    _write(tmp_path / "m.jsonl", [
        {"mention_id": "M1", "paper_id": "P1", "surname": "A", "first_name": "B"},
        {"mention_id": "M2", "paper_id": "P2", "surname": "A", "first_name": "B"},
        {"mention_id": "M3", "paper_id": "P9", "surname": "A", "first_name": "B"},
    ])
    with pytest.raises(CorpusError, match="M3"):
        ingest_corpus(tmp_path / "p.jsonl", tmp_path / "m.jsonl")


def test_duplicate_paper_id_rejected(tmp_path):
    _write(tmp_path / "p.jsonl", [{"paper_id": "P1"}, {"paper_id": "P1"}])
    _write(tmp_path / "m.jsonl", [])
    with pytest.raises(CorpusError, match="duplicate paper_id"):
        ingest_corpus(tmp_path / "p.jsonl", tmp_path / "m.jsonl")


def test_malformed_line_reports_line_number(tmp_path):
    (tmp_path / "p.jsonl").write_text('{"paper_id": "P1"}\n{oops\n', encoding="utf-8")
    _write(tmp_path / "m.jsonl", [])
    with pytest.raises(CorpusError, match=r"p\.jsonl:2"):
        ingest_corpus(tmp_path / "p.jsonl", tmp_path / "m.jsonl")


def test_unknown_keys_warn(tmp_path, caplog):
    _write(tmp_path / "p.jsonl", [{"paper_id": "P1", "doi": "x"}])
    _write(tmp_path / "m.jsonl", [])
    ingest_corpus(tmp_path / "p.jsonl", tmp_path / "m.jsonl")
    assert "doi" in caplog.text


def test_citers_inverse_of_references(tmp_path):
    rows = [{"paper_id": f"P{i}", "references": [f"P{j}" for j in range(i) if (i + j) % 3 == 0]}
            for i in range(10)]
    _write(tmp_path / "p.jsonl", rows)
    _write(tmp_path / "m.jsonl", [])
    c = ingest_corpus(tmp_path / "p.jsonl", tmp_path / "m.jsonl")
    brute = {}
    for r in rows:
        for ref in r["references"]:
            brute.setdefault(ref, set()).add(r["paper_id"])
    for pid in c.papers:
        assert set(c.citers_of(pid)) == brute.get(pid, set())


@pytest.mark.parametrize("seed", range(5))
def test_citers_property_random(seed):
    c = random_corpus(random.Random(seed))
    for pid, p in c.papers.items():
        for ref in p.references:
            assert pid in c.citers_of(ref)
    for ref, citers in c.citers.items():
        assert all(ref in c.papers[x].references for x in citers)


def test_round_trip_and_order_independence(tmp_path):
    c = random_corpus(random.Random(3))
    write_corpus(c, tmp_path / "papers.jsonl", tmp_path / "mentions.jsonl")
    again = ingest_corpus(tmp_path / "papers.jsonl", tmp_path / "mentions.jsonl")
    assert again.papers == c.papers
    assert again.mentions == c.mentions
    assert again.content_hash() == c.content_hash()
    # reversed line order gives the same corpus
    for name in ("papers.jsonl", "mentions.jsonl"):
        lines = (tmp_path / name).read_text(encoding="utf-8").splitlines(keepends=True)
        (tmp_path / name).write_text("".join(reversed(lines)), encoding="utf-8")
    shuffled = ingest_corpus(tmp_path / "papers.jsonl", tmp_path / "mentions.jsonl")
    assert shuffled.content_hash() == c.content_hash()
    assert shuffled.coauthors == c.coauthors


def test_corpus_cache_hits_and_invalidates(tmp_path):
    c = random_corpus(random.Random(4))
    write_corpus(c, tmp_path / "papers.jsonl", tmp_path / "mentions.jsonl")
    cache = tmp_path / "cache"
    first = load_corpus_dir(tmp_path, cache)
    assert len(list(cache.glob("*.pkl"))) == 1
    second = load_corpus_dir(tmp_path, cache)
    assert second.content_hash() == first.content_hash()
    with open(tmp_path / "papers.jsonl", "a", encoding="utf-8") as fh:
        fh.write(json.dumps({"paper_id": "PNEW"}) + "\n")
    third = load_corpus_dir(tmp_path, cache)
    assert "PNEW" in third.papers
    assert len(list(cache.glob("*.pkl"))) == 2
