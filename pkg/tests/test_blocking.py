import random

from authordisamb.blocking import build_blocks, filter_blocks, size_histogram
from authordisamb.corpus import canonicalize

from factories import corpus_of, mention, paper


def test_homonyms_and_synonyms_share_a_block():
    c = corpus_of([paper(f"P{i}") for i in range(3)], [
        mention("M1", "P0", first_name="R."),
        mention("M2", "P1", first_name="Robert"),
        mention("M3", "P2", first_name="Robert"),
    ])
    blocks = build_blocks(c)
    assert [(b.key, b.size) for b in blocks] == [("merton, r", 3)]


def test_distinct_surnames_give_distinct_blocks():
    c = corpus_of([paper("P0")], [mention(f"M{i}", "P0", surname=s)
                                  for i, s in enumerate(["Aa", "Bb", "Cc"])])
    assert [b.size for b in build_blocks(c)] == [1, 1, 1]


def test_partition_matches_brute_force_grouping():
    rng = random.Random(11)
    surnames = ["Li", "Wang", "Müller", "Muller", "Smith"]
    firsts = ["Anna", "A.", "Bo", "bea", "", "Chen"]
    papers = [paper(f"P{i}") for i in range(50)]
    mentions = [mention(f"M{i:04d}", f"P{rng.randrange(50)}", surname=rng.choice(surnames),
                        first_name=rng.choice(firsts)) for i in range(1000)]
    c = corpus_of(papers, mentions)
    blocks = build_blocks(c)
    oracle = {}
    for m in mentions:
        oracle.setdefault(canonicalize(m.surname, m.first_name), set()).add(m.mention_id)
    assert {b.key: set(b.mention_ids) for b in blocks} == oracle
    ids = [m for b in blocks for m in b.mention_ids]
    assert len(ids) == len(set(ids)) == 1000
    assert [b.key for b in blocks] == sorted(b.key for b in blocks)
    assert all(list(b.mention_ids) == sorted(b.mention_ids) for b in blocks)
    assert sum(n * k for n, k in size_histogram(blocks)) == 1000


def test_missing_first_name_is_flagged(caplog):
    c = corpus_of([paper("P0")], [mention("M1", "P0", first_name="")])
    (block,) = build_blocks(c)
    assert block.key == "merton, " and block.flagged
    assert "no first initial" in caplog.text


def _gold_corpus(authors_per_block):
    papers, mentions = [], []
    for b, n_auth in enumerate(authors_per_block):
        for a in range(n_auth):
            pid = f"P{b}-{a}"
            papers.append(paper(pid))
            mentions.append(mention(f"M{b}-{a}", pid, surname=f"S{chr(97 + b)}",
                                    gold_author_id=f"A{b}-{a}"))
    mentions.append(mention("MX", papers[0].paper_id, surname="Nogold"))
    return corpus_of(papers, mentions)


def test_filter_by_distinct_gold_authors():
    c = _gold_corpus([4, 5, 7])
    kept, stats = filter_blocks(build_blocks(c), c, 5)
    assert [b.key for b in kept] == ["sb, r", "sc, r"]
    assert stats.dropped_few_authors == ["sa, r"]
    assert stats.dropped_no_gold == ["nogold, r"]


def test_min_one_keeps_blocks_with_any_gold():
    c = _gold_corpus([1, 2])
    kept, _ = filter_blocks(build_blocks(c), c, 1)
    assert [b.key for b in kept] == ["sa, r", "sb, r"]
