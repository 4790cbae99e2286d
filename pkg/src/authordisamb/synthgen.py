"""Seeded synthetic corpus generator with ground-truth author ids.

Each name block holds several real authors sharing a surname and first
initial. Authors carry correlated metadata (a research topic with its own
vocabulary, journals, categories and reference pool; a co-author circle; an
email, a city and grants) and produce papers from it. Cross-author overlap is
controlled by the noise rates in :class:`GenSpec`: with every noise rate at 0
the blocks are perfectly separable.

Co-authors appear as additional mentions with their own gold ids; each
co-author has a unique surname, so their blocks hold a single author and are
dropped by the usual five-author filter.
"""

from __future__ import annotations

import json
import zlib
from bisect import bisect_left
from dataclasses import asdict, dataclass, fields
from functools import lru_cache
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

NOISE_RATES = (
    "topic_overlap", "generic_word_rate", "shared_city_rate", "coauthor_homonym_rate",
    "homonym_rate", "synonym_rate", "missing_email_prob",
)

_CONSONANTS = "bcdfghjklmnprstvwz"
_VOWELS = "aeiou"
_ACCENTED = {"a": "á", "e": "é", "o": "ö", "u": "ü", "i": "í"}
_INITIALS = "jmyslawxchkrdt"
_COUNTRIES = ("germany", "china", "usa", "france", "japan", "brazil", "india", "italy",
              "spain", "canada", "korea", "poland")


class GenSpecError(ValueError):
    pass


@dataclass(frozen=True)
class GenSpec:
    seed: int = 20190601
    n_blocks: int = 60
    authors_per_block: tuple[int, int] = (5, 10)
    papers_per_author: tuple[int, int] = (2, 20)
    tail_fraction: float = 0.15
    tail_authors: tuple[int, int] = (20, 45)
    giant_blocks: tuple[int, ...] = ()
    n_topics: int = 30
    topic_overlap: float = 0.5
    generic_word_rate: float = 0.2
    focus_word_rate: float = 0.6
    missing_email_prob: float = 0.5
    author_address_prob: float = 0.6
    shared_city_rate: float = 0.3
    coauthor_pool_size: int = 6
    coauthors_per_paper: tuple[int, int] = (0, 4)
    coauthor_homonym_rate: float = 0.1
    citation_density: float = 10.0
    personal_reference_share: float = 0.5
    self_citation_prob: float = 0.3
    grant_prob: float = 0.3
    homonym_rate: float = 0.3
    synonym_rate: float = 0.3
    middle_initial_prob: float = 0.5
    journal_loyalty: float = 0.8
    year_range: tuple[int, int] = (1990, 2020)

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name.endswith(("_rate", "_prob", "_share", "_fraction", "_loyalty", "_overlap")):
                if not 0.0 <= v <= 1.0:
                    raise GenSpecError(f"{f.name} must be a probability, got {v}")
            if isinstance(v, tuple) and len(v) == 2 and f.name != "giant_blocks":
                if v[0] > v[1]:
                    raise GenSpecError(f"{f.name}: min {v[0]} exceeds max {v[1]}")
        if self.authors_per_block[0] < 1 or self.papers_per_author[0] < 1:
            raise GenSpecError("blocks need at least one author with at least one paper")
        if self.coauthors_per_paper[0] < 0 or self.citation_density < 0:
            raise GenSpecError("counts must be non-negative")
        if len(self.giant_blocks) > self.n_blocks:
            raise GenSpecError("more giant blocks than blocks")
        if self.n_topics < 1 or self.n_blocks < 1:
            raise GenSpecError("n_topics and n_blocks must be positive")

    @classmethod
    def from_mapping(cls, values: dict) -> "GenSpec":
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise GenSpecError(f"unknown generator keys: {', '.join(sorted(unknown))}")
        return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in values.items()})

    @classmethod
    def load(cls, path: str | Path) -> "GenSpec":
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
        return cls.from_mapping(raw.get("generator", raw))

    def to_mapping(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}

    def noiseless(self) -> "GenSpec":
        return GenSpec.from_mapping({**self.to_mapping(), **{k: 0.0 for k in NOISE_RATES}})


def default_spec_path() -> Path:
    return Path(__file__).parent / "data" / "default_spec.toml"


def default_spec() -> GenSpec:
    return GenSpec.load(default_spec_path())


def _stream(seed: int, name: str) -> np.random.Generator:
    return np.random.default_rng([seed, zlib.crc32(name.encode())])


class _Words:
    """Unique pseudo-words so vocabularies never collide by accident."""

    def __init__(self, rng: np.random.Generator):
        self.rng = rng
        self.used: set[str] = set()

    def make(self, syllables: tuple[int, int] = (2, 3)) -> str:
        tries = 0
        while True:
            # a crowded syllable range spills over into longer words
            k = int(self.rng.integers(syllables[0], syllables[1] + 1)) + tries // 50
            tries += 1
            c = self.rng.integers(len(_CONSONANTS), size=k)
            v = self.rng.integers(len(_VOWELS), size=k)
            w = "".join(_CONSONANTS[i] + _VOWELS[j] for i, j in zip(c, v))
            if w not in self.used:
                self.used.add(w)
                return w

    def many(self, n: int, syllables=(2, 3)) -> list[str]:
        return [self.make(syllables) for _ in range(n)]


@lru_cache(maxsize=None)
def _zipf_cdf(n: int, a: float) -> np.ndarray:
    weights = 1.0 / np.arange(1, n + 1) ** a
    return np.cumsum(weights) / weights.sum()


def _zipf_pick(rng: np.random.Generator, items: list, a: float = 1.1):
    cdf = _zipf_cdf(len(items), a)
    return items[min(int(np.searchsorted(cdf, rng.random(), side="right")), len(items) - 1)]


@dataclass
class _Topic:
    vocab: list[str]
    journals: list[str]
    categories: list[str]
    external: list[str]


@dataclass
class _Person:
    surname: str
    first_name: str
    initials: list[str]
    city: tuple[str, str]


@dataclass
class _Author:
    gold: str
    first_name: str
    initials: list[str]
    topic: int
    focus: list[str]
    journals: list[str]
    keywords: list[str]
    coauthors: list[int]
    email: str
    city: tuple[str, str]
    collab_cities: list[tuple[str, str]]
    grants: list[str]
    personal_refs: list[str]
    n_papers: int


class _Generator:
    def __init__(self, spec: GenSpec):
        self.spec = spec
        self.words = _Words(_stream(spec.seed, "words"))
        self.topics = self._make_topics()
        self.generic = self.words.many(40, (2, 2))
        names_rng = _stream(spec.seed, "names")
        self.first_names = {
            ch: [ch + self.words.make((2, 3))[1:] for _ in range(10)]
            for ch in _INITIALS
        }
        self.shared_cities = [(str(names_rng.choice(_COUNTRIES)), self.words.make((2, 2)))
                              for _ in range(12)]
        self.names_rng = names_rng
        self.persons: list[_Person] = []
        self.popular: list[int] = [self._new_person() for _ in range(20)]

    def _make_topics(self) -> list[_Topic]:
        topics = []
        for t in range(self.spec.n_topics):
            vocab = self.words.many(40)
            journals = [" ".join(self.words.many(2)) for _ in range(4)]
            categories = [" ".join(self.words.many(1, (3, 3))) for _ in range(2)]
            external = [f"X{t:03d}-{k:04d}" for k in range(250)]
            topics.append(_Topic(vocab, journals, categories, external))
        return topics

    def _city(self, rng) -> tuple[str, str]:
        if rng.random() < self.spec.shared_city_rate:
            return self.shared_cities[int(rng.integers(len(self.shared_cities)))]
        return (str(rng.choice(_COUNTRIES)), self.words.make((2, 3)))

    def _new_person(self) -> int:
        rng = self.names_rng
        surname = self.words.make((2, 3)).capitalize()
        initial = str(rng.choice(list(_INITIALS)))
        first = _zipf_pick(rng, self.first_names[initial])
        initials = [initial] + ([str(rng.choice(list(_INITIALS)))] if rng.random() < 0.4 else [])
        self.persons.append(_Person(surname, first.capitalize(), initials, self._city(rng)))
        return len(self.persons) - 1

    def _block_sizes(self, rng) -> list[int]:
        s = self.spec
        sizes = []
        for b in range(s.n_blocks):
            if b < len(s.giant_blocks):
                sizes.append(int(s.giant_blocks[b]))
            elif rng.random() < s.tail_fraction:
                sizes.append(int(rng.integers(s.tail_authors[0], s.tail_authors[1] + 1)))
            else:
                sizes.append(int(rng.integers(s.authors_per_block[0], s.authors_per_block[1] + 1)))
        return sizes

    def _surname(self, rng) -> str:
        name = self.words.make((2, 3))
        if rng.random() < 0.1:
            pos = int(rng.integers(len(name)))
            if name[pos] in _ACCENTED:
                name = name[:pos] + _ACCENTED[name[pos]] + name[pos + 1:]
        return name.capitalize()

    def _author(self, rng, gold: str, initial: str, block_authors: list[_Author]) -> _Author:
        s = self.spec
        if block_authors and rng.random() < s.homonym_rate:
            first = block_authors[int(rng.integers(len(block_authors)))].first_name
        else:
            first = _zipf_pick(rng, self.first_names[initial]).capitalize()
        initials = [initial]
        if rng.random() < s.middle_initial_prob:
            initials.append(str(rng.choice(list(_INITIALS))))
        used = sorted({a.topic for a in block_authors})
        free = [t for t in range(s.n_topics) if t not in used]
        if used and (rng.random() < s.topic_overlap or not free):
            topic = used[int(rng.integers(len(used)))]
        else:
            topic = free[int(rng.integers(len(free)))]
        tp = self.topics[topic]
        pool = [self._new_person() for _ in range(s.coauthor_pool_size)]
        city = self._city(rng)
        return _Author(
            gold=gold,
            first_name=first,
            initials=initials,
            topic=topic,
            focus=list(rng.choice(tp.vocab, size=8, replace=False)),
            journals=list(rng.choice(tp.journals, size=2, replace=False)),
            keywords=list(rng.choice(tp.vocab, size=6, replace=False)),
            coauthors=pool,
            email=f"{first.lower()}.{gold.lower()}@{self.words.make((2, 2))}.org",
            city=city,
            collab_cities=[self._city(rng) for _ in range(2)],
            grants=[f"G-{gold}-{k}" for k in range(2)],
            personal_refs=list(rng.choice(tp.external, size=30, replace=False)),
            n_papers=int(rng.integers(s.papers_per_author[0], s.papers_per_author[1] + 1)),
        )

    def _text(self, rng, author: _Author, n: int) -> list[str]:
        s = self.spec
        vocab = self.topics[author.topic].vocab
        u, v = rng.random(n), rng.random(n)
        idx = rng.integers(0, 1 << 30, size=n)
        out = []
        for ui, vi, k in zip(u, v, idx.tolist()):
            if ui < s.generic_word_rate:
                out.append(self.generic[k % len(self.generic)])
            elif vi < s.focus_word_rate:
                out.append(author.focus[k % len(author.focus)])
            else:
                out.append(vocab[k % len(vocab)])
        return out

    def generate(self) -> tuple[list[dict], list[dict]]:
        s = self.spec
        block_rng = _stream(s.seed, "blocks")
        author_rng = _stream(s.seed, "authors")
        paper_rng = _stream(s.seed, "papers")
        cite_rng = _stream(s.seed, "citations")
        mention_rng = _stream(s.seed, "mentions")

        sizes = self._block_sizes(block_rng)
        blocks = []
        seen_keys = set()
        for b, n_auth in enumerate(sizes):
            while True:
                surname = self._surname(block_rng)
                initial = str(block_rng.choice(list(_INITIALS)))
                if (surname.lower(), initial) not in seen_keys:
                    seen_keys.add((surname.lower(), initial))
                    break
            authors: list[_Author] = []
            for a in range(n_auth):
                authors.append(self._author(author_rng, f"A{b:04d}-{a:04d}", initial, authors))
            blocks.append((surname, initial, authors))

        # paper skeletons
        papers = []
        for surname, initial, authors in blocks:
            for author in authors:
                start = int(paper_rng.integers(s.year_range[0], max(s.year_range[0], s.year_range[1] - 5) + 1))
                years = sorted(int(min(s.year_range[1], start + paper_rng.integers(0, 16)))
                               for _ in range(author.n_papers))
                for year in years:
                    papers.append({"author": author, "surname": surname, "year": year})
        for i, p in enumerate(papers):
            p["paper_id"] = f"P{i:07d}"

        by_topic: dict[int, list[tuple[int, str]]] = {}
        by_author: dict[str, list[tuple[int, str]]] = {}
        for p in papers:
            by_topic.setdefault(p["author"].topic, []).append((p["year"], p["paper_id"]))
            by_author.setdefault(p["author"].gold, []).append((p["year"], p["paper_id"]))
        for v in (*by_topic.values(), *by_author.values()):
            v.sort()

        paper_rows, mention_rows = [], []
        mcount = 0
        for p in papers:
            a: _Author = p["author"]
            tp = self.topics[a.topic]
            year = p["year"]
            rng = paper_rng
            title = self._text(rng, a, int(rng.integers(6, 11)))
            abstract = self._text(rng, a, int(rng.integers(20, 41)))
            if rng.random() < s.journal_loyalty:
                journal = a.journals[int(rng.integers(len(a.journals)))]
            else:
                journal = tp.journals[int(rng.integers(len(tp.journals)))]
            cats = {tp.categories[0]}
            if rng.random() < 0.5:
                cats.add(tp.categories[1])
            keywords = set(rng.choice(a.keywords, size=3, replace=False))

            refs = set()
            earlier_topic = by_topic[a.topic][:bisect_left(by_topic[a.topic], (year, ""))]
            for _ in range(int(cite_rng.poisson(s.citation_density))):
                u = cite_rng.random()
                if u < s.personal_reference_share:
                    refs.add(_zipf_pick(cite_rng, a.personal_refs, 0.8))
                elif u < s.personal_reference_share + 0.15 and earlier_topic:
                    refs.add(earlier_topic[int(cite_rng.integers(len(earlier_topic)))][1])
                else:
                    refs.add(tp.external[int(cite_rng.integers(len(tp.external)))])
            own = by_author[a.gold]
            earlier_own = own[:bisect_left(own, (year, ""))]
            if earlier_own and cite_rng.random() < s.self_citation_prob:
                for _ in range(int(cite_rng.integers(1, 3))):
                    refs.add(earlier_own[int(cite_rng.integers(len(earlier_own)))][1])

            n_co = int(mention_rng.integers(s.coauthors_per_paper[0], s.coauthors_per_paper[1] + 1))
            co = []
            for _ in range(n_co):
                if mention_rng.random() < s.coauthor_homonym_rate:
                    person = self.popular[int(mention_rng.integers(len(self.popular)))]
                else:
                    person = a.coauthors[int(mention_rng.integers(len(a.coauthors)))]
                if person not in co:
                    co.append(person)
            pub_addr = {a.city} if mention_rng.random() < 0.7 else set()
            for person in co:
                pub_addr.add(a.collab_cities[int(mention_rng.integers(2))])

            paper_rows.append({
                "paper_id": p["paper_id"],
                "title": " ".join(title).capitalize(),
                "abstract": " ".join(abstract).capitalize() + ".",
                "journal": journal.title(),
                "year": year,
                "subject_categories": sorted(cats),
                "keywords": sorted(keywords),
                "references": sorted(refs),
                "grant_numbers": [a.grants[int(rng.integers(2))]] if rng.random() < s.grant_prob else [],
                "pub_addresses": [{"country": c, "city": t.title()} for c, t in sorted(pub_addr)],
            })

            short = mention_rng.random() < s.synonym_rate
            first = a.first_name[0] + "." if short else a.first_name
            initials = a.initials[:1] if short else a.initials
            email = a.email if mention_rng.random() >= s.missing_email_prob else None
            addrs = [a.city] if mention_rng.random() < s.author_address_prob else []
            mention_rows.append({
                "mention_id": f"M{mcount:08d}",
                "paper_id": p["paper_id"],
                "surname": p["surname"],
                "first_name": first,
                "initials": [x.upper() for x in initials],
                "email": email,
                "author_addresses": [{"country": c, "city": t.title()} for c, t in addrs],
                "gold_author_id": a.gold,
            })
            mcount += 1
            for person in co:
                pr = self.persons[person]
                mention_rows.append({
                    "mention_id": f"M{mcount:08d}",
                    "paper_id": p["paper_id"],
                    "surname": pr.surname,
                    "first_name": pr.first_name,
                    "initials": [x.upper() for x in pr.initials],
                    "email": None,
                    "author_addresses": [],
                    "gold_author_id": f"C{person:06d}",
                })
                mcount += 1
        return paper_rows, mention_rows


def generate(spec: GenSpec) -> tuple[list[dict], list[dict]]:
    """Paper and mention records (JSON-ready dicts) for ``spec``."""
    return _Generator(spec).generate()


def write_jsonl(rows: list[dict], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")


def generate_to_dir(spec: GenSpec, out_dir: str | Path) -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    papers, mentions = generate(spec)
    pp, mp = out / "papers.jsonl", out / "mentions.jsonl"
    write_jsonl(papers, pp)
    write_jsonl(mentions, mp)
    return pp, mp
