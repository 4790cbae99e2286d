"""Domain types, corpus ingestion and cross-reference indexes.

A corpus is two line-delimited JSON files: ``papers.jsonl`` with one
publication per line and ``mentions.jsonl`` with one (author, paper)
occurrence per line. Ingestion validates both, normalizes strings and builds
the citation and co-author indexes the similarity functions need.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import pickle
import re
import unicodedata
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from pathlib import Path
from typing import Iterable, Iterator

logger = logging.getLogger(__name__)

Address = tuple[str, str]

PAPER_KEYS = frozenset({
    "paper_id", "title", "abstract", "journal", "year", "subject_categories",
    "keywords", "references", "grant_numbers", "pub_addresses",
})
MENTION_KEYS = frozenset({
    "mention_id", "paper_id", "surname", "first_name", "initials", "email",
    "author_addresses", "gold_author_id",
})

# bump when the pickled layout of Corpus changes
_CACHE_FORMAT = "corpus-cache-1"

_TOKEN_SPLIT = re.compile(r"[^0-9a-z]+")
_WS = re.compile(r"\s+")


class CorpusError(ValueError):
    """Invalid corpus input (malformed line, broken reference, bad field)."""


def strip_diacritics(text: str) -> str:
    if text.isascii():  # NFKD leaves ASCII unchanged
        return text
    decomposed = unicodedata.normalize("NFKD", text)
    return "".join(ch for ch in decomposed if not unicodedata.combining(ch))


@lru_cache(maxsize=1 << 16)
def normalize_text(text: str | None) -> str:
    """Lowercase, strip diacritics and collapse whitespace."""
    if not text:
        return ""
    return _WS.sub(" ", strip_diacritics(text).lower()).strip()


def tokenize(text: str | None) -> list[str]:
    """Split text into lowercase alphanumeric tokens of length >= 2.

    >>> tokenize("The Matthew effect in science")
    ['the', 'matthew', 'effect', 'in', 'science']
    """
    if not text:
        return []
    return [t for t in _TOKEN_SPLIT.split(strip_diacritics(text).lower()) if len(t) >= 2]


def normalize_first_name(first_name: str | None) -> str:
    """Full first name for matching; initials-only forms ("R.", "R") give ""."""
    norm = normalize_text(first_name).replace(".", " ")
    norm = _WS.sub(" ", norm).strip()
    if len(norm.replace(" ", "")) <= 1:
        return ""
    return norm


def canonicalize(surname: str, first_name: str, *, mention_id: str | None = None) -> str:
    """Canonical blocking key: normalized surname plus first initial.

    >>> canonicalize("Merton", "Robert")
    'merton, r'
    >>> canonicalize("MÜLLER", "jörg")
    'muller, j'
    """
    norm_surname = normalize_text(surname)
    if not norm_surname:
        who = f" (mention {mention_id})" if mention_id else ""
        raise CorpusError(f"empty surname{who}")
    letters = [ch for ch in normalize_text(first_name) if ch.isalnum()]
    initial = letters[0] if letters else ""
    return f"{norm_surname}, {initial}"


def _addresses(raw, where: str) -> frozenset[Address]:
    out = set()
    for item in raw or ():
        if not isinstance(item, dict):
            raise CorpusError(f"{where}: address entries must be objects")
        out.add((normalize_text(item.get("country")), normalize_text(item.get("city"))))
    return frozenset(out)


def _str_set(raw, normalize: bool = True) -> frozenset[str]:
    if raw is None:
        return frozenset()
    if isinstance(raw, str):
        raise CorpusError("expected a list, got a string")
    if normalize:
        return frozenset(v for v in (normalize_text(x) for x in raw) if v)
    return frozenset(str(x) for x in raw if str(x))


@dataclass(frozen=True)
class PaperRecord:
    paper_id: str
    title: str = ""
    abstract: str = ""
    journal: str = ""
    year: int = 0
    subject_categories: frozenset[str] = frozenset()
    keywords: frozenset[str] = frozenset()
    references: frozenset[str] = frozenset()
    grant_numbers: frozenset[str] = frozenset()
    pub_addresses: frozenset[Address] = frozenset()
    title_tokens: tuple[str, ...] = field(init=False, compare=False)
    abstract_tokens: tuple[str, ...] = field(init=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "title_tokens", tuple(tokenize(self.title)))
        object.__setattr__(self, "abstract_tokens", tuple(tokenize(self.abstract)))
        if self.paper_id in self.references:
            object.__setattr__(self, "references", self.references - {self.paper_id})

    @classmethod
    def from_json(cls, obj: dict, where: str = "") -> "PaperRecord":
        pid = obj.get("paper_id")
        if not isinstance(pid, str) or not pid:
            raise CorpusError(f"{where}: missing paper_id")
        try:
            year = int(obj.get("year") or 0)
        except (TypeError, ValueError):
            raise CorpusError(f"{where}: year must be an integer") from None
        try:
            return cls(
                paper_id=pid,
                title=obj.get("title") or "",
                abstract=obj.get("abstract") or "",
                journal=normalize_text(obj.get("journal")),
                year=year,
                subject_categories=_str_set(obj.get("subject_categories")),
                keywords=_str_set(obj.get("keywords")),
                references=_str_set(obj.get("references"), normalize=False),
                grant_numbers=_str_set(obj.get("grant_numbers"), normalize=False),
                pub_addresses=_addresses(obj.get("pub_addresses"), where),
            )
        except CorpusError as exc:
            raise CorpusError(f"{where}: {exc}") from None

    def to_json(self) -> dict:
        return {
            "paper_id": self.paper_id,
            "title": self.title,
            "abstract": self.abstract,
            "journal": self.journal,
            "year": self.year,
            "subject_categories": sorted(self.subject_categories),
            "keywords": sorted(self.keywords),
            "references": sorted(self.references),
            "grant_numbers": sorted(self.grant_numbers),
            "pub_addresses": [{"country": c, "city": t} for c, t in sorted(self.pub_addresses)],
        }


@dataclass(frozen=True)
class AuthorMention:
    mention_id: str
    paper_id: str
    surname: str
    first_name: str = ""
    initials: tuple[str, ...] = ()
    email: str | None = None
    author_addresses: frozenset[Address] = frozenset()
    gold_author_id: str | None = None

    @cached_property
    def key(self) -> str:
        return canonicalize(self.surname, self.first_name or "".join(self.initials),
                            mention_id=self.mention_id)

    @cached_property
    def norm_first_name(self) -> str:
        return normalize_first_name(self.first_name)

    @classmethod
    def from_json(cls, obj: dict, where: str = "") -> "AuthorMention":
        mid = obj.get("mention_id")
        if not isinstance(mid, str) or not mid:
            raise CorpusError(f"{where}: missing mention_id")
        pid = obj.get("paper_id")
        if not isinstance(pid, str) or not pid:
            raise CorpusError(f"{where}: mention {mid} has no paper_id")
        surname = obj.get("surname") or ""
        if not normalize_text(surname):
            raise CorpusError(f"{where}: empty surname (mention {mid})")
        first_name = obj.get("first_name") or ""
        initials = tuple(
            ch for ch in (normalize_text(str(x))[:1] for x in obj.get("initials") or ()) if ch
        )
        if not initials:
            letters = [ch for ch in normalize_text(first_name) if ch.isalnum()]
            if letters:
                initials = (letters[0],)
        email = normalize_text(obj.get("email")) or None
        gold = obj.get("gold_author_id")
        return cls(
            mention_id=mid,
            paper_id=pid,
            surname=surname,
            first_name=first_name,
            initials=initials,
            email=email,
            author_addresses=_addresses(obj.get("author_addresses"), where),
            gold_author_id=str(gold) if gold not in (None, "") else None,
        )

    def to_json(self) -> dict:
        return {
            "mention_id": self.mention_id,
            "paper_id": self.paper_id,
            "surname": self.surname,
            "first_name": self.first_name,
            "initials": list(self.initials),
            "email": self.email,
            "author_addresses": [{"country": c, "city": t} for c, t in sorted(self.author_addresses)],
            "gold_author_id": self.gold_author_id,
        }


@dataclass
class Corpus:
    """Immutable-after-construction view over papers, mentions and indexes."""

    papers: dict[str, PaperRecord]
    mentions: dict[str, AuthorMention]
    citers: dict[str, frozenset[str]] = field(default_factory=dict)
    coauthors: dict[str, frozenset[str]] = field(default_factory=dict)
    paper_mentions: dict[str, tuple[str, ...]] = field(default_factory=dict)

    @classmethod
    def build(cls, papers: Iterable[PaperRecord], mentions: Iterable[AuthorMention]) -> "Corpus":
        paper_map: dict[str, PaperRecord] = {}
        for p in papers:
            if p.paper_id in paper_map:
                raise CorpusError(f"duplicate paper_id {p.paper_id!r}")
            paper_map[p.paper_id] = p
        mention_map: dict[str, AuthorMention] = {}
        for m in mentions:
            if m.mention_id in mention_map:
                raise CorpusError(f"duplicate mention_id {m.mention_id!r}")
            mention_map[m.mention_id] = m
        dangling = sorted(mid for mid, m in mention_map.items() if m.paper_id not in paper_map)
        if dangling:
            raise CorpusError("mentions reference unknown papers: " + ", ".join(dangling))

        paper_map = dict(sorted(paper_map.items()))
        mention_map = dict(sorted(mention_map.items()))

        citers: dict[str, set[str]] = {}
        for pid, p in paper_map.items():
            for ref in p.references:
                citers.setdefault(ref, set()).add(pid)

        by_paper: dict[str, list[str]] = {}
        keys: dict[str, str] = {}
        for mid, m in mention_map.items():
            by_paper.setdefault(m.paper_id, []).append(mid)
            keys[mid] = m.key
        coauthors = {}
        for mid, m in mention_map.items():
            own = keys[mid]
            coauthors[mid] = frozenset(
                keys[o] for o in by_paper[m.paper_id] if o != mid and keys[o] != own
            )
        return cls(
            papers=paper_map,
            mentions=mention_map,
            citers={k: frozenset(v) for k, v in sorted(citers.items())},
            coauthors=coauthors,
            paper_mentions={k: tuple(v) for k, v in sorted(by_paper.items())},
        )

    def paper_of(self, mention_id: str) -> PaperRecord:
        return self.papers[self.mentions[mention_id].paper_id]

    def citers_of(self, paper_id: str) -> frozenset[str]:
        return self.citers.get(paper_id, frozenset())

    def content_hash(self) -> str:
        """Order-independent SHA-256 over the canonical serialization (memoized)."""
        cached = self.__dict__.get("_content_hash")
        if cached is not None:
            return cached
        h = hashlib.sha256()
        for line in _dump_lines(self.papers.values()):
            h.update(line.encode("utf-8"))
        h.update(b"\x00")
        for line in _dump_lines(self.mentions.values()):
            h.update(line.encode("utf-8"))
        self.__dict__["_content_hash"] = h.hexdigest()
        return self.__dict__["_content_hash"]


def _dump_lines(records) -> Iterator[str]:
    for rec in records:
        yield json.dumps(rec.to_json(), ensure_ascii=False, sort_keys=False) + "\n"


def _read_jsonl(path: Path, known: frozenset[str], what: str) -> Iterator[tuple[int, dict]]:
    warned: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from None
            if not isinstance(obj, dict):
                raise CorpusError(f"{path}:{lineno}: expected a JSON object")
            for key in obj.keys() - known - warned:
                logger.warning("%s: ignoring unknown %s key %r", path, what, key)
                warned.add(key)
            yield lineno, obj


def ingest_corpus(papers_path: str | Path, mentions_path: str | Path) -> Corpus:
    """Read, validate and index a corpus from its two JSONL files."""
    papers_path, mentions_path = Path(papers_path), Path(mentions_path)
    for p in (papers_path, mentions_path):
        if not p.is_file():
            raise CorpusError(f"{p}: no such file")
    papers = []
    seen: dict[str, int] = {}
    for lineno, obj in _read_jsonl(papers_path, PAPER_KEYS, "paper"):
        rec = PaperRecord.from_json(obj, f"{papers_path}:{lineno}")
        if rec.paper_id in seen:
            raise CorpusError(
                f"{papers_path}:{lineno}: duplicate paper_id {rec.paper_id!r} "
                f"(first seen on line {seen[rec.paper_id]})"
            )
        seen[rec.paper_id] = lineno
        papers.append(rec)
    mentions = []
    mseen: dict[str, int] = {}
    for lineno, obj in _read_jsonl(mentions_path, MENTION_KEYS, "mention"):
        rec = AuthorMention.from_json(obj, f"{mentions_path}:{lineno}")
        if rec.mention_id in mseen:
            raise CorpusError(
                f"{mentions_path}:{lineno}: duplicate mention_id {rec.mention_id!r}"
            )
        mseen[rec.mention_id] = lineno
        mentions.append(rec)
    corpus = Corpus.build(papers, mentions)
    flagged = sum(1 for m in corpus.mentions.values() if not m.initials)
    if flagged:
        logger.warning("%d mentions have no first initial; blocked under surname only", flagged)
    logger.info("ingested %d papers, %d mentions", len(corpus.papers), len(corpus.mentions))
    return corpus


def load_corpus_dir(directory: str | Path, cache_dir: str | Path | None = None) -> Corpus:
    """Ingest ``papers.jsonl`` and ``mentions.jsonl`` from ``directory``.

    With ``cache_dir`` the validated corpus is pickled under a key derived
    from the raw bytes of both files, so later loads of unchanged files skip
    parsing and validation.
    """
    directory = Path(directory)
    papers, mentions = directory / "papers.jsonl", directory / "mentions.jsonl"
    if cache_dir is None:
        return ingest_corpus(papers, mentions)
    h = hashlib.sha256(_CACHE_FORMAT.encode())
    for p in (papers, mentions):
        if not p.is_file():
            raise CorpusError(f"{p}: no such file")
        h.update(p.read_bytes())
        h.update(b"\x00")
    path = Path(cache_dir) / f"corpus-{h.hexdigest()[:32]}.pkl"
    if path.is_file():
        try:
            with open(path, "rb") as fh:
                corpus = pickle.load(fh)
            if isinstance(corpus, Corpus):
                logger.info("loaded corpus from cache %s", path)
                return corpus
        except Exception:  # stale or truncated cache entries are rebuilt
            logger.warning("ignoring unreadable corpus cache %s", path)
    corpus = ingest_corpus(papers, mentions)
    corpus.content_hash()
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(f".{os.getpid()}.tmp")
        with open(tmp, "wb") as fh:
            pickle.dump(corpus, fh, protocol=pickle.HIGHEST_PROTOCOL)
        os.replace(tmp, path)
    except OSError as exc:
        logger.warning("could not write corpus cache: %s", exc)
    return corpus


def write_corpus(corpus: Corpus, papers_path: str | Path, mentions_path: str | Path) -> None:
    with open(papers_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.writelines(_dump_lines(corpus.papers.values()))
    with open(mentions_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.writelines(_dump_lines(corpus.mentions.values()))
