"""Name blocking: group mentions by canonical "surname, first initial" key."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .corpus import Corpus

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Block:
    key: str
    mention_ids: tuple[str, ...]

    @property
    def size(self) -> int:
        return len(self.mention_ids)

    @property
    def flagged(self) -> bool:
        """True when the key has no first initial."""
        return self.key.endswith(", ")


@dataclass
class FilterStats:
    kept: int = 0
    dropped_few_authors: list[str] = field(default_factory=list)
    dropped_no_gold: list[str] = field(default_factory=list)


def build_blocks(corpus: Corpus) -> list[Block]:
    groups: dict[str, list[str]] = {}
    for mid, mention in corpus.mentions.items():
        groups.setdefault(mention.key, []).append(mid)
    blocks = [Block(key, tuple(sorted(mids))) for key, mids in sorted(groups.items())]
    flagged = [b.key for b in blocks if b.flagged]
    if flagged:
        logger.warning("%d blocks have no first initial: %s", len(flagged), ", ".join(flagged[:5]))
    return blocks


def gold_author_count(block: Block, corpus: Corpus) -> int:
    ids = {corpus.mentions[m].gold_author_id for m in block.mention_ids}
    ids.discard(None)
    return len(ids)


def filter_blocks(
    blocks: list[Block], corpus: Corpus, min_gold_authors: int = 5
) -> tuple[list[Block], FilterStats]:
    """Keep blocks with at least ``min_gold_authors`` distinct gold identities.

    ``min_gold_authors <= 0`` disables filtering entirely.
    """
    stats = FilterStats()
    if min_gold_authors <= 0:
        stats.kept = len(blocks)
        return list(blocks), stats
    kept = []
    for block in blocks:
        n = gold_author_count(block, corpus)
        if n == 0:
            stats.dropped_no_gold.append(block.key)
        elif n < min_gold_authors:
            stats.dropped_few_authors.append(block.key)
        else:
            kept.append(block)
    stats.kept = len(kept)
    logger.info(
        "kept %d blocks; dropped %d with < %d gold authors and %d without gold ids",
        stats.kept, len(stats.dropped_few_authors), min_gold_authors, len(stats.dropped_no_gold),
    )
    return kept, stats


def size_histogram(blocks: list[Block]) -> list[tuple[int, int]]:
    counts: dict[int, int] = {}
    for b in blocks:
        counts[b.size] = counts.get(b.size, 0) + 1
    return sorted(counts.items())
