"""Unsupervised author name disambiguation: four published strategies plus a
naive baseline, evaluation metrics, threshold fitting and a synthetic corpus
generator."""

__version__ = "0.1.0"

from .algorithms import (
    ALGORITHMS, BackesParams, BaselineParams, CaronParams, CotaParams, SchulzParams,
    run_backes, run_baseline, run_caron, run_cota, run_schulz,
)
from .blocking import Block, build_blocks, filter_blocks
from .clustering import Clustering, MergeTrace, cut_trace, greedy_max_merge
from .corpus import AuthorMention, Corpus, PaperRecord, ingest_corpus, load_corpus_dir
from .evaluation import Counts, EvalReport, aggregate, quality_by_size

__all__ = [
    "ALGORITHMS", "AuthorMention", "BackesParams", "BaselineParams", "Block", "CaronParams",
    "Clustering", "Corpus", "CotaParams", "Counts", "EvalReport", "MergeTrace", "PaperRecord",
    "SchulzParams", "aggregate", "build_blocks", "cut_trace", "filter_blocks", "greedy_max_merge",
    "ingest_corpus", "load_corpus_dir", "quality_by_size", "run_backes", "run_baseline",
    "run_caron", "run_cota", "run_schulz",
]
