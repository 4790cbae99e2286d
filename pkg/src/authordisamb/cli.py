"""Command-line pipeline: generate, ingest, block, disambiguate, evaluate, fit, report.

Every subcommand writes its products under ``--out`` together with one
``manifest.json``. Exit status is 0 on success, 1 for invalid input (files,
parameters, usage) and 2 when an internal invariant is violated.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import hashlib
import io
import json
import logging
import math
import os
import re
import sys
from pathlib import Path
from typing import Sequence

import tomli_w

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__, parallel
from .algorithms import ALGORITHMS, PARAM_TYPES, ScoringContext, run_algorithm
from .blocking import Block, build_blocks, filter_blocks, size_histogram
from .clustering import Clustering
from .corpus import CorpusError, load_corpus_dir
from .evaluation import (
    METRICS, Counts, EvalReport, aggregate, clustering_counts, curve_csv, fmt, mean_report,
    quality_by_size,
)
from .features import ScoringConfig, block_weights_rows, build_general_names
from .synthgen import GenSpec, GenSpecError, default_spec, generate_to_dir
from .tuning import MODES, OBJECTIVES, CandidateGrid, FitError, GridSweep, default_grid

logger = logging.getLogger("authordisamb")

MANIFEST = "manifest.json"


class UsageError(Exception):
    pass


class InvariantViolation(RuntimeError):
    def __init__(self, invariant: str, detail: str):
        super().__init__(f"invariant violated: {invariant}: {detail}")
        self.invariant = invariant


VALIDATION_ERRORS = (UsageError, CorpusError, GenSpecError, FitError, ValueError, OSError,
                     tomllib.TOMLDecodeError, KeyError)


# --- logging and manifests ---------------------------------------------------

class _JsonFormatter(logging.Formatter):
    def format(self, record: logging.LogRecord) -> str:
        out = {"level": record.levelname.lower(), "logger": record.name, "msg": record.getMessage()}
        if record.exc_info:
            out["exc"] = self.formatException(record.exc_info)
        return json.dumps(out, ensure_ascii=False)


def _setup_logging(level: str) -> None:
    root = logging.getLogger()
    for h in list(root.handlers):
        if getattr(h, "_authordisamb", False):
            root.removeHandler(h)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(_JsonFormatter())
    handler._authordisamb = True
    root.addHandler(handler)
    root.setLevel(getattr(logging, level.upper()))


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_manifest(out: Path, subcommand: str, *, corpus_hash: str | None = None,
                   algorithm: str | None = None, params: dict | None = None,
                   extra: dict | None = None) -> dict:
    """Write ``manifest.json`` listing every product in ``out`` with its hash."""
    outputs = {}
    for p in sorted(out.rglob("*")):
        if p.is_file() and p.name != MANIFEST:
            outputs[p.relative_to(out).as_posix()] = _sha256(p)
    manifest = {
        "subcommand": subcommand,
        "corpus_hash": corpus_hash,
        "algorithm": algorithm,
        "params": params,
        "tool_version": __version__,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        **(extra or {}),
        "outputs": outputs,
    }
    (out / MANIFEST).write_text(json.dumps(_jsonable(manifest), indent=2, sort_keys=True) + "\n",
                                encoding="utf-8")
    return manifest


def read_manifest(directory: Path) -> dict:
    path = directory / MANIFEST
    if not path.is_file():
        raise UsageError(f"{directory}: no {MANIFEST}; not an output directory of this tool")
    return json.loads(path.read_text(encoding="utf-8"))


def _jsonable(obj):
    if isinstance(obj, float) and math.isinf(obj):
        return "inf" if obj > 0 else "-inf"
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _csv_text(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def block_slug(key: str) -> str:
    """Filesystem-safe, collision-free file stem for a block key."""
    stem = re.sub(r"[^0-9a-z]+", "_", key.lower()).strip("_") or "block"
    return f"{stem}-{hashlib.sha1(key.encode('utf-8')).hexdigest()[:8]}"


# --- shared helpers ----------------------------------------------------------

def cache_dir(args) -> Path | None:
    if args.no_cache:
        return None
    if args.cache_dir:
        return Path(args.cache_dir)
    env = os.environ.get("AUTHORDISAMB_CACHE")
    if env:
        return Path(env)
    base = os.environ.get("XDG_CACHE_HOME") or Path.home() / ".cache"
    return Path(base) / "authordisamb"


def _load_corpus(args):
    if not args.corpus:
        raise UsageError("--corpus DIR is required")
    return load_corpus_dir(args.corpus, cache_dir(args))


def _blocks(corpus, min_authors: int) -> list[Block]:
    blocks, stats = filter_blocks(build_blocks(corpus), corpus, min_authors)
    if not blocks:
        raise UsageError("no blocks left after filtering")
    return blocks


def _context(args, corpus) -> ScoringContext:
    cfg = ScoringConfig.load(args.config)
    return ScoringContext(cfg.table, build_general_names(corpus, cfg.general_name_threshold))


def load_params_file(path: str | None, algorithm: str | None) -> tuple[str, object, dict]:
    """(algorithm, default params, per-block params) from a params/fit config."""
    raw: dict = {}
    if path:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    declared = raw.get("algorithm")
    if algorithm and declared and algorithm != declared:
        raise UsageError(f"params file is for {declared!r} but --algorithm is {algorithm!r}")
    algorithm = algorithm or declared
    if algorithm not in ALGORITHMS:
        raise UsageError(f"choose an algorithm from {', '.join(ALGORITHMS)}")
    cls = PARAM_TYPES[algorithm]
    base_raw = raw.get("params", {} if "algorithm" in raw or "blocks" in raw else raw)
    base = cls.from_dict(base_raw)
    blocks = {k: cls.from_dict({**base.to_dict(), **v}) for k, v in raw.get("blocks", {}).items()}
    return algorithm, base, blocks


def _disambiguate_block(shared, item):
    block, params = item
    clustering, trace = run_algorithm(shared["algorithm"], block, shared["corpus"], params,
                                      shared["context"])
    return clustering.to_csv(), (trace.to_csv() if trace is not None else None)


# --- subcommands -------------------------------------------------------------

def cmd_generate(args, out: Path) -> None:
    spec = GenSpec.load(args.spec) if args.spec else default_spec()
    if args.seed is not None:
        spec = GenSpec.from_mapping({**spec.to_mapping(), "seed": args.seed})
    generate_to_dir(spec, out)
    corpus = load_corpus_dir(out, cache_dir(args))
    _write_text(out / "spec.toml", tomli_w.dumps({"generator": spec.to_mapping()}))
    write_manifest(out, "generate", corpus_hash=corpus.content_hash(),
                   params={"generator": spec.to_mapping()})


def cmd_ingest(args, out: Path) -> None:
    corpus = _load_corpus(args)
    blocks = build_blocks(corpus)
    summary = {
        "papers": len(corpus.papers),
        "mentions": len(corpus.mentions),
        "blocks": len(blocks),
        "flagged_blocks": sum(b.flagged for b in blocks),
        "gold_annotated_mentions": sum(m.gold_author_id is not None for m in corpus.mentions.values()),
        "corpus_hash": corpus.content_hash(),
    }
    _write_text(out / "ingest.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(json.dumps(summary, sort_keys=True))
    write_manifest(out, "ingest", corpus_hash=summary["corpus_hash"])


def cmd_block(args, out: Path) -> None:
    corpus = _load_corpus(args)
    all_blocks = build_blocks(corpus)
    kept, stats = filter_blocks(all_blocks, corpus, args.min_authors)
    lines = [json.dumps({"key": b.key, "size": b.size, "mention_ids": list(b.mention_ids)},
                        ensure_ascii=False) + "\n" for b in kept]
    _write_text(out / "blocks.jsonl", "".join(lines))
    _write_text(out / "block_sizes.csv", _csv_text(["block_size", "n_blocks"], size_histogram(kept)))
    _write_text(out / "filtered.csv", _csv_text(
        ["block_key", "reason"],
        [(k, "few_gold_authors") for k in stats.dropped_few_authors]
        + [(k, "no_gold_ids") for k in stats.dropped_no_gold]))
    write_manifest(out, "block", corpus_hash=corpus.content_hash(),
                   extra={"min_authors": args.min_authors, "kept": len(kept),
                          "total": len(all_blocks)})


def cmd_disambiguate(args, out: Path) -> None:
    algorithm, base, per_block = load_params_file(args.params, args.algorithm)
    corpus = _load_corpus(args)
    blocks = _blocks(corpus, args.min_authors)
    unknown = set(per_block) - {b.key for b in blocks}
    if unknown:
        logger.warning("params file names %d blocks not in the corpus", len(unknown))
    context = _context(args, corpus)
    items = [(b, per_block.get(b.key, base)) for b in blocks]
    results = parallel.map_blocks(_disambiguate_block, items,
                                  {"algorithm": algorithm, "corpus": corpus, "context": context},
                                  jobs=args.jobs, cost=lambda it: it[0].size)
    index_rows = []
    for (block, _), (text, trace) in zip(items, results):
        clustering = Clustering.from_csv(text)
        if clustering.mention_ids != block.mention_ids:
            raise InvariantViolation("clustering covers exactly its block", block.key)
        stem = block_slug(block.key)
        _write_text(out / "clusters" / f"{stem}.csv", text)
        if trace is not None:
            _write_text(out / "traces" / f"{stem}.csv", trace)
        index_rows.append((block.key, f"clusters/{stem}.csv", block.size, clustering.n_clusters))
    _write_text(out / "index.csv", _csv_text(["block_key", "file", "size", "n_clusters"], index_rows))
    params = {"default": base.to_dict()}
    if per_block:
        params["blocks"] = {k: p.to_dict() for k, p in sorted(per_block.items())}
    label = args.label or algorithm
    write_manifest(out, "disambiguate", corpus_hash=corpus.content_hash(), algorithm=algorithm,
                   params=params, extra={"label": label, "min_authors": args.min_authors})


def _read_clusters(directory: Path) -> tuple[dict, list[tuple[str, Clustering]]]:
    manifest = read_manifest(directory)
    if manifest.get("subcommand") != "disambiguate":
        raise UsageError(f"{directory} is not a disambiguate output")
    with open(directory / "index.csv", encoding="utf-8", newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for r in rows:
        text = (directory / r["file"]).read_text(encoding="utf-8")
        out.append((r["block_key"], Clustering.from_csv(text)))
    return manifest, out


def _report_rows(reports: list[tuple[str, EvalReport]]) -> str:
    return _csv_text(["approach", *METRICS],
                     [(label, *(fmt(x) for x in r.metrics())) for label, r in reports])


FOOTER = (
    "Empty denominators: a clustering without co-clustered pairs has P_pair = 1, "
    "a gold standard without same-author pairs has R_pair = 1, and F1 is 0 when "
    "precision or recall is 0."
)


def cmd_evaluate(args, out: Path) -> None:
    if not args.clusters:
        raise UsageError("--clusters DIR is required")
    corpus = _load_corpus(args)
    gold = {m: x.gold_author_id for m, x in corpus.mentions.items()}
    corpus_hash = corpus.content_hash()
    rows, curves, per_block_rows = [], [], []
    for cdir in map(Path, args.clusters):
        manifest, clusterings = _read_clusters(cdir)
        if manifest.get("corpus_hash") != corpus_hash:
            raise UsageError(f"{cdir} was produced from a different corpus")
        label = manifest.get("label") or manifest.get("algorithm")
        counts: dict[str, Counts] = {}
        sizes = {}
        for key, clustering in clusterings:
            missing = [m for m in clustering.mention_ids if m not in corpus.mentions]
            if missing:
                raise UsageError(f"{cdir}: block {key!r} lists unknown mention {missing[0]}")
            counts[key] = clustering_counts(clustering, gold)
            sizes[key] = len(clustering.mention_ids)
        per_block = aggregate(counts, "per-block", sizes)
        overall = aggregate(counts, "pooled") if args.aggregate == "pooled" else mean_report(per_block)
        rows.append((label, overall))
        curves.append(curve_csv(quality_by_size(per_block), label))
        per_block_rows += [(label, r.scope, r.block_size, r.n_gold_authors, r.n_clusters,
                            *(fmt(x) for x in r.metrics())) for r in per_block]
    _write_text(out / "report.csv", _report_rows(rows))
    _write_text(out / "report_notes.txt", f"aggregation: {args.aggregate}\n{FOOTER}\n")
    _write_text(out / "per_block.csv", _csv_text(
        ["approach", "block_key", "block_size", "n_gold_authors", "n_clusters", *METRICS],
        per_block_rows))
    _write_text(out / "size_curve.csv", _join_csv(curves))
    write_manifest(out, "evaluate", corpus_hash=corpus_hash,
                   extra={"aggregate": args.aggregate, "inputs": [str(Path(c)) for c in args.clusters]})


def _join_csv(texts: list[str]) -> str:
    if not texts:
        return ""
    lines = texts[0].splitlines(keepends=True)[:1]
    for t in texts:
        lines += t.splitlines(keepends=True)[1:]
    return "".join(lines)


def cmd_fit(args, out: Path) -> None:
    algorithm = args.algorithm
    if algorithm not in ALGORITHMS:
        raise UsageError(f"choose an algorithm from {', '.join(ALGORITHMS)}")
    grid = CandidateGrid.load(args.grid, algorithm) if args.grid else default_grid(algorithm)
    if args.mode == "classes" and algorithm != "caron":
        raise UsageError("--mode classes applies to caron only")
    corpus = _load_corpus(args)
    blocks = _blocks(corpus, args.min_authors)
    sweep = GridSweep(grid, corpus, blocks, objective=args.objective, context=_context(args, corpus),
                      jobs=args.jobs, flexible=args.mode == "flexible")
    result = sweep.fit(args.mode)
    config = _jsonable_toml(result.to_config())
    _write_text(out / "fit.toml", tomli_w.dumps(config))
    names = [k for k in result.table[0] if k not in ("scope", "objective")] if result.table else []
    _write_text(out / "fit_scores.csv", _csv_text(
        ["scope", *names, "objective"],
        [(r["scope"], *(_num(r.get(n)) for n in names), fmt(r["objective"])) for r in result.table]))
    write_manifest(out, "fit", corpus_hash=corpus.content_hash(), algorithm=algorithm,
                   params=result.params.to_dict(),
                   extra={"mode": args.mode, "objective": args.objective,
                          "value": result.value, "grid": grid.to_mapping(),
                          "evaluations": result.evaluations})
    logger.info("fitted %s (%s): %s = %.6f", algorithm, args.mode, args.objective, result.value)


def _num(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _jsonable_toml(obj):
    # TOML has no null; drop empty values
    if isinstance(obj, dict):
        return {k: _jsonable_toml(v) for k, v in obj.items() if v is not None}
    if isinstance(obj, tuple):
        return list(obj)
    return obj


def cmd_report(args, out: Path) -> None:
    if not args.inputs:
        raise UsageError("report needs evaluate output directories via --inputs")
    rows, curves = [], []
    for d in map(Path, args.inputs):
        manifest = read_manifest(d)
        if manifest.get("subcommand") != "evaluate":
            raise UsageError(f"{d} is not an evaluate output")
        text = (d / "report.csv").read_text(encoding="utf-8")
        rows += list(csv.reader(io.StringIO(text)))[1:]
        curves.append((d / "size_curve.csv").read_text(encoding="utf-8"))
    header = ["approach", *METRICS]
    _write_text(out / "report.csv", _csv_text(header, rows))
    # threshold-type comparison: rows labelled "<algorithm>:<mode>"
    typed = [r for r in rows if ":" in r[0]]
    _write_text(out / "thresholds.csv", _csv_text(
        ["approach", "threshold_type", *METRICS],
        [(r[0].split(":", 1)[0], r[0].split(":", 1)[1], *r[1:]) for r in typed]))
    _write_text(out / "size_curves.csv", _join_csv(curves))
    _write_text(out / "report_notes.txt", FOOTER + "\n")
    write_manifest(out, "report", extra={"inputs": [str(d) for d in args.inputs]})


def cmd_features(args, out: Path) -> None:
    if args.action != "dump-weights":
        raise UsageError(f"unknown features action {args.action!r}")
    corpus = _load_corpus(args)
    blocks = build_blocks(corpus)
    if args.block:
        blocks = [b for b in blocks if b.key == args.block]
        if not blocks:
            raise UsageError(f"no block with key {args.block!r}")
    rows = []
    for b in blocks:
        rows += [(b.key, f, tok, df, repr(w)) for f, tok, df, w in block_weights_rows(b.mention_ids, corpus)]
    _write_text(out / "weights.csv", _csv_text(["block_key", "field", "token", "df", "weight"], rows))
    write_manifest(out, "features", corpus_hash=corpus.content_hash())


COMMANDS = {
    "generate": cmd_generate,
    "ingest": cmd_ingest,
    "block": cmd_block,
    "disambiguate": cmd_disambiguate,
    "evaluate": cmd_evaluate,
    "fit": cmd_fit,
    "report": cmd_report,
    "features": cmd_features,
}


# --- argument parsing --------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="authordisamb", description=__doc__.splitlines()[0])
    p.add_argument("--out", default=".", help="output directory (default: current directory)")
    p.add_argument("--jobs", type=int, default=None, help="worker processes (default: all cores)")
    p.add_argument("--seed", type=int, default=None, help="override the generator seed")
    p.add_argument("--config", default=None, help="rule-score / general-name config (TOML)")
    p.add_argument("--cache-dir", default=None,
                   help="parsed-corpus cache (default: $AUTHORDISAMB_CACHE or ~/.cache/authordisamb)")
    p.add_argument("--no-cache", action="store_true", help="always re-parse the corpus")
    p.add_argument("--log-level", default="info", choices=["debug", "info", "warning", "error"])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", parser_class=_Parser, metavar="COMMAND")

    def corpus_arg(sp):
        sp.add_argument("--corpus", help="directory with papers.jsonl and mentions.jsonl")

    def min_authors(sp):
        sp.add_argument("--min-authors", type=int, default=5,
                        help="keep blocks with at least this many gold authors (0 keeps all)")

    g = sub.add_parser("generate", help="write a synthetic corpus")
    g.add_argument("--spec", help="generator spec (TOML); default: the shipped spec")

    i = sub.add_parser("ingest", help="validate a corpus")
    corpus_arg(i)

    b = sub.add_parser("block", help="write name blocks and the size histogram")
    corpus_arg(b)
    min_authors(b)

    d = sub.add_parser("disambiguate", help="cluster every block")
    corpus_arg(d)
    min_authors(d)
    d.add_argument("--algorithm", choices=ALGORITHMS)
    d.add_argument("--params", help="parameter file, e.g. the fit.toml written by `fit`")
    d.add_argument("--label", help="row label used by evaluate (default: algorithm name)")

    e = sub.add_parser("evaluate", help="score clusterings against the gold standard")
    corpus_arg(e)
    e.add_argument("--clusters", nargs="+", help="disambiguate output directories")
    e.add_argument("--aggregate", choices=["pooled", "mean"], default="pooled")

    f = sub.add_parser("fit", help="fit thresholds on a gold-annotated corpus")
    corpus_arg(f)
    min_authors(f)
    f.add_argument("--algorithm", required=True, choices=ALGORITHMS)
    f.add_argument("--grid", help="candidate grid (TOML); default: the shipped grids")
    f.add_argument("--objective", choices=OBJECTIVES, default="f1_pair")
    f.add_argument("--mode", choices=MODES, default="global")

    r = sub.add_parser("report", help="join evaluate outputs into comparison tables")
    r.add_argument("--inputs", nargs="+", help="evaluate output directories")

    ft = sub.add_parser("features", help="inspect features")
    ft.add_argument("action", choices=["dump-weights"])
    corpus_arg(ft)
    ft.add_argument("--block", help="only this block key")
    return p


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"authordisamb: error: {exc}", file=sys.stderr)
        return 1
    _setup_logging(args.log_level)
    if not args.command:
        parser.print_usage(sys.stderr)
        return 1
    if args.jobs is None:
        args.jobs = parallel.default_jobs()
    if args.jobs < 1:
        logger.error("--jobs must be at least 1")
        return 1
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](args, out)
    except InvariantViolation as exc:
        logger.error(str(exc))
        return 2
    except VALIDATION_ERRORS as exc:
        logger.error(f"{type(exc).__name__}: {exc}")
        return 1
    return 0


def main() -> int:
    return run(sys.argv[1:])
