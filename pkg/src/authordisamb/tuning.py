"""Threshold fitting by exhaustive candidate evaluation.

A :class:`GridSweep` scores every candidate parameter point on every block
once, keeping the additive evaluation counts per (point, block). The fitting
modes then only recombine those counts:

* ``global``: one parameter point for the whole corpus.
* ``classes``: one Caron threshold per block-size class.
* ``flexible``: one parameter point per block, an upper bound for the family.

Objectives pool counts over blocks, exactly like the default report.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import parallel
from .algorithms import (
    PARAM_TYPES, BackesPrepared, CaronParams, CaronPrepared, CotaPrepared, SchulzParams,
    SchulzPrepared, ScoringContext,
)
from .blocking import Block, build_blocks, filter_blocks
from .corpus import Corpus
from .evaluation import Counts, count

logger = logging.getLogger(__name__)

MODES = ("global", "classes", "flexible")
OBJECTIVES = ("f1_pair", "f1_best")
_NFIELDS = len(fields(Counts))


class FitError(ValueError):
    pass


# --- candidate grids ---------------------------------------------------------

@dataclass(frozen=True)
class CandidateGrid:
    """Ordered candidate values per parameter plus fixed parameters.

    Points enumerate in lexicographic order of the parameter vector (keys in
    declaration order, values ascending), so the first maximum is the
    lexicographically smallest one.
    """

    algorithm: str
    values: dict[str, tuple]
    fixed: dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        if self.algorithm not in PARAM_TYPES:
            raise FitError(f"unknown algorithm {self.algorithm!r}")
        for name, vals in self.values.items():
            if not vals:
                raise FitError(f"grid for {name} is empty")
            for v in vals:
                if not isinstance(v, (int, float)) or isinstance(v, bool) or math.isnan(v):
                    raise FitError(f"grid value {v!r} for {name} is not a number")
                if math.isinf(v) and not (self.algorithm == "schulz" and name == "beta4" and v > 0):
                    raise FitError(f"grid value for {name} must be finite")
        object.__setattr__(self, "values", {k: tuple(sorted(v)) for k, v in self.values.items()})

    def points(self, names: Sequence[str] | None = None) -> list[dict]:
        names = list(names if names is not None else self.values)
        return [dict(zip(names, combo)) for combo in itertools.product(*(self.values[n] for n in names))]

    def __len__(self) -> int:
        return math.prod(len(v) for v in self.values.values())

    @classmethod
    def from_mapping(cls, algorithm: str, raw: Mapping) -> "CandidateGrid":
        if algorithm in raw and isinstance(raw[algorithm], Mapping):
            raw = raw[algorithm]
        grid = raw.get("grid", {})
        if not isinstance(grid, Mapping):
            raise FitError("[grid] must be a table of candidate lists")
        values = {}
        for k, v in grid.items():
            values[k] = tuple(v) if isinstance(v, list) else (v,)
        fixed = {k: tuple(v) if isinstance(v, list) else v for k, v in raw.get("fixed", {}).items()}
        return cls(algorithm, values, fixed)

    @classmethod
    def load(cls, path: str | Path, algorithm: str) -> "CandidateGrid":
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
        declared = raw.get("algorithm")
        if declared is not None and declared != algorithm:
            raise FitError(f"grid file is for {declared!r}, not {algorithm!r}")
        return cls.from_mapping(algorithm, raw)

    def to_mapping(self) -> dict:
        out: dict = {"algorithm": self.algorithm,
                     "grid": {k: list(v) for k, v in self.values.items()}}
        if self.fixed:
            out["fixed"] = {k: list(v) if isinstance(v, tuple) else v for k, v in self.fixed.items()}
        return out


def default_grids_path() -> Path:
    return Path(__file__).parent / "data" / "default_grids.toml"


def default_grid(algorithm: str) -> CandidateGrid:
    with open(default_grids_path(), "rb") as fh:
        raw = tomllib.load(fh)
    if algorithm == "baseline":
        return CandidateGrid("baseline", {})
    return CandidateGrid.from_mapping(algorithm, raw)


# --- parameter construction --------------------------------------------------

def make_params(algorithm: str, point: Mapping, fixed: Mapping | None = None):
    """Parameter object for one grid point.

    Caron points carry a single ``threshold`` applied to every size class.
    """
    values = {**(fixed or {}), **point}
    if algorithm == "caron" and "threshold" in values:
        t = values.pop("threshold")
        bounds = tuple(values.get("class_bounds", CaronParams().class_bounds))
        values["class_thresholds"] = (t,) * (len(bounds) + 1)
    return PARAM_TYPES[algorithm].from_dict(values)


def _check_caron_grid(grid: CandidateGrid) -> None:
    if grid.algorithm == "caron":
        if set(grid.values) != {"threshold"}:
            raise FitError("Caron grids take exactly one parameter, threshold")
        if any(float(t) != int(t) for t in grid.values["threshold"]):
            raise FitError("Caron thresholds must be integers")


# --- per-block evaluation (runs in worker processes) -------------------------

def _gold_codes(block: Block, corpus: Corpus) -> tuple[np.ndarray, np.ndarray]:
    gold = [corpus.mentions[m].gold_author_id for m in block.mention_ids]
    mask = np.array([g is not None for g in gold], dtype=bool)
    ids = sorted({g for g in gold if g is not None})
    index = {g: i for i, g in enumerate(ids)}
    return mask, np.array([index[g] for g in gold if g is not None], dtype=np.int64)


def _vec(labels: np.ndarray, mask: np.ndarray, codes: np.ndarray) -> np.ndarray:
    c = count(np.asarray(labels)[mask], codes)
    return np.array([getattr(c, f.name) for f in fields(Counts)], dtype=np.int64)


class _Preparer:
    """Caches the expensive per-block scoring for one block."""

    def __init__(self, algorithm: str, block: Block, corpus: Corpus, context: ScoringContext,
                 caron_floor: float | None):
        self.algorithm = algorithm
        self.block = block
        self.corpus = corpus
        self.context = context
        self.caron_floor = caron_floor
        self._cache: dict = {}

    def labels(self, params) -> np.ndarray:
        alg, block = self.algorithm, self.block
        if alg == "baseline":
            return np.zeros(block.size, dtype=np.int64)
        if alg == "cota":
            if "cota" not in self._cache:
                self._cache["cota"] = CotaPrepared(block, self.corpus)
            return self._cache["cota"].labels(params)
        if alg == "schulz":
            alphas = (params.alpha_A, params.alpha_S, params.alpha_R, params.alpha_C)
            if alphas not in self._cache:
                self._cache[alphas] = SchulzPrepared(block, self.corpus, params)
            return self._cache[alphas].labels(params)
        if alg == "caron":
            if "caron" not in self._cache:
                floor = self.caron_floor if self.caron_floor is not None else params.threshold_for(block.size)
                self._cache["caron"] = CaronPrepared(block, self.corpus, self.context, floor)
            return self._cache["caron"].labels(params)
        if alg == "backes":
            return self.backes.labels(params)
        raise FitError(f"unknown algorithm {alg!r}")

    @property
    def backes(self) -> BackesPrepared:
        if "backes" not in self._cache:
            self._cache["backes"] = BackesPrepared(self.block, self.corpus)
        return self._cache["backes"]


@dataclass
class _BlockTask:
    algorithm: str
    block: Block
    points: list[dict]
    fixed: dict
    caron_floor: float | None = None
    trace_cuts: bool = False


def _evaluate_block(shared: dict, task: _BlockTask):
    corpus, context = shared["corpus"], shared["context"]
    mask, codes = _gold_codes(task.block, corpus)
    prep = _Preparer(task.algorithm, task.block, corpus, context, task.caron_floor)
    out = np.zeros((len(task.points), _NFIELDS), dtype=np.int64)
    for i, point in enumerate(task.points):
        out[i] = _vec(prep.labels(make_params(task.algorithm, point, task.fixed)), mask, codes)
    extra_points, extra = [], np.zeros((0, _NFIELDS), dtype=np.int64)
    if task.trace_cuts:
        n = task.block.size
        extra_points = [{"lambda": l / n} for l in prep.backes.cut_candidates()]
        extra = np.array([_vec(prep.labels(make_params("backes", p, task.fixed)), mask, codes)
                          for p in extra_points], dtype=np.int64).reshape(-1, _NFIELDS)
    return out, extra_points, extra


# --- objective arithmetic ----------------------------------------------------

def objective_of(vec: np.ndarray, objective: str) -> np.ndarray:
    """Objective of count vectors (last axis ordered like :class:`Counts`)."""
    vec = np.asarray(vec, dtype=float)
    tp, cp, ap, ba, bc, n = (vec[..., i] for i in range(6))
    with np.errstate(divide="ignore", invalid="ignore"):
        if objective == "f1_pair":
            p = np.where(cp > 0, tp / np.where(cp > 0, cp, 1), 1.0)
            r = np.where(ap > 0, tp / np.where(ap > 0, ap, 1), 1.0)
        elif objective == "f1_best":
            p = np.where(n > 0, ba / np.where(n > 0, n, 1), 1.0)
            r = np.where(n > 0, bc / np.where(n > 0, n, 1), 1.0)
        else:
            raise FitError(f"unknown objective {objective!r}")
        return np.where((p > 0) & (r > 0), 2 * p * r / np.where(p + r > 0, p + r, 1), 0.0)


def _counts(vec: np.ndarray) -> Counts:
    return Counts(*(int(x) for x in vec))


def _polish(units: list[np.ndarray], start: list[int], objective: str,
            max_rounds: int = 50) -> list[int]:
    """Coordinate ascent on the pooled objective over per-unit choices.

    ``units[u]`` holds the count vectors of unit ``u``'s candidates. A unit
    switches only on strict improvement, so the result never scores below
    ``start``.
    """
    choice = list(start)
    total = sum((units[u][c] for u, c in enumerate(choice)), np.zeros(_NFIELDS, dtype=np.int64))
    current = float(objective_of(total, objective))
    for _ in range(max_rounds):
        improved = False
        for u, cand in enumerate(units):
            if len(cand) <= 1:
                continue
            trial = objective_of(total - cand[choice[u]] + cand, objective)
            best = int(np.argmax(trial))
            if trial[best] > current:
                total = total - cand[choice[u]] + cand[best]
                choice[u] = best
                current = float(objective_of(total, objective))
                improved = True
        if not improved:
            break
    return choice


# --- results -----------------------------------------------------------------

@dataclass
class FitResult:
    algorithm: str
    mode: str
    objective: str
    value: float
    params: object
    counts: Counts
    table: list[dict] = field(default_factory=list)
    block_params: dict[str, object] = field(default_factory=dict)
    evaluations: int = 0

    def to_config(self) -> dict:
        """Mapping loadable as a ``disambiguate --params`` file."""
        out: dict = {
            "algorithm": self.algorithm,
            "fit": {"mode": self.mode, "objective": self.objective, "value": self.value,
                    "evaluations": self.evaluations},
            "params": self.params.to_dict(),
        }
        if self.block_params:
            out["blocks"] = {k: p.to_dict() for k, p in self.block_params.items()}
        return out

    def params_for(self, block_key: str):
        return self.block_params.get(block_key, self.params)


# --- sweep -------------------------------------------------------------------

class GridSweep:
    """Counts of every candidate point on every block, computed once."""

    def __init__(self, grid: CandidateGrid, corpus: Corpus, blocks: Sequence[Block] | None = None,
                 objective: str = "f1_pair", context: ScoringContext | None = None,
                 jobs: int = 1, flexible: bool = False):
        if objective not in OBJECTIVES:
            raise FitError(f"unknown objective {objective!r}")
        if grid.algorithm != "baseline" and not grid.values:
            raise FitError("empty grid")
        _check_caron_grid(grid)
        if blocks is None:
            blocks, _ = filter_blocks(build_blocks(corpus), corpus)
        if not blocks:
            raise FitError("no blocks to fit on")
        if not any(corpus.mentions[m].gold_author_id is not None
                   for b in blocks for m in b.mention_ids):
            raise FitError("corpus has no gold author ids")
        self.grid = grid
        self.algorithm = grid.algorithm
        self.corpus = corpus
        self.blocks = list(blocks)
        self.objective = objective
        self.context = context or ScoringContext()
        self.jobs = jobs
        self.fixed = dict(grid.fixed)
        self.evaluations = 0
        self.extra_points: list[list[dict]] = [[] for _ in self.blocks]
        self.extra: list[np.ndarray] = [np.zeros((0, _NFIELDS), dtype=np.int64) for _ in self.blocks]
        if self.algorithm == "schulz":
            self._run_schulz(flexible)
        else:
            names = list(grid.values)
            self.points = grid.points(names) if names else [{}]
            self.counts = self._evaluate(self.points, trace_cuts=flexible and self.algorithm == "backes")
            self.global_index = self._argmax(range(len(self.points)))

    def _evaluate(self, points: list[dict], trace_cuts: bool = False) -> np.ndarray:
        floor = None
        if self.algorithm == "caron":
            floor = min(p["threshold"] for p in points)
        tasks = [_BlockTask(self.algorithm, b, points, self.fixed, floor, trace_cuts) for b in self.blocks]
        results = parallel.map_blocks(_evaluate_block, tasks,
                                      {"corpus": self.corpus, "context": self.context},
                                      jobs=self.jobs, cost=lambda t: t.block.size)
        self.evaluations += len(points)
        if trace_cuts:
            for i, (_, pts, extra) in enumerate(results):
                self.extra_points[i] = pts
                self.extra[i] = extra
        return np.stack([r[0] for r in results], axis=1)  # (points, blocks, fields)

    def _argmax(self, indices) -> int:
        indices = list(indices)
        scores = objective_of(self.counts[indices].sum(axis=1), self.objective)
        return indices[int(np.argmax(scores))]

    def _run_schulz(self, flexible: bool) -> None:
        names = [n for n in self.grid.values if n != "beta4"]
        beta4 = self.grid.values.get("beta4", (math.inf,))
        stage1 = [{**p, "beta4": math.inf} for p in self.grid.points(names)]
        c1 = self._evaluate(stage1)
        best1 = int(np.argmax(objective_of(c1.sum(axis=1), self.objective)))
        stage2 = [{**stage1[best1], "beta4": b} for b in beta4]
        c2 = self._evaluate(stage2)
        self.stage1_index = best1
        self.points = stage1 + stage2
        self.counts = np.concatenate([c1, c2], axis=0)
        self.global_index = self._argmax(range(len(stage1), len(self.points)))

    # -- modes --

    def _table(self, indices, scope: str = "overall") -> list[dict]:
        scores = objective_of(self.counts[list(indices)].sum(axis=1), self.objective)
        return [{"scope": scope, **self.points[i], "objective": float(s)}
                for i, s in zip(indices, scores)]

    def _result(self, mode: str, params, total: np.ndarray, table, block_params=None) -> FitResult:
        c = _counts(total)
        return FitResult(self.algorithm, mode, self.objective, c.objective(self.objective), params,
                         c, table, block_params or {}, self.evaluations)

    def fit_global(self) -> FitResult:
        g = self.global_index
        return self._result("global", make_params(self.algorithm, self.points[g], self.fixed),
                            self.counts[g].sum(axis=0), self._table(range(len(self.points))))

    def class_assignment(self, bounds: Sequence[int] | None = None) -> tuple[list[int], FitResult]:
        """Per-class grid indices and the classes FitResult."""
        if self.algorithm != "caron":
            raise FitError("size-class fitting applies to Caron only")
        bounds = tuple(bounds if bounds is not None else self.fixed.get("class_bounds", CaronParams().class_bounds))
        probe = CaronParams(class_bounds=bounds, class_thresholds=(0,) * (len(bounds) + 1))
        cls_of = np.array([probe.size_class(b.size) for b in self.blocks])
        n_classes = len(bounds) + 1
        members = [np.flatnonzero(cls_of == k) for k in range(n_classes)]
        per_class = [self.counts[:, m].sum(axis=1) for m in members]  # (points, fields) each
        table: list[dict] = []
        choice: list[int | None] = [None] * n_classes
        for k in range(n_classes):
            if members[k].size == 0:
                continue
            scores = objective_of(per_class[k], self.objective)
            choice[k] = int(np.argmax(scores))
            table += [{"scope": f"class{k}", **p, "objective": float(s)}
                      for p, s in zip(self.points, scores)]
        filled = [k for k in range(n_classes) if choice[k] is not None]
        g = self.global_index
        units = [per_class[k] for k in filled]
        own = [choice[k] for k in filled]
        base = [g] * len(filled)
        own_total = sum((u[c] for u, c in zip(units, own)), np.zeros(_NFIELDS, dtype=np.int64))
        start = own if objective_of(own_total, self.objective) >= objective_of(
            self.counts[g].sum(axis=0), self.objective) else base
        for k, c in zip(filled, _polish(units, start, self.objective)):
            choice[k] = c
        for k in range(n_classes):
            if k not in filled:
                lower = [j for j in filled if j < k]
                donor = lower[-1] if lower else min(filled)
                logger.warning("size class %d has no blocks; using the threshold of class %d", k, donor)
                choice[k] = choice[donor]
        thresholds = tuple(self.points[c]["threshold"] for c in choice)
        params = CaronParams(class_bounds=bounds, class_thresholds=thresholds)
        total = sum((self.counts[choice[k], b] for b, k in enumerate(cls_of)),
                    np.zeros(_NFIELDS, dtype=np.int64))
        block_choice = [choice[k] for k in cls_of]
        return block_choice, self._result("classes", params, total, table)

    def fit_classes(self, bounds: Sequence[int] | None = None) -> FitResult:
        return self.class_assignment(bounds)[1]

    def fit_flexible(self, bounds: Sequence[int] | None = None) -> FitResult:
        # for Schulz the candidates are the stage-1 grid plus the beta4 variations
        allowed = list(range(len(self.points)))
        units, points_of = [], []
        for b in range(len(self.blocks)):
            cand = np.concatenate([self.counts[allowed, b], self.extra[b]], axis=0)
            units.append(cand)
            points_of.append([self.points[i] for i in allowed] + self.extra_points[b])
        per_block = [int(np.argmax(objective_of(u, self.objective))) for u in units]
        if self.algorithm == "caron":
            ref = self.class_assignment(bounds)[0]
        else:
            ref = [self.global_index] * len(self.blocks)
        ref = [allowed.index(i) for i in ref]

        def score(choice):
            return objective_of(sum((u[c] for u, c in zip(units, choice)),
                                    np.zeros(_NFIELDS, dtype=np.int64)), self.objective)

        start = per_block if score(per_block) >= score(ref) else ref
        choice = _polish(units, start, self.objective)
        total = sum((u[c] for u, c in zip(units, choice)), np.zeros(_NFIELDS, dtype=np.int64))
        block_params = {}
        table = []
        for blk, u, pts, c in zip(self.blocks, units, points_of, choice):
            block_params[blk.key] = make_params(self.algorithm, pts[c], self.fixed)
            table.append({"scope": blk.key, **pts[c],
                          "objective": float(objective_of(u[c], self.objective))})
        g = self.global_index
        return self._result("flexible", make_params(self.algorithm, self.points[g], self.fixed),
                            total, table, block_params)

    def fit(self, mode: str) -> FitResult:
        if mode == "global":
            return self.fit_global()
        if mode == "classes":
            return self.fit_classes()
        if mode == "flexible":
            return self.fit_flexible()
        raise FitError(f"unknown mode {mode!r}")


# --- public entry points -----------------------------------------------------

def fit_global(algorithm: str, grid: CandidateGrid, corpus: Corpus, objective: str = "f1_pair",
               **kwargs) -> FitResult:
    if grid.algorithm != algorithm:
        raise FitError(f"grid is for {grid.algorithm}, not {algorithm}")
    if algorithm == "schulz":
        return fit_schulz_staged(grid, corpus, objective, **kwargs)
    return GridSweep(grid, corpus, objective=objective, **kwargs).fit_global()


def fit_schulz_staged(grid: CandidateGrid, corpus: Corpus, objective: str = "f1_pair",
                      **kwargs) -> FitResult:
    """Stage 1 over (beta1, beta2, beta3) with step 3 off, then beta4 alone."""
    if grid.algorithm != "schulz":
        raise FitError("staged fitting applies to Schulz grids")
    missing = {"beta1", "beta2", "beta3", "beta4"} - set(grid.values)
    if missing:
        raise FitError(f"Schulz grid lacks {', '.join(sorted(missing))}")
    return GridSweep(grid, corpus, objective=objective, **kwargs).fit_global()


def fit_caron_classes(bounds: Sequence[int] | None, grid: CandidateGrid, corpus: Corpus,
                      objective: str = "f1_pair", **kwargs) -> FitResult:
    return GridSweep(grid, corpus, objective=objective, **kwargs).fit_classes(bounds)


def fit_flexible(algorithm: str, grid: CandidateGrid, corpus: Corpus, objective: str = "f1_pair",
                 **kwargs) -> FitResult:
    if grid.algorithm != algorithm:
        raise FitError(f"grid is for {grid.algorithm}, not {algorithm}")
    return GridSweep(grid, corpus, objective=objective, flexible=True, **kwargs).fit_flexible()
