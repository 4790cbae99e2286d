import math
from dataclasses import replace

import numpy as np
import pytest

from authordisamb.algorithms import SpecificitySimilarity, run_algorithm
from authordisamb.blocking import build_blocks, filter_blocks
from authordisamb.clustering import Clustering, greedy_max_merge
from authordisamb.corpus import Corpus
from authordisamb.evaluation import Counts, clustering_counts
from authordisamb.tuning import (
    CandidateGrid, FitError, GridSweep, default_grid, fit_caron_classes, fit_flexible, fit_global,
    fit_schulz_staged, make_params,
)

from factories import corpus_from_spec


def _blocks(corpus):
    return filter_blocks(build_blocks(corpus), corpus)[0]


def _direct(algorithm, params, corpus, blocks, objective="f1_pair"):
    """Pooled objective from plain algorithm runs, bypassing the sweep caches."""
    gold = {m: x.gold_author_id for m, x in corpus.mentions.items()}
    total = Counts()
    for b in blocks:
        p = params(b) if callable(params) else params
        clustering, _ = run_algorithm(algorithm, b, corpus, p)
        total = total + clustering_counts(clustering, gold)
    return total.objective(objective)


GRIDS = {
    "caron": CandidateGrid("caron", {"threshold": (4, 8, 12, 16, 21, 26)}),
    "cota": CandidateGrid("cota", {"title_threshold": (0.1, 0.4, 0.8), "journal_threshold": (0.3, 1.1)}),
    "schulz": CandidateGrid("schulz", {"beta1": (0.2, 0.6), "beta2": (0.1, 0.4),
                                       "beta3": (0.05, 0.2), "beta4": (0.3, math.inf)}),
    "backes": CandidateGrid("backes", {"lambda": (0.0, 0.005, 0.01, 0.03)}),
}


# --- grids ------------------------------------------------------------------------

def test_grid_validation():
    with pytest.raises(FitError):
        CandidateGrid("caron", {"threshold": ()})
    with pytest.raises(FitError):
        CandidateGrid("cota", {"title_threshold": (math.inf,)})
    with pytest.raises(FitError):
        CandidateGrid("cota", {"title_threshold": ("x",)})
    with pytest.raises(FitError):
        CandidateGrid("nope", {})
    g = CandidateGrid("schulz", {"beta4": (math.inf, 1.0)})
    assert g.values["beta4"] == (1.0, math.inf)


def test_grid_file_round_trip(tmp_path):
    path = tmp_path / "grid.toml"
    path.write_text('algorithm = "cota"\n[grid]\ntitle_threshold = [0.5, 0.2]\n'
                    'journal_threshold = 0.4\n', encoding="utf-8")
    g = CandidateGrid.load(path, "cota")
    assert g.values == {"title_threshold": (0.2, 0.5), "journal_threshold": (0.4,)}
    assert CandidateGrid.from_mapping("cota", g.to_mapping()) == g
    with pytest.raises(FitError, match="not 'caron'"):
        CandidateGrid.load(path, "caron")


def test_default_grids_within_budget():
    for alg in ("cota", "caron", "backes"):
        assert 1 <= len(default_grid(alg)) <= 50
    s = default_grid("schulz").values
    assert len(s["beta1"]) * len(s["beta2"]) * len(s["beta3"]) + len(s["beta4"]) <= 50


def test_make_params_expands_caron_threshold():
    p = make_params("caron", {"threshold": 17}, {"class_bounds": (10, 20)})
    assert p.class_bounds == (10, 20) and p.class_thresholds == (17, 17, 17)
    assert make_params("backes", {"lambda": 0.5}).lam == 0.5


# --- global fits ------------------------------------------------------------------

@pytest.mark.parametrize("alg", list(GRIDS))
def test_global_fit_matches_exhaustive_direct_runs(alg, small_corpus):
    grid = GRIDS[alg]
    blocks = _blocks(small_corpus)
    result = fit_global(alg, grid, small_corpus)
    if alg == "schulz":
        names = ["beta1", "beta2", "beta3"]
        stage1 = [make_params(alg, {**p, "beta4": math.inf}) for p in grid.points(names)]
        scores = [_direct(alg, p, small_corpus, blocks) for p in stage1]
        best = stage1[int(np.argmax(scores))]
        cands = [best.replace(beta4=b) for b in grid.values["beta4"]]
    else:
        cands = [make_params(alg, p) for p in grid.points()]
    scores = [_direct(alg, p, small_corpus, blocks) for p in cands]
    assert result.value == max(scores)
    assert result.params == cands[int(np.argmax(scores))]
    table = [r["objective"] for r in result.table]
    assert max(table) == result.value


def test_single_point_grid(small_corpus):
    grid = CandidateGrid("caron", {"threshold": (13,)})
    result = fit_global("caron", grid, small_corpus)
    assert result.params.class_thresholds == (13,) * 6


def test_tie_goes_to_smallest_point(small_corpus):
    # both thresholds exceed every possible score, so both give singletons
    grid = CandidateGrid("caron", {"threshold": (900, 500)})
    result = fit_global("caron", grid, small_corpus)
    assert result.params.class_thresholds == (500,) * 6
    assert result.table[0]["objective"] == result.table[1]["objective"]


def test_empty_grid_and_missing_gold(small_corpus):
    with pytest.raises(FitError):
        GridSweep(CandidateGrid("cota", {}), small_corpus)
    bare = corpus_from_spec(seed=1, n_blocks=2)
    stripped = Corpus.build(bare.papers.values(),
                            [replace(m, gold_author_id=None) for m in bare.mentions.values()])
    with pytest.raises(FitError, match="gold"):
        GridSweep(GRIDS["caron"], stripped, _blocks(bare))


# --- Schulz staging ---------------------------------------------------------------

def test_schulz_evaluation_count(small_corpus):
    result = fit_schulz_staged(GRIDS["schulz"], small_corpus)
    assert result.evaluations == 2 * 2 * 2 + 2


def test_schulz_infinite_beta4_equals_stage_one(small_corpus):
    values = {**GRIDS["schulz"].values, "beta4": (math.inf,)}
    sweep = GridSweep(CandidateGrid("schulz", values), small_corpus)
    result = sweep.fit_global()
    stage1 = objective_scores = [r["objective"] for r in sweep.fit_global().table][:8]
    assert result.value == max(objective_scores)
    assert result.params.beta4 == math.inf
    assert sweep.points[sweep.stage1_index]["beta1"] == result.params.beta1
    assert len(stage1) == 8


def test_schulz_staged_matches_full_search_when_step3_is_weak(small_corpus):
    # beta4 = 50 is never exceeded, so step 3 is inert and staging loses nothing
    grid = CandidateGrid("schulz", {"beta1": (0.2, 0.6, 1.0), "beta2": (0.1, 0.4),
                                    "beta3": (0.05, 0.2), "beta4": (50.0, math.inf)})
    blocks = _blocks(small_corpus)
    staged = fit_schulz_staged(grid, small_corpus)
    full = [make_params("schulz", p) for p in grid.points()]
    scores = [_direct("schulz", p, small_corpus, blocks) for p in full]
    assert staged.value == max(scores)
    assert staged.params == full[int(np.argmax(scores))]


def test_schulz_grid_requires_all_betas(small_corpus):
    with pytest.raises(FitError, match="beta4"):
        fit_schulz_staged(CandidateGrid("schulz", {"beta1": (0.5,), "beta2": (0.1,), "beta3": (0.1,)}),
                          small_corpus)


# --- Caron classes ----------------------------------------------------------------

def test_one_class_equals_global(small_corpus):
    grid = GRIDS["caron"]
    classes = fit_caron_classes((), grid, small_corpus)
    glob = fit_global("caron", grid, small_corpus)
    assert classes.value == glob.value
    assert classes.params.class_thresholds == glob.params.class_thresholds[:1]


def test_table4_grid_yields_table4_values(small_corpus):
    grid = CandidateGrid("caron", {"threshold": (19, 21, 22, 23, 25, 27, 29)})
    result = fit_caron_classes((30, 40), grid, small_corpus)
    assert set(result.params.class_thresholds) <= {19, 21, 22, 23, 25, 27, 29}


def test_classes_fit_matches_direct_runs(small_corpus):
    bounds = (25, 35)
    result = fit_caron_classes(bounds, GRIDS["caron"], small_corpus)
    blocks = _blocks(small_corpus)
    assert result.value == _direct("caron", result.params, small_corpus, blocks)


def test_empty_class_inherits_lower_neighbour(small_corpus, caplog):
    result = fit_caron_classes((30, 1000, 2000), GRIDS["caron"], small_corpus)
    t = result.params.class_thresholds
    assert t[2] == t[1] and t[3] == t[1]
    assert "no blocks" in caplog.text
    with pytest.raises(FitError):
        GridSweep(GRIDS["cota"], small_corpus).fit_classes()


# --- flexible -------------------------------------------------------------------------

@pytest.mark.parametrize("alg", list(GRIDS))
def test_dominance_chain(alg, small_corpus):
    sweep = GridSweep(GRIDS[alg], small_corpus, flexible=True)
    glob = sweep.fit_global()
    flex = sweep.fit_flexible()
    assert flex.value >= glob.value
    if alg == "caron":
        classes = sweep.fit_classes((25, 35))
        assert flex.value >= classes.value >= glob.value
    # the flexible total is what its per-block parameters actually produce
    blocks = _blocks(small_corpus)
    assert flex.value == pytest.approx(
        _direct(alg, lambda b: flex.params_for(b.key), small_corpus, blocks), abs=1e-12)


def test_single_block_flexible_equals_global(small_corpus):
    block = _blocks(small_corpus)[:1]
    sweep = GridSweep(GRIDS["cota"], small_corpus, block)
    assert sweep.fit_flexible().value == sweep.fit_global().value


def test_backes_trace_cuts_match_dense_lambda_grid(small_corpus):
    block = _blocks(small_corpus)[0]
    gold = {m: x.gold_author_id for m, x in small_corpus.mentions.items()}
    grid = CandidateGrid("backes", {"lambda": (0.0,)})
    flex = fit_flexible("backes", grid, small_corpus, blocks=[block])
    initial = Clustering.singletons(block.mention_ids)
    _, trace = greedy_max_merge(initial, SpecificitySimilarity(block.mention_ids, small_corpus), stop=0.0)
    levels = sorted(set(trace.levels) | {0.0, 1.0})
    # midpoints between consecutive levels hit every distinct cut
    dense = [(a + b) / 2 for a, b in zip(levels, levels[1:])] + list(np.linspace(0, 1, 201))
    best = 0.0
    for l in dense:
        direct, _ = greedy_max_merge(initial, SpecificitySimilarity(block.mention_ids, small_corpus), stop=l)
        best = max(best, clustering_counts(direct, gold).f1_pair)
    assert flex.value == best


def test_fit_is_reproducible_and_job_count_invariant(small_corpus):
    a = GridSweep(GRIDS["caron"], small_corpus, jobs=1).fit_global()
    b = GridSweep(GRIDS["caron"], small_corpus, jobs=2).fit_global()
    assert a.to_config() == b.to_config()
    assert a.table == b.table


def test_objective_f1_best(small_corpus):
    blocks = _blocks(small_corpus)
    result = fit_global("cota", GRIDS["cota"], small_corpus, objective="f1_best")
    assert result.value == _direct("cota", result.params, small_corpus, blocks, "f1_best")
    with pytest.raises(FitError):
        GridSweep(GRIDS["cota"], small_corpus, objective="accuracy")


def test_config_round_trip(small_corpus, tmp_path):
    import tomli_w

    from authordisamb.cli import load_params_file

    result = fit_flexible("backes", GRIDS["backes"], small_corpus)
    path = tmp_path / "fit.toml"
    path.write_text(tomli_w.dumps(result.to_config()), encoding="utf-8")
    alg, base, per_block = load_params_file(str(path), None)
    assert alg == "backes" and base == result.params
    assert per_block == result.block_params
