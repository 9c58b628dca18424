import csv
import io
import math
import random
from collections import Counter

import pytest

from repair_miner.changes import SourceCodeChange, feature_space
from repair_miner.corpus import Transaction
from repair_miner.crossval import (
    Cell,
    CrossValSpec,
    compare_heuristics,
    format_cell,
    median_of_medians,
    normalize_heuristic,
    run_crossval,
    split,
)
from repair_miner.errors import InputError, NotMinedError, SplitError
from repair_miner.repair_model import INFINITE
from tests.conftest import synthetic_corpus

CT = feature_space("CT")


def brute_force_cell(corpus, held_out, size, heuristic="ALL"):
    """Recompute one cell from scratch with plain loops."""
    training = [t for t in corpus if t.project != held_out]
    if heuristic == "EQP":
        probs = {f: 1 / len(CT) for f in CT.features}
    else:
        counts = Counter(c.ct.replace("_", " ") for t in training for c in t.changes)
        total = sum(counts.values())
        probs = {f: counts[f] / total for f in CT.features}
    medians = []
    for t in corpus:
        if t.project != held_out or len(t.changes) != size:
            continue
        labels = Counter(c.ct.replace("_", " ") for c in t.changes)
        p = math.factorial(size)
        for label, k in labels.items():
            p = p / math.factorial(k) * probs[label] ** k
        n, miss = 1, 1 - p
        while miss > 0.5 and n < 10 ** 6:
            n, miss = n + 1, miss * (1 - p)
        medians.append(n if miss <= 0.5 else INFINITE)
    if not medians:
        return None, 0
    return sorted(medians)[(len(medians) - 1) // 2], len(medians)


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_cells_match_brute_force(seed):
    corpus = synthetic_corpus(seed)
    table = run_crossval(CrossValSpec(corpus, CT, "ALL", (1, 2, 3, 4, 5, 6)))
    for project in table.projects:
        for size in table.sizes:
            c = table.cell(project, size)
            assert (c.median, c.count) == brute_force_cell(corpus, project, size)


def test_uniform_baseline_single_change_takes_29_attempts():
    corpus = synthetic_corpus(4)
    table = run_crossval(CrossValSpec(corpus, CT, "EQP", (1,)))
    assert {table.cell(p, 1).median for p in table.projects} == {29}


def test_trained_model_beats_uniform_on_skewed_corpus():
    corpus = synthetic_corpus(5, change_types=["statement_insert"] * 8 + ["statement_delete"], max_size=3)
    trained = median_of_medians(run_crossval(CrossValSpec(corpus, CT, "ALL", (1, 2, 3))))
    uniform = median_of_medians(run_crossval(CrossValSpec(corpus, CT, "EQP", (1, 2, 3))))
    for s in (1, 2, 3):
        assert uniform[s] >= trained[s]


def test_row_order_does_not_depend_on_input_order():
    corpus = synthetic_corpus(6)
    shuffled = corpus[:]
    random.Random(0).shuffle(shuffled)
    a = run_crossval(CrossValSpec(corpus, CT, "BFP"))
    b = run_crossval(CrossValSpec(shuffled, CT, "BFP"))
    assert a.to_csv() == b.to_csv()


def test_parallel_matches_serial():
    spec = CrossValSpec(synthetic_corpus(7), CT, "3-SC")
    assert run_crossval(spec, workers=1).records() == run_crossval(spec, workers=3).records()


def test_sizes_beyond_the_data_are_empty():
    table = run_crossval(CrossValSpec(synthetic_corpus(8, max_size=2), CT, "ALL", (1, 2, 7)))
    for p in table.projects:
        assert table.cell(p, 7) == Cell(None, 0, 0)
        assert table.cell(p, 1).count > 0


def test_split():
    corpus = synthetic_corpus(9)
    training, evaluation = split(corpus, "beta")
    assert {t.project for t in evaluation} == {"beta"}
    assert "beta" not in {t.project for t in training}
    assert len(training) + len(evaluation) == len(corpus)
    with pytest.raises(SplitError):
        split(corpus, "omega")


def test_single_project_is_rejected():
    with pytest.raises(SplitError):
        CrossValSpec(synthetic_corpus(1, projects=("solo",)), CT)


def test_unmined_transactions_are_rejected():
    corpus = synthetic_corpus(1) + [Transaction("x", "alpha")]
    with pytest.raises(NotMinedError):
        CrossValSpec(corpus, CT)


def test_empty_training_bag_gives_empty_row_with_note():
    corpus = synthetic_corpus(2, max_size=1)
    table = run_crossval(CrossValSpec(corpus, CT, "3-SC", (1,)))
    assert set(table.notes) == set(table.projects)
    assert all(table.cell(p, 1).empty for p in table.projects)


def test_out_of_space_changes_are_skipped():
    stranger = (SourceCodeChange("statement_insert", "method_invocation"),
                SourceCodeChange("statement_insert", "class"))
    corpus = synthetic_corpus(3, max_size=1) + [Transaction("odd", "alpha", "fix", 5, changes=stranger)]
    table = run_crossval(CrossValSpec(corpus, feature_space("CTET"), "ALL", (2,)))
    assert table.cell("alpha", 2).skipped == 1


@pytest.mark.parametrize("raw, name", [("all", "ALL"), ("Bfp", "BFP"), ("eqp", "EQP"),
                                       ("5-SC", "5-SC"), ("nsc:5", "5-SC"), ("5sc", "5-SC")])
def test_heuristic_names(raw, name):
    assert normalize_heuristic(raw) == name


def test_bad_heuristic_and_filter():
    with pytest.raises(InputError):
        normalize_heuristic("0-SC")
    with pytest.raises(InputError):
        CrossValSpec(synthetic_corpus(1), CT, evaluation="recent")


def test_bfp_evaluation_filter_reduces_counts():
    corpus = synthetic_corpus(10)
    everything = run_crossval(CrossValSpec(corpus, CT, "ALL", (1, 2)))
    fixes = run_crossval(CrossValSpec(corpus, CT, "ALL", (1, 2), evaluation="bfp"))
    for p in everything.projects:
        for s in (1, 2):
            assert fixes.cell(p, s).count <= everything.cell(p, s).count


def test_cell_formatting():
    assert format_cell(Cell(6, 996)) == "**6** (996)"
    assert format_cell(Cell(INFINITE, 44)) == "∞ (44)"
    assert format_cell(Cell(None, 0)) == "- (0)"


def test_markdown_and_csv_layout():
    table = run_crossval(CrossValSpec(synthetic_corpus(11), CT, "ALL", (1, 2)))
    md = table.to_markdown().splitlines()
    assert md[0] == "| Project / size | 1 | 2 |"
    assert md[2].startswith("| alpha | **")
    rows = list(csv.DictReader(io.StringIO(table.to_csv())))
    assert len(rows) == 3 * 2
    assert rows[0]["heuristic"] == "ALL" and rows[0]["model"] == "CT"


def test_heuristic_comparison_series():
    comparison = compare_heuristics(synthetic_corpus(12), CT, ["ALL", "eqp"], (1, 2))
    rows = list(csv.DictReader(io.StringIO(comparison.to_csv())))
    assert [(r["heuristic"], r["size"]) for r in rows] == [("ALL", "1"), ("ALL", "2"), ("EQP", "1"), ("EQP", "2")]
    assert rows[2]["median"] == "29"
