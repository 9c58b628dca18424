import itertools
import math
from collections import Counter

import pytest

from repair_miner.changes import FeatureSpace, SourceCodeChange, feature_space
from repair_miner.corpus import Transaction, TransactionBag
from repair_miner.errors import (
    DomainError,
    EmptyShapeError,
    InputError,
    NonterminatingOracleError,
    TrainingError,
    UnknownActionError,
)
from repair_miner.repair_model import (
    INFINITE,
    RepairModel,
    RepairShape,
    extract_shape,
    median_attempts,
    monte_carlo_median,
    multinomial_probability,
    repairability,
    shape_probability,
    train,
    uniform_model,
)


def toy_model(probs: dict) -> RepairModel:
    return RepairModel(FeatureSpace("CT", tuple(probs)), probs, "custom")


def _t(tid, *pairs):
    return Transaction(tid, "p", "fix", 0, changes=tuple(SourceCodeChange(ct, et) for ct, et in pairs))


def test_train_uses_relative_frequencies():
    bag = TransactionBag("ALL", tuple(
        [_t(f"a{i}", ("statement_insert", "method_invocation")) for i in range(60)]
        + [_t(f"b{i}", ("statement_delete", "assignment")) for i in range(40)]))
    model = train(bag, feature_space("CT"))
    assert model.probability("statement insert") == pytest.approx(0.6)
    assert model.probability("statement delete") == pytest.approx(0.4)
    assert model.provenance == "ALL"
    assert model.counts["statement insert"] == 60


def test_train_only_inserts():
    model = train([_t("x", ("statement_insert", "if_statement"))], feature_space("CT"))
    assert model.probability("statement insert") == 1.0


def test_train_on_empty_bag_fails():
    with pytest.raises(TrainingError):
        train([], feature_space("CT"))


def test_uniform_baseline():
    model = uniform_model(feature_space("CT"))
    assert model.provenance == "EQP"
    assert set(model.distribution.values()) == {1 / 41}


def test_model_validation():
    with pytest.raises(InputError):
        toy_model({"a": 0.5, "b": 0.4})
    with pytest.raises(InputError):
        toy_model({"a": 1.5, "b": -0.5})


def test_model_record_round_trip():
    model = toy_model({"a": 0.25, "b": 0.75})
    assert RepairModel.from_record(model.to_record()).distribution == model.distribution


def test_extract_shape():
    t = _t("x", ("statement_insert", "method_invocation"), ("statement_insert", "assignment"))
    shape = extract_shape(t, feature_space("CT"))
    assert shape.actions == (("statement insert", 2),) and shape.n == 2
    t2 = _t("y", ("statement_insert", "if_statement"), ("statement_insert", "throw_statement"))
    assert extract_shape(t2, feature_space("CTET")).labels() == [
        "statement insert of if statement", "statement insert of throw statement"]
    with pytest.raises(EmptyShapeError):
        extract_shape(_t("z"), feature_space("CT"))


@pytest.mark.parametrize("labels, probs, expected", [
    (["a", "a"], {"a": 0.3, "b": 0.7}, 0.09),
    (["a", "b"], {"a": 0.2, "b": 0.1, "c": 0.7}, 0.04),
    (["a", "a", "b"], {"a": 0.5, "b": 0.2, "c": 0.3}, 0.15),
])
def test_shape_probability_examples(labels, probs, expected):
    assert shape_probability(RepairShape.of(labels), toy_model(probs)) == pytest.approx(expected, abs=1e-15)


def test_unknown_action():
    with pytest.raises(UnknownActionError):
        shape_probability(RepairShape.of(["zzz"]), toy_model({"a": 1.0}))


def test_zero_probability_action_gives_zero():
    assert shape_probability(RepairShape.of(["b"]), toy_model({"a": 1.0, "b": 0.0})) == 0.0


def test_log_space_matches_exact_integers_beyond_twenty():
    mult, probs = [12, 9], [0.5, 0.5]
    exact = math.comb(21, 9) * 0.5 ** 21
    assert multinomial_probability(mult, probs) == pytest.approx(exact, rel=1e-12)


@pytest.mark.parametrize("m, n", [(2, 4), (3, 3), (4, 2), (6, 3)])
def test_enumeration_over_ordered_sequences(m, n):
    labels = [chr(ord("a") + i) for i in range(m)]
    weights = [i + 1 for i in range(m)]
    probs = {a: w / sum(weights) for a, w in zip(labels, weights)}
    model = toy_model(probs)
    by_shape = Counter()
    for seq in itertools.product(labels, repeat=n):
        by_shape[tuple(sorted(seq))] += math.prod(probs[a] for a in seq)
    total = 0.0
    for key, p in by_shape.items():
        got = shape_probability(RepairShape.of(key), model)
        assert abs(got - p) <= 1e-12
        total += got
    assert total == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("p, expected", [
    (0.5, 1), (0.9, 1), (1.0, 1), (0.33 / 104, 219), (0.0, INFINITE), (1e-16, INFINITE),
    (1 / 41, 29), (0.3, 2), (0.29, 3),
])
def test_median_attempts_examples(p, expected):
    assert median_attempts(p) == expected


@pytest.mark.parametrize("p", [-0.1, 1.1, float("nan")])
def test_median_attempts_domain(p):
    with pytest.raises(DomainError):
        median_attempts(p)


def test_median_attempts_is_non_increasing():
    values = [median_attempts(p / 1000) for p in range(1, 1000)]
    assert all(a >= b for a, b in zip(values, values[1:]))


def test_repairability_compositions():
    assert repairability(RepairShape.of(["a"]), toy_model({"a": 1.0, "b": 0.0})).attempts == 1
    r = repairability(RepairShape.of(["a", "b"]), toy_model({"a": 0.5, "b": 0.5}))
    assert r.p == 0.5 and r.attempts == 1
    # two statement insertions under P(statement insert) = 0.24 take about a dozen attempts
    r2 = repairability(RepairShape.of(["ins", "ins"]), toy_model({"ins": 0.24, "other": 0.76}))
    assert r2.attempts == 12


def test_monte_carlo_half_probability_shape():
    result = monte_carlo_median(RepairShape.of(["a", "b"]), toy_model({"a": 0.5, "b": 0.5}), 100_000, seed=3)
    assert result.median == 1 and result.capped == 0


def test_monte_carlo_five_action_model():
    model = toy_model({"a": 0.35, "b": 0.25, "c": 0.2, "d": 0.15, "e": 0.05})
    shape = RepairShape.of(["b", "d"])
    analytic = repairability(shape, model).attempts
    result = monte_carlo_median(shape, model, 100_000, seed=11)
    assert abs(result.median - analytic) <= 1


def test_monte_carlo_is_reproducible():
    model = toy_model({"a": 0.6, "b": 0.3, "c": 0.1})
    shape = RepairShape.of(["c", "b"])
    assert monte_carlo_median(shape, model, 2000, seed=5) == monte_carlo_median(shape, model, 2000, seed=5)


def test_monte_carlo_cap_is_reported():
    model = toy_model({"a": 0.999, "b": 0.001})
    result = monte_carlo_median(RepairShape.of(["b"]), model, 50, seed=1, cap=10, block=64)
    assert result.capped > 0 and result.median == 10


def test_monte_carlo_refuses_impossible_shape():
    with pytest.raises(NonterminatingOracleError):
        monte_carlo_median(RepairShape.of(["b"]), toy_model({"a": 1.0, "b": 0.0}), 10)
