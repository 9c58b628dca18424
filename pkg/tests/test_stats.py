import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from repair_miner.changes import SourceCodeChange, feature_space
from repair_miner.corpus import Transaction
from repair_miner.errors import DimensionError, InputError, NotMinedError, UnsupportedSizeError
from repair_miner.stats import (
    agreement,
    average_ranks,
    frequencies,
    read_ratings_csv,
    spearman_critical_value,
    spearman_rho,
    spearman_significant,
)


def naive_ranks(values):
    """Average rank via pairwise comparisons: 1 + #smaller + (#equal - 1) / 2."""
    return [1 + sum(w < v for w in values) + (sum(w == v for w in values) - 1) / 2 for v in values]


def naive_spearman(x, y):
    rx, ry = naive_ranks(x), naive_ranks(y)
    mx, my = sum(rx) / len(rx), sum(ry) / len(ry)
    num = sum((a - mx) * (b - my) for a, b in zip(rx, ry))
    den = math.sqrt(sum((a - mx) ** 2 for a in rx) * sum((b - my) ** 2 for b in ry))
    return num / den


def test_average_ranks_with_ties():
    assert list(average_ranks([10, 20, 20, 30])) == [1.0, 2.5, 2.5, 4.0]


def test_rho_of_monotone_transform_is_one():
    x = [0.1, 0.5, 0.2, 0.9, 0.3]
    assert spearman_rho(x, [v ** 3 + 7 for v in x]) == pytest.approx(1.0, abs=1e-12)
    assert spearman_rho(x, [-v for v in x]) == pytest.approx(-1.0, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 40).flatmap(lambda n: st.tuples(
    st.lists(st.integers(0, 6), min_size=n, max_size=n),
    st.lists(st.integers(0, 6), min_size=n, max_size=n))))
def test_rho_matches_pairwise_rank_oracle(pair):
    x, y = pair
    rho = spearman_rho(x, y)
    if len(set(x)) < 2 or len(set(y)) < 2:
        assert math.isnan(rho)
    else:
        assert abs(rho - naive_spearman(x, y)) <= 1e-12


def test_rho_dimension_errors():
    with pytest.raises(DimensionError):
        spearman_rho([1, 2, 3], [1, 2])
    with pytest.raises(DimensionError):
        spearman_rho([1], [1])


def test_critical_values():
    assert spearman_critical_value(41) == 0.364
    assert spearman_critical_value(60) == 0.301
    assert spearman_critical_value(127) == 0.301
    with pytest.raises(UnsupportedSizeError):
        spearman_critical_value(12)
    assert spearman_significant(0.365, feature_space("CT"))
    assert not spearman_significant(0.364, feature_space("CT"))
    assert spearman_significant(0.302, feature_space("CTET"))


def _t(tid, *pairs):
    return Transaction(tid, "p", changes=tuple(SourceCodeChange(ct, et) for ct, et in pairs))


def test_frequencies_count_every_change():
    bag = [_t("1", ("statement_insert", "method_invocation"), ("statement_insert", "if_statement")),
           _t("2", ("statement_delete", "assignment"))]
    table = frequencies(bag, feature_space("CT"))
    assert table.total == 3
    assert table.alpha["statement insert"] == 2
    assert table.chi["statement insert"] == pytest.approx(2 / 3)
    assert sum(table.chi.values()) == pytest.approx(1.0)
    assert table.top(1) == [("statement insert", 2, pytest.approx(2 / 3))]
    ctet = frequencies(bag, feature_space("CTET"))
    assert ctet.alpha["statement insert of if statement"] == 1


def test_empty_bag_has_undefined_chi():
    table = frequencies([], feature_space("CT"))
    assert not table.defined and table.chi is None
    assert np.all(table.vector() == 0)


def test_frequencies_need_mined_transactions():
    with pytest.raises(NotMinedError):
        frequencies([Transaction("x", "p")], feature_space("CT"))


def test_perfect_agreement():
    result = agreement([[3, 0], [0, 3], [3, 0]])
    assert result.p_bar == 1.0
    assert result.kappa == 1.0


def test_hand_computed_two_item_three_rater_case():
    result = agreement([[3, 0], [2, 1]])
    assert result.per_item == (1.0, 1 / 3)
    assert result.p_bar == 2 / 3
    assert Fraction(result.p_e).limit_denominator(1000) == Fraction(13, 18)
    assert result.kappa == -0.2


def test_injected_disagreement_lowers_kappa():
    perfect = agreement([[4, 0, 0], [0, 4, 0], [0, 0, 4]]).kappa
    noisy = agreement([[3, 1, 0], [0, 4, 0], [0, 0, 4]]).kappa
    noisier = agreement([[3, 1, 0], [1, 3, 0], [0, 1, 3]]).kappa
    assert perfect == 1.0 > noisy > noisier


def test_kappa_undefined_when_chance_agreement_is_one():
    assert agreement([[3, 0], [3, 0]]).kappa is None


def test_agreement_rejects_uneven_raters():
    with pytest.raises(InputError):
        agreement([[2, 1], [1, 1]])


def test_ratings_csv():
    items, cats, counts = read_ratings_csv("item,yes,no\nT1,2,1\nT2,1,2\n")
    assert items == ["T1", "T2"] and cats == ["yes", "no"] and counts == [[2, 1], [1, 2]]
    with pytest.raises(InputError):
        read_ratings_csv("item,yes,no\nT1,2\n")
