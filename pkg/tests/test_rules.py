from collections import Counter

import numpy as np
import pytest

from src.rules import aggregate, aggregate_mv, aggregate_or, order_rows, sort_key
from src.state import ConfusionCounts, MetricsRow, ReportRow


# ---------------------------------------------------------------------------
# Fixtures
# ---------------------------------------------------------------------------


def make_row(label: str, bcr=None, sens=None, mean4=None) -> ReportRow:
    row = MetricsRow(
        acc=None, bcr=bcr, sens=sens, spec=None, f1=None, mean4=mean4,
        counts=ConfusionCounts(tp=0, tn=0, fp=0, fn=0),
    )
    return ReportRow(label=label, kind="model", composition=label, metrics=row)


def mode_oracle(row) -> int:
    return Counter(int(v) for v in row).most_common(1)[0][0]


# ---------------------------------------------------------------------------
# Rule 1: Majority vote
# ---------------------------------------------------------------------------


def test_mv_two_of_three_flags_fraud():
    assert aggregate_mv([[1, 1, 0]]).tolist() == [1]


def test_mv_all_zero_is_genuine():
    assert aggregate_mv([[0, 0, 0, 0, 0]]).tolist() == [0]


def test_mv_rejects_even_member_count():
    with pytest.raises(ValueError, match="odd"):
        aggregate_mv([[1, 0]])


def test_mv_rejects_non_binary_votes():
    with pytest.raises(ValueError):
        aggregate_mv([[1, 2, 0]])


@pytest.mark.parametrize("m", [1, 3, 5, 7])
def test_mv_matches_brute_force_mode(m):
    rng = np.random.default_rng(m)
    votes = rng.integers(0, 2, size=(2000, m))
    expected = [mode_oracle(row) for row in votes]
    assert aggregate_mv(votes).tolist() == expected


def test_mv_is_invariant_under_member_reordering():
    rng = np.random.default_rng(11)
    votes = rng.integers(0, 2, size=(300, 5))
    shuffled = votes[:, [4, 2, 0, 3, 1]]
    assert np.array_equal(aggregate_mv(votes), aggregate_mv(shuffled))


# ---------------------------------------------------------------------------
# Rule 2: OR-logic
# ---------------------------------------------------------------------------


def test_or_single_member_flag_is_enough():
    assert aggregate_or([[0, 1, 0]]).tolist() == [1]


def test_or_all_zero_is_genuine():
    assert aggregate_or([[0, 0]]).tolist() == [0]


def test_or_matches_logical_or_oracle():
    rng = np.random.default_rng(5)
    votes = rng.integers(0, 2, size=(1000, 4))
    expected = [int(any(row)) for row in votes]
    assert aggregate_or(votes).tolist() == expected


def test_identical_members_reproduce_the_member():
    column = np.random.default_rng(2).integers(0, 2, 200)
    votes = np.column_stack([column] * 3)
    assert np.array_equal(aggregate("MV", votes), column)
    assert np.array_equal(aggregate("OR", votes), column)


# ---------------------------------------------------------------------------
# Rule 3: Report order
# ---------------------------------------------------------------------------


def test_order_by_bcr_descending():
    rows = order_rows([make_row("a", bcr=0.9, sens=0.1), make_row("b", bcr=0.8, sens=0.9)])
    assert [r.label for r in rows] == ["a", "b"]


def test_equal_bcr_orders_by_sensitivity():
    rows = order_rows([make_row("a", bcr=0.8, sens=0.7), make_row("b", bcr=0.8, sens=0.9)])
    assert [r.label for r in rows] == ["b", "a"]


def test_equal_bcr_and_sens_orders_by_mean4():
    rows = order_rows([
        make_row("a", bcr=0.8, sens=0.8, mean4=0.5),
        make_row("b", bcr=0.8, sens=0.8, mean4=0.6),
    ])
    assert [r.label for r in rows] == ["b", "a"]


def test_full_ties_keep_input_order():
    rows = order_rows([make_row(str(i), bcr=0.5, sens=0.5, mean4=0.5) for i in range(5)])
    assert [r.label for r in rows] == ["0", "1", "2", "3", "4"]


def test_undefined_sorts_after_every_defined_value():
    rows = order_rows([make_row("undef", bcr=None), make_row("zero", bcr=0.0, sens=0.0, mean4=0.0)])
    assert [r.label for r in rows] == ["zero", "undef"]


def test_order_matches_comparison_oracle():
    rng = np.random.default_rng(9)
    rows = [
        make_row(f"r{i}", bcr=float(rng.choice([0.5, 0.75, 1.0])), sens=float(rng.choice([0.2, 0.4])),
                 mean4=float(rng.random()))
        for i in range(200)
    ]
    ordered = order_rows(rows)
    for earlier, later in zip(ordered, ordered[1:]):
        a, b = earlier.metrics, later.metrics
        assert (a.bcr, a.sens, a.mean4) >= (b.bcr, b.sens, b.mean4)
    assert sort_key(ordered[0].metrics) <= sort_key(ordered[-1].metrics)
