import pytest

from clickprop import PairGroup, ratio_estimate, ratio_matrix


def _group(appearances, name="q"):
    return PairGroup(name, name, tuple(appearances))


def test_click_count_ratio():
    # pair A clicked at both ranks, pair B clicked at rank 1 only
    pairs = [
        _group([(1, True), (2, True)], "a"),
        _group([(1, True), (2, False)], "b"),
    ]
    est = ratio_estimate(pairs, 1, 2)
    assert est.ratio == pytest.approx(2.0)
    assert est.n_pairs == 2


def test_symmetric_clicks_give_one():
    pairs = [
        _group([(1, True), (2, False)], "a"),
        _group([(1, False), (2, True)], "b"),
    ]
    assert ratio_estimate(pairs, 1, 2).ratio == pytest.approx(1.0)


def test_clicks_per_impression_for_repeat_appearances():
    # rank 1 seen twice (one click): 0.5 clicks per impression
    pairs = [
        _group([(1, True), (1, False), (2, True)], "a"),
        _group([(1, True), (2, True)], "b"),
    ]
    est = ratio_estimate(pairs, 1, 2)
    assert est.ratio == pytest.approx((0.5 + 1.0) / (1.0 + 1.0))


def test_groups_missing_either_rank_excluded():
    pairs = [
        _group([(1, True), (2, True)], "a"),
        _group([(1, True), (3, False)], "b"),   # lacks rank 2
        _group([(2, True), (3, False)], "c"),   # lacks rank 1
    ]
    assert ratio_estimate(pairs, 1, 2).n_pairs == 1


def test_no_click_groups_still_count():
    pairs = [
        _group([(1, True), (2, True)], "a"),
        _group([(1, False), (2, False)], "b"),
    ]
    est = ratio_estimate(pairs, 1, 2)
    assert est.n_pairs == 2
    assert est.ratio == pytest.approx(1.0)


def test_antisymmetry_is_exact():
    pairs = [
        _group([(1, True), (2, False)], "a"),
        _group([(1, True), (2, True)], "b"),
        _group([(1, False), (2, True)], "c"),
        _group([(1, True), (1, False), (2, True)], "d"),
    ]
    forward = ratio_estimate(pairs, 1, 2).ratio
    backward = ratio_estimate(pairs, 2, 1).ratio
    assert forward * backward == 1.0


def test_errors():
    pairs = [_group([(1, True), (2, False)], "a")]
    with pytest.raises(ValueError, match="differ"):
        ratio_estimate(pairs, 2, 2)
    with pytest.raises(ValueError, match="no pair group"):
        ratio_estimate(pairs, 1, 3)
    # rank 2 is the denominator and never got a click
    with pytest.raises(ValueError, match="undefined"):
        ratio_estimate(pairs, 1, 2)
    # a zero numerator is fine: the ratio is simply 0
    assert ratio_estimate(pairs, 2, 1).ratio == 0.0


def test_matrix_rows():
    pairs = [
        _group([(1, True), (2, False)], "a"),
        _group([(1, False), (2, True)], "b"),
        _group([(1, True), (4, False)], "c"),
        _group([(1, False), (4, True)], "d"),
    ]
    rows = ratio_matrix(pairs, [1, 2, 4])
    assert [(i, j) for i, j, _, _ in rows] == [(1, 2), (1, 4)]  # (2,4) has no data
    by_pair = {(i, j): ratio for i, j, ratio, _ in rows}
    assert by_pair[(1, 2)] == pytest.approx(1.0)
