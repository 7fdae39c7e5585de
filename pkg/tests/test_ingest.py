import io
import json
from decimal import Decimal

import numpy as np
import pytest

from clickprop import (
    ExtractionConfig,
    ExtractionSummary,
    LogParseError,
    PairGroup,
    Platform,
    SelectionMode,
    group_pairs,
    parse_log,
    read_pairs_jsonl,
    select_estimation_pairs,
    write_pairs_jsonl,
)

from oracles import full_profile_loglik


def _line(**overrides):
    obj = {
        "query_id": "q1", "doc_id": "d1", "rank": 3, "clicked": True,
        "day": 7, "is_auction": False, "platform": "web",
        "sort_type": "best_match",
    }
    obj.update(overrides)
    return json.dumps(obj)


def _record(query="q1", doc="d1", rank=1, clicked=False, day=0,
            price="10", auction=False, platform=Platform.WEB, sort="best_match"):
    return {
        "query_id": query, "doc_id": doc, "rank": rank, "clicked": clicked,
        "day": day, "price": price, "is_auction": auction,
        "platform": platform.value, "sort_type": sort,
    }


def _parse(objs, **kw):
    stream = io.StringIO("\n".join(json.dumps(o) for o in objs) + "\n")
    return parse_log(stream, **kw)


class TestParseLog:
    def test_single_line(self):
        records = parse_log(io.StringIO(_line() + "\n"))
        assert len(records) == 1
        rec = records[0]
        assert (rec.query_id, rec.doc_id, rec.rank, rec.clicked) == ("q1", "d1", 3, True)
        assert rec.day == 7 and not rec.is_auction
        assert rec.platform is Platform.WEB

    def test_empty_stream(self):
        assert parse_log(io.StringIO("")) == []

    def test_rank_zero_reports_line_number(self):
        stream = io.StringIO(_line() + "\n" + _line(rank=0) + "\n")
        with pytest.raises(LogParseError, match="line 2"):
            parse_log(stream)

    def test_rank_beyond_rank_max_rejected_not_clipped(self):
        with pytest.raises(LogParseError, match="exceeds rank_max"):
            _parse([_record(rank=501)])
        # cap is configurable, and can be disabled
        assert _parse([_record(rank=501)], rank_max=None)[0].rank == 501
        assert _parse([_record(rank=9)], rank_max=10)[0].rank == 9

    def test_malformed_json_reports_line_number(self):
        stream = io.StringIO(_line() + "\n{not json\n")
        with pytest.raises(LogParseError, match="line 2"):
            parse_log(stream)

    def test_missing_field(self):
        with pytest.raises(LogParseError, match="missing field"):
            parse_log(io.StringIO('{"query_id": "q"}\n'))

    def test_price_decimal_string_or_number(self):
        records = _parse([_record(price="10.50"), _record(price=7),
                          dict(_record(), price=None)])
        assert records[0].price == Decimal("10.50")
        assert records[1].price == Decimal(7)
        assert records[2].price is None

    def test_unknown_platform(self):
        with pytest.raises(LogParseError, match="platform"):
            _parse([_record() | {"platform": "tablet"}])

    def test_accepts_bytes_lines(self):
        records = parse_log([(_line() + "\n").encode()])
        assert records[0].rank == 3


class TestGroupPairs:
    def test_same_pair_same_day_one_group(self):
        records = _parse([
            _record(rank=2, clicked=True),
            _record(rank=5),
        ])
        groups = group_pairs(records, ExtractionConfig())
        assert len(groups) == 1
        assert groups[0].appearances == ((2, True), (5, False))

    def test_price_change_drops_group(self):
        records = _parse([_record(rank=2, price="10"), _record(rank=5, price="11")])
        cfg = ExtractionConfig()
        assert group_pairs(records, cfg) == []
        relaxed = ExtractionConfig(require_same_price=False)
        assert len(group_pairs(records, relaxed)) == 1

    def test_missing_price_drops_group(self):
        records = _parse([_record(rank=2, price=None), _record(rank=5, price=None)])
        assert group_pairs(records, ExtractionConfig()) == []

    def test_distinct_docs_two_groups(self):
        records = _parse([_record(doc="d1", rank=2), _record(doc="d2", rank=5)])
        groups = group_pairs(records, ExtractionConfig())
        assert [g.key for g in groups] == [("q1", "d1"), ("q1", "d2")]

    def test_different_days_split_unless_disabled(self):
        records = _parse([_record(rank=2, day=1), _record(rank=5, day=2)])
        assert len(group_pairs(records, ExtractionConfig())) == 2
        merged = group_pairs(records, ExtractionConfig(require_same_day=False))
        assert len(merged) == 1
        assert merged[0].appearances == ((2, False), (5, False))

    def test_auction_excluded(self):
        records = _parse([_record(rank=2, auction=True), _record(rank=5, auction=True)])
        assert group_pairs(records, ExtractionConfig()) == []
        kept = group_pairs(records, ExtractionConfig(exclude_auctions=False))
        assert len(kept) == 1

    def test_platform_and_sort_filters(self):
        records = _parse([
            _record(rank=2, platform=Platform.WEB),
            _record(rank=5, platform=Platform.MOBILE),
            _record(doc="d2", rank=3, sort="price_asc"),
        ])
        cfg = ExtractionConfig(platform_filter=Platform.WEB,
                               sort_type_filter="best_match")
        groups = group_pairs(records, cfg)
        assert len(groups) == 1
        assert groups[0].appearances == ((2, False),)

    def test_canonical_order(self):
        records = _parse([
            _record(query="q2", doc="d1", rank=1),
            _record(query="q1", doc="d2", rank=1),
            _record(query="q1", doc="d1", rank=1),
        ])
        groups = group_pairs(records, ExtractionConfig())
        assert [g.key for g in groups] == [("q1", "d1"), ("q1", "d2"), ("q2", "d1")]

    def test_summary_counts(self):
        records = _parse([
            _record(rank=2), _record(rank=5),                      # kept group
            _record(doc="d2", rank=1, price="3"),
            _record(doc="d2", rank=4, price="4"),                  # price drop
            _record(doc="d3", rank=1, auction=True),               # auction drop
            _record(doc="d4", rank=2, platform=Platform.MOBILE),   # record drop
        ])
        summary = ExtractionSummary()
        cfg = ExtractionConfig(platform_filter=Platform.WEB)
        group_pairs(records, cfg, summary)
        assert summary.n_records == 6
        assert summary.n_records_dropped == 1
        assert summary.n_groups == 3
        assert summary.n_dropped_price == 1
        assert summary.n_dropped_auction == 1
        assert summary.n_candidates == 1


def _group(appearances, query="q", doc="d"):
    return PairGroup(query, doc, tuple(appearances))


class TestSelectEstimationPairs:
    def test_two_ranks_one_click_kept(self):
        kept = select_estimation_pairs(
            [_group([(2, True), (5, False)])], ExtractionConfig())
        assert len(kept) == 1

    def test_no_click_dropped(self):
        assert select_estimation_pairs(
            [_group([(2, False), (5, False)])], ExtractionConfig()) == []

    def test_single_distinct_rank_dropped(self):
        assert select_estimation_pairs(
            [_group([(4, True), (4, False)])], ExtractionConfig()) == []

    def test_strict_mode_drops_extra_appearances_and_double_clicks(self):
        cfg = ExtractionConfig()
        assert select_estimation_pairs(
            [_group([(2, True), (5, False), (9, False)])], cfg) == []
        assert select_estimation_pairs(
            [_group([(2, True), (5, True)])], cfg) == []

    def test_relaxed_mode(self):
        cfg = ExtractionConfig(
            selection_mode=SelectionMode.AT_LEAST_TWO_RANKS_ONE_PLUS_CLICKS)
        kept = select_estimation_pairs([
            _group([(2, True), (5, False), (9, False)]),
            _group([(2, True), (5, True)]),
            _group([(4, True), (4, False)]),
            _group([(2, False), (5, False)]),
        ], cfg)
        assert len(kept) == 2

    def test_output_is_subsequence_and_predicate_holds(self):
        rng = np.random.default_rng(5)
        groups = []
        for i in range(200):
            m = rng.integers(1, 5)
            apps = [(int(rng.integers(1, 6)), bool(rng.random() < 0.4))
                    for _ in range(m)]
            groups.append(_group(apps, query=f"q{i}"))
        for mode in SelectionMode:
            cfg = ExtractionConfig(selection_mode=mode)
            kept = select_estimation_pairs(groups, cfg)
            it = iter(groups)
            assert all(g in it for g in kept)  # subsequence
            for g in kept:
                if mode is SelectionMode.EXACTLY_TWO_RANKS_ONE_CLICK:
                    assert len(g.appearances) == 2
                    assert len(g.distinct_ranks()) == 2
                    assert g.n_clicks() == 1
                else:
                    assert len(g.distinct_ranks()) >= 2
                    assert g.n_clicks() >= 1


def test_no_click_groups_do_not_move_the_estimate():
    """Groups without clicks drop out of the profiled full likelihood."""
    clicked_groups = [
        _group([(1, True), (2, False)], query=f"a{i}") for i in range(6)
    ] + [
        _group([(2, True), (1, False)], query=f"b{i}") for i in range(4)
    ]
    no_click = [_group([(1, False), (2, False)], query=f"c{i}") for i in range(5)]

    grid = np.linspace(0.05, 1.5, 300)
    with_lls = [full_profile_loglik([1.0, p2], clicked_groups + no_click)
                for p2 in grid]
    without_lls = [full_profile_loglik([1.0, p2], clicked_groups) for p2 in grid]
    assert np.argmax(with_lls) == np.argmax(without_lls)
    assert np.allclose(with_lls, without_lls)  # terms are exactly 1


def test_pairs_jsonl_round_trip():
    groups = [
        _group([(2, True), (5, False)], query="q1"),
        _group([(1, False), (3, True), (3, False)], query="q2"),
    ]
    buf = io.StringIO()
    write_pairs_jsonl(groups, buf)
    buf.seek(0)
    assert read_pairs_jsonl(buf) == groups


def test_pairs_jsonl_error_carries_line():
    with pytest.raises(LogParseError, match="line 1"):
        read_pairs_jsonl(io.StringIO('{"query_id": "q"}\n'))
