"""Impression-log parsing and extraction of estimation-ready pair groups.

The pipeline is: parse JSONL impressions, group them into candidate
query-document pair groups (applying the relevance-stability filters),
then select the groups whose click pattern is usable by the
conditional-likelihood estimator.
"""

import json
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from enum import Enum
from typing import IO, Iterable

from .domain import DEFAULT_RANK_MAX, ImpressionRecord, PairGroup, Platform


class LogParseError(ValueError):
    """Malformed or invalid impression line; carries the 1-based line number."""

    def __init__(self, line_number: int, message: str):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class SelectionMode(str, Enum):
    # exactly two appearances at distinct ranks, exactly one clicked
    EXACTLY_TWO_RANKS_ONE_CLICK = "exactly_two_ranks_one_click"
    # at least two distinct ranks and at least one click
    AT_LEAST_TWO_RANKS_ONE_PLUS_CLICKS = "at_least_two_ranks_one_plus_clicks"


@dataclass(frozen=True)
class ExtractionConfig:
    """Filters ensuring the pair's relevance stayed constant between appearances."""

    require_same_day: bool = True
    require_same_price: bool = True
    exclude_auctions: bool = True
    platform_filter: Platform | None = None
    sort_type_filter: str | None = None
    selection_mode: SelectionMode = SelectionMode.EXACTLY_TWO_RANKS_ONE_CLICK


@dataclass
class ExtractionSummary:
    """Counts reported alongside extraction; filtering itself is silent."""

    n_records: int = 0
    n_records_dropped: int = 0
    n_groups: int = 0
    n_dropped_price: int = 0
    n_dropped_auction: int = 0
    n_candidates: int = 0
    n_selected: int = 0

    def lines(self) -> list[str]:
        return [
            f"records read: {self.n_records} "
            f"(dropped by platform/sort filters: {self.n_records_dropped})",
            f"groups formed: {self.n_groups} "
            f"(dropped: price {self.n_dropped_price}, auction {self.n_dropped_auction})",
            f"candidate groups: {self.n_candidates}, selected: {self.n_selected}",
        ]


def _parse_price(value, line_number: int) -> Decimal | None:
    if value is None:
        return None
    try:
        if isinstance(value, bool):
            raise InvalidOperation
        if isinstance(value, float):
            return Decimal(str(value))
        return Decimal(value)
    except (InvalidOperation, TypeError, ValueError):
        raise LogParseError(line_number, f"invalid price {value!r}") from None


def _record_from_obj(obj: dict, line_number: int,
                     rank_max: int | None) -> ImpressionRecord:
    try:
        query_id = str(obj["query_id"])
        doc_id = str(obj["doc_id"])
        rank = int(obj["rank"])
        clicked = bool(obj["clicked"])
        day = int(obj["day"])
    except KeyError as exc:
        raise LogParseError(line_number, f"missing field {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        raise LogParseError(line_number, str(exc)) from None
    if rank < 1:
        raise LogParseError(line_number, f"rank must be >= 1, got {rank}")
    if rank_max is not None and rank > rank_max:
        raise LogParseError(
            line_number, f"rank {rank} exceeds rank_max {rank_max}"
        )
    try:
        platform = Platform(obj.get("platform", "web"))
    except ValueError:
        raise LogParseError(
            line_number, f"unknown platform {obj.get('platform')!r}"
        ) from None
    return ImpressionRecord(
        query_id=query_id,
        doc_id=doc_id,
        rank=rank,
        clicked=clicked,
        day=day,
        price=_parse_price(obj.get("price"), line_number),
        is_auction=bool(obj.get("is_auction", False)),
        platform=platform,
        sort_type=str(obj.get("sort_type", "best_match")),
    )


def parse_log(stream: Iterable[str] | IO,
              rank_max: int | None = DEFAULT_RANK_MAX) -> list[ImpressionRecord]:
    """Parse a JSONL impression log, one record per line, in input order.

    Ranks beyond ``rank_max`` are rejected rather than clipped; pass
    ``rank_max=None`` to disable the cap. Raises LogParseError with the
    offending line number on malformed input.
    """
    records = []
    for line_number, line in enumerate(stream, start=1):
        if isinstance(line, bytes):
            line = line.decode("utf-8")
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise LogParseError(line_number, f"invalid JSON: {exc.msg}") from None
        if not isinstance(obj, dict):
            raise LogParseError(line_number, "line is not a JSON object")
        records.append(_record_from_obj(obj, line_number, rank_max))
    return records


def _passes_record_filters(record: ImpressionRecord, cfg: ExtractionConfig) -> bool:
    if cfg.platform_filter is not None and record.platform != cfg.platform_filter:
        return False
    if cfg.sort_type_filter is not None and record.sort_type != cfg.sort_type_filter:
        return False
    return True


def _group_key(record: ImpressionRecord, cfg: ExtractionConfig):
    day = record.day if cfg.require_same_day else None
    return (record.query_id, record.doc_id, day)


def group_pairs(records: list[ImpressionRecord], cfg: ExtractionConfig,
                summary: ExtractionSummary | None = None) -> list[PairGroup]:
    """Group impressions into candidate PairGroups, applying stability filters.

    Records sharing (query_id, doc_id) -- and the same day when
    ``require_same_day`` -- form one candidate; groups failing the price
    or auction filters are silently dropped. Output order is canonical
    (sorted by key) so it does not depend on how grouping is scheduled.
    """
    if summary is not None:
        summary.n_records = len(records)

    buckets: dict[tuple, list[ImpressionRecord]] = {}
    n_dropped_records = 0
    for record in records:
        if not _passes_record_filters(record, cfg):
            n_dropped_records += 1
            continue
        buckets.setdefault(_group_key(record, cfg), []).append(record)

    groups = []
    n_dropped_price = 0
    n_dropped_auction = 0
    for key in sorted(buckets, key=lambda k: (k[0], k[1], k[2] is None, k[2])):
        members = buckets[key]
        if cfg.exclude_auctions and any(m.is_auction for m in members):
            n_dropped_auction += 1
            continue
        if cfg.require_same_price:
            prices = {m.price for m in members}
            if None in prices or len(prices) > 1:
                n_dropped_price += 1
                continue
        groups.append(PairGroup(
            query_id=members[0].query_id,
            doc_id=members[0].doc_id,
            appearances=tuple((m.rank, m.clicked) for m in members),
        ))

    if summary is not None:
        summary.n_records_dropped = n_dropped_records
        summary.n_groups = len(buckets)
        summary.n_dropped_price = n_dropped_price
        summary.n_dropped_auction = n_dropped_auction
        summary.n_candidates = len(groups)
    return groups


def _selected(group: PairGroup, mode: SelectionMode) -> bool:
    if mode is SelectionMode.EXACTLY_TWO_RANKS_ONE_CLICK:
        return (
            len(group.appearances) == 2
            and len(group.distinct_ranks()) == 2
            and group.n_clicks() == 1
        )
    return len(group.distinct_ranks()) >= 2 and group.n_clicks() >= 1


def select_estimation_pairs(groups: list[PairGroup], cfg: ExtractionConfig,
                            summary: ExtractionSummary | None = None) -> list[PairGroup]:
    """Keep the groups whose click pattern identifies propensity ratios.

    Groups at a single rank, or without clicks, carry no information
    about the ratios and would cancel out of the likelihood; the strict
    default additionally keeps only two-appearance, one-click groups.
    Pure filter: the output is a subsequence of the input.
    """
    selected = [g for g in groups if _selected(g, cfg.selection_mode)]
    if summary is not None:
        summary.n_selected = len(selected)
    return selected


def extract_pairs(records: list[ImpressionRecord],
                  cfg: ExtractionConfig) -> tuple[list[PairGroup], ExtractionSummary]:
    """Convenience wrapper: group, filter and select, returning the summary."""
    summary = ExtractionSummary()
    groups = group_pairs(records, cfg, summary)
    selected = select_estimation_pairs(groups, cfg, summary)
    return selected, summary


# ---------------------------------------------------------------------------
# JSONL serialization


def impression_to_obj(record: ImpressionRecord) -> dict:
    obj = {
        "query_id": record.query_id,
        "doc_id": record.doc_id,
        "rank": record.rank,
        "clicked": record.clicked,
        "day": record.day,
        "is_auction": record.is_auction,
        "platform": record.platform.value,
        "sort_type": record.sort_type,
    }
    if record.price is not None:
        obj["price"] = str(record.price)
    return obj


def write_impressions_jsonl(records: Iterable[ImpressionRecord], stream: IO) -> None:
    for record in records:
        stream.write(json.dumps(impression_to_obj(record)) + "\n")


def pair_to_obj(group: PairGroup) -> dict:
    return {
        "query_id": group.query_id,
        "doc_id": group.doc_id,
        "appearances": [[rank, clicked] for rank, clicked in group.appearances],
    }


def write_pairs_jsonl(groups: Iterable[PairGroup], stream: IO) -> None:
    for group in groups:
        stream.write(json.dumps(pair_to_obj(group)) + "\n")


def read_pairs_jsonl(stream: Iterable[str] | IO) -> list[PairGroup]:
    groups = []
    for line_number, line in enumerate(stream, start=1):
        if isinstance(line, bytes):
            line = line.decode("utf-8")
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
            groups.append(PairGroup(
                query_id=str(obj["query_id"]),
                doc_id=str(obj["doc_id"]),
                appearances=tuple((int(r), bool(c)) for r, c in obj["appearances"]),
            ))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise LogParseError(line_number, f"invalid pair group: {exc}") from None
    return groups
