"""Propensity-ratio estimation from pairs co-occurring at two fixed ranks.

When many query-document pairs have appearances at both ranks i and j,
the ratio of their summed clicks-per-impression at the two ranks
estimates the propensity ratio p_i / p_j directly: the shared per-pair
relevances cancel from numerator and denominator.

Unlike the likelihood estimator this consumes raw candidate groups,
with no one-click selection: clicks and non-clicks both count.
"""

from dataclasses import dataclass

from .domain import PairGroup


@dataclass(frozen=True)
class RatioEstimate:
    ratio: float
    n_pairs: int


def _clicks_per_impression(group: PairGroup, rank: int) -> float | None:
    impressions = 0
    clicks = 0
    for r, clicked in group.appearances:
        if r == rank:
            impressions += 1
            clicks += int(clicked)
    if impressions == 0:
        return None
    return clicks / impressions


def ratio_estimate(pairs: list[PairGroup], rank_i: int, rank_j: int) -> RatioEstimate:
    """Estimate p(rank_i) / p(rank_j) over pairs seen at both ranks.

    For each eligible pair, clicks-per-impression is computed at each
    of the two ranks; the estimate is the ratio of the sums. Raises if
    no pair covers both ranks, or if the denominator sum is zero.
    """
    if rank_i == rank_j:
        raise ValueError("rank_i and rank_j must differ")
    total_i = 0.0
    total_j = 0.0
    n_pairs = 0
    for group in pairs:
        cpi_i = _clicks_per_impression(group, rank_i)
        cpi_j = _clicks_per_impression(group, rank_j)
        if cpi_i is None or cpi_j is None:
            continue
        total_i += cpi_i
        total_j += cpi_j
        n_pairs += 1
    if n_pairs == 0:
        raise ValueError(
            f"no pair group appears at both rank {rank_i} and rank {rank_j}"
        )
    if total_j == 0.0:
        raise ValueError(
            f"no clicks at rank {rank_j} among eligible pairs; ratio undefined"
        )
    return RatioEstimate(ratio=total_i / total_j, n_pairs=n_pairs)


def ratio_matrix(pairs: list[PairGroup], ranks: list[int]) -> list[tuple[int, int, float, int]]:
    """(rank_i, rank_j, ratio, n_pairs) rows for every rank pair i < j.

    Pairs lacking eligible groups or clicks at the denominator rank are
    skipped rather than reported as errors.
    """
    rows = []
    ordered = sorted(set(int(r) for r in ranks))
    for a_idx, rank_i in enumerate(ordered):
        for rank_j in ordered[a_idx + 1:]:
            try:
                est = ratio_estimate(pairs, rank_i, rank_j)
            except ValueError:
                continue
            rows.append((rank_i, rank_j, est.ratio, est.n_pairs))
    return rows
