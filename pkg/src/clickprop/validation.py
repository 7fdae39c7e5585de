"""Input validation helpers shared by the estimators."""

import numpy as np

from .domain import PairGroup, PropensityCurve


def curve_values(curve_or_values) -> np.ndarray:
    """Accept a PropensityCurve or a raw per-rank value array.

    Raw arrays are handy for scale-invariance checks, where the
    normalized-curve invariant would get in the way.
    """
    if isinstance(curve_or_values, PropensityCurve):
        return curve_or_values.values
    values = np.asarray(curve_or_values, dtype=float)
    if values.ndim != 1 or values.size == 0:
        raise ValueError("values must be a non-empty 1-D array")
    if not np.all(values > 0.0):
        raise ValueError("all propensity values must be > 0")
    return values


def check_rank(rank: int, rank_max: int) -> int:
    rank = int(rank)
    if not 1 <= rank <= rank_max:
        raise ValueError(f"rank {rank} outside [1, {rank_max}]")
    return rank


def check_estimation_pairs(pairs: list[PairGroup], rank_max: int) -> None:
    """Require the strict one-click shape the conditional likelihood needs.

    Every group must carry exactly one click and at least two distinct
    ranks, all within [1, rank_max].
    """
    if not pairs:
        raise ValueError("no pairs to estimate from")
    for i, pair in enumerate(pairs):
        if pair.n_clicks() != 1:
            raise ValueError(
                f"pair {i} {pair.key} has {pair.n_clicks()} clicks; "
                "exactly one is required"
            )
        if len(pair.distinct_ranks()) < 2:
            raise ValueError(
                f"pair {i} {pair.key} appears at a single rank; "
                "at least two distinct ranks are required"
            )
        for rank, _ in pair.appearances:
            if rank > rank_max:
                raise ValueError(
                    f"pair {i} {pair.key} has rank {rank} > rank_max {rank_max}"
                )
