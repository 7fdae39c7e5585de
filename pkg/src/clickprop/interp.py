"""Piecewise power-law interpolation: linear in (log rank, log propensity).

Between two anchor ranks a < b the log propensity at rank r is the
linear interpolant of (log a, log p_a) and (log b, log p_b) evaluated
at log r, which makes the propensity a power law of the rank on each
segment. Ranks outside the anchor span take the nearest anchor value.
"""

import numpy as np


def knot_weight_matrix(anchor_ranks, rank_max: int) -> np.ndarray:
    """Convex-combination weights mapping anchor log values to all ranks.

    Returns W of shape (rank_max, n_anchors) with at most two non-zero
    entries per row, such that ``log_p_full = W @ log_p_anchors``. Rows
    for anchor ranks are one-hot, so anchors are reproduced exactly.
    """
    anchors = np.asarray(anchor_ranks, dtype=np.int64)
    if anchors.ndim != 1 or anchors.size == 0:
        raise ValueError("anchor_ranks must be a non-empty 1-D sequence")
    if np.any(np.diff(anchors) <= 0):
        raise ValueError("anchor_ranks must be strictly increasing")
    if anchors[0] < 1 or anchors[-1] > rank_max:
        raise ValueError("anchor_ranks must lie within [1, rank_max]")

    ranks = np.arange(1, rank_max + 1)
    log_ranks = np.log(ranks)
    log_anchors = np.log(anchors)

    # segment index such that anchors[seg] <= r < anchors[seg + 1]
    seg = np.clip(np.searchsorted(anchors, ranks, side="right") - 1, 0, anchors.size - 2) \
        if anchors.size > 1 else np.zeros(rank_max, dtype=np.int64)

    W = np.zeros((rank_max, anchors.size))
    if anchors.size == 1:
        W[:, 0] = 1.0
        return W

    lo = log_anchors[seg]
    hi = log_anchors[seg + 1]
    t = (log_ranks - lo) / (hi - lo)
    # clamp outside the anchor span to the nearest anchor value
    t = np.clip(t, 0.0, 1.0)
    rows = np.arange(rank_max)
    W[rows, seg] = 1.0 - t
    W[rows, seg + 1] += t
    return W


def fill_log_log(known_ranks, known_values, rank_max: int) -> np.ndarray:
    """Extend per-rank values known only at ``known_ranks`` to 1..rank_max.

    Missing interior ranks are power-law interpolated between the
    nearest known ranks; ranks before/after the known span copy the
    nearest known value. Known ranks keep their values exactly.
    """
    known_ranks = np.asarray(known_ranks, dtype=np.int64)
    known_values = np.asarray(known_values, dtype=float)
    if known_ranks.size == 0:
        raise ValueError("need at least one known rank")
    if not np.all(known_values > 0.0):
        raise ValueError("known values must be > 0")
    order = np.argsort(known_ranks)
    known_ranks = known_ranks[order]
    known_values = known_values[order]

    ranks = np.arange(1, rank_max + 1)
    log_filled = np.interp(
        np.log(ranks), np.log(known_ranks), np.log(known_values)
    )
    values = np.exp(log_filled)
    values[known_ranks - 1] = known_values
    return values
