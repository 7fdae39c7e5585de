"""Synthetic pair-group generator with a known ground-truth propensity curve.

The generator mimics how rank-change pairs arise in a real log: each
query-document pair gets a mean rank, a latent click-through relevance
tied to that mean rank, and two noisy rank draws around it. Clicks are
Bernoulli in (relevance x propensity), so the click-through rate at a
rank stays realistic regardless of the propensity at that rank.

Randomness is counter-based: attempts are processed in fixed-size
batches and batch ``b`` uses an RNG substream seeded by ``(seed, b)``,
so output is a pure function of the config and batches could be drawn
in parallel without changing it.
"""

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .domain import CurveMethod, PairGroup, PropensityCurve

_BATCH = 8192


@dataclass(frozen=True)
class RelevanceModel:
    """Log-normal-perturbed power law for per-pair click-through rates.

    The latent relevance of a pair with mean rank m is
    ``clamp(base_ctr_scale * m**(-base_ctr_exponent) * exp(noise_sigma * g)
    / true_propensity(m), 0, 1)`` with g standard normal, which makes the
    expected CTR at rank m follow the power law irrespective of the
    propensity there.
    """

    base_ctr_scale: float = 0.3
    base_ctr_exponent: float = 0.4
    noise_sigma: float = 0.3


@dataclass(frozen=True)
class SimConfig:
    rank_max: int = 500
    n_pairs_target: int = 40_000
    rank_spread_divisor: float = 5.0
    relevance: RelevanceModel = RelevanceModel()
    seed: int = 0

    def __post_init__(self):
        if self.rank_max < 2:
            raise ValueError("rank_max must be >= 2 to draw distinct rank pairs")
        if self.n_pairs_target < 0:
            raise ValueError("n_pairs_target must be >= 0")
        if self.rank_spread_divisor <= 0:
            raise ValueError("rank_spread_divisor must be > 0")
        if self.seed < 0:
            raise ValueError("seed must be a non-negative integer")


def true_propensity(rank):
    """Ground-truth observation probability: min(1 / ln(rank), 1).

    Natural log; ranks 1 and 2 both clamp to 1. Accepts scalars or
    arrays of ranks >= 1.
    """
    r = np.asarray(rank, dtype=float)
    if np.any(r < 1):
        raise ValueError("rank must be >= 1")
    with np.errstate(divide="ignore"):
        p = np.minimum(1.0, 1.0 / np.log(r))
    if np.isscalar(rank) or np.ndim(rank) == 0:
        return float(p)
    return p


def true_curve(rank_max: int) -> PropensityCurve:
    values = true_propensity(np.arange(1, rank_max + 1))
    return PropensityCurve(np.atleast_1d(values), CurveMethod.TRUE_SIM)


def draw_relevance(rng: np.random.Generator, rank_mean: np.ndarray,
                   model: RelevanceModel) -> np.ndarray:
    base = model.base_ctr_scale * rank_mean.astype(float) ** (-model.base_ctr_exponent)
    noise = np.exp(model.noise_sigma * rng.standard_normal(rank_mean.size))
    return np.clip(base * noise / true_propensity(rank_mean), 0.0, 1.0)


def _draw_rank_pairs(rng: np.random.Generator, rank_mean: np.ndarray,
                     cfg: SimConfig) -> tuple[np.ndarray, np.ndarray]:
    """Two rounded, clamped Gaussian rank draws per attempt.

    Equal draws are redrawn (up to 100 attempts); rows still equal after
    that are marked invalid and the attempt is discarded.
    """
    sd = rank_mean / cfg.rank_spread_divisor
    draws = rng.normal(rank_mean[:, None].astype(float), sd[:, None], size=(rank_mean.size, 2))
    ranks = np.clip(np.rint(draws), 1, cfg.rank_max).astype(np.int64)
    dup = np.flatnonzero(ranks[:, 0] == ranks[:, 1])
    for _ in range(99):
        if dup.size == 0:
            break
        redraw = rng.normal(rank_mean[dup, None].astype(float),
                            sd[dup, None], size=(dup.size, 2))
        ranks[dup] = np.clip(np.rint(redraw), 1, cfg.rank_max).astype(np.int64)
        dup = dup[ranks[dup, 0] == ranks[dup, 1]]
    valid = ranks[:, 0] != ranks[:, 1]
    return ranks, valid


def _attempt_batch(cfg: SimConfig, batch_index: int):
    """One batch of pre-selection attempts from substream (seed, batch)."""
    rng = np.random.default_rng([cfg.seed, batch_index])
    rank_mean = rng.integers(1, cfg.rank_max + 1, size=_BATCH)
    z = draw_relevance(rng, rank_mean, cfg.relevance)
    ranks, valid = _draw_rank_pairs(rng, rank_mean, cfg)
    clicks = rng.random((_BATCH, 2)) < z[:, None] * true_propensity(ranks)
    return z, ranks, clicks, valid


# Abort generation after this many consecutive batches without a single
# retained group; the configuration is then practically degenerate.
_MAX_EMPTY_BATCHES = 1000


def _collect_groups(cfg: SimConfig, n_target: int,
                    keep: Callable[[np.ndarray, np.ndarray], np.ndarray],
                    counters: dict | None = None) -> list[PairGroup]:
    groups: list[PairGroup] = []
    batch = 0
    empty_streak = 0
    while len(groups) < n_target:
        _, ranks, clicks, valid = _attempt_batch(cfg, batch)
        retained_before = len(groups)
        for i in np.flatnonzero(valid & keep(ranks, clicks)):
            idx = batch * _BATCH + int(i)
            groups.append(PairGroup(
                query_id=f"q{idx:09d}",
                doc_id=f"d{idx:09d}",
                appearances=(
                    (int(ranks[i, 0]), bool(clicks[i, 0])),
                    (int(ranks[i, 1]), bool(clicks[i, 1])),
                ),
            ))
            if len(groups) == n_target:
                break
        empty_streak = empty_streak + 1 if len(groups) == retained_before else 0
        if empty_streak >= _MAX_EMPTY_BATCHES:
            raise RuntimeError(
                f"no group retained in {empty_streak * _BATCH} consecutive "
                "attempts; the configuration retains essentially nothing"
            )
        batch += 1
    if counters is not None:
        counters["attempts"] = batch * _BATCH
        counters["retained"] = len(groups)
    return groups


def simulate_pairs(cfg: SimConfig,
                   counters: dict | None = None) -> tuple[list[PairGroup], PropensityCurve]:
    """Generate estimation-ready pair groups plus the true curve.

    Attempts are drawn until ``n_pairs_target`` groups survive the
    retention rule (two distinct ranks, exactly one click), matching the
    selection applied to real logs. Same seed, same output, bit for bit.
    """
    groups = _collect_groups(
        cfg, cfg.n_pairs_target,
        keep=lambda ranks, clicks: clicks.sum(axis=1) == 1,
        counters=counters,
    )
    return groups, true_curve(cfg.rank_max)


def simulate_candidate_groups(cfg: SimConfig, n_groups: int) -> list[PairGroup]:
    """Pre-selection stream: the same attempts, kept regardless of clicks.

    This is what the extraction stage would see before click-based
    selection; useful for estimators that consume non-clicked groups too.
    """
    return _collect_groups(
        cfg, n_groups,
        keep=lambda ranks, clicks: np.ones(ranks.shape[0], dtype=bool),
    )


def simulate_rank_pair_groups(rank_i: int, rank_j: int, n_groups: int,
                              cfg: SimConfig) -> list[PairGroup]:
    """Groups pinned to one fixed rank pair, one appearance at each rank.

    No click-based retention: all generated groups are returned, so
    clicks-per-impression ratio estimates can be studied at a known
    true ratio. Relevance is drawn at the midpoint mean rank.
    """
    if rank_i == rank_j:
        raise ValueError("rank_i and rank_j must differ")
    for rank in (rank_i, rank_j):
        if not 1 <= rank <= cfg.rank_max:
            raise ValueError(f"rank {rank} outside [1, {cfg.rank_max}]")
    rank_mean = int(round((rank_i + rank_j) / 2))
    p = true_propensity(np.array([rank_i, rank_j]))

    groups: list[PairGroup] = []
    batch = 0
    while len(groups) < n_groups:
        rng = np.random.default_rng([cfg.seed, rank_i, rank_j, batch])
        n = min(_BATCH, n_groups - len(groups))
        means = np.full(n, rank_mean, dtype=np.int64)
        z = draw_relevance(rng, means, cfg.relevance)
        clicks = rng.random((n, 2)) < z[:, None] * p[None, :]
        for i in range(n):
            idx = batch * _BATCH + i
            groups.append(PairGroup(
                query_id=f"q{idx:09d}",
                doc_id=f"d{idx:09d}",
                appearances=(
                    (rank_i, bool(clicks[i, 0])),
                    (rank_j, bool(clicks[i, 1])),
                ),
            ))
        batch += 1
    return groups
