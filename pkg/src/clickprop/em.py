"""Position-based-model EM baseline with per-pair latent relevance.

The model: a click happens iff the impression is observed (probability
depending on rank only) and the pair is relevant to the user
(probability depending on the pair only). Both clicked and non-clicked
impressions are informative here, so this estimator consumes candidate
groups before any click-based selection.

The relevance update is injectable so a feature-based regression
variant can be slotted in; the default re-estimates one latent
relevance per pair from the posterior counts.
"""

from typing import Callable

import numpy as np
from sklearn.base import BaseEstimator

from .domain import (
    DEFAULT_RANK_MAX,
    CurveMethod,
    EstimationReport,
    PairGroup,
    normalize_curve,
)
from .interp import fill_log_log

# Guards posteriors when a click probability touches 1 exactly.
_EPS = 1e-12


class PositionBasedModelEM(BaseEstimator):
    """EM estimator for per-rank observation probabilities.

    Parameters
    ----------
    max_iterations : int
    ll_tolerance : float
        Stop when the relative change of the data log-likelihood falls
        below this.
    smoothing : float
        Add-alpha smoothing on the E-step count aggregates (numerator
        + alpha, denominator + 2 alpha) of both updates. On the rank
        side it keeps ranks with no clicks away from a degenerate zero;
        on the pair side it keeps the per-pair relevances of groups
        with very few appearances away from the 0/1 boundary, where the
        joint likelihood has a degenerate ridge.
    rank_max : int
    relevance_update : callable or None
        Alternative relevance updater with signature
        ``(posterior_relevant_sums, impressions_per_pair) -> relevances``.

    Attributes (after ``fit``)
    --------------------------
    curve_ : PropensityCurve
    report_ : EstimationReport
    relevances_ : per-pair fitted relevance
    loglik_path_ : data log-likelihood per iteration
    """

    def __init__(self, max_iterations: int = 200, ll_tolerance: float = 1e-7,
                 smoothing: float = 1.0, rank_max: int = DEFAULT_RANK_MAX,
                 relevance_update: Callable | None = None):
        self.max_iterations = max_iterations
        self.ll_tolerance = ll_tolerance
        self.smoothing = smoothing
        self.rank_max = rank_max
        self.relevance_update = relevance_update

    def fit(self, groups: list[PairGroup], y=None):
        if not groups:
            raise ValueError("no pair groups to fit")
        if self.smoothing < 0:
            raise ValueError("smoothing must be >= 0")
        alpha = float(self.smoothing)

        rank_idx = []
        pair_idx = []
        clicked = []
        for j, group in enumerate(groups):
            for rank, c in group.appearances:
                if rank > self.rank_max:
                    raise ValueError(
                        f"rank {rank} exceeds rank_max {self.rank_max}"
                    )
                rank_idx.append(rank - 1)
                pair_idx.append(j)
                clicked.append(c)
        rank_idx = np.asarray(rank_idx, dtype=np.int64)
        pair_idx = np.asarray(pair_idx, dtype=np.int64)
        clicked = np.asarray(clicked, dtype=bool)

        n_pairs = len(groups)
        n_per_rank = np.bincount(rank_idx, minlength=self.rank_max).astype(float)
        m_per_pair = np.bincount(pair_idx, minlength=n_pairs).astype(float)
        clicks_per_pair = np.bincount(pair_idx, weights=clicked.astype(float),
                                      minlength=n_pairs)
        observed = n_per_rank > 0
        update_z = self.relevance_update or (
            lambda rel_sums, m: (rel_sums + alpha) / (m + 2.0 * alpha)
        )

        p = np.full(self.rank_max, 0.5)
        z = (clicks_per_pair + 0.5) / (m_per_pair + 1.0)

        def data_loglik():
            pz = np.clip(p[rank_idx] * z[pair_idx], _EPS, 1.0 - _EPS)
            return float(np.sum(np.where(clicked, np.log(pz), np.log1p(-pz))))

        self.loglik_path_ = []
        converged = False
        iterations = 0
        for iterations in range(1, self.max_iterations + 1):
            ll = data_loglik()
            pz = np.clip(p[rank_idx] * z[pair_idx], _EPS, 1.0 - _EPS)

            # E-step: posterior observation / relevance for non-clicks
            e_obs = np.where(
                clicked, 1.0, p[rank_idx] * (1.0 - z[pair_idx]) / (1.0 - pz)
            )
            e_rel = np.where(
                clicked, 1.0, (1.0 - p[rank_idx]) * z[pair_idx] / (1.0 - pz)
            )

            # M-step
            obs_per_rank = np.bincount(rank_idx, weights=e_obs,
                                       minlength=self.rank_max)
            p = p.copy()
            p[observed] = (obs_per_rank[observed] + alpha) / (
                n_per_rank[observed] + 2.0 * alpha
            )
            rel_per_pair = np.bincount(pair_idx, weights=e_rel, minlength=n_pairs)
            z = np.clip(update_z(rel_per_pair, m_per_pair), _EPS, 1.0)

            self.loglik_path_.append(ll)
            if len(self.loglik_path_) >= 2:
                prev = self.loglik_path_[-2]
                if abs(ll - prev) < self.ll_tolerance * max(1.0, abs(prev)):
                    converged = True
                    break

        # log-likelihood of the parameters actually returned
        self.loglik_path_.append(data_loglik())

        observed_ranks = np.flatnonzero(observed) + 1
        values = fill_log_log(observed_ranks, p[observed], self.rank_max)
        self.relevances_ = z
        self.curve_ = normalize_curve(values, CurveMethod.EM)
        self.report_ = EstimationReport(
            curve=self.curve_,
            final_log_likelihood=self.loglik_path_[-1],
            iterations=iterations,
            converged=converged,
            n_pairs_used=n_pairs,
            n_ranks_interpolated=self.rank_max - observed_ranks.size,
        )
        return self

    def predict(self, ranks) -> np.ndarray:
        if not hasattr(self, "curve_"):
            raise ValueError("estimator is not fitted")
        ranks = np.asarray(ranks, dtype=np.int64)
        if np.any(ranks < 1) or np.any(ranks > self.rank_max):
            raise ValueError(f"ranks must lie in [1, {self.rank_max}]")
        return self.curve_.values[ranks - 1]


def em_fit(groups: list[PairGroup], **params) -> EstimationReport:
    """One-call convenience wrapper around PositionBasedModelEM."""
    return PositionBasedModelEM(**params).fit(groups).report_
