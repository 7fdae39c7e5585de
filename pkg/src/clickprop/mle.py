"""Maximum-likelihood propensity estimation from rank-change pair groups.

Each usable pair group appeared at two or more distinct ranks and got
exactly one click. Conditional on that click pattern, the probability
that the click landed on appearance l is p_{r_l} / sum_k p_{r_k} once
the per-pair relevance has cancelled, so the log-likelihood is

    L = sum_j [ log p(clicked rank of j) - log sum_k p(rank_jk) ]

which depends on the propensities alone. In log space (theta = log p)
this is a linear term minus a log-sum-exp per pair, hence concave, and
invariant under adding a constant to all theta; the lowest
parametrized rank is pinned to theta = 0 to remove that direction.

Two parametrizations are supported: ``direct`` (one parameter per rank
seen in the data) and ``interpolated`` (parameters at knot ranks only,
power-law interpolation in between).
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from sklearn.base import BaseEstimator

from .domain import (
    DEFAULT_RANK_MAX,
    CurveMethod,
    EstimationReport,
    KnotSpec,
    PairGroup,
    normalize_curve,
)
from .interp import knot_weight_matrix
from .validation import check_estimation_pairs, curve_values


@dataclass(frozen=True)
class _PackedPairs:
    """Flat appearance arrays; sums over pairs become bincounts."""

    n_pairs: int
    flat_ranks: np.ndarray    # rank of each appearance, 1-based
    pair_idx: np.ndarray      # owning pair of each appearance
    click_ranks: np.ndarray   # the single clicked rank per pair


def _pack(pairs: list[PairGroup]) -> _PackedPairs:
    flat_ranks = []
    pair_idx = []
    click_ranks = []
    for j, pair in enumerate(pairs):
        for rank, clicked in pair.appearances:
            flat_ranks.append(rank)
            pair_idx.append(j)
            if clicked:
                click_ranks.append(rank)
    return _PackedPairs(
        n_pairs=len(pairs),
        flat_ranks=np.asarray(flat_ranks, dtype=np.int64),
        pair_idx=np.asarray(pair_idx, dtype=np.int64),
        click_ranks=np.asarray(click_ranks, dtype=np.int64),
    )


def _log_likelihood_packed(values: np.ndarray, packed: _PackedPairs) -> float:
    pr = values[packed.flat_ranks - 1]
    denom = np.bincount(packed.pair_idx, weights=pr, minlength=packed.n_pairs)
    return float(
        np.log(values[packed.click_ranks - 1]).sum() - np.log(denom).sum()
    )


def _gradient_packed(values: np.ndarray, packed: _PackedPairs,
                     rank_max: int) -> np.ndarray:
    pr = values[packed.flat_ranks - 1]
    denom = np.bincount(packed.pair_idx, weights=pr, minlength=packed.n_pairs)
    share = pr / denom[packed.pair_idx]
    grad = np.bincount(packed.click_ranks - 1, minlength=rank_max).astype(float)
    grad -= np.bincount(packed.flat_ranks - 1, weights=share, minlength=rank_max)
    return grad


def log_likelihood(curve, pairs: list[PairGroup]) -> float:
    """Conditional log-likelihood of the observed click placements.

    ``curve`` may be a PropensityCurve or a raw positive value array
    (index i = rank i + 1); raw arrays let callers probe the exact
    scale invariance of the objective. Every pair must have exactly one
    click and at least two distinct ranks within the curve's range.
    """
    values = curve_values(curve)
    check_estimation_pairs(pairs, rank_max=values.size)
    return _log_likelihood_packed(values, _pack(pairs))


def log_likelihood_gradient(curve, pairs: list[PairGroup]) -> np.ndarray:
    """Gradient of the log-likelihood in log-propensity space.

    Component i (rank i + 1) is
    ``sum_j [ 1{clicked rank == i} - n_ji * p_i / sum_k p_rank_jk ]``
    with n_ji the appearance count of the rank in pair j. The
    components always sum to zero: shifting every log propensity by a
    constant leaves the objective unchanged.
    """
    values = curve_values(curve)
    check_estimation_pairs(pairs, rank_max=values.size)
    return _gradient_packed(values, _pack(pairs), rank_max=values.size)


def _connected_components(pairs: list[PairGroup]) -> list[list[int]]:
    parent: dict[int, int] = {}

    def find(x: int) -> int:
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    for pair in pairs:
        ranks = sorted(pair.distinct_ranks())
        for rank in ranks:
            parent.setdefault(rank, rank)
        head = find(ranks[0])
        for rank in ranks[1:]:
            parent[find(rank)] = head

    components: dict[int, list[int]] = {}
    for rank in parent:
        components.setdefault(find(rank), []).append(rank)
    return [sorted(c) for c in sorted(components.values(), key=min)]


class LikelihoodEstimator(BaseEstimator):
    """Propensity-curve estimator over rank-change click pairs.

    Parameters
    ----------
    parametrization : {"direct", "interpolated"}
        ``direct`` fits one log-propensity per rank observed in the
        data (unobserved ranks are filled by power-law interpolation
        between the nearest fitted ranks). ``interpolated`` fits
        parameters at knot ranks only.
    knots : KnotSpec or None
        Knot grid for the interpolated parametrization; defaults to the
        standard grid ending at ``rank_max``.
    rank_max : int
        Highest rank the fitted curve covers.
    max_iterations, gradient_tolerance : optimizer controls; the fit is
        flagged converged when the max-norm of the gradient over free
        parameters drops to the tolerance.
    min_rank_observations : int
        Direct mode only: ranks with fewer appearances than this are
        not given their own parameter and are interpolated instead.

    Attributes (after ``fit``)
    --------------------------
    curve_ : PropensityCurve
    report_ : EstimationReport
    loglik_path_ : log-likelihood at the start and after each accepted
        optimizer step; non-decreasing up to line-search rounding.
    """

    def __init__(self, parametrization: str = "interpolated",
                 knots: KnotSpec | None = None,
                 rank_max: int = DEFAULT_RANK_MAX,
                 max_iterations: int = 1000,
                 gradient_tolerance: float = 1e-8,
                 min_rank_observations: int = 1):
        self.parametrization = parametrization
        self.knots = knots
        self.rank_max = rank_max
        self.max_iterations = max_iterations
        self.gradient_tolerance = gradient_tolerance
        self.min_rank_observations = min_rank_observations

    def _free_ranks(self, pairs, packed) -> tuple[np.ndarray, CurveMethod]:
        if self.parametrization == "direct":
            counts = np.bincount(packed.flat_ranks, minlength=self.rank_max + 1)[1:]
            threshold = max(1, int(self.min_rank_observations))
            free = np.flatnonzero(counts >= threshold) + 1
            if free.size < 2:
                raise ValueError(
                    "fewer than two ranks meet min_rank_observations="
                    f"{threshold}; cannot identify any propensity ratio"
                )
            components = _connected_components(pairs)
            if len(components) > 1:
                preview = "; ".join(
                    f"[{', '.join(map(str, c[:6]))}{', ...' if len(c) > 6 else ''}]"
                    for c in components
                )
                raise ValueError(
                    "rank co-occurrence graph is disconnected; propensity "
                    "ratios across components are not identifiable: " + preview
                )
            return free, CurveMethod.DIRECT
        if self.parametrization == "interpolated":
            knots = self.knots if self.knots is not None else KnotSpec.default(self.rank_max)
            knots.validate_for(self.rank_max)
            return np.asarray(knots.knot_ranks, dtype=np.int64), CurveMethod.INTERPOLATED
        raise ValueError(
            f"unknown parametrization {self.parametrization!r}; "
            "expected 'direct' or 'interpolated'"
        )

    def fit(self, pairs: list[PairGroup], y=None):
        """Maximize the conditional log-likelihood; returns self.

        All free log propensities start at 0 (uniform curve); the
        objective is concave so the start does not matter. The lowest
        free rank is pinned at 0 to remove the overall-scale direction.
        """
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.gradient_tolerance <= 0:
            raise ValueError("gradient_tolerance must be > 0")
        check_estimation_pairs(pairs, rank_max=self.rank_max)
        packed = _pack(pairs)
        free_ranks, method = self._free_ranks(pairs, packed)

        W = knot_weight_matrix(free_ranks, self.rank_max)
        n_free = free_ranks.size
        scale = 1.0 / packed.n_pairs

        # optimize the per-pair mean so the gradient tolerance means the
        # same thing at any data size (the total objective is ~n_pairs
        # large and its gradient cannot reach tiny norms in float64)
        def objective(x):
            theta = np.concatenate(([0.0], x))
            p = np.exp(W @ theta)
            ll = _log_likelihood_packed(p, packed)
            grad_free = W.T @ _gradient_packed(p, packed, self.rank_max)
            return -ll * scale, -grad_free[1:] * scale

        loglik_path = [-objective(np.zeros(n_free - 1))[0] / scale]

        def record(xk):
            loglik_path.append(-objective(xk)[0] / scale)

        result = minimize(
            objective,
            x0=np.zeros(n_free - 1),
            jac=True,
            method="L-BFGS-B",
            callback=record,
            options={
                "maxiter": self.max_iterations,
                "ftol": 1e-15,
                "gtol": self.gradient_tolerance,
                "maxfun": 10 * self.max_iterations,
            },
        )
        self.loglik_path_ = loglik_path

        theta = np.concatenate(([0.0], result.x))
        values = np.exp(W @ theta)
        _, final_grad = objective(result.x)
        converged = bool(np.max(np.abs(final_grad)) <= self.gradient_tolerance) \
            if final_grad.size else True

        self.curve_ = normalize_curve(values, method)
        self.report_ = EstimationReport(
            curve=self.curve_,
            final_log_likelihood=-float(result.fun) / scale,
            iterations=int(result.nit),
            converged=converged,
            n_pairs_used=len(pairs),
            n_ranks_interpolated=self.rank_max - n_free,
        )
        return self

    def predict(self, ranks) -> np.ndarray:
        """Propensity ratios at the given ranks (fitted curve lookup)."""
        if not hasattr(self, "curve_"):
            raise ValueError("estimator is not fitted")
        ranks = np.asarray(ranks, dtype=np.int64)
        if np.any(ranks < 1) or np.any(ranks > self.rank_max):
            raise ValueError(f"ranks must lie in [1, {self.rank_max}]")
        return self.curve_.values[ranks - 1]


def fit_mle(pairs: list[PairGroup], **params) -> EstimationReport:
    """One-call convenience wrapper around LikelihoodEstimator."""
    return LikelihoodEstimator(**params).fit(pairs).report_
