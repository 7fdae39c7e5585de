"""Inverse-propensity weighting and bias-controlled offline evaluation.

Weighting observed per-item losses by 1 / propensity makes the sum an
unbiased estimator of the loss over all items, observed or not. For
comparing ranking models on logged clicks, slicing the test set to a
single fixed rank removes position bias altogether (every item in the
slice was observed with the same probability), after which plain
classification AUC applies; bootstrap resampling supplies error bars.
"""

import json
from dataclasses import dataclass
from typing import IO, Iterable

import numpy as np
from sklearn.metrics import roc_auc_score

from .domain import PropensityCurve
from .ingest import LogParseError
from .validation import check_rank

DEFAULT_FIXED_RANKS = (1, 2, 4, 8, 16, 32)

# Give up redrawing a degenerate bootstrap resample after this many tries.
_MAX_REDRAWS = 1000


@dataclass(frozen=True)
class ScoredImpression:
    """A logged impression with one or more model scores attached."""

    query_id: str
    doc_id: str
    rank: int
    clicked: bool
    model_scores: dict

    def __post_init__(self):
        if self.rank < 1:
            raise ValueError(f"rank must be >= 1, got {self.rank}")
        if not self.model_scores:
            raise ValueError("at least one model score is required")


@dataclass(frozen=True)
class EvalRow:
    rank: int
    model_a: str
    model_b: str
    mean_improvement: float
    stddev_improvement: float
    n_redrawn: int


@dataclass(frozen=True)
class EvalReport:
    rows: tuple[EvalRow, ...]
    n_bootstrap: int
    seed: int


def ipw_weight(curve: PropensityCurve, rank: int) -> float:
    """Inverse-propensity weight 1 / p(rank); rank 1 weighs 1 by normalization."""
    check_rank(rank, curve.rank_max)
    return 1.0 / curve.values[rank - 1]


def unbiased_loss(observed: Iterable[tuple[int, float]],
                  curve: PropensityCurve) -> float:
    """Sum of per-item losses over observed items, each weighted by 1/p.

    In expectation over which items get observed this equals the
    full-information loss over all items. Empty input sums to 0.
    """
    total = 0.0
    for rank, loss in observed:
        total += loss * ipw_weight(curve, rank)
    return total


def dcg(clicked_ranks_per_query: Iterable[Iterable[int]],
        curve: PropensityCurve | None = None) -> float:
    """Discounted cumulative gain over clicked ranks, summed across queries.

    Each clicked item at rank r contributes 1 / log2(r + 1). With a
    curve, contributions are additionally weighted 1 / p(r), the
    debiased-training-label variant.
    """
    total = 0.0
    for ranks in clicked_ranks_per_query:
        for rank in ranks:
            if rank < 1:
                raise ValueError(f"rank must be >= 1, got {rank}")
            gain = 1.0 / np.log2(rank + 1)
            if curve is not None:
                gain *= ipw_weight(curve, rank)
            total += gain
    return float(total)


def _rank_slice(impressions: list[ScoredImpression], fixed_rank: int,
                models: tuple[str, ...]):
    subset = [imp for imp in impressions if imp.rank == fixed_rank]
    clicked = np.array([imp.clicked for imp in subset], dtype=bool)
    try:
        scores = {
            m: np.array([float(imp.model_scores[m]) for imp in subset])
            for m in models
        }
    except KeyError as exc:
        raise ValueError(f"model {exc.args[0]!r} missing from impression scores") from None
    return clicked, scores


def fixed_rank_auc(impressions: list[ScoredImpression], fixed_rank: int,
                   model: str) -> float:
    """AUC of a model's scores separating clicks at exactly one rank.

    Ties in score earn half credit. Raises when the slice holds a
    single class, where AUC is undefined.
    """
    clicked, scores = _rank_slice(impressions, fixed_rank, (model,))
    if clicked.size == 0 or clicked.all() or not clicked.any():
        raise ValueError(
            f"rank {fixed_rank} slice needs both clicked and non-clicked impressions"
        )
    return float(roc_auc_score(clicked, scores[model]))


def bootstrap_compare(impressions: list[ScoredImpression],
                      fixed_ranks: Iterable[int],
                      model_a: str, model_b: str,
                      n_bootstrap: int = 1000, seed: int = 0) -> EvalReport:
    """Per-rank bootstrap of the AUC improvement of model_a over model_b.

    Each resample draws the rank slice with replacement; resamples that
    come out single-class are redrawn and counted. Resample b of a rank
    uses its own RNG substream derived from (seed, rank, b), so results
    do not depend on execution order or parallelism.
    """
    if n_bootstrap < 1:
        raise ValueError("n_bootstrap must be >= 1")
    if seed < 0:
        raise ValueError("seed must be a non-negative integer")
    rows = []
    for fixed_rank in fixed_ranks:
        clicked, scores = _rank_slice(impressions, fixed_rank,
                                      (model_a, model_b))
        if clicked.size == 0 or clicked.all() or not clicked.any():
            raise ValueError(
                f"rank {fixed_rank} slice needs both clicked and "
                "non-clicked impressions"
            )
        n = clicked.size
        improvements = np.empty(n_bootstrap)
        n_redrawn = 0
        for b in range(n_bootstrap):
            rng = np.random.default_rng([seed, fixed_rank, b])
            for _ in range(_MAX_REDRAWS):
                idx = rng.integers(0, n, size=n)
                y = clicked[idx]
                if y.any() and not y.all():
                    break
                n_redrawn += 1
            else:
                raise ValueError(
                    f"could not draw a two-class resample at rank {fixed_rank}"
                )
            improvements[b] = (
                roc_auc_score(y, scores[model_a][idx])
                - roc_auc_score(y, scores[model_b][idx])
            )
        rows.append(EvalRow(
            rank=int(fixed_rank),
            model_a=model_a,
            model_b=model_b,
            mean_improvement=float(improvements.mean()),
            stddev_improvement=float(improvements.std(ddof=1)) if n_bootstrap > 1 else 0.0,
            n_redrawn=n_redrawn,
        ))
    return EvalReport(rows=tuple(rows), n_bootstrap=n_bootstrap, seed=seed)


def read_scores_jsonl(stream: Iterable[str] | IO) -> list[ScoredImpression]:
    """Parse scored impressions, one JSON object per line."""
    impressions = []
    for line_number, line in enumerate(stream, start=1):
        if isinstance(line, bytes):
            line = line.decode("utf-8")
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
            impressions.append(ScoredImpression(
                query_id=str(obj["query_id"]),
                doc_id=str(obj["doc_id"]),
                rank=int(obj["rank"]),
                clicked=bool(obj["clicked"]),
                model_scores={str(k): float(v)
                              for k, v in obj["model_scores"].items()},
            ))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError,
                AttributeError) as exc:
            raise LogParseError(line_number, f"invalid scored impression: {exc}") from None
    return impressions
