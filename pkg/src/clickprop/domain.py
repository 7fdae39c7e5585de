"""Core data types shared by the estimators, the simulator and the CLI.

All types are immutable after construction and safe to share across
threads. Propensity curves are always stored as ratios with rank 1
pinned to 1: only ratios between ranks are identifiable from click
data, and ratios are all that inverse-propensity weighting needs.
"""

from dataclasses import dataclass
from decimal import Decimal
from enum import Enum

import numpy as np

DEFAULT_RANK_MAX = 500

# Knot grid used by the interpolated estimator when none is given.
# Denser at the top of the ranking where the curve bends fastest.
DEFAULT_KNOT_RANKS = (1, 2, 4, 8, 20, 50, 100, 200, 300, 500)


class Platform(str, Enum):
    WEB = "web"
    MOBILE = "mobile"


class CurveMethod(str, Enum):
    DIRECT = "direct"
    INTERPOLATED = "interpolated"
    RATIO = "ratio"
    EM = "em"
    TRUE_SIM = "true_sim"


@dataclass(frozen=True)
class ImpressionRecord:
    """One logged (query, document, rank, click) event.

    ``price``, ``is_auction``, ``platform`` and ``sort_type`` are metadata
    consumed only by the extraction filters; they never enter estimation.
    """

    query_id: str
    doc_id: str
    rank: int
    clicked: bool
    day: int
    price: Decimal | None = None
    is_auction: bool = False
    platform: Platform = Platform.WEB
    sort_type: str = "best_match"

    def __post_init__(self):
        if self.rank < 1:
            raise ValueError(f"rank must be >= 1, got {self.rank}")


@dataclass(frozen=True)
class PairGroup:
    """All logged appearances of one query-document pair.

    The likelihood factorizes over these groups; ``appearances`` keeps
    the (rank, clicked) events in log order.
    """

    query_id: str
    doc_id: str
    appearances: tuple[tuple[int, bool], ...]

    def __post_init__(self):
        apps = tuple((int(r), bool(c)) for r, c in self.appearances)
        if not apps:
            raise ValueError("appearances must be non-empty")
        for rank, _ in apps:
            if rank < 1:
                raise ValueError(f"rank must be >= 1, got {rank}")
        object.__setattr__(self, "appearances", apps)

    @property
    def key(self) -> tuple[str, str]:
        return (self.query_id, self.doc_id)

    def ranks(self) -> tuple[int, ...]:
        return tuple(rank for rank, _ in self.appearances)

    def distinct_ranks(self) -> frozenset[int]:
        return frozenset(rank for rank, _ in self.appearances)

    def n_clicks(self) -> int:
        return sum(1 for _, clicked in self.appearances if clicked)

    def clicked_ranks(self) -> tuple[int, ...]:
        return tuple(rank for rank, clicked in self.appearances if clicked)


@dataclass(frozen=True, eq=False)
class PropensityCurve:
    """Estimated or true observation probability per rank, rank 1 == 1.

    ``values[i]`` is the propensity ratio at rank ``i + 1``. Values need
    not be monotone in rank (mobile-style curves dip periodically).
    """

    values: np.ndarray
    method: CurveMethod

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size == 0:
            raise ValueError("values must be a non-empty 1-D array")
        if not np.all(values > 0.0):
            raise ValueError("all propensity values must be > 0")
        if values[0] != 1.0:
            raise ValueError("curve must be normalized: values[0] == 1")
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "method", CurveMethod(self.method))

    @property
    def rank_max(self) -> int:
        return int(self.values.size)

    def propensity(self, rank: int) -> float:
        if not 1 <= rank <= self.rank_max:
            raise ValueError(f"rank {rank} outside [1, {self.rank_max}]")
        return float(self.values[rank - 1])


def normalize_curve(values, method=CurveMethod.DIRECT) -> PropensityCurve:
    """Rescale per-rank values so that rank 1 carries propensity 1.

    Only propensity ratios are identifiable, so every reported curve is
    pinned this way. Raises ``ValueError`` on non-positive values.
    """
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("values must be non-empty")
    if not np.all(values > 0.0):
        raise ValueError("all values must be > 0")
    return PropensityCurve(values / values[0], CurveMethod(method))


@dataclass(frozen=True)
class KnotSpec:
    """Ranks at which the interpolated parametrization carries parameters."""

    knot_ranks: tuple[int, ...]

    def __post_init__(self):
        ranks = tuple(int(r) for r in self.knot_ranks)
        if not ranks:
            raise ValueError("knot_ranks must be non-empty")
        if ranks[0] != 1:
            raise ValueError("first knot must be rank 1")
        if any(b <= a for a, b in zip(ranks, ranks[1:])):
            raise ValueError("knot_ranks must be strictly increasing")
        object.__setattr__(self, "knot_ranks", ranks)

    @classmethod
    def default(cls, rank_max: int = DEFAULT_RANK_MAX) -> "KnotSpec":
        """Default knot grid cropped/extended to end exactly at rank_max."""
        if rank_max < 1:
            raise ValueError("rank_max must be >= 1")
        ranks = [r for r in DEFAULT_KNOT_RANKS if r < rank_max]
        ranks.append(rank_max)
        return cls(tuple(ranks))

    def validate_for(self, rank_max: int) -> None:
        if self.knot_ranks[-1] != rank_max:
            raise ValueError(
                f"last knot must equal rank_max ({rank_max}), "
                f"got {self.knot_ranks[-1]}"
            )


@dataclass(frozen=True)
class EstimationReport:
    """Fitted curve plus optimizer diagnostics."""

    curve: PropensityCurve
    final_log_likelihood: float
    iterations: int
    converged: bool
    n_pairs_used: int
    n_ranks_interpolated: int = 0

    def to_dict(self) -> dict:
        return {
            "method": self.curve.method.value,
            "final_log_likelihood": self.final_log_likelihood,
            "iterations": self.iterations,
            "converged": self.converged,
            "n_pairs_used": self.n_pairs_used,
            "n_ranks_interpolated": self.n_ranks_interpolated,
        }
