"""
Tuning Models
-------------
Results of the cross-validated grid search.
"""

from pydantic import Field

from cdzsl.core.config.run_config import RunConfig
from cdzsl.core.models.base import Base


class TuningPoint(Base):
    """
    Attributes:
        params (dict[str, str]): Grid values of this point, as configuration text.
        fold_scores (list[float]): hit@1 on each held-out fold.
        mean_score (float): Mean over folds.
    """

    params: dict[str, str]
    fold_scores: list[float] = Field(default_factory=list)
    mean_score: float = 0.0


class TuningResult(Base):
    """
    Attributes:
        method (str): Method being tuned.
        folds (list[list[int]]): Held-out seen class ids per fold.
        points (list[TuningPoint]): Every grid point, in grid order.
        best (TuningPoint): Highest mean score (first on ties).
        best_config (RunConfig): Base configuration updated with the best point.
    """

    method: str
    folds: list[list[int]]
    points: list[TuningPoint]
    best: TuningPoint
    best_config: RunConfig
