"""
Evaluation Models
-----------------
Domain types for experiment reports and the sample-complexity query.

Schemas:
- `ExperimentConfig`: methods to evaluate, ranking depths, TAAw source and repeat count.
- `MethodScores`: hit@K percentages and per-class accuracy of one method.
- `ExperimentReport`: scores of every method, configuration echo and stage timings.
- `PacQuery`: inputs of the sample-complexity bound.
"""

import math
from typing import Literal

from pydantic import Field, field_validator, model_validator

from cdzsl.core.models.base import Base

Method = Literal["aag", "aaw", "taaw"]
METHOD_LABELS = {"aag": "AAg", "aaw": "AAw", "taaw": "TAAw"}


class ExperimentConfig(Base):
    """
    Attributes:
        methods (tuple[Method, ...]): Methods to evaluate, in report order.
        top_k (tuple[int, ...]): Ranking depths, ascending.
        taaw_source (Literal): Prediction feeding the transductive graph.
        repeats (int): Training runs with seeds seed, seed + 1, ...
    """

    model_config = {"frozen": True}

    methods: tuple[Method, ...] = ("aag", "aaw", "taaw")
    top_k: tuple[int, ...] = (1, 3, 5)
    taaw_source: Literal["aag", "aaw"] = "aaw"
    repeats: int = Field(default=1, ge=1)

    @field_validator("methods")
    @classmethod
    def check_methods(cls, v: tuple[str, ...]) -> tuple[str, ...]:
        if not v or len(set(v)) != len(v):
            raise ValueError("methods must be a non-empty list without duplicates")
        return v

    @field_validator("top_k")
    @classmethod
    def check_top_k(cls, v: tuple[int, ...]) -> tuple[int, ...]:
        if not v or any(k < 1 for k in v):
            raise ValueError("top_k must list positive depths")
        return tuple(sorted(set(v)))


class MethodScores(Base):
    """
    Attributes:
        method (Method): Method name.
        hit_at (dict[int, float]): Mean hit@K percentage per depth.
        hit_std (dict[int, float]): Standard deviation over repeats per depth.
        per_class (dict[int, float]): hit@1 percentage per class id.
        mean_class_accuracy (float): Mean of `per_class`.
        unconverged (int): Samples whose solver hit its budget.
    """

    method: Method
    hit_at: dict[int, float]
    hit_std: dict[int, float] = Field(default_factory=dict)
    per_class: dict[int, float] = Field(default_factory=dict)
    mean_class_accuracy: float = 0.0
    unconverged: int = 0

    @model_validator(mode="after")
    def check_monotone(self) -> "MethodScores":
        values = [self.hit_at[k] for k in sorted(self.hit_at)]
        if any(v < 0.0 or v > 100.0 for v in values):
            raise ValueError("hit@K must lie in [0, 100]")
        if any(b < a - 1e-9 for a, b in zip(values, values[1:])):
            raise ValueError("hit@K must be nondecreasing in K")
        return self


class ExperimentReport(Base):
    """
    Attributes:
        methods (dict[str, MethodScores]): Scores keyed by method name.
        config_text (str): The run configuration echo.
        timings (dict[str, float]): Seconds per stage, summed over repeats.
        n_test (int): Test samples.
        n_unseen (int): Unseen classes.
        seeds (list[int]): Training seeds used.
    """

    methods: dict[str, MethodScores]
    config_text: str = ""
    timings: dict[str, float] = Field(default_factory=dict)
    n_test: int = 0
    n_unseen: int = 0
    seeds: list[int] = Field(default_factory=list)


class PacQuery(Base):
    """
    Attributes:
        delta (float): Failure probability, in (0, 1).
        target_error (float): Required excess-error bound epsilon.
        feature_dim (int): p.
        atom_count (int): r.
        loss_constant (float): Constant L of the loss function.
    """

    model_config = {"frozen": True}

    delta: float = Field(gt=0.0, lt=1.0)
    target_error: float = Field(gt=0.0)
    feature_dim: int = Field(ge=1)
    atom_count: int = Field(ge=1)
    loss_constant: float = Field(gt=0.0)

    @property
    def beta(self) -> float:
        """(p r / 8) * max(1, log(6 sqrt(8) L))."""
        return (self.feature_dim * self.atom_count / 8.0) * max(
            1.0, math.log(6.0 * math.sqrt(8.0) * self.loss_constant)
        )
