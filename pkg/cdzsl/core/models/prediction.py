"""
Prediction Models
-----------------
Domain types for attribute prediction from visual features.

Schemas:
- `SoftAssignment`: Student's-t soft assignment of a predicted attribute to the unseen prototypes.
- `AAwConfig`: options of the attribute-aware (entropy-regularized) prediction.
- `AttributePrediction`: code, predicted attribute and objective trace of one sample.
- `PredictionBatch`: column-stacked predictions for many samples.
"""

from typing import Literal

import numpy as np
from pydantic import Field, model_validator

from cdzsl.core.models.base import Base, Vector

ASSIGNMENT_TOLERANCE = 1e-9


class SoftAssignment(Base):
    """
    Attributes:
        probabilities (Vector): One probability per unseen prototype.
        kernel_param (float): Degrees-of-freedom parameter rho of the t-kernel.
    """

    probabilities: Vector
    kernel_param: float = Field(gt=0.0)

    @model_validator(mode="after")
    def check_distribution(self) -> "SoftAssignment":
        p = self.probabilities
        if np.any(p < 0.0) or abs(float(p.sum()) - 1.0) > ASSIGNMENT_TOLERANCE:
            raise ValueError("soft assignment must be nonnegative and sum to one")
        return self


class AAwConfig(Base):
    """
    Attributes:
        sparsity (float): lambda of the l1 term (weighted by 1/r).
        entropy_weight (float): gamma, weight of the assignment entropy.
        kernel_param (float): rho of the t-kernel.
        max_iterations (int): Proximal-gradient budget.
        tolerance (float): Relative objective-decrease stop.
        step_rule (Literal): `backtracking` line search or `fixed` fidelity step.
    """

    model_config = {"frozen": True}

    sparsity: float = Field(default=0.1, ge=0.0)
    entropy_weight: float = Field(default=0.1, ge=0.0)
    kernel_param: float = Field(default=1.0, gt=0.0)
    max_iterations: int = Field(default=2000, ge=1)
    tolerance: float = Field(default=1e-6, ge=0.0)
    step_rule: Literal["backtracking", "fixed"] = "backtracking"


class AttributePrediction(Base):
    """Prediction for one sample."""

    code: np.ndarray
    attribute: np.ndarray
    objective_trace: list[float] = Field(default_factory=list)
    converged: bool = True


class PredictionBatch(Base):
    """
    Attributes:
        codes (np.ndarray): r x L codes.
        attributes (np.ndarray): q x L predicted attributes.
        converged (np.ndarray): Per-sample solver status.
        method (Literal): Prediction method that produced the batch.
    """

    codes: np.ndarray
    attributes: np.ndarray
    converged: np.ndarray
    method: Literal["aag", "aaw"]

    @property
    def all_converged(self) -> bool:
        return bool(np.all(self.converged))
