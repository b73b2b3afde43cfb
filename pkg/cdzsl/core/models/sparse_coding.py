"""
Sparse Coding Models
--------------------
Domain types for the l1-regularized least-squares subproblems.

Schemas:
- `SolverOptions`: iteration budget, stopping tolerance, acceleration and step rule.
- `LassoProblem`: dictionary, target and the two objective weights.
- `LassoResult`: code, objective, iteration count and convergence flag of one solve.
- `SparseCodeMatrix`: column-wise results of a batch of solves.
"""

from typing import Literal

import numpy as np
from pydantic import Field, model_validator

from cdzsl.core.exceptions import DimensionMismatch
from cdzsl.core.models.base import Base, DenseMatrix, Vector


class SolverOptions(Base):
    """
    Options shared by every proximal-gradient solve.

    Attributes:
        max_iterations (int): Iteration budget per solve.
        tolerance (float): Relative objective-decrease stop.
        acceleration (bool): Momentum-accelerated (monotone) proximal gradient when True.
        step_rule (Literal): `fixed` step 1/L from the spectral bound, or `backtracking`.
        polish (bool): Refine the final iterate by an exact solve on its support.
    """

    model_config = {"frozen": True}

    max_iterations: int = Field(default=2000, ge=1)
    tolerance: float = Field(default=1e-10, ge=0.0)
    acceleration: bool = True
    step_rule: Literal["fixed", "backtracking"] = "fixed"
    polish: bool = True


class LassoProblem(Base):
    """
    min_a data_weight * ||target - dictionary @ a||^2 + sparsity_weight * ||a||_1

    Attributes:
        dictionary (DenseMatrix): d x r matrix.
        target (Vector): length-d target.
        sparsity_weight (float): Weight of the l1 term (>= 0).
        data_weight (float): Weight of the fidelity term (> 0).
    """

    dictionary: DenseMatrix
    target: Vector
    sparsity_weight: float = Field(ge=0.0)
    data_weight: float = Field(default=1.0, gt=0.0)

    @model_validator(mode="after")
    def check_dimensions(self) -> "LassoProblem":
        if self.target.shape[0] != self.dictionary.shape[0]:
            raise DimensionMismatch(
                f"target length {self.target.shape[0]} != dictionary rows {self.dictionary.shape[0]}"
            )
        return self

    @property
    def code_length(self) -> int:
        return int(self.dictionary.shape[1])


class LassoResult(Base):
    """
    Outcome of a single LASSO solve.

    Attributes:
        code (np.ndarray): The returned code (best iterate).
        objective (float): Objective value at `code`.
        iterations (int): Iterations performed.
        converged (bool): False when the tolerance was not met within the budget.
        objective_trace (list[float]): Objective of the accepted iterate per iteration.
    """

    code: np.ndarray
    objective: float
    iterations: int
    converged: bool
    objective_trace: list[float] = Field(default_factory=list)


class SparseCodeMatrix(Base):
    """
    Column-wise results of `batch_lasso`.

    Attributes:
        codes (np.ndarray): r x n code matrix; column j solves target column j.
        objectives (np.ndarray): Objective value per column.
        iterations (np.ndarray): Iterations per column.
        converged (np.ndarray): Per-column convergence status.
    """

    codes: np.ndarray
    objectives: np.ndarray
    iterations: np.ndarray
    converged: np.ndarray

    @property
    def all_converged(self) -> bool:
        return bool(np.all(self.converged))
