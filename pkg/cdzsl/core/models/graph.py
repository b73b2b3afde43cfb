"""
Graph Models
------------
Domain types for transductive label propagation.

Schemas:
- `GraphConfig`: neighbor count, kernel width, fitness weight and solver choice.
- `LabelGraph`: kNN graph over [prototypes, predictions] with Gaussian edge weights.
- `LabelMatrix`: propagated scores F and the seed labels Y = [I, 0].
"""

from typing import Any, Literal

import numpy as np
import scipy.sparse
from pydantic import Field, model_validator

from cdzsl.core.exceptions import InvalidGraph
from cdzsl.core.models.base import Base, DenseMatrix


class GraphConfig(Base):
    """
    Attributes:
        neighbors (int): k of the kNN graph.
        sigma (float | Literal["auto"]): Gaussian kernel width; `auto` uses the median edge length.
        fitness_weight (float): mu, weight of the fit to the seed labels.
        solver (Literal): `closed` linear solve or `iterative` fixed point.
        max_iterations (int): Budget of the iterative solver.
        tolerance (float): Max elementwise change stop of the iterative solver.
    """

    model_config = {"frozen": True}

    neighbors: int = Field(default=10, ge=1)
    sigma: float | Literal["auto"] = "auto"
    fitness_weight: float = Field(default=1.0, gt=0.0)
    solver: Literal["closed", "iterative"] = "closed"
    max_iterations: int = Field(default=100_000, ge=1)
    tolerance: float = Field(default=1e-12, gt=0.0)

    @model_validator(mode="after")
    def check_sigma(self) -> "GraphConfig":
        if self.sigma != "auto" and not self.sigma > 0.0:
            raise ValueError("sigma must be positive or 'auto'")
        return self


class LabelGraph(Base):
    """
    Attributes:
        node_attributes (DenseMatrix): q x (M + L) nodes, prototypes first.
        weights (Any): Symmetric affinity, dense ndarray or scipy CSR, zero diagonal.
        degrees (np.ndarray): Row sums of `weights`.
        sigma (float): Kernel width in use.
        neighbors (int): k in use.
        n_labeled (int): M, number of leading prototype nodes (0 for an unlabeled graph).
    """

    node_attributes: DenseMatrix
    weights: Any
    degrees: np.ndarray
    sigma: float
    neighbors: int
    n_labeled: int

    @model_validator(mode="after")
    def check_graph(self) -> "LabelGraph":
        n = self.node_attributes.shape[1]
        if self.weights.shape != (n, n) or self.degrees.shape != (n,):
            raise InvalidGraph(f"weights {self.weights.shape} / degrees {self.degrees.shape} for {n} nodes")
        if not 0 <= self.n_labeled <= n:
            raise InvalidGraph(f"labeled node count {self.n_labeled} outside 0..{n}")
        return self

    @property
    def node_count(self) -> int:
        return int(self.node_attributes.shape[1])

    @property
    def is_sparse(self) -> bool:
        return scipy.sparse.issparse(self.weights)

    @property
    def isolated(self) -> np.ndarray:
        return self.degrees == 0.0

    def dense_weights(self) -> np.ndarray:
        return self.weights.toarray() if self.is_sparse else np.asarray(self.weights)


class LabelMatrix(Base):
    """
    Attributes:
        scores (np.ndarray): F, M x (M + L); F[m, n] scores node n for class m.
        seeds (np.ndarray): Y = [I_M, 0].
        iterations (int): Iterations of the iterative solver (0 for the closed form).
        converged (bool): Solver status.
    """

    scores: np.ndarray
    seeds: np.ndarray
    iterations: int = 0
    converged: bool = True

    @model_validator(mode="after")
    def check_seeds(self) -> "LabelMatrix":
        m, n = self.seeds.shape
        expected = np.zeros((m, n))
        expected[:, :m] = np.eye(m)
        if not np.array_equal(self.seeds, expected):
            raise ValueError("seed labels must be [I, 0]")
        if self.scores.shape != (m, n) or not np.all(np.isfinite(self.scores)):
            raise ValueError("scores must be a finite M x (M + L) matrix")
        return self

    @property
    def labels(self) -> np.ndarray:
        """Argmax class per node (lowest class index on ties)."""
        return np.argmax(self.scores, axis=0)
