"""
Training Models
---------------
Domain types for coupled dictionary learning.

Schemas:
- `TrainingSet`: seen features X, seen attributes Z and unseen prototypes Z'.
- `TrainingConfig`: dictionary size, penalties, iteration counts, batching and solver settings.
- `CoupledDictionary`: the visual/attribute dictionary pair sharing one atom index.
- `TraceEntry` / `TrainingTrace`: objective terms recorded per outer iteration.
- `TrainingResult`: everything `train_coupled` returns.
"""

from typing import Literal

import numpy as np
from pydantic import Field, model_validator

from cdzsl.core.exceptions import DimensionMismatch
from cdzsl.core.models.base import Base, DenseMatrix
from cdzsl.core.models.sparse_coding import SolverOptions


class TrainingSet(Base):
    """
    Attributes:
        seen_features (DenseMatrix): X, p x N.
        seen_attributes (DenseMatrix): Z, q x N (column i describes sample i).
        unseen_attributes (DenseMatrix): Z', q x M unseen class prototypes.
    """

    seen_features: DenseMatrix
    seen_attributes: DenseMatrix
    unseen_attributes: DenseMatrix

    @model_validator(mode="after")
    def check_dimensions(self) -> "TrainingSet":
        if self.seen_features.shape[1] != self.seen_attributes.shape[1]:
            raise DimensionMismatch(
                f"X has {self.seen_features.shape[1]} columns, Z has {self.seen_attributes.shape[1]}"
            )
        if self.seen_attributes.shape[0] != self.unseen_attributes.shape[0]:
            raise DimensionMismatch(
                f"Z has {self.seen_attributes.shape[0]} rows, Z' has {self.unseen_attributes.shape[0]}"
            )
        if self.seen_features.shape[1] < 1 or self.unseen_attributes.shape[1] < 1:
            raise DimensionMismatch("training needs N >= 1 seen samples and M >= 1 unseen prototypes")
        return self

    @property
    def feature_dim(self) -> int:
        return int(self.seen_features.shape[0])

    @property
    def attribute_dim(self) -> int:
        return int(self.seen_attributes.shape[0])

    @property
    def n_seen(self) -> int:
        return int(self.seen_features.shape[1])

    @property
    def n_unseen(self) -> int:
        return int(self.unseen_attributes.shape[1])


class TrainingConfig(Base):
    """
    Attributes:
        atom_count (int): r, number of dictionary atoms (r > max(p, q) recommended).
        sparsity (float): lambda.
        dict_penalty (float): beta, Frobenius penalty on both dictionaries.
        outer_iterations (int): Alternations of the visual and attribute blocks.
        inner_alternations (int): Code/D_x rounds of the visual block.
        attribute_alternations (int): Prototype-code/D_z rounds of the attribute block.
        batch_size (int): Samples per mini-batch; 0 (or >= N) means full batch.
        dict_step (float): Relative dictionary step (fraction of 1/L_block).
        seed (int): Root seed for initialization and batching.
        normalize_columns (bool): Project dictionary columns onto the unit ball after each step.
        code_update (Literal): `visual` solves the A-subproblem from X alone (keeping, per sample,
            only codes that do not raise the coupled objective); `joint` solves it with both
            fidelity terms.
        solver (SolverOptions): Options of the code subproblems.
        solver_strategy (Literal): `vectorized` or `columns` batch solving.
        checkpoint_every (int): Outer iterations between checkpoints.
    """

    model_config = {"frozen": True}

    atom_count: int = Field(default=64, ge=1)
    sparsity: float = Field(default=0.1, ge=0.0)
    dict_penalty: float = Field(default=0.0, ge=0.0)
    outer_iterations: int = Field(default=30, ge=0)
    inner_alternations: int = Field(default=3, ge=1)
    attribute_alternations: int = Field(default=10, ge=1)
    batch_size: int = Field(default=0, ge=0)
    dict_step: float = Field(default=1.0, gt=0.0)
    seed: int = 0
    normalize_columns: bool = True
    code_update: Literal["joint", "visual"] = "visual"
    solver: SolverOptions = SolverOptions(max_iterations=500, tolerance=1e-8)
    solver_strategy: Literal["columns", "vectorized"] = "vectorized"
    checkpoint_every: int = Field(default=10, ge=1)

    def is_full_batch(self, n_samples: int) -> bool:
        return self.batch_size == 0 or self.batch_size >= n_samples


class CoupledDictionary(Base):
    """
    Attributes:
        d_x (DenseMatrix): Visual dictionary, p x r.
        d_z (DenseMatrix): Attribute dictionary, q x r.
    """

    model_config = {"frozen": True}

    d_x: DenseMatrix
    d_z: DenseMatrix

    @model_validator(mode="after")
    def check_atoms(self) -> "CoupledDictionary":
        if self.d_x.shape[1] != self.d_z.shape[1]:
            raise DimensionMismatch(
                f"D_x has {self.d_x.shape[1]} atoms, D_z has {self.d_z.shape[1]}"
            )
        return self

    @property
    def atom_count(self) -> int:
        return int(self.d_x.shape[1])

    @property
    def feature_dim(self) -> int:
        return int(self.d_x.shape[0])

    @property
    def attribute_dim(self) -> int:
        return int(self.d_z.shape[0])


class TraceEntry(Base):
    """Objective terms after one outer iteration."""

    iteration: int
    visual_fidelity: float
    seen_attribute_fidelity: float
    unseen_attribute_fidelity: float
    sparsity: float
    dictionary_penalty: float

    @property
    def total(self) -> float:
        return (
            self.visual_fidelity
            + self.seen_attribute_fidelity
            + self.unseen_attribute_fidelity
            + self.sparsity
            + self.dictionary_penalty
        )


TRACE_COLUMNS = (
    "iteration",
    "visual_fidelity",
    "seen_attribute_fidelity",
    "unseen_attribute_fidelity",
    "sparsity",
    "dictionary_penalty",
)


class TrainingTrace(Base):
    """Per-outer-iteration objective record."""

    entries: list[TraceEntry] = Field(default_factory=list)

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def totals(self) -> np.ndarray:
        return np.array([entry.total for entry in self.entries])

    def to_matrix(self) -> np.ndarray:
        """Returns a T x 6 matrix with the `TRACE_COLUMNS` layout."""
        if not self.entries:
            return np.zeros((0, len(TRACE_COLUMNS)))
        return np.array([[getattr(e, name) for name in TRACE_COLUMNS] for e in self.entries], dtype=np.float64)

    @classmethod
    def from_matrix(cls, matrix: np.ndarray) -> "TrainingTrace":
        entries = []
        for row in np.atleast_2d(matrix):
            values = dict(zip(TRACE_COLUMNS, row.tolist()))
            values["iteration"] = int(values["iteration"])
            entries.append(TraceEntry(**values))
        return cls(entries=entries)


class TrainingResult(Base):
    """
    Attributes:
        dictionary (CoupledDictionary): Learned dictionaries.
        codes_seen (np.ndarray): A, r x N.
        codes_unseen (np.ndarray): B, r x M.
        trace (TrainingTrace): Objective record.
    """

    dictionary: CoupledDictionary
    codes_seen: np.ndarray
    codes_unseen: np.ndarray
    trace: TrainingTrace
