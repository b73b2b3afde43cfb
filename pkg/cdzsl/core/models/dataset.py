"""
Dataset Models
--------------
Domain types for manifests, loaded datasets and the synthetic generator.

Schemas:
- `DatasetManifest`: file references and preprocessing flags of a ZSL split.
- `Dataset`: matrices and labels resolved from a manifest.
- `SynthConfig`: parameters of the planted synthetic problem.
"""

from pathlib import Path
from typing import Literal

import numpy as np
from pydantic import Field, model_validator

from cdzsl.core.models.base import Base, DenseMatrix
from cdzsl.core.models.training import TrainingSet


class DatasetManifest(Base):
    """
    Attributes:
        root (Path): Directory the relative paths resolve against.
        seen_features (Path): X, p x N.
        seen_attributes (Path | None): Z, q x N (per-sample source).
        seen_class_attributes (Path | None): q x S class table (class-table source).
        seen_class_labels (Path | None): 1 x S class ids of the table columns.
        seen_labels (Path): 1 x N class ids of the seen samples.
        unseen_prototypes (Path): Z', q x M.
        unseen_labels (Path): 1 x M class ids of the prototype columns.
        unseen_class_names (Path | None): Text file, one name per prototype.
        test_features (Path): p x L test features.
        test_labels (Path): 1 x L class ids of the test samples.
        test_attributes (Path | None): q x L true test attributes, when known (synthetic data).
        seen_attribute_source (Literal): `per_sample` or `class_table`.
        normalize_features (bool): Unit-normalize feature columns before training.
        normalize_attributes (bool): Unit-normalize attribute columns before training.
    """

    root: Path = Path(".")
    seen_features: Path
    seen_attributes: Path | None = None
    seen_class_attributes: Path | None = None
    seen_class_labels: Path | None = None
    seen_labels: Path
    unseen_prototypes: Path
    unseen_labels: Path
    unseen_class_names: Path | None = None
    test_features: Path
    test_labels: Path
    test_attributes: Path | None = None
    seen_attribute_source: Literal["per_sample", "class_table"] = "per_sample"
    normalize_features: bool = True
    normalize_attributes: bool = True

    @model_validator(mode="after")
    def check_source(self) -> "DatasetManifest":
        if self.seen_attribute_source == "per_sample" and self.seen_attributes is None:
            raise ValueError("per_sample attribute source needs `seen_attributes`")
        if self.seen_attribute_source == "class_table" and (
            self.seen_class_attributes is None or self.seen_class_labels is None
        ):
            raise ValueError("class_table attribute source needs `seen_class_attributes` and `seen_class_labels`")
        return self

    def resolve(self, path: Path) -> Path:
        return path if path.is_absolute() else self.root / path


class Dataset(Base):
    """
    Attributes:
        training (TrainingSet): X, Z and Z' (preprocessed as the manifest requests).
        seen_labels (np.ndarray): Class id per seen sample.
        unseen_class_ids (np.ndarray): Class id per Z' column.
        unseen_class_names (list[str]): Display names per Z' column.
        test_features (DenseMatrix): p x L.
        test_labels (np.ndarray): Class id per test sample.
        test_targets (np.ndarray): Index of each test sample's class among the Z' columns.
        test_attributes (np.ndarray | None): True test attributes, when the manifest provides them.
    """

    training: TrainingSet
    seen_labels: np.ndarray
    unseen_class_ids: np.ndarray
    unseen_class_names: list[str] = Field(default_factory=list)
    test_features: DenseMatrix
    test_labels: np.ndarray
    test_targets: np.ndarray
    test_attributes: np.ndarray | None = None


class SynthConfig(Base):
    """
    Attributes:
        feature_dim (int): p.
        attribute_dim (int): q.
        atom_count (int): r of the planted dictionaries.
        active_atoms (int | None): Atoms the class codes draw from; None means min(p, q, r).
        n_seen (int): N seen samples.
        n_seen_classes (int): Seen classes the samples are spread over.
        n_unseen (int): M unseen classes.
        n_test (int): L test samples (unseen classes only).
        sparsity (int): k nonzeros per planted code.
        noise (float): Std of Gaussian feature noise.
        jitter (float): Std of per-sample perturbation of the class code on its support.
        separation (float): Minimum distance of an unseen prototype to every other class attribute.
        seed (int): Generator seed.
    """

    model_config = {"frozen": True}

    feature_dim: int = Field(default=32, ge=1)
    attribute_dim: int = Field(default=16, ge=1)
    atom_count: int = Field(default=64, ge=2)
    active_atoms: int | None = Field(default=None, ge=1)
    n_seen: int = Field(default=500, ge=1)
    n_seen_classes: int = Field(default=50, ge=1)
    n_unseen: int = Field(default=10, ge=1)
    n_test: int = Field(default=200, ge=1)
    sparsity: int = Field(default=3, ge=1)
    noise: float = Field(default=0.0, ge=0.0)
    jitter: float = Field(default=0.05, ge=0.0)
    separation: float = Field(default=0.5, gt=0.0)
    seed: int = 0

    @property
    def pool_size(self) -> int:
        if self.active_atoms is not None:
            return self.active_atoms
        return min(self.feature_dim, self.attribute_dim, self.atom_count)

    @model_validator(mode="after")
    def check_sparsity(self) -> "SynthConfig":
        if self.sparsity >= self.atom_count:
            raise ValueError(f"sparsity {self.sparsity} must be below atom_count {self.atom_count}")
        if self.active_atoms is not None and self.active_atoms > self.atom_count:
            raise ValueError(f"active_atoms {self.active_atoms} exceeds atom_count {self.atom_count}")
        if self.pool_size < self.sparsity:
            raise ValueError(f"{self.pool_size} active atoms cannot hold {self.sparsity}-sparse codes")
        if self.n_seen < self.n_seen_classes:
            raise ValueError("n_seen must cover every seen class")
        return self
