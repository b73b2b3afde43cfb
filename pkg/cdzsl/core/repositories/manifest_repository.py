"""
Manifest Repository
-------------------
Reads and writes dataset manifests and resolves them into datasets.

A manifest is a flat `key = value` file; paths are relative to the manifest's directory.
Label files are 1 x n matrices of integer class ids in one global id space.

Methods:
- `load_manifest()`: Parse and validate a manifest file.
- `save_manifest()`: Write a manifest file.
- `load_dataset()`: Read every referenced matrix, cross-check dimensions and labels,
  and apply the requested column normalization.
"""

from pathlib import Path

import numpy as np
from pydantic import ValidationError

from cdzsl.core.exceptions import DataError, ManifestError
from cdzsl.core.models.dataset import Dataset, DatasetManifest
from cdzsl.core.models.training import TrainingSet
from cdzsl.core.repositories.matrix_repository import MatrixRepository
from cdzsl.core.utils.helper import format_key_values, parse_key_values, unit_columns
from cdzsl.core.utils.logger import logger

PATH_KEYS = (
    "seen_features",
    "seen_attributes",
    "seen_class_attributes",
    "seen_class_labels",
    "seen_labels",
    "unseen_prototypes",
    "unseen_labels",
    "unseen_class_names",
    "test_features",
    "test_labels",
    "test_attributes",
)
FLAG_KEYS = ("seen_attribute_source", "normalize_features", "normalize_attributes")


def _label_vector(path: Path) -> np.ndarray:
    matrix = MatrixRepository.read_matrix(path)
    if matrix.shape[0] != 1:
        raise ManifestError(f"{path}: label file must be 1 x n, got {matrix.shape}")
    labels = matrix.ravel()
    if not np.array_equal(labels, np.round(labels)):
        raise ManifestError(f"{path}: labels must be integer class ids")
    return labels.astype(np.int64)


def _expect(condition: bool, message: str) -> None:
    if not condition:
        raise ManifestError(message)


class ManifestRepository:
    """File access for dataset manifests."""

    @staticmethod
    def load_manifest(path: str | Path) -> DatasetManifest:
        """
        Parse a manifest file.

        Args:
            path (str | Path): Manifest file.

        Returns:
            DatasetManifest: Validated manifest rooted at the file's directory.

        Raises:
            DataError: If the file does not exist.
            ManifestError: On unknown keys, malformed lines or missing required keys.
        """
        path = Path(path)
        if not path.is_file():
            raise DataError(f"manifest file not found: {path}")
        pairs = parse_key_values(path.read_text(encoding="utf-8"), str(path), ManifestError)
        for key, (_, number) in pairs.items():
            if key not in PATH_KEYS and key not in FLAG_KEYS:
                raise ManifestError(f"{path}:{number}: unknown manifest key '{key}'")
        try:
            manifest = DatasetManifest.model_validate(
                {"root": path.parent, **{key: value for key, (value, _) in pairs.items()}}
            )
        except ValidationError as exc:
            error = exc.errors()[0]
            key = ".".join(str(part) for part in error["loc"]) or "manifest"
            raise ManifestError(f"{path}: {key}: {error['msg']}") from exc
        logger.debug("manifest loaded", extra={"path": str(path)})
        return manifest

    @staticmethod
    def save_manifest(path: str | Path, manifest: DatasetManifest) -> Path:
        """
        Write a manifest; paths are stored as given (relative to the manifest directory).
        """
        path = Path(path)
        values: dict[str, object] = {}
        for key in PATH_KEYS:
            value = getattr(manifest, key)
            if value is not None:
                values[key] = Path(value).as_posix()
        for key in FLAG_KEYS:
            values[key] = getattr(manifest, key)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(format_key_values(values), encoding="utf-8")
        return path

    @staticmethod
    def load_dataset(manifest: DatasetManifest) -> Dataset:
        """
        Read and cross-check every matrix a manifest references.

        Args:
            manifest (DatasetManifest): The manifest.

        Returns:
            Dataset: Training set (normalized as requested), test split and label maps.

        Raises:
            DataError: If a file is missing or malformed.
            ManifestError: If dimensions or labels are inconsistent.
        """

        def read(key: str) -> np.ndarray:
            return MatrixRepository.read_matrix(manifest.resolve(getattr(manifest, key)))

        X = read("seen_features")
        seen_labels = _label_vector(manifest.resolve(manifest.seen_labels))
        p, n = X.shape
        _expect(seen_labels.size == n, f"seen_labels has {seen_labels.size} entries, seen_features has {n} columns")

        if manifest.seen_attribute_source == "per_sample":
            Z = read("seen_attributes")
            _expect(Z.shape[1] == n, f"seen_attributes has {Z.shape[1]} columns, seen_features has {n}")
        else:
            table = read("seen_class_attributes")
            table_ids = _label_vector(manifest.resolve(manifest.seen_class_labels))
            _expect(
                table_ids.size == table.shape[1],
                f"seen_class_labels has {table_ids.size} entries, class table has {table.shape[1]} columns",
            )
            _expect(np.unique(table_ids).size == table_ids.size, "seen_class_labels contains duplicates")
            lookup = {int(c): j for j, c in enumerate(table_ids)}
            missing = sorted({int(c) for c in seen_labels} - lookup.keys())
            _expect(not missing, f"seen labels {missing[:5]} have no row in the class table")
            Z = table[:, [lookup[int(c)] for c in seen_labels]]
        q = Z.shape[0]

        Zprime = read("unseen_prototypes")
        unseen_ids = _label_vector(manifest.resolve(manifest.unseen_labels))
        m = Zprime.shape[1]
        _expect(Zprime.shape[0] == q, f"unseen_prototypes has {Zprime.shape[0]} rows, seen attributes have {q}")
        _expect(unseen_ids.size == m, f"unseen_labels has {unseen_ids.size} entries, unseen_prototypes has {m} columns")
        _expect(np.unique(unseen_ids).size == m, "unseen_labels contains duplicates")
        overlap = np.intersect1d(unseen_ids, seen_labels)
        _expect(overlap.size == 0, f"classes {overlap[:5].tolist()} are both seen and unseen")

        X_test = read("test_features")
        test_labels = _label_vector(manifest.resolve(manifest.test_labels))
        _expect(X_test.shape[0] == p, f"test_features has {X_test.shape[0]} rows, seen_features has {p}")
        _expect(
            test_labels.size == X_test.shape[1],
            f"test_labels has {test_labels.size} entries, test_features has {X_test.shape[1]} columns",
        )
        position = {int(c): j for j, c in enumerate(unseen_ids)}
        unknown = sorted({int(c) for c in test_labels} - position.keys())
        _expect(not unknown, f"test labels {unknown[:5]} are not unseen classes")
        targets = np.array([position[int(c)] for c in test_labels], dtype=np.int64)

        test_attributes = None
        if manifest.test_attributes is not None:
            test_attributes = read("test_attributes")
            _expect(
                test_attributes.shape == (q, X_test.shape[1]),
                f"test_attributes is {test_attributes.shape}, expected {(q, X_test.shape[1])}",
            )

        names = [str(c) for c in unseen_ids]
        if manifest.unseen_class_names is not None:
            names_path = manifest.resolve(manifest.unseen_class_names)
            if not names_path.is_file():
                raise DataError(f"class names file not found: {names_path}")
            names = [line.strip() for line in names_path.read_text(encoding="utf-8").splitlines() if line.strip()]
            _expect(len(names) == m, f"{names_path}: {len(names)} names for {m} unseen classes")

        if manifest.normalize_features:
            X, X_test = unit_columns(X), unit_columns(X_test)
        if manifest.normalize_attributes:
            Z, Zprime = unit_columns(Z), unit_columns(Zprime)
            if test_attributes is not None:
                test_attributes = unit_columns(test_attributes)

        logger.info(
            "dataset loaded",
            extra={"p": p, "q": q, "n_seen": n, "n_unseen": m, "n_test": int(X_test.shape[1])},
        )
        return Dataset(
            training=TrainingSet(seen_features=X, seen_attributes=Z, unseen_attributes=Zprime),
            seen_labels=seen_labels,
            unseen_class_ids=unseen_ids,
            unseen_class_names=names,
            test_features=X_test,
            test_labels=test_labels,
            test_targets=targets,
            test_attributes=test_attributes,
        )
