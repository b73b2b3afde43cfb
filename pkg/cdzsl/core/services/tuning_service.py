"""
Tuning Service
--------------
Brute-force grid search with class-disjoint k-fold cross-validation.

Each fold holds out a group of seen classes; they play the unseen role, with their
prototypes taken as the mean seen attribute of each held-out class.

Functions:
- `class_folds()`: Split the seen classes into disjoint groups.
- `fold_dataset()`: Build the zero-shot split of one fold.
- `tune_parameters()`: Score every grid point on every fold.
"""

import itertools
from collections.abc import Mapping, Sequence

import numpy as np

from cdzsl.core.config.run_config import RunConfig, parse_config_text
from cdzsl.core.exceptions import ConfigError, DataError
from cdzsl.core.models.dataset import Dataset
from cdzsl.core.models.evaluation import Method
from cdzsl.core.models.training import TrainingSet
from cdzsl.core.models.tuning import TuningPoint, TuningResult
from cdzsl.core.services.dictionary_service import train_coupled
from cdzsl.core.services.evaluation_service import hit_at_k, rankings
from cdzsl.core.utils.helper import format_key_values
from cdzsl.core.utils.logger import logger


def class_folds(seen_labels: Sequence[int] | np.ndarray, folds: int, seed: int = 0) -> list[list[int]]:
    """
    Shuffles the distinct seen classes and splits them into `folds` disjoint groups.

    Raises:
        DataError: If there are fewer than two folds or fewer classes than folds.
    """
    classes = np.unique(np.asarray(seen_labels))
    if folds < 2:
        raise DataError(f"cross-validation needs at least 2 folds, got {folds}")
    if classes.size < folds:
        raise DataError(f"{classes.size} seen classes cannot fill {folds} folds")
    order = np.random.default_rng(seed).permutation(classes)
    return [sorted(int(c) for c in group) for group in np.array_split(order, folds)]


def fold_dataset(dataset: Dataset, held_out: Sequence[int]) -> Dataset:
    """
    Zero-shot split of one fold: train on the remaining seen classes, test on the held-out ones.
    """
    labels = dataset.seen_labels
    test_mask = np.isin(labels, held_out)
    X, Z = dataset.training.seen_features, dataset.training.seen_attributes
    ids = np.asarray(held_out, dtype=np.int64)
    prototypes = np.column_stack([Z[:, labels == c].mean(axis=1) for c in ids])
    position = {int(c): j for j, c in enumerate(ids)}
    test_labels = labels[test_mask]
    return Dataset(
        training=TrainingSet(
            seen_features=X[:, ~test_mask], seen_attributes=Z[:, ~test_mask], unseen_attributes=prototypes
        ),
        seen_labels=labels[~test_mask],
        unseen_class_ids=ids,
        unseen_class_names=[str(c) for c in ids],
        test_features=X[:, test_mask],
        test_labels=test_labels,
        test_targets=np.array([position[int(c)] for c in test_labels], dtype=np.int64),
    )


def tune_parameters(
    dataset: Dataset,
    grid: Mapping[str, Sequence[object]],
    folds: int,
    method: Method,
    base_config: RunConfig,
) -> TuningResult:
    """
    Scores every combination of grid values by mean hit@1 over class-disjoint folds.

    Args:
        dataset (Dataset): Loaded dataset; only its seen part is used.
        grid (Mapping): Run configuration key -> candidate values.
        folds (int): Number of folds.
        method (Method): Method whose hit@1 is maximized.
        base_config (RunConfig): Values of every key not in the grid.

    Returns:
        TuningResult: All scores and the best configuration.

    Raises:
        ConfigError: On an empty grid, unknown keys or invalid values.
        DataError: If the seen classes cannot fill the folds.
    """
    if not grid or any(len(values) == 0 for values in grid.values()):
        raise ConfigError("tuning grid is empty")
    for key in grid:
        if key not in RunConfig.model_fields:
            raise ConfigError(f"unknown grid key '{key}'")
    groups = class_folds(dataset.seen_labels, folds, base_config.seed)
    splits = [fold_dataset(dataset, group) for group in groups]

    keys = list(grid)
    points: list[TuningPoint] = []
    for values in itertools.product(*(grid[key] for key in keys)):
        params = dict(zip(keys, values))
        text = format_key_values({**base_config.model_dump(), **params, "methods": (method,)})
        config = parse_config_text(text, source="grid point")
        scores = []
        for split in splits:
            model = train_coupled(split.training, config.training_config())
            ranked, _ = rankings(split, model, config)
            scores.append(hit_at_k(ranked[method], split.test_targets.tolist(), 1))
        point = TuningPoint(
            params={key: str(value) for key, value in params.items()},
            fold_scores=scores,
            mean_score=float(np.mean(scores)),
        )
        points.append(point)
        logger.info("grid point scored", extra={"params": point.params, "score": point.mean_score})

    best = max(points, key=lambda point: point.mean_score)
    best_config = parse_config_text(
        format_key_values({**base_config.model_dump(), **best.params}), source="best grid point"
    )
    return TuningResult(method=method, folds=groups, points=points, best=best, best_config=best_config)
