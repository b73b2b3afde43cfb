"""
Evaluation Service
------------------
Metrics, end-to-end experiments and the dictionary-learning sample-complexity bound.

Functions:
- `hit_at_k()`: Percentage of samples whose true class is among the top K.
- `per_class_accuracy()`: hit@1 per class.
- `rankings()`: Top-K class rankings of every method for one trained model.
- `run_experiment()`: Load, train (or reuse a checkpoint), predict, classify and score.
- `pac_sample_bound()`: Smallest sample count meeting the excess-error bound.
"""

import math
from collections.abc import Iterator, Sequence
from contextlib import contextmanager
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from cdzsl.core.config.run_config import RunConfig, dump_run_config
from cdzsl.core.exceptions import CdzslError, DataError, Infeasible, InvalidK, LengthMismatch, StageError
from cdzsl.core.models.dataset import Dataset
from cdzsl.core.models.evaluation import ExperimentReport, MethodScores, PacQuery
from cdzsl.core.models.prediction import PredictionBatch
from cdzsl.core.models.training import TrainingResult
from cdzsl.core.repositories.checkpoint_repository import CheckpointRepository
from cdzsl.core.repositories.manifest_repository import ManifestRepository
from cdzsl.core.services.dictionary_service import train_coupled
from cdzsl.core.services.label_service import rank_classes, taaw_rank, transduce
from cdzsl.core.services.prediction_service import predict_attributes
from cdzsl.core.utils.helper import stage_timer
from cdzsl.core.utils.logger import logger

PAC_UPPER = 10**12


def hit_at_k(ranked: Sequence[Sequence[int]], truth: Sequence[int], k: int) -> float:
    """
    Percentage of samples whose true class appears in the first `k` ranked classes.

    Raises:
        LengthMismatch: If `ranked` and `truth` differ in length.
        InvalidK: If k < 1 or a ranking is shorter than k.
    """
    if len(ranked) != len(truth):
        raise LengthMismatch(f"{len(ranked)} rankings for {len(truth)} labels")
    if k < 1:
        raise InvalidK(f"K = {k} must be positive")
    if not truth:
        return 0.0
    hits = 0
    for ranking, label in zip(ranked, truth):
        if len(ranking) < k:
            raise InvalidK(f"ranking of length {len(ranking)} is shorter than K = {k}")
        hits += int(label in list(ranking)[:k])
    return 100.0 * hits / len(truth)


def per_class_accuracy(predicted: Sequence[int], truth: Sequence[int]) -> dict[int, float]:
    """
    hit@1 percentage per true class.

    Raises:
        LengthMismatch: If the sequences differ in length.
    """
    if len(predicted) != len(truth):
        raise LengthMismatch(f"{len(predicted)} predictions for {len(truth)} labels")
    pred, true = np.asarray(predicted), np.asarray(truth)
    return {
        int(c): 100.0 * float(np.mean(pred[true == c] == c)) for c in np.unique(true)
    }


def _pac_rhs(query: PacQuery, m: float) -> float:
    beta = query.beta
    return 3.0 * math.sqrt(beta * math.log(m) / m) + math.sqrt(
        (beta + math.log(2.0 / query.delta) / 8.0) / m
    )


def pac_sample_bound(query: PacQuery) -> int:
    """
    Smallest integer M >= 2 with
    epsilon >= 3 sqrt(beta log M / M) + sqrt((beta + log(2/delta) / 8) / M).

    The right side rises for the first few M and decreases afterwards, so the initial
    rising stretch is scanned and the rest bisected.

    Raises:
        Infeasible: If no M <= 10^12 satisfies the bound.
    """
    eps = query.target_error
    m = 2
    while True:
        if _pac_rhs(query, m) <= eps:
            return m
        if _pac_rhs(query, m + 1) < _pac_rhs(query, m):
            break
        m += 1
    if _pac_rhs(query, PAC_UPPER) > eps:
        raise Infeasible(f"no sample count up to {PAC_UPPER:.0e} reaches error {eps}")
    lo, hi = m, PAC_UPPER
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if _pac_rhs(query, mid) <= eps:
            hi = mid
        else:
            lo = mid
    return hi


@contextmanager
def _stage(name: str, timings: dict[str, float]) -> Iterator[None]:
    """Times a stage and tags errors raised inside it with the stage name."""
    try:
        with stage_timer(timings, name):
            yield
    except StageError:
        raise
    except CdzslError as exc:
        raise StageError(name, exc) from exc
    except ValidationError as exc:
        raise StageError(name, DataError(str(exc.errors()[0]["msg"]))) from exc


def rankings(
    dataset: Dataset,
    model: TrainingResult,
    config: RunConfig,
    timings: dict[str, float] | None = None,
) -> tuple[dict[str, list[list[int]]], dict[str, int]]:
    """
    Ranks the unseen classes for every test sample with each configured method.

    Rankings hold prototype indices and have depth min(max K, M).

    Returns:
        tuple: (rankings per method, unconverged sample count per method).
    """
    timings = timings if timings is not None else {}
    experiment = config.experiment_config()
    Zprime = dataset.training.unseen_attributes
    m = Zprime.shape[1]
    depth = min(max(experiment.top_k), m)
    needed = {method for method in experiment.methods if method != "taaw"}
    if "taaw" in experiment.methods:
        needed.add(experiment.taaw_source)

    batches: dict[str, PredictionBatch] = {}
    with _stage("predict", timings):
        for method in ("aag", "aaw"):
            if method in needed:
                batches[method] = predict_attributes(
                    model.dictionary, dataset.test_features, Zprime, method,
                    config.aaw_config(), config.solver_options(),
                )

    ranked: dict[str, list[list[int]]] = {}
    unconverged: dict[str, int] = {}
    with _stage("classify", timings):
        for method in experiment.methods:
            source = batches[experiment.taaw_source if method == "taaw" else method]
            unconverged[method] = int((~source.converged).sum())
            if method == "taaw":
                labels, _ = transduce(source.attributes, Zprime, config.graph_config())
                ranked[method] = taaw_rank(labels.scores[:, m:], source.attributes, Zprime, depth)
            else:
                ranked[method] = [
                    rank_classes(source.attributes[:, j], Zprime, depth)
                    for j in range(source.attributes.shape[1])
                ]
    return ranked, unconverged


def run_experiment(
    manifest_path: str | Path,
    config: RunConfig,
    *,
    checkpoint: str | Path | None = None,
) -> ExperimentReport:
    """
    Runs the full pipeline and scores every configured method.

    With `repeats > 1` the model is retrained with seeds seed, seed + 1, ... and the
    report holds the mean and standard deviation of every hit@K. A supplied checkpoint
    replaces training and implies a single run.

    Args:
        manifest_path (str | Path): Dataset manifest.
        config (RunConfig): Run configuration.
        checkpoint (str | Path | None): Trained model directory.

    Returns:
        ExperimentReport: Scores, timings and the configuration echo.

    Raises:
        StageError: Wrapping the failure of the load, train, predict, classify or report stage.
    """
    timings: dict[str, float] = {}
    experiment = config.experiment_config()
    with _stage("load", timings):
        dataset = ManifestRepository.load_dataset(ManifestRepository.load_manifest(manifest_path))
    m = dataset.training.n_unseen
    truth = dataset.test_targets.tolist()

    runs = 1 if checkpoint is not None else experiment.repeats
    seeds = [config.seed + rep for rep in range(runs)]
    hits: dict[str, list[dict[int, float]]] = {method: [] for method in experiment.methods}
    top1: dict[str, list[int]] = {}
    unconverged: dict[str, int] = {method: 0 for method in experiment.methods}

    for rep, seed in enumerate(seeds):
        run_config = config.model_copy(update={"seed": seed})
        with _stage("train", timings):
            if checkpoint is not None:
                model, _, _ = CheckpointRepository.load_checkpoint(checkpoint)
                if model.dictionary.feature_dim != dataset.training.feature_dim or (
                    model.dictionary.attribute_dim != dataset.training.attribute_dim
                ):
                    raise DataError(f"checkpoint {checkpoint} does not match the dataset dimensions")
            else:
                model = train_coupled(dataset.training, run_config.training_config())

        ranked, failed = rankings(dataset, model, run_config, timings)
        for method, ranking in ranked.items():
            hits[method].append(
                {k: hit_at_k(ranking, truth, min(k, m)) for k in experiment.top_k}
            )
            unconverged[method] += failed[method]
            if rep == 0:
                top1[method] = [r[0] for r in ranking]
        logger.info("experiment run finished", extra={"seed": seed, "run": rep + 1, "runs": runs})

    with _stage("report", timings):
        ids = dataset.unseen_class_ids
        scores = {}
        for method in experiment.methods:
            per_k = {k: [run[k] for run in hits[method]] for k in experiment.top_k}
            per_class = per_class_accuracy(ids[top1[method]].tolist(), ids[dataset.test_targets].tolist())
            scores[method] = MethodScores(
                method=method,
                hit_at={k: float(np.mean(v)) for k, v in per_k.items()},
                hit_std={k: float(np.std(v)) for k, v in per_k.items()},
                per_class=per_class,
                mean_class_accuracy=float(np.mean(list(per_class.values()))) if per_class else 0.0,
                unconverged=unconverged[method],
            )
        report = ExperimentReport(
            methods=scores,
            config_text=dump_run_config(config),
            timings=timings,
            n_test=len(truth),
            n_unseen=m,
            seeds=seeds,
        )
    return report
