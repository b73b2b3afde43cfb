import numpy as np
import pytest

from cdzsl.core.config.run_config import RunConfig
from cdzsl.core.exceptions import DataError, Infeasible, InvalidK, LengthMismatch, StageError
from cdzsl.core.models.dataset import SynthConfig
from cdzsl.core.models.evaluation import PacQuery
from cdzsl.core.repositories.checkpoint_repository import CheckpointRepository
from cdzsl.core.repositories.manifest_repository import ManifestRepository
from cdzsl.core.services.dictionary_service import train_coupled
from cdzsl.core.services.evaluation_service import (
    hit_at_k,
    pac_sample_bound,
    per_class_accuracy,
    rankings,
    run_experiment,
)
from cdzsl.core.services.synthetic_service import MANIFEST_NAME, generate_synthetic

SMALL_PROBLEM = SynthConfig(
    feature_dim=12, attribute_dim=8, atom_count=16, n_seen=60, n_seen_classes=6,
    n_unseen=4, n_test=20, sparsity=2, separation=0.3, seed=1,
)


@pytest.fixture
def manifest_path(tmp_path):
    generate_synthetic(SMALL_PROBLEM, tmp_path / "data")
    return tmp_path / "data" / MANIFEST_NAME


@pytest.fixture
def config():
    return RunConfig(atom_count=16, outer_iterations=3, inner_alternations=1, neighbors=3, top_k=(1, 3))


def pac_oracle(query: PacQuery, limit: int = 5_000_000) -> int:
    """Direct scan of every M in 2..limit."""
    m = np.arange(2, limit + 1, dtype=np.float64)
    beta = query.feature_dim * query.atom_count / 8.0 * max(1.0, np.log(6.0 * np.sqrt(8.0) * query.loss_constant))
    rhs = 3.0 * np.sqrt(beta * np.log(m) / m) + np.sqrt((beta + np.log(2.0 / query.delta) / 8.0) / m)
    hits = np.flatnonzero(rhs <= query.target_error)
    assert hits.size, "oracle limit too small"
    return int(m[hits[0]])


def test_hit_at_k_direct_count():
    truth = [0, 0, 0, 0]
    ranked = [[0, 1, 2, 3, 4, 5], [1, 0, 2, 3, 4, 5], [1, 2, 3, 0, 4, 5], [1, 2, 3, 4, 5, 0]]

    assert hit_at_k(ranked, truth, 1) == 25.0
    assert hit_at_k(ranked, truth, 3) == 50.0
    assert hit_at_k(ranked, truth, 5) == 75.0


def test_hit_at_k_perfect_and_adversarial():
    assert hit_at_k([[2, 0], [1, 0]], [2, 1], 1) == 100.0
    assert hit_at_k([[1, 2, 3, 4, 5]] * 3, [0, 0, 0], 5) == 0.0


def test_hit_at_k_errors():
    with pytest.raises(LengthMismatch):
        hit_at_k([[0]], [0, 1], 1)
    with pytest.raises(InvalidK):
        hit_at_k([[0, 1]], [0], 3)
    with pytest.raises(InvalidK):
        hit_at_k([[0, 1]], [0], 0)


def test_per_class_accuracy():
    accuracy = per_class_accuracy([3, 3, 5, 3], [3, 5, 5, 5])

    assert accuracy == {3: 100.0, 5: pytest.approx(100.0 / 3.0)}


def test_pac_bound_slack_query():
    query = PacQuery(delta=0.5, target_error=1e6, feature_dim=2, atom_count=2, loss_constant=1.0)

    assert pac_sample_bound(query) == 2


def test_pac_bound_matches_direct_scan():
    query = PacQuery(delta=0.1, target_error=0.5, feature_dim=16, atom_count=32, loss_constant=1.0)

    assert pac_sample_bound(query) == pac_oracle(query)


def test_pac_bound_agrees_with_scan_on_random_queries():
    rng = np.random.default_rng(17)
    for _ in range(20):
        query = PacQuery(
            delta=float(rng.uniform(0.01, 0.9)),
            target_error=float(rng.uniform(0.5, 3.0)),
            feature_dim=int(rng.integers(1, 33)),
            atom_count=int(rng.integers(1, 33)),
            loss_constant=float(rng.uniform(0.5, 5.0)),
        )
        assert pac_sample_bound(query) == pac_oracle(query)


def test_pac_bound_is_monotone():
    base = dict(delta=0.1, target_error=1.0, feature_dim=8, atom_count=8, loss_constant=1.0)
    m = pac_sample_bound(PacQuery(**base))

    assert pac_sample_bound(PacQuery(**{**base, "target_error": 0.5})) >= m
    assert pac_sample_bound(PacQuery(**{**base, "feature_dim": 16})) >= m
    assert pac_sample_bound(PacQuery(**{**base, "atom_count": 16})) >= m
    assert pac_sample_bound(PacQuery(**{**base, "delta": 0.01})) >= m


def test_pac_bound_infeasible():
    query = PacQuery(delta=0.1, target_error=1e-6, feature_dim=1, atom_count=1, loss_constant=1.0)

    with pytest.raises(Infeasible):
        pac_sample_bound(query)


def test_rankings_cover_every_method(manifest_path, config):
    dataset = ManifestRepository.load_dataset(ManifestRepository.load_manifest(manifest_path))
    model = train_coupled(dataset.training, config.training_config())

    ranked, unconverged = rankings(dataset, model, config)

    assert set(ranked) == {"aag", "aaw", "taaw"}
    for method, lists in ranked.items():
        assert len(lists) == SMALL_PROBLEM.n_test
        assert all(len(r) == 3 and len(set(r)) == 3 for r in lists)
        assert unconverged[method] >= 0


def test_run_experiment_report(manifest_path, config):
    report = run_experiment(manifest_path, config)

    assert set(report.methods) == {"aag", "aaw", "taaw"}
    assert report.n_test == SMALL_PROBLEM.n_test
    assert report.n_unseen == SMALL_PROBLEM.n_unseen
    assert report.seeds == [0]
    assert {"load", "train", "predict", "classify", "report"} <= set(report.timings)
    for scores in report.methods.values():
        assert 0.0 <= scores.hit_at[1] <= scores.hit_at[3] <= 100.0
    assert "outer_iterations = 3" in report.config_text


def test_run_experiment_is_deterministic(manifest_path, config):
    first = run_experiment(manifest_path, config)
    second = run_experiment(manifest_path, config)

    for method in first.methods:
        assert first.methods[method].hit_at == second.methods[method].hit_at


def test_repeated_runs_use_consecutive_seeds(manifest_path, config):
    report = run_experiment(manifest_path, config.model_copy(update={"repeats": 2, "seed": 5}))

    assert report.seeds == [5, 6]
    assert set(report.methods["aag"].hit_std) == {1, 3}


def test_checkpoint_replaces_training(manifest_path, config, tmp_path):
    dataset = ManifestRepository.load_dataset(ManifestRepository.load_manifest(manifest_path))
    CheckpointRepository.save_checkpoint(tmp_path / "ckpt", train_coupled(dataset.training, config.training_config()))

    report = run_experiment(manifest_path, config.model_copy(update={"repeats": 3}), checkpoint=tmp_path / "ckpt")

    assert report.seeds == [0]


def test_missing_manifest_is_a_load_stage_error(tmp_path, config):
    missing = tmp_path / "nowhere" / "manifest.cfg"

    with pytest.raises(StageError) as info:
        run_experiment(missing, config)

    assert info.value.stage == "load"
    assert info.value.exit_code == 2
    assert isinstance(info.value.cause, DataError)
    assert str(missing) in str(info.value)


@pytest.mark.slow
def test_planted_pipeline_reaches_transductive_accuracy(tmp_path):
    """Default planted problem and run configuration: TAAw hit@1 >= 95 and AAg <= AAw <= TAAw."""
    generate_synthetic(SynthConfig(), tmp_path)

    report = run_experiment(tmp_path / MANIFEST_NAME, RunConfig())

    aag, aaw, taaw = (report.methods[m].hit_at[1] for m in ("aag", "aaw", "taaw"))
    assert taaw >= 95.0
    assert aag <= aaw <= taaw
