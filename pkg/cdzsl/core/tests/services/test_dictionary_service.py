import numpy as np
import pytest

from cdzsl.core.config.run_config import RunConfig
from cdzsl.core.exceptions import DimensionMismatch, StepDivergence
from cdzsl.core.models.dataset import SynthConfig
from cdzsl.core.models.training import CoupledDictionary, TrainingConfig, TrainingSet
from cdzsl.core.repositories.checkpoint_repository import CheckpointMeta, CheckpointRepository
from cdzsl.core.repositories.manifest_repository import ManifestRepository
from cdzsl.core.services.dictionary_service import (
    accept_codes,
    coupled_objective,
    init_dictionary,
    preprocess,
    train_coupled,
    update_attribute_block,
    update_visual_block,
)
from cdzsl.core.services.prediction_service import predict_attributes
from cdzsl.core.services.synthetic_service import MANIFEST_NAME, generate_synthetic


@pytest.fixture
def planted():
    """Small planted problem: X = Dx* A*, Z = Dz* A*, Z' = Dz* B* with 2-sparse codes."""
    rng = np.random.default_rng(3)
    p, q, r, n, m = 8, 6, 12, 40, 4
    d_x = init_dictionary(p, r, 1)
    d_z = init_dictionary(q, r, 2)
    A = np.zeros((r, n))
    for j in range(n):
        A[rng.choice(r, 2, replace=False), j] = rng.uniform(0.5, 1.5, 2)
    B = np.zeros((r, m))
    for j in range(m):
        B[rng.choice(r, 2, replace=False), j] = rng.uniform(0.5, 1.5, 2)
    return TrainingSet(seen_features=d_x @ A, seen_attributes=d_z @ A, unseen_attributes=d_z @ B)


@pytest.fixture
def config():
    return TrainingConfig(atom_count=12, sparsity=0.05, outer_iterations=6, inner_alternations=2, seed=11)


def test_init_dictionary_has_unit_columns():
    D = init_dictionary(5, 7, seed=4)

    assert D.shape == (5, 7)
    np.testing.assert_allclose(np.linalg.norm(D, axis=0), 1.0)
    np.testing.assert_array_equal(D, init_dictionary(5, 7, seed=4))


def test_init_dictionary_rejects_empty_shape():
    with pytest.raises(DimensionMismatch):
        init_dictionary(0, 3, seed=0)


def test_preprocess_normalizes_selected_blocks(planted):
    scaled = TrainingSet(
        seen_features=3.0 * planted.seen_features,
        seen_attributes=2.0 * planted.seen_attributes,
        unseen_attributes=2.0 * planted.unseen_attributes,
    )

    out = preprocess(scaled, normalize_features=True, normalize_attributes=False)

    np.testing.assert_allclose(np.linalg.norm(out.seen_features, axis=0), 1.0)
    np.testing.assert_array_equal(out.seen_attributes, scaled.seen_attributes)


def test_coupled_objective_at_zero_codes(planted, config):
    dictionary = CoupledDictionary(d_x=init_dictionary(8, 12, 0), d_z=init_dictionary(6, 12, 1))

    entry = coupled_objective(planted, dictionary, np.zeros((12, 40)), np.zeros((12, 4)), config)

    assert entry.visual_fidelity == pytest.approx(np.sum(planted.seen_features**2) / (40 * 8))
    assert entry.seen_attribute_fidelity == pytest.approx(np.sum(planted.seen_attributes**2) / (40 * 6))
    assert entry.unseen_attribute_fidelity == pytest.approx(np.sum(planted.unseen_attributes**2) / (4 * 6))
    assert entry.sparsity == 0.0
    assert entry.dictionary_penalty == 0.0


@pytest.mark.parametrize("code_update", ["visual", "joint"])
def test_full_batch_objective_is_monotone(planted, config, code_update):
    """Test that every outer iteration of full-batch training does not raise the objective."""
    result = train_coupled(planted, config.model_copy(update={"code_update": code_update}))

    totals = result.trace.totals
    assert len(result.trace) == config.outer_iterations
    assert np.all(np.diff(totals) <= 1e-10 * np.abs(totals[:-1]))
    assert totals[-1] < totals[0]


def test_joint_code_update_is_opt_in(planted, config):
    assert config.code_update == "visual"

    result = train_coupled(planted, config.model_copy(update={"code_update": "joint"}))

    assert result.dictionary.d_x.shape == (8, 12)
    assert result.codes_seen.shape == (12, 40)
    assert result.codes_unseen.shape == (12, 4)


def test_dictionary_columns_stay_in_unit_ball(planted, config):
    result = train_coupled(planted, config)

    assert np.all(np.linalg.norm(result.dictionary.d_x, axis=0) <= 1.0 + 1e-12)
    assert np.all(np.linalg.norm(result.dictionary.d_z, axis=0) <= 1.0 + 1e-12)


def test_mini_batch_training_is_deterministic(planted, config):
    mini = config.model_copy(update={"batch_size": 10})

    first = train_coupled(planted, mini)
    second = train_coupled(planted, mini)

    np.testing.assert_array_equal(first.dictionary.d_x, second.dictionary.d_x)
    np.testing.assert_array_equal(first.codes_unseen, second.codes_unseen)


def test_huge_step_raises_step_divergence(planted):
    config = TrainingConfig(atom_count=12, dict_step=1e6, normalize_columns=False, inner_alternations=1)
    d_x = init_dictionary(8, 12, 0)

    with pytest.raises(StepDivergence):
        update_visual_block(d_x, planted.seen_features, np.zeros((12, 40)), config)


def test_visual_block_checks_shapes(planted, config):
    with pytest.raises(DimensionMismatch):
        update_visual_block(init_dictionary(8, 12, 0), planted.seen_features, np.zeros((12, 39)), config)


def test_attribute_block_leaves_seen_codes_untouched(planted, config):
    A = np.abs(np.random.default_rng(0).standard_normal((12, 40)))
    A_before = A.copy()

    d_z, B = update_attribute_block(
        init_dictionary(6, 12, 0), planted.seen_attributes, planted.unseen_attributes,
        A, np.zeros((12, 4)), config,
    )

    np.testing.assert_array_equal(A, A_before)
    assert d_z.shape == (6, 12)
    assert B.shape == (12, 4)


def test_checkpoints_are_written_during_training(planted, config, tmp_path):
    train_coupled(
        planted, config.model_copy(update={"checkpoint_every": 3}), checkpoint_dir=tmp_path, config_text="seed = 11\n"
    )

    result, meta, text = CheckpointRepository.load_checkpoint(tmp_path)
    assert meta.iteration == 6
    assert len(result.trace) == 6
    assert text == "seed = 11\n"


def test_intermediate_checkpoints_keep_preprocessing_flags(planted, config, tmp_path):
    meta = CheckpointMeta(normalize_features=True, normalize_attributes=True)

    train_coupled(
        planted, config.model_copy(update={"checkpoint_every": 2, "outer_iterations": 4}),
        checkpoint_dir=tmp_path, meta=meta,
    )

    _, loaded, _ = CheckpointRepository.load_checkpoint(tmp_path)
    assert loaded == CheckpointMeta(iteration=4, normalize_features=True, normalize_attributes=True)


def _sparse_codes(rng: np.random.Generator, r: int, n: int) -> np.ndarray:
    codes = np.zeros((r, n))
    for j in range(n):
        codes[rng.choice(r, 2, replace=False), j] = rng.uniform(0.5, 1.5, 2)
    return codes


@pytest.mark.parametrize("code_update", ["visual", "joint"])
def test_visual_block_keeps_an_exact_fit(code_update):
    """X = D_x A exactly, no l1 or Frobenius penalty: D_x does not move."""
    rng = np.random.default_rng(41)
    d_x, d_z = init_dictionary(8, 12, 1), init_dictionary(6, 12, 2)
    A = _sparse_codes(rng, 12, 30)
    config = TrainingConfig(atom_count=12, sparsity=0.0, dict_penalty=0.0, code_update=code_update)

    new_dx, new_A = update_visual_block(d_x, d_x @ A, A, config, coupling=(d_z, d_z @ A))

    np.testing.assert_allclose(new_dx, d_x, rtol=0.0, atol=1e-10)
    np.testing.assert_allclose(new_dx @ new_A, d_x @ A, rtol=0.0, atol=1e-8)


def test_attribute_block_keeps_an_exact_fit():
    rng = np.random.default_rng(42)
    d_z = init_dictionary(6, 12, 3)
    A = _sparse_codes(rng, 12, 30)
    b = _sparse_codes(rng, 12, 1)
    config = TrainingConfig(atom_count=12, sparsity=0.0, dict_penalty=0.0)

    new_dz, new_B = update_attribute_block(d_z, d_z @ A, d_z @ b, A, b, config)

    np.testing.assert_allclose(new_dz, d_z, rtol=0.0, atol=1e-10)
    np.testing.assert_allclose(new_dz @ new_B, d_z @ b, rtol=0.0, atol=1e-8)


def test_heavy_penalty_shrinks_the_visual_dictionary(planted):
    d_x = init_dictionary(8, 12, 0)
    config = TrainingConfig(atom_count=12, dict_penalty=1e6)

    new_dx, _ = update_visual_block(d_x, planted.seen_features, np.zeros((12, 40)), config)

    assert np.linalg.norm(new_dx) < np.linalg.norm(d_x)


def test_heavy_dictionary_penalty_shrinks_dictionaries(planted, config):
    plain = train_coupled(planted, config)
    heavy = train_coupled(planted, config.model_copy(update={"dict_penalty": 1e6}))

    assert np.linalg.norm(heavy.dictionary.d_x) < np.linalg.norm(plain.dictionary.d_x)
    assert np.linalg.norm(heavy.dictionary.d_z) < np.linalg.norm(plain.dictionary.d_z)


def test_accept_codes_takes_an_improving_proposal():
    rng = np.random.default_rng(43)
    d_x, d_z = init_dictionary(8, 12, 4), init_dictionary(6, 12, 5)
    A = _sparse_codes(rng, 12, 5)

    accepted = accept_codes(d_x, d_z, d_x @ A, d_z @ A, np.zeros((12, 5)), A, 0.01)

    np.testing.assert_array_equal(accepted, A)


def test_accept_codes_never_raises_the_column_objective():
    rng = np.random.default_rng(44)
    d_x, d_z = init_dictionary(8, 12, 6), init_dictionary(6, 12, 7)
    A = _sparse_codes(rng, 12, 6)
    X, Z = d_x @ A, d_z @ A
    proposed = A + rng.standard_normal((12, 6))
    proposed[:, 0] = A[:, 0]

    accepted = accept_codes(d_x, d_z, X, Z, A, proposed, 0.01)

    def column_objectives(C):
        return (
            np.sum((X - d_x @ C) ** 2, axis=0) / 8 + np.sum((Z - d_z @ C) ** 2, axis=0) / 6
            + 0.01 * np.abs(C).sum(axis=0)
        )

    assert np.all(column_objectives(accepted) <= column_objectives(A) + 1e-12)
    np.testing.assert_array_equal(accepted[:, 0], A[:, 0])


@pytest.fixture(scope="module")
def default_planted(tmp_path_factory):
    """Default planted instance trained with the default run configuration."""
    directory = tmp_path_factory.mktemp("planted")
    generate_synthetic(SynthConfig(), directory)
    dataset = ManifestRepository.load_dataset(ManifestRepository.load_manifest(directory / MANIFEST_NAME))
    config = RunConfig()
    return dataset, config, train_coupled(dataset.training, config.training_config())


@pytest.mark.slow
def test_default_planted_objective_is_monotone(default_planted):
    _, config, result = default_planted

    totals = result.trace.totals
    assert len(totals) == config.outer_iterations == 30
    assert np.all(np.diff(totals) <= 1e-10 * np.abs(totals[:-1]))


@pytest.mark.slow
def test_default_planted_reconstruction_and_recovery(default_planted):
    dataset, config, result = default_planted
    data, dictionary = dataset.training, result.dictionary

    X, Z = data.seen_features, data.seen_attributes
    assert np.linalg.norm(X - dictionary.d_x @ result.codes_seen) / np.linalg.norm(X) <= 0.05
    assert np.linalg.norm(Z - dictionary.d_z @ result.codes_seen) / np.linalg.norm(Z) <= 0.05

    batch = predict_attributes(
        dictionary, dataset.test_features, data.unseen_attributes, "aag", config.aaw_config(), config.solver_options()
    )
    truth = dataset.test_attributes
    errors = np.linalg.norm(batch.attributes - truth, axis=0) / np.linalg.norm(truth, axis=0)
    assert np.mean(errors <= 0.1) >= 0.9
