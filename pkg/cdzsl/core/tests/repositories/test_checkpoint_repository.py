import numpy as np
import pytest

from cdzsl.core.exceptions import DataError
from cdzsl.core.models.base import Base
from cdzsl.core.models.training import CoupledDictionary, TraceEntry, TrainingResult, TrainingTrace
from cdzsl.core.repositories.checkpoint_repository import CheckpointMeta, CheckpointRepository


@pytest.fixture
def result():
    rng = np.random.default_rng(0)
    entries = [
        TraceEntry(iteration=t, visual_fidelity=1.0 / t, seen_attribute_fidelity=0.5 / t,
                   unseen_attribute_fidelity=0.2, sparsity=0.1, dictionary_penalty=0.0)
        for t in (1, 2)
    ]
    return TrainingResult(
        dictionary=CoupledDictionary(d_x=rng.standard_normal((5, 7)), d_z=rng.standard_normal((3, 7))),
        codes_seen=rng.standard_normal((7, 9)),
        codes_unseen=rng.standard_normal((7, 2)),
        trace=TrainingTrace(entries=entries),
    )


def test_checkpoint_round_trip(result, tmp_path):
    CheckpointRepository.save_checkpoint(
        tmp_path, result, config_text="seed = 3\n", meta=CheckpointMeta(normalize_features=True)
    )

    loaded, meta, config_text = CheckpointRepository.load_checkpoint(tmp_path)

    np.testing.assert_array_equal(loaded.dictionary.d_x, result.dictionary.d_x)
    np.testing.assert_array_equal(loaded.dictionary.d_z, result.dictionary.d_z)
    np.testing.assert_array_equal(loaded.codes_seen, result.codes_seen)
    np.testing.assert_array_equal(loaded.codes_unseen, result.codes_unseen)
    np.testing.assert_array_equal(loaded.trace.totals, result.trace.totals)
    assert meta == CheckpointMeta(iteration=2, normalize_features=True)
    assert config_text == "seed = 3\n"


def test_checkpoint_without_config_echo(result, tmp_path):
    CheckpointRepository.save_checkpoint(tmp_path, result, iteration=7)

    _, meta, config_text = CheckpointRepository.load_checkpoint(tmp_path)

    assert meta.iteration == 7
    assert config_text is None


def test_missing_checkpoint_directory(tmp_path):
    with pytest.raises(DataError):
        CheckpointRepository.load_checkpoint(tmp_path / "absent")


def test_missing_dictionary_file(result, tmp_path):
    CheckpointRepository.save_checkpoint(tmp_path, result)
    (tmp_path / "dz.cdzm").unlink()

    with pytest.raises(DataError):
        CheckpointRepository.load_checkpoint(tmp_path)


def test_checkpoint_meta_shares_the_model_base():
    meta = CheckpointMeta(normalize_attributes=True)

    assert isinstance(meta, Base)
    assert meta.model_dump() == {"iteration": 0, "normalize_features": False, "normalize_attributes": True}
