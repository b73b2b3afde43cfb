import numpy as np
import pytest
from click.testing import CliRunner

from cdzsl.core.cli.main import cli, main
from cdzsl.core.repositories.matrix_repository import MatrixRepository

SYNTH = """
feature_dim = 12
attribute_dim = 8
atom_count = 16
n_seen = 60
n_seen_classes = 6
n_unseen = 4
n_test = 20
sparsity = 2
separation = 0.3
seed = 1
"""

RUN = """
atom_count = 16
outer_iterations = 3
inner_alternations = 1
neighbors = 3
top_k = 1, 3
"""


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def workspace(tmp_path, runner):
    (tmp_path / "synth.cfg").write_text(SYNTH, encoding="utf-8")
    (tmp_path / "run.cfg").write_text(RUN, encoding="utf-8")
    result = runner.invoke(main, ["synth-gen", str(tmp_path / "data"), "--config", str(tmp_path / "synth.cfg")])
    assert result.exit_code == 0, result.output
    return tmp_path


def test_pac_bound_slack_query(runner):
    result = runner.invoke(main, ["pac-bound", "--delta", "0.5", "--epsilon", "1e6", "-p", "2", "-r", "2", "-L", "1"])

    assert result.exit_code == 0
    assert result.output.strip() == "M = 2"


def test_pac_bound_rejects_invalid_delta(runner):
    result = runner.invoke(main, ["pac-bound", "--delta", "1.5", "--epsilon", "1", "-p", "2", "-r", "2", "-L", "1"])

    assert result.exit_code == 1
    assert "--delta" in result.output


def test_pac_bound_infeasible_query_is_a_data_error(runner):
    result = runner.invoke(main, ["pac-bound", "--delta", "0.1", "--epsilon", "1e-6", "-p", "1", "-r", "1", "-L", "1"])

    assert result.exit_code == 2
    assert "Infeasible" in result.output


def test_unknown_option_is_a_usage_error(runner):
    result = runner.invoke(main, ["evaluate", "--colour", "red"])

    assert result.exit_code == 1


def test_missing_manifest_exits_with_data_error(runner, tmp_path):
    missing = tmp_path / "absent" / "manifest.cfg"

    result = runner.invoke(main, ["evaluate", str(missing), "--out", str(tmp_path / "report")])

    assert result.exit_code == 2
    assert str(missing) in result.output


def test_unknown_config_key_exits_with_usage_error(runner, workspace):
    (workspace / "bad.cfg").write_text("seed = 1\nsparsity_level = 0.3\n", encoding="utf-8")

    result = runner.invoke(
        main, ["evaluate", str(workspace / "data" / "manifest.cfg"), "--config", str(workspace / "bad.cfg")]
    )

    assert result.exit_code == 1
    assert "sparsity_level" in result.output


def test_cli_returns_the_exit_code():
    assert cli(["pac-bound", "--delta", "0.5", "--epsilon", "1e6", "-p", "2", "-r", "2", "-L", "1"]) == 0
    assert cli(["pac-bound", "--delta", "0", "--epsilon", "1", "-p", "2", "-r", "2", "-L", "1"]) == 1


def test_train_evaluate_round_trip(runner, workspace):
    data, run = workspace / "data", workspace / "run.cfg"

    trained = runner.invoke(main, ["train", str(data / "manifest.cfg"), "--config", str(run), "--out", str(workspace / "ckpt")])
    evaluated = runner.invoke(
        main,
        ["evaluate", str(data / "manifest.cfg"), "--checkpoint", str(workspace / "ckpt"), "--config", str(run),
         "--method", "aag", "--method", "taaw", "--out", str(workspace / "report")],
    )

    assert trained.exit_code == 0, trained.output
    assert (workspace / "ckpt" / "dx.cdzm").is_file()
    assert (workspace / "ckpt" / "config.cfg").is_file()
    assert evaluated.exit_code == 0, evaluated.output
    assert "TAAw" in evaluated.output
    report = (workspace / "report" / "report.txt").read_text(encoding="utf-8")
    assert "[aag]" in report and "[taaw]" in report and "[aaw]" not in report


def test_predict_then_classify(runner, workspace):
    data = workspace / "data"
    runner.invoke(main, ["train", str(data / "manifest.cfg"), "--config", str(workspace / "run.cfg"), "--out", str(workspace / "ckpt")])

    predicted = runner.invoke(
        main,
        ["predict", str(workspace / "ckpt"), str(data / "test_features.cdzm"), "--method", "aag",
         "--out", str(workspace / "z_hat.cdzm")],
    )
    classified = runner.invoke(
        main,
        ["classify", str(workspace / "z_hat.cdzm"), str(data / "unseen_prototypes.cdzm"),
         "--class-ids", str(data / "unseen_labels.cdzm"), "--out", str(workspace / "labels.cdzm")],
    )

    assert predicted.exit_code == 0, predicted.output
    assert MatrixRepository.read_matrix(workspace / "z_hat.cdzm").shape == (8, 20)
    assert classified.exit_code == 0, classified.output
    labels = MatrixRepository.read_matrix(workspace / "labels.cdzm")
    class_ids = MatrixRepository.read_matrix(data / "unseen_labels.cdzm")
    assert labels.shape == (1, 20)
    assert set(labels.ravel()) <= set(class_ids.ravel())


def test_aaw_prediction_needs_prototypes(runner, workspace):
    result = runner.invoke(
        main, ["predict", str(workspace / "ckpt"), str(workspace / "data" / "test_features.cdzm"), "--out", "z.cdzm"]
    )

    assert result.exit_code == 1
    assert "--prototypes" in result.output


def test_fatal_nonconvergence_exits_with_solver_error(runner, workspace):
    data = workspace / "data"
    (workspace / "short.cfg").write_text(RUN + "entropy_weight = 5.0\naaw_max_iterations = 1\naaw_tolerance = 0.0\n")
    runner.invoke(main, ["train", str(data / "manifest.cfg"), "--config", str(workspace / "short.cfg"), "--out", str(workspace / "ckpt")])
    args = ["predict", str(workspace / "ckpt"), str(data / "test_features.cdzm"),
            "--prototypes", str(data / "unseen_prototypes.cdzm"), "--out", str(workspace / "z.cdzm")]

    lenient = runner.invoke(main, args)
    fatal = runner.invoke(main, ["--fatal-nonconvergence", *args])

    assert lenient.exit_code == 0, lenient.output
    assert "did not converge" in lenient.output
    assert fatal.exit_code == 3
    assert "NonConvergence" in fatal.output


def test_synth_gen_rejects_unknown_key(runner, tmp_path):
    (tmp_path / "synth.cfg").write_text("feature_dim = 4\nshape = round\n", encoding="utf-8")

    result = runner.invoke(main, ["synth-gen", str(tmp_path / "out"), "--config", str(tmp_path / "synth.cfg")])

    assert result.exit_code == 1
    assert "shape" in result.output
    assert not (tmp_path / "out").exists()


def test_tune_writes_scores_and_best_config(runner, workspace):
    (workspace / "grid.cfg").write_text("sparsity = 0.1, 0.3\n", encoding="utf-8")

    result = runner.invoke(
        main,
        ["tune", str(workspace / "data" / "manifest.cfg"), "--grid", str(workspace / "grid.cfg"), "--folds", "2",
         "--method", "aag", "--config", str(workspace / "run.cfg"), "--out", str(workspace / "tuning")],
    )

    assert result.exit_code == 0, result.output
    scores = (workspace / "tuning" / "scores.txt").read_text(encoding="utf-8")
    assert "[point_0]" in scores and "[point_1]" in scores
    assert "sparsity = " in (workspace / "tuning" / "best.cfg").read_text(encoding="utf-8")
    assert np.isfinite(float(scores.split("mean_hit@1 = ", 1)[1].split()[0]))


def test_default_prediction_budget_converges_under_fatal_flag(runner, workspace):
    data = workspace / "data"

    result = runner.invoke(
        main,
        ["--fatal-nonconvergence", "evaluate", str(data / "manifest.cfg"), "--config", str(workspace / "run.cfg"),
         "--out", str(workspace / "report")],
    )

    assert result.exit_code == 0, result.output


def test_train_and_evaluate_are_byte_identical_across_runs(runner, workspace):
    data, run = workspace / "data", workspace / "run.cfg"
    for name in ("first", "second"):
        trained = runner.invoke(
            main, ["train", str(data / "manifest.cfg"), "--config", str(run), "--out", str(workspace / name / "ckpt")]
        )
        evaluated = runner.invoke(
            main,
            ["evaluate", str(data / "manifest.cfg"), "--checkpoint", str(workspace / name / "ckpt"),
             "--config", str(run), "--out", str(workspace / name / "report")],
        )
        assert trained.exit_code == 0, trained.output
        assert evaluated.exit_code == 0, evaluated.output

    first, second = workspace / "first", workspace / "second"
    files = sorted(path.name for path in (first / "ckpt").iterdir())
    assert files == sorted(path.name for path in (second / "ckpt").iterdir())
    for name in files:
        assert (first / "ckpt" / name).read_bytes() == (second / "ckpt" / name).read_bytes()
    assert (first / "report" / "table.txt").read_bytes() == (second / "report" / "table.txt").read_bytes()

    def scores(path):
        return path.read_text(encoding="utf-8").split("[timings]")[0]

    assert scores(first / "report" / "report.txt") == scores(second / "report" / "report.txt")
