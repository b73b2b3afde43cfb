import pytest

from cdzsl.core.config.run_config import RunConfig, dump_run_config, load_run_config, parse_config_text
from cdzsl.core.exceptions import ConfigError


def test_defaults():
    config = load_run_config(None)

    assert config.sparsity == 0.1
    assert config.code_update == "visual"
    assert config.attribute_alternations == 10
    assert config.aaw_max_iterations == 2000
    assert config.aaw_tolerance == 1e-6
    assert config.entropy_weight == 0.1
    assert config.kernel_param == 1.0
    assert config.graph_sigma == "auto"
    assert config.fitness_weight == 1.0
    assert config.neighbors == 10
    assert config.methods == ("aag", "aaw", "taaw")
    assert config.taaw_source == "aaw"


def test_parse_with_comments_and_lists():
    text = """
    # small run
    atom_count = 32
    graph_sigma = 0.5   # fixed bandwidth
    methods = AAg, TAAw
    top_k = 5, 1
    solver_acceleration = false
    """

    config = parse_config_text(text)

    assert config.atom_count == 32
    assert config.graph_sigma == 0.5
    assert config.methods == ("aag", "taaw")
    assert config.top_k == (5, 1)
    assert config.solver_acceleration is False


def test_unknown_key_names_the_line():
    with pytest.raises(ConfigError, match=r"run\.cfg:2: unknown key 'sparsity_level'"):
        parse_config_text("seed = 1\nsparsity_level = 0.3\n", source="run.cfg")


def test_invalid_value_names_key_and_line():
    with pytest.raises(ConfigError, match=r"<config>:3: invalid value for 'neighbors'"):
        parse_config_text("seed = 1\n\nneighbors = 0\n")


@pytest.mark.parametrize(
    "text",
    ["sparsity", "= 0.3", "seed = 1\nseed = 2", "methods = aag, xyz", "graph_sigma = median"],
)
def test_malformed_text_is_a_config_error(text):
    with pytest.raises(ConfigError):
        parse_config_text(text)


def test_config_error_is_a_usage_error():
    with pytest.raises(ConfigError) as info:
        parse_config_text("colour = red")

    assert info.value.exit_code == 1


def test_dump_parses_back_to_an_equal_config():
    config = RunConfig(atom_count=20, graph_sigma=0.75, methods=("taaw",), top_k=(1, 2), solver_polish=False)

    assert parse_config_text(dump_run_config(config)) == config
    assert parse_config_text(dump_run_config(RunConfig())) == RunConfig()


def test_load_from_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("outer_iterations = 4\n", encoding="utf-8")

    assert load_run_config(path).outer_iterations == 4
    with pytest.raises(ConfigError, match="config file not found"):
        load_run_config(tmp_path / "missing.cfg")


def test_stage_projections():
    config = RunConfig(
        atom_count=24, sparsity=0.3, entropy_weight=0.4, neighbors=7, propagation="iterative",
        solver_max_iterations=50, predict_max_iterations=80, top_k=(3, 1), repeats=2,
    )

    training = config.training_config()
    assert training.atom_count == 24
    assert training.solver.max_iterations == 50
    assert config.solver_options().max_iterations == 80
    assert config.aaw_config().sparsity == 0.3
    assert config.aaw_config().entropy_weight == 0.4
    assert config.graph_config().neighbors == 7
    assert config.graph_config().solver == "iterative"
    assert config.experiment_config().top_k == (1, 3)
    assert config.experiment_config().repeats == 2
