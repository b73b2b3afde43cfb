"""
Run Configuration
-----------------
The flat `key = value` configuration shared by every CLI subcommand.

Features:
- Every key has a default; unknown keys, malformed lines and invalid values raise
  `ConfigError` naming the key and the line.
- `dump_run_config()` writes a text that parses back to an equal configuration.
- Projections to the per-stage configurations used by the services.

File format:
    # comment
    sparsity = 0.1
    methods = aag, aaw, taaw
"""

from pathlib import Path
from typing import Literal

from pydantic import Field, ValidationError, field_validator

from cdzsl.core.exceptions import ConfigError
from cdzsl.core.models.base import Base
from cdzsl.core.models.evaluation import ExperimentConfig, Method
from cdzsl.core.models.graph import GraphConfig
from cdzsl.core.models.prediction import AAwConfig
from cdzsl.core.models.sparse_coding import SolverOptions
from cdzsl.core.models.training import TrainingConfig
from cdzsl.core.utils.helper import format_key_values, parse_key_values


def _split_list(value: object) -> object:
    if isinstance(value, str):
        return tuple(tok.strip().lower() for tok in value.split(",") if tok.strip())
    return value


class RunConfig(Base):
    """
    Flat run configuration. See README for the meaning of every key.
    """

    model_config = {"extra": "forbid", "frozen": True}

    # Training
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
    checkpoint_every: int = Field(default=10, ge=1)

    # Sparse coding
    solver_max_iterations: int = Field(default=500, ge=1)
    solver_tolerance: float = Field(default=1e-8, ge=0.0)
    solver_acceleration: bool = True
    solver_step_rule: Literal["fixed", "backtracking"] = "fixed"
    solver_polish: bool = True
    solver_strategy: Literal["columns", "vectorized"] = "vectorized"
    predict_max_iterations: int = Field(default=2000, ge=1)
    predict_tolerance: float = Field(default=1e-10, ge=0.0)

    # Attribute-aware prediction
    entropy_weight: float = Field(default=0.1, ge=0.0)
    kernel_param: float = Field(default=1.0, gt=0.0)
    aaw_max_iterations: int = Field(default=2000, ge=1)
    aaw_tolerance: float = Field(default=1e-6, ge=0.0)
    aaw_step_rule: Literal["backtracking", "fixed"] = "backtracking"

    # Label propagation
    neighbors: int = Field(default=10, ge=1)
    graph_sigma: float | Literal["auto"] = "auto"
    fitness_weight: float = Field(default=1.0, gt=0.0)
    propagation: Literal["closed", "iterative"] = "closed"

    # Experiment
    methods: tuple[Method, ...] = ("aag", "aaw", "taaw")
    top_k: tuple[int, ...] = (1, 3, 5)
    taaw_source: Literal["aag", "aaw"] = "aaw"
    repeats: int = Field(default=1, ge=1)

    @field_validator("methods", "top_k", mode="before")
    @classmethod
    def split_lists(cls, v: object) -> object:
        return _split_list(v)

    @field_validator("graph_sigma", mode="before")
    @classmethod
    def lower_sigma(cls, v: object) -> object:
        return v.strip().lower() if isinstance(v, str) else v

    def training_config(self) -> TrainingConfig:
        return TrainingConfig(
            atom_count=self.atom_count,
            sparsity=self.sparsity,
            dict_penalty=self.dict_penalty,
            outer_iterations=self.outer_iterations,
            inner_alternations=self.inner_alternations,
            attribute_alternations=self.attribute_alternations,
            batch_size=self.batch_size,
            dict_step=self.dict_step,
            seed=self.seed,
            normalize_columns=self.normalize_columns,
            code_update=self.code_update,
            solver=SolverOptions(
                max_iterations=self.solver_max_iterations,
                tolerance=self.solver_tolerance,
                acceleration=self.solver_acceleration,
                step_rule=self.solver_step_rule,
                polish=self.solver_polish,
            ),
            solver_strategy=self.solver_strategy,
            checkpoint_every=self.checkpoint_every,
        )

    def solver_options(self) -> SolverOptions:
        """Options of the per-sample codes at prediction time."""
        return SolverOptions(
            max_iterations=self.predict_max_iterations,
            tolerance=self.predict_tolerance,
            acceleration=self.solver_acceleration,
            step_rule=self.solver_step_rule,
            polish=self.solver_polish,
        )

    def aaw_config(self) -> AAwConfig:
        return AAwConfig(
            sparsity=self.sparsity,
            entropy_weight=self.entropy_weight,
            kernel_param=self.kernel_param,
            max_iterations=self.aaw_max_iterations,
            tolerance=self.aaw_tolerance,
            step_rule=self.aaw_step_rule,
        )

    def graph_config(self) -> GraphConfig:
        return GraphConfig(
            neighbors=self.neighbors,
            sigma=self.graph_sigma,
            fitness_weight=self.fitness_weight,
            solver=self.propagation,
        )

    def experiment_config(self) -> ExperimentConfig:
        return ExperimentConfig(
            methods=self.methods, top_k=self.top_k, taaw_source=self.taaw_source, repeats=self.repeats
        )


def parse_config_text(text: str, source: str = "<config>") -> RunConfig:
    """
    Parses `key = value` lines into a RunConfig.

    Args:
        text (str): Configuration text; `#` starts a comment, blank lines are ignored.
        source (str): Name used in error messages.

    Returns:
        RunConfig: The validated configuration.

    Raises:
        ConfigError: On malformed lines, duplicate or unknown keys and invalid values.
    """
    pairs = parse_key_values(text, source, ConfigError)
    for key, (_, number) in pairs.items():
        if key not in RunConfig.model_fields:
            raise ConfigError(f"{source}:{number}: unknown key '{key}'")

    try:
        return RunConfig.model_validate({key: value for key, (value, _) in pairs.items()})
    except ValidationError as exc:
        error = exc.errors()[0]
        key = str(error["loc"][0]) if error["loc"] else "?"
        where = f"{source}:{pairs[key][1]}" if key in pairs else source
        raise ConfigError(f"{where}: invalid value for '{key}': {error['msg']}") from exc


def load_run_config(path: str | Path | None) -> RunConfig:
    """
    Loads a configuration file; `None` yields the defaults.

    Raises:
        ConfigError: If the file is missing or invalid.
    """
    if path is None:
        return RunConfig()
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_config_text(path.read_text(encoding="utf-8"), source=str(path))


def dump_run_config(config: RunConfig) -> str:
    """
    Renders every key of a configuration, one `key = value` line each.
    """
    return format_key_values({name: getattr(config, name) for name in RunConfig.model_fields})
