from pathlib import Path

import click

from cdzsl.core.cli.context import CliState, check_converged, pass_state
from cdzsl.core.config.run_config import load_run_config, parse_config_text
from cdzsl.core.exceptions import DimensionMismatch
from cdzsl.core.repositories.checkpoint_repository import CheckpointRepository
from cdzsl.core.repositories.matrix_repository import MatrixRepository
from cdzsl.core.services.prediction_service import predict_attributes
from cdzsl.core.utils.helper import unit_columns


@click.command()
@click.argument("checkpoint", type=click.Path(path_type=Path))
@click.argument("features", type=click.Path(path_type=Path))
@click.option("--method", type=click.Choice(["aag", "aaw"]), default="aaw", show_default=True)
@click.option("--prototypes", type=click.Path(path_type=Path), default=None, help="Unseen prototypes Z' (needed by aaw).")
@click.option("--config", "config_path", type=click.Path(path_type=Path), default=None,
              help="Run configuration; defaults to the checkpoint's own configuration.")
@click.option("--out", "out_path", type=click.Path(path_type=Path), required=True, help="Predicted attribute matrix.")
@click.option("--codes", "codes_path", type=click.Path(path_type=Path), default=None, help="Also write the sparse codes.")
@pass_state
def predict(
    state: CliState,
    checkpoint: Path,
    features: Path,
    method: str,
    prototypes: Path | None,
    config_path: Path | None,
    out_path: Path,
    codes_path: Path | None,
):
    """
    Predict the attributes of every feature column with a trained checkpoint.
    """
    if method == "aaw" and prototypes is None:
        raise click.UsageError("--prototypes is required with --method aaw")
    model, meta, config_text = CheckpointRepository.load_checkpoint(checkpoint)
    if config_path is None and config_text is not None:
        config = parse_config_text(config_text, source=str(checkpoint / "config.cfg"))
    else:
        config = load_run_config(config_path)

    X = MatrixRepository.read_matrix(features)
    if meta.normalize_features:
        X = unit_columns(X)
    if prototypes is not None:
        Zprime = MatrixRepository.read_matrix(prototypes)
        if Zprime.shape[0] != model.dictionary.attribute_dim:
            raise DimensionMismatch(
                f"{prototypes}: {Zprime.shape[0]} rows, checkpoint has q = {model.dictionary.attribute_dim}"
            )
        if meta.normalize_attributes:
            Zprime = unit_columns(Zprime)
    else:
        Zprime = model.dictionary.d_z[:, :0]

    click.secho(f"🔍 Predicting attributes of {X.shape[1]} samples ({method})...", fg="cyan")
    batch = predict_attributes(
        model.dictionary, X, Zprime, method, config.aaw_config(), config.solver_options()
    )
    check_converged(state, int((~batch.converged).sum()), X.shape[1], "predictions")
    MatrixRepository.write_matrix(out_path, batch.attributes)
    if codes_path is not None:
        MatrixRepository.write_matrix(codes_path, batch.codes)
    click.secho(f"✅ Predicted attributes written to {out_path}", fg="green")
