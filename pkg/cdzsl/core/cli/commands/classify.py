from pathlib import Path

import click
import numpy as np

from cdzsl.core.config.run_config import load_run_config
from cdzsl.core.exceptions import DimensionMismatch
from cdzsl.core.repositories.matrix_repository import MatrixRepository
from cdzsl.core.services.label_service import nn_assign, taaw_classify
from cdzsl.core.utils.helper import unit_columns


@click.command()
@click.argument("predicted", type=click.Path(path_type=Path))
@click.argument("prototypes", type=click.Path(path_type=Path))
@click.option("--method", type=click.Choice(["nn", "taaw"]), default="taaw", show_default=True)
@click.option("--config", "config_path", type=click.Path(path_type=Path), default=None, help="Run configuration file.")
@click.option("--class-ids", type=click.Path(path_type=Path), default=None,
              help="1 x M class ids of the prototype columns; labels are prototype indices without it.")
@click.option("--normalize-prototypes", is_flag=True, help="Unit-normalize the prototype columns first.")
@click.option("--out", "out_path", type=click.Path(path_type=Path), required=True, help="1 x L label matrix.")
def classify(
    predicted: Path,
    prototypes: Path,
    method: str,
    config_path: Path | None,
    class_ids: Path | None,
    normalize_prototypes: bool,
    out_path: Path,
):
    """
    Label predicted attribute columns by nearest prototype (nn) or graph propagation (taaw).
    """
    config = load_run_config(config_path)
    Z_hat = MatrixRepository.read_matrix(predicted)
    Zprime = MatrixRepository.read_matrix(prototypes)
    if normalize_prototypes:
        Zprime = unit_columns(Zprime)
    if Z_hat.shape[0] != Zprime.shape[0]:
        raise DimensionMismatch(f"{predicted} has {Z_hat.shape[0]} rows, {prototypes} has {Zprime.shape[0]}")

    if method == "nn":
        labels = np.array([nn_assign(Z_hat[:, j], Zprime) for j in range(Z_hat.shape[1])], dtype=np.int64)
    else:
        labels = taaw_classify(Z_hat, Zprime, config.graph_config())

    if class_ids is not None:
        ids = MatrixRepository.read_matrix(class_ids).ravel()
        if ids.size != Zprime.shape[1]:
            raise DimensionMismatch(f"{class_ids} holds {ids.size} ids for {Zprime.shape[1]} prototypes")
        labels = ids[labels]
    MatrixRepository.write_matrix(out_path, np.asarray(labels, dtype=np.float64)[None, :])
    click.secho(f"✅ {labels.size} labels written to {out_path}", fg="green")
