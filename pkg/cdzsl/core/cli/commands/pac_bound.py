import click
from pydantic import ValidationError

from cdzsl.core.models.evaluation import PacQuery
from cdzsl.core.services.evaluation_service import pac_sample_bound


@click.command()
@click.option("--delta", type=float, required=True, help="Failure probability, in (0, 1).")
@click.option("--epsilon", type=float, required=True, help="Target excess error.")
@click.option("--feature-dim", "-p", type=int, required=True, help="Feature dimension p.")
@click.option("--atom-count", "-r", type=int, required=True, help="Dictionary size r.")
@click.option("--loss-constant", "-L", type=float, required=True, help="Constant L of the loss.")
def pac_bound(delta: float, epsilon: float, feature_dim: int, atom_count: int, loss_constant: float):
    """
    Smallest training sample count meeting the dictionary-learning error bound.
    """
    try:
        query = PacQuery(
            delta=delta,
            target_error=epsilon,
            feature_dim=feature_dim,
            atom_count=atom_count,
            loss_constant=loss_constant,
        )
    except ValidationError as exc:
        error = exc.errors()[0]
        field = str(error["loc"][0]) if error["loc"] else "query"
        hint = "--epsilon" if field == "target_error" else "--" + field.replace("_", "-")
        raise click.BadParameter(error["msg"], param_hint=hint) from exc
    click.echo(f"M = {pac_sample_bound(query)}")
