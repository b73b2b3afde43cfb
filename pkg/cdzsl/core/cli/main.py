import click

from cdzsl.core.cli.commands.classify import classify
from cdzsl.core.cli.commands.evaluate import evaluate
from cdzsl.core.cli.commands.pac_bound import pac_bound
from cdzsl.core.cli.commands.predict import predict
from cdzsl.core.cli.commands.synth_gen import synth_gen
from cdzsl.core.cli.commands.train import train
from cdzsl.core.cli.commands.tune import tune
from cdzsl.core.cli.context import CdzslGroup, CliState
from cdzsl.core.config.settings import settings
from cdzsl.core.utils.logger import set_log_level


@click.group(cls=CdzslGroup)
@click.option(
    "--log-level",
    type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"], case_sensitive=False),
    default=None,
    help="Override CDZSL_LOG_LEVEL for this run.",
)
@click.option(
    "--fatal-nonconvergence/--no-fatal-nonconvergence",
    default=None,
    help="Exit with code 3 when a solver does not converge.",
)
@click.pass_context
def main(ctx: click.Context, log_level: str | None, fatal_nonconvergence: bool | None):
    """Zero-shot classification with coupled dictionaries."""
    if log_level:
        set_log_level(log_level)
    fatal = settings.FATAL_NONCONVERGENCE if fatal_nonconvergence is None else fatal_nonconvergence
    ctx.obj = CliState(fatal_nonconvergence=fatal)


main.add_command(train, "train")  # Learn dictionaries -> checkpoint
main.add_command(predict, "predict")  # Features -> predicted attributes
main.add_command(classify, "classify")  # Predicted attributes -> labels
main.add_command(evaluate, "evaluate")  # Full experiment -> report files
main.add_command(synth_gen, "synth-gen")  # Planted problem -> manifest directory
main.add_command(pac_bound, "pac-bound")  # Sample-complexity calculator
main.add_command(tune, "tune")  # Cross-validated grid search


def cli(argv: list[str] | None = None) -> int:
    """Runs the CLI on `argv` and returns the exit code instead of exiting."""
    return main.main(args=argv, prog_name="cdzsl", standalone_mode=False)


if __name__ == "__main__":
    main(prog_name="cdzsl")
