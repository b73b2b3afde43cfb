from pathlib import Path

import click

from cdzsl.core.cli.context import CliState, check_converged, pass_state
from cdzsl.core.config.run_config import load_run_config
from cdzsl.core.repositories.report_repository import ReportRepository
from cdzsl.core.services.evaluation_service import run_experiment


@click.command()
@click.argument("manifest", type=click.Path(path_type=Path))
@click.option("--checkpoint", type=click.Path(path_type=Path), default=None, help="Reuse a trained checkpoint.")
@click.option("--config", "config_path", type=click.Path(path_type=Path), default=None, help="Run configuration file.")
@click.option("--method", "methods", type=click.Choice(["aag", "aaw", "taaw"]), multiple=True,
              help="Methods to score (repeatable); overrides `methods` of the configuration.")
@click.option("--out", "out_dir", type=click.Path(path_type=Path), default=Path("report"), show_default=True,
              help="Report directory.")
@pass_state
def evaluate(
    state: CliState,
    manifest: Path,
    checkpoint: Path | None,
    config_path: Path | None,
    methods: tuple[str, ...],
    out_dir: Path,
):
    """
    Run the zero-shot pipeline on a dataset and write hit@K reports.
    """
    config = load_run_config(config_path)
    if methods:
        config = config.model_copy(update={"methods": tuple(dict.fromkeys(methods))})

    click.secho(f"🔍 Evaluating {', '.join(config.methods)} on {manifest}...", fg="cyan")
    report = run_experiment(manifest, config, checkpoint=checkpoint)
    for name, scores in report.methods.items():
        check_converged(state, scores.unconverged, report.n_test * len(report.seeds), f"{name} predictions")
    ReportRepository.write_report(out_dir, report)
    click.echo(ReportRepository.render_table(report), nl=False)
    click.secho(f"✅ Report written to {out_dir}", fg="green")
