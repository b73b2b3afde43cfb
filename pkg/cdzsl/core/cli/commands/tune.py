from pathlib import Path

import click

from cdzsl.core.config.run_config import dump_run_config, load_run_config
from cdzsl.core.exceptions import ConfigError
from cdzsl.core.repositories.manifest_repository import ManifestRepository
from cdzsl.core.services.tuning_service import tune_parameters
from cdzsl.core.utils.helper import format_key_values, parse_key_values


def load_grid(path: Path) -> dict[str, list[str]]:
    """Reads `key = v1, v2, ...` lines into candidate values per run configuration key."""
    if not path.is_file():
        raise ConfigError(f"grid file not found: {path}")
    pairs = parse_key_values(path.read_text(encoding="utf-8"), str(path), ConfigError)
    grid = {}
    for key, (value, number) in pairs.items():
        values = [tok.strip() for tok in value.split(",") if tok.strip()]
        if not values:
            raise ConfigError(f"{path}:{number}: no values for '{key}'")
        grid[key] = values
    return grid


@click.command()
@click.argument("manifest", type=click.Path(path_type=Path))
@click.option("--grid", "grid_path", type=click.Path(path_type=Path), required=True,
              help="Grid file: one `key = v1, v2, ...` line per tuned key.")
@click.option("--folds", type=int, default=5, show_default=True, help="Class-disjoint folds.")
@click.option("--method", type=click.Choice(["aag", "aaw", "taaw"]), default="taaw", show_default=True)
@click.option("--config", "config_path", type=click.Path(path_type=Path), default=None,
              help="Base run configuration.")
@click.option("--out", "out_dir", type=click.Path(path_type=Path), default=Path("tuning"), show_default=True)
def tune(manifest: Path, grid_path: Path, folds: int, method: str, config_path: Path | None, out_dir: Path):
    """
    Cross-validated grid search over run configuration keys on the seen classes.

    Writes `scores.txt` (one section per grid point) and `best.cfg`.
    """
    base = load_run_config(config_path)
    grid = load_grid(grid_path)
    dataset = ManifestRepository.load_dataset(ManifestRepository.load_manifest(manifest))

    total = 1
    for values in grid.values():
        total *= len(values)
    click.secho(f"🔍 Scoring {total} grid points on {folds} folds ({method})...", fg="cyan")
    result = tune_parameters(dataset, grid, folds, method, base)  # type: ignore[arg-type]

    out_dir.mkdir(parents=True, exist_ok=True)
    sections = []
    for index, point in enumerate(result.points):
        values: dict[str, object] = dict(point.params)
        values["mean_hit@1"] = round(point.mean_score, 6)
        values["fold_hit@1"] = tuple(round(score, 6) for score in point.fold_scores)
        sections.append(f"[point_{index}]\n" + format_key_values(values))
    (out_dir / "scores.txt").write_text("\n".join(sections), encoding="utf-8")
    (out_dir / "best.cfg").write_text(dump_run_config(result.best_config), encoding="utf-8")

    best = ", ".join(f"{key} = {value}" for key, value in result.best.params.items())
    click.secho(f"✅ Best: {best} (mean hit@1 {result.best.mean_score:.2f})", fg="green")
