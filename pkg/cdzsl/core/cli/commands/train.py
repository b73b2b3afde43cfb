from pathlib import Path

import click

from cdzsl.core.config.run_config import dump_run_config, load_run_config
from cdzsl.core.repositories.checkpoint_repository import CheckpointMeta, CheckpointRepository
from cdzsl.core.repositories.manifest_repository import ManifestRepository
from cdzsl.core.services.dictionary_service import train_coupled


@click.command()
@click.argument("manifest", type=click.Path(path_type=Path))
@click.option("--config", "config_path", type=click.Path(path_type=Path), default=None, help="Run configuration file.")
@click.option("--out", "out_dir", type=click.Path(path_type=Path), required=True, help="Checkpoint directory.")
def train(manifest: Path, config_path: Path | None, out_dir: Path):
    """
    Learn the coupled dictionaries of a dataset and write a checkpoint.

    Intermediate checkpoints are written into the same directory every
    `checkpoint_every` outer iterations.
    """
    config = load_run_config(config_path)
    config_text = dump_run_config(config)
    dataset_manifest = ManifestRepository.load_manifest(manifest)
    dataset = ManifestRepository.load_dataset(dataset_manifest)
    meta = CheckpointMeta(
        normalize_features=dataset_manifest.normalize_features,
        normalize_attributes=dataset_manifest.normalize_attributes,
    )

    click.secho(
        f"🔍 Training {config.atom_count} atoms on {dataset.training.n_seen} seen samples...", fg="cyan"
    )
    result = train_coupled(
        dataset.training, config.training_config(), checkpoint_dir=out_dir, config_text=config_text, meta=meta
    )
    CheckpointRepository.save_checkpoint(out_dir, result, config_text=config_text, meta=meta)
    final = f"{result.trace.entries[-1].total:.6g}" if len(result.trace) else "n/a"
    click.secho(f"✅ Checkpoint written to {out_dir} (final objective {final})", fg="green")
