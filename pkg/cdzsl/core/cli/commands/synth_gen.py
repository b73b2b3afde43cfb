from pathlib import Path

import click
from pydantic import ValidationError

from cdzsl.core.exceptions import ConfigError
from cdzsl.core.models.dataset import SynthConfig
from cdzsl.core.services.synthetic_service import MANIFEST_NAME, generate_synthetic
from cdzsl.core.utils.helper import parse_key_values


def load_synth_config(path: Path | None, seed: int | None) -> SynthConfig:
    """
    Reads a `key = value` synthetic problem description; missing keys keep their defaults.

    Raises:
        ConfigError: On unknown keys or invalid values.
    """
    pairs: dict[str, tuple[str, int]] = {}
    if path is not None:
        if not path.is_file():
            raise ConfigError(f"synth config file not found: {path}")
        pairs = parse_key_values(path.read_text(encoding="utf-8"), str(path), ConfigError)
    for key, (_, number) in pairs.items():
        if key not in SynthConfig.model_fields:
            raise ConfigError(f"{path}:{number}: unknown key '{key}'")
    values: dict[str, object] = {key: value for key, (value, _) in pairs.items()}
    if seed is not None:
        values["seed"] = seed
    try:
        return SynthConfig.model_validate(values)
    except ValidationError as exc:
        error = exc.errors()[0]
        key = str(error["loc"][0]) if error["loc"] else "?"
        where = f"{path}:{pairs[key][1]}" if key in pairs else str(path or "<synth>")
        raise ConfigError(f"{where}: invalid value for '{key}': {error['msg']}") from exc


@click.command()
@click.argument("out_dir", type=click.Path(path_type=Path))
@click.option("--config", "config_path", type=click.Path(path_type=Path), default=None,
              help="Synthetic problem description (key = value).")
@click.option("--seed", type=int, default=None, help="Override the generator seed.")
def synth_gen(out_dir: Path, config_path: Path | None, seed: int | None):
    """
    Generate a planted zero-shot problem and its manifest.
    """
    config = load_synth_config(config_path, seed)
    generate_synthetic(config, out_dir)
    click.secho(f"✅ Synthetic problem written to {out_dir / MANIFEST_NAME}", fg="green")
