"""
Checkpoint Repository
---------------------
Persists trained models as a directory of matrix containers.

Layout:
- `dx.cdzm`, `dz.cdzm`: the coupled dictionaries.
- `codes_seen.cdzm`, `codes_unseen.cdzm`: codes A and B.
- `trace.cdzm`: one row per outer iteration (see `TRACE_COLUMNS`).
- `config.cfg`: run configuration echo (optional).
- `meta.cfg`: iteration count and preprocessing flags.

Methods:
- `save_checkpoint()`: Write a training result.
- `load_checkpoint()`: Read a training result back.
"""

from pathlib import Path

from pydantic import ValidationError

from cdzsl.core.exceptions import DataError, ManifestError
from cdzsl.core.models.base import Base
from cdzsl.core.models.training import CoupledDictionary, TrainingResult, TrainingTrace
from cdzsl.core.repositories.matrix_repository import MatrixRepository
from cdzsl.core.utils.helper import format_key_values, parse_key_values
from cdzsl.core.utils.logger import logger

MATRIX_FILES = ("dx", "dz", "codes_seen", "codes_unseen", "trace")


class CheckpointMeta(Base):
    """Contents of `meta.cfg`."""

    iteration: int = 0
    normalize_features: bool = False
    normalize_attributes: bool = False


class CheckpointRepository:
    """File access for trained coupled dictionaries."""

    @staticmethod
    def save_checkpoint(
        directory: str | Path,
        result: TrainingResult,
        *,
        iteration: int | None = None,
        config_text: str | None = None,
        meta: CheckpointMeta | None = None,
    ) -> Path:
        """
        Write a training result into `directory` (created when missing).

        Args:
            directory (str | Path): Checkpoint directory.
            result (TrainingResult): Dictionaries, codes and trace.
            iteration (int | None): Outer iteration reached; defaults to the trace length.
            config_text (str | None): Run configuration echo for `config.cfg`.
            meta (CheckpointMeta | None): Preprocessing flags to record.

        Returns:
            Path: The checkpoint directory.
        """
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        matrices = {
            "dx": result.dictionary.d_x,
            "dz": result.dictionary.d_z,
            "codes_seen": result.codes_seen,
            "codes_unseen": result.codes_unseen,
            "trace": result.trace.to_matrix(),
        }
        for name, matrix in matrices.items():
            MatrixRepository.write_matrix(directory / f"{name}.cdzm", matrix)

        meta = (meta or CheckpointMeta()).model_copy(
            update={"iteration": len(result.trace) if iteration is None else iteration}
        )
        (directory / "meta.cfg").write_text(format_key_values(meta.model_dump()), encoding="utf-8")
        if config_text is not None:
            (directory / "config.cfg").write_text(config_text, encoding="utf-8")
        logger.info("checkpoint saved", extra={"path": str(directory), "iteration": meta.iteration})
        return directory

    @staticmethod
    def load_checkpoint(directory: str | Path) -> tuple[TrainingResult, CheckpointMeta, str | None]:
        """
        Read a checkpoint directory.

        Args:
            directory (str | Path): Checkpoint directory.

        Returns:
            tuple: (training result, metadata, configuration echo or None).

        Raises:
            DataError: If the directory or one of its matrices is missing or malformed.
            ManifestError: If `meta.cfg` is invalid.
        """
        directory = Path(directory)
        if not directory.is_dir():
            raise DataError(f"checkpoint directory not found: {directory}")
        m = {name: MatrixRepository.read_matrix(directory / f"{name}.cdzm") for name in MATRIX_FILES}

        meta_path = directory / "meta.cfg"
        meta = CheckpointMeta()
        if meta_path.is_file():
            pairs = parse_key_values(meta_path.read_text(encoding="utf-8"), str(meta_path), ManifestError)
            try:
                meta = CheckpointMeta.model_validate({k: v for k, (v, _) in pairs.items()})
            except ValidationError as exc:
                raise ManifestError(f"{meta_path}: {exc.errors()[0]['msg']}") from exc
        config_path = directory / "config.cfg"
        config_text = config_path.read_text(encoding="utf-8") if config_path.is_file() else None

        try:
            result = TrainingResult(
                dictionary=CoupledDictionary(d_x=m["dx"], d_z=m["dz"]),
                codes_seen=m["codes_seen"],
                codes_unseen=m["codes_unseen"],
                trace=TrainingTrace.from_matrix(m["trace"]),
            )
        except ValidationError as exc:
            raise DataError(f"{directory}: invalid checkpoint: {exc.errors()[0]['msg']}") from exc
        if result.codes_seen.shape[0] != result.dictionary.atom_count or (
            result.codes_unseen.shape[0] != result.dictionary.atom_count
        ):
            raise DataError(f"{directory}: code rows do not match the atom count")
        logger.info("checkpoint loaded", extra={"path": str(directory), "iteration": meta.iteration})
        return result, meta, config_text
