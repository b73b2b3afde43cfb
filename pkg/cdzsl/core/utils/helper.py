"""
Numerical Helpers
-----------------
Small utilities shared by the services.

Functions:
- `unit_columns()`: Rescale every nonzero column to unit l2 norm.
- `project_columns()`: Project every column onto the unit l2 ball.
- `derive_seeds()`: Deterministic child seeds from one integer seed.
- `stage_timer()`: Context manager recording the wall-clock time of a named stage.
- `parse_key_values()` / `format_key_values()`: Flat `key = value` text used by configs, manifests and reports.
"""

import time
from collections.abc import Iterator
from contextlib import contextmanager

import numpy as np

from cdzsl.core.utils.logger import logger


def unit_columns(matrix: np.ndarray) -> np.ndarray:
    """
    Rescales every nonzero column to unit l2 norm; zero columns stay zero.

    Args:
        matrix (np.ndarray): Input matrix.

    Returns:
        np.ndarray: A new matrix with normalized columns.
    """
    norms = np.linalg.norm(matrix, axis=0)
    return matrix / np.where(norms > 0.0, norms, 1.0)


def project_columns(matrix: np.ndarray) -> np.ndarray:
    """
    Projects every column onto the unit l2 ball (columns with norm <= 1 are unchanged).

    Args:
        matrix (np.ndarray): Input matrix.

    Returns:
        np.ndarray: A new matrix whose columns have norm <= 1.
    """
    norms = np.linalg.norm(matrix, axis=0)
    return matrix / np.maximum(norms, 1.0)


def derive_seeds(seed: int, count: int) -> list[int]:
    """
    Derives `count` independent child seeds from one integer seed.

    Args:
        seed (int): Root seed.
        count (int): Number of child seeds.

    Returns:
        list[int]: Child seeds, a deterministic function of `seed`.
    """
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(count)]


@contextmanager
def stage_timer(timings: dict[str, float], stage: str) -> Iterator[None]:
    """
    Records the wall-clock duration of a stage into `timings[stage]` (accumulating).

    Args:
        timings (dict[str, float]): Target mapping.
        stage (str): Stage name.
    """
    start = time.perf_counter()
    logger.info("stage started", extra={"stage": stage})
    try:
        yield
    finally:
        elapsed = time.perf_counter() - start
        timings[stage] = timings.get(stage, 0.0) + elapsed
        logger.info("stage finished", extra={"stage": stage, "seconds": round(elapsed, 4)})


def parse_key_values(text: str, source: str, error: type[Exception]) -> dict[str, tuple[str, int]]:
    """
    Parses flat `key = value` text; `#` starts a comment and blank lines are skipped.

    Args:
        text (str): Input text.
        source (str): Name used in error messages.
        error (type[Exception]): Exception raised on malformed or duplicate lines.

    Returns:
        dict[str, tuple[str, int]]: value and line number per key, in file order.
    """
    pairs: dict[str, tuple[str, int]] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise error(f"{source}:{number}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise error(f"{source}:{number}: missing key")
        if key in pairs:
            raise error(f"{source}:{number}: duplicate key '{key}' (first on line {pairs[key][1]})")
        pairs[key] = (value, number)
    return pairs


def format_key_values(values: dict[str, object]) -> str:
    """Renders `key = value` lines; booleans as true/false, floats with repr."""
    lines = []
    for key, value in values.items():
        if isinstance(value, bool):
            text = "true" if value else "false"
        elif isinstance(value, float):
            text = repr(value)
        elif isinstance(value, tuple | list):
            text = ", ".join(str(v) for v in value)
        else:
            text = str(value)
        lines.append(f"{key} = {text}\n")
    return "".join(lines)
