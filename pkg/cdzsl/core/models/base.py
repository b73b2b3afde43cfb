"""
Base Model
----------
This module defines the global base model and the array field types shared by all domain models.

Features:
- `Base`: pydantic model allowing numpy arrays as fields.
- `DenseMatrix`: 2-D finite float64 array (column-major collections are stored as columns).
- `Vector`: 1-D finite float64 array.
"""

from typing import Annotated, Any

import numpy as np
from pydantic import BaseModel, BeforeValidator


def as_dense_matrix(value: Any) -> np.ndarray:
    """
    Coerces a value into a finite 2-D float64 array.

    Args:
        value (Any): Array-like input.

    Returns:
        np.ndarray: The coerced matrix.

    Raises:
        ValueError: If the value is not 2-D or contains NaN/Inf.
    """
    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got {arr.ndim}-D")
    if not np.all(np.isfinite(arr)):
        raise ValueError("matrix contains non-finite values")
    return arr


def as_vector(value: Any) -> np.ndarray:
    """
    Coerces a value into a finite 1-D float64 array.

    Args:
        value (Any): Array-like input.

    Returns:
        np.ndarray: The coerced vector.

    Raises:
        ValueError: If the value is not 1-D or contains NaN/Inf.
    """
    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"expected a vector, got {arr.ndim}-D")
    if not np.all(np.isfinite(arr)):
        raise ValueError("vector contains non-finite values")
    return arr


DenseMatrix = Annotated[np.ndarray, BeforeValidator(as_dense_matrix)]
Vector = Annotated[np.ndarray, BeforeValidator(as_vector)]


class Base(BaseModel):
    """
    Global base model for all domain models.

    Allows numpy arrays as field types; array fields are validated by the
    `DenseMatrix` / `Vector` annotations.
    """

    model_config = {"arbitrary_types_allowed": True}
