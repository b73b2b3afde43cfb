"""
Matrix Repository
-----------------
Reads and writes dense matrices.

Formats:
- `.cdzm` container: 15-byte little-endian header (magic `CDZM`, version u16, rows u32,
  cols u32, dtype tag u8 with 0 = float64) followed by the row-major float64 payload.
- `.csv`: header line `rows,cols` then one comma-separated line per row.

The format is chosen from the file extension; anything that is not `.csv` is a container.

Methods:
- `read_matrix()`: Load a matrix, validating header, payload size and finiteness.
- `write_matrix()`: Store a matrix; round trips are bit-exact in both formats.
"""

import struct
from pathlib import Path

import numpy as np

from cdzsl.core.exceptions import (
    BadMagic,
    DataError,
    DimensionOverflow,
    MatrixFormatError,
    NonFiniteValue,
    TrailingPayload,
    TruncatedPayload,
    UnsupportedFormat,
)
from cdzsl.core.utils.logger import logger

MAGIC = b"CDZM"
VERSION = 1
DTYPE_FLOAT64 = 0
HEADER = struct.Struct("<4sHIIB")
MAX_DIM = 2**32 - 1
MAX_ELEMENTS = 2**34


def _check_finite(matrix: np.ndarray, path: Path) -> None:
    bad = np.argwhere(~np.isfinite(matrix))
    if bad.size:
        row, col = (int(i) for i in bad[0])
        raise NonFiniteValue(f"{path}: non-finite value at row {row}, col {col}", row=row, col=col)


class MatrixRepository:
    """File access for dense float64 matrices."""

    @staticmethod
    def read_matrix(path: str | Path) -> np.ndarray:
        """
        Load a matrix from a container or CSV file.

        Args:
            path (str | Path): File to read.

        Returns:
            np.ndarray: The matrix (float64, C-ordered).

        Raises:
            DataError: If the file does not exist.
            BadMagic, UnsupportedFormat, TruncatedPayload, TrailingPayload,
            DimensionOverflow, NonFiniteValue: On malformed content.
        """
        path = Path(path)
        if not path.is_file():
            raise DataError(f"matrix file not found: {path}")
        if path.suffix.lower() == ".csv":
            matrix = MatrixRepository._read_csv(path)
        else:
            matrix = MatrixRepository._read_container(path)
        logger.debug("matrix read", extra={"path": str(path), "shape": list(matrix.shape)})
        return matrix

    @staticmethod
    def write_matrix(path: str | Path, matrix: np.ndarray) -> Path:
        """
        Store a matrix; the parent directory is created when missing.

        Args:
            path (str | Path): Target file (`.csv` selects CSV, otherwise the container).
            matrix (np.ndarray): 2-D finite matrix.

        Returns:
            Path: The written path.

        Raises:
            DimensionOverflow: If a dimension does not fit in u32 or the matrix is not 2-D.
            NonFiniteValue: If the matrix contains NaN or infinity.
        """
        path = Path(path)
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.ndim != 2:
            raise DimensionOverflow(f"{path}: expected a 2-D matrix, got {matrix.ndim}-D")
        rows, cols = matrix.shape
        if rows > MAX_DIM or cols > MAX_DIM:
            raise DimensionOverflow(f"{path}: shape {matrix.shape} does not fit the header")
        _check_finite(matrix, path)
        path.parent.mkdir(parents=True, exist_ok=True)

        if path.suffix.lower() == ".csv":
            with path.open("w", encoding="utf-8", newline="\n") as fh:
                fh.write(f"{rows},{cols}\n")
                if matrix.size:
                    np.savetxt(fh, matrix, fmt="%.17g", delimiter=",")
        else:
            payload = np.ascontiguousarray(matrix, dtype="<f8").tobytes()
            path.write_bytes(HEADER.pack(MAGIC, VERSION, rows, cols, DTYPE_FLOAT64) + payload)
        logger.debug("matrix written", extra={"path": str(path), "shape": [rows, cols]})
        return path

    @staticmethod
    def _read_container(path: Path) -> np.ndarray:
        raw = path.read_bytes()
        if len(raw) < HEADER.size:
            if not MAGIC.startswith(raw[:4]):
                raise BadMagic(f"{path}: not a CDZM container")
            raise TruncatedPayload(f"{path}: header is {len(raw)} bytes, expected {HEADER.size}")
        magic, version, rows, cols, dtype = HEADER.unpack_from(raw)
        if magic != MAGIC:
            raise BadMagic(f"{path}: magic {magic!r} is not {MAGIC!r}")
        if version != VERSION:
            raise UnsupportedFormat(f"{path}: container version {version} is not supported")
        if dtype != DTYPE_FLOAT64:
            raise UnsupportedFormat(f"{path}: dtype tag {dtype} is not supported")
        if rows * cols > MAX_ELEMENTS:
            raise DimensionOverflow(f"{path}: {rows} x {cols} exceeds the element limit")

        expected = rows * cols * 8
        payload = raw[HEADER.size:]
        if len(payload) < expected:
            raise TruncatedPayload(f"{path}: payload is {len(payload)} bytes, expected {expected}")
        if len(payload) > expected:
            raise TrailingPayload(f"{path}: payload is {len(payload)} bytes, expected {expected}")

        matrix = np.frombuffer(payload, dtype="<f8").astype(np.float64).reshape(rows, cols)
        _check_finite(matrix, path)
        return matrix

    @staticmethod
    def _read_csv(path: Path) -> np.ndarray:
        lines = path.read_text(encoding="utf-8").splitlines()
        if not lines:
            raise TruncatedPayload(f"{path}: empty CSV file")
        try:
            rows, cols = (int(tok) for tok in lines[0].split(","))
        except ValueError as exc:
            raise MatrixFormatError(f"{path}: header must be 'rows,cols', got {lines[0]!r}") from exc
        if rows * cols > MAX_ELEMENTS:
            raise DimensionOverflow(f"{path}: {rows} x {cols} exceeds the element limit")

        body = [line for line in lines[1:] if line.strip()]
        if len(body) < rows:
            raise TruncatedPayload(f"{path}: {len(body)} data rows, header declares {rows}")
        if len(body) > rows:
            raise TrailingPayload(f"{path}: {len(body)} data rows, header declares {rows}")
        if rows == 0 or cols == 0:
            return np.zeros((rows, cols))

        try:
            matrix = np.loadtxt(body, delimiter=",", dtype=np.float64, ndmin=2)
        except ValueError as exc:
            raise MatrixFormatError(f"{path}: {exc}") from exc
        if matrix.shape != (rows, cols):
            raise MatrixFormatError(f"{path}: data is {matrix.shape}, header declares {(rows, cols)}")
        _check_finite(matrix, path)
        return matrix
