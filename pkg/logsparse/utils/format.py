import json
from typing import Any
from pathlib import Path
from collections.abc import Sequence

import numpy as np

from .types import PathLike

__all__ = ["format_number", "write_matrix_csv", "write_vector_csv", "write_table_csv", "write_json", "to_jsonable"]

DIGITS = 12


def format_number(value: Any) -> str:
    """Formats a scalar with 12 significant digits. Integers and booleans are written as-is."""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    value = float(value)
    if value == 0.0:
        return "0"
    return f"{value:.{DIGITS}g}"


def write_matrix_csv(file: PathLike, matrix: Any) -> Path:
    mat = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    path = Path(file)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"{mat.shape[0]},{mat.shape[1]}"]
    lines.extend(",".join(format_number(v) for v in row) for row in mat)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def write_vector_csv(file: PathLike, vector: Any) -> Path:
    """Writes a column vector with an `n,1` header."""
    return write_matrix_csv(file, np.asarray(vector, dtype=np.float64).reshape(-1, 1))


def write_table_csv(file: PathLike, columns: Sequence[str], rows: Sequence[Sequence[Any]]) -> Path:
    path = Path(file)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(columns)]
    lines.extend(",".join(format_number(v) for v in row) for row in rows)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def to_jsonable(value: Any) -> Any:
    """Converts numpy containers and scalars to plain json values. Floats are rounded to 12 significant digits."""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if not np.isfinite(value):
            return None if np.isnan(value) else ("inf" if value > 0 else "-inf")
        return float(format_number(value))
    if isinstance(value, Path):
        return str(value)
    return value


def write_json(file: PathLike, data: Any) -> Path:
    path = Path(file)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(to_jsonable(data), indent=2) + "\n", encoding="utf-8")
    return path
