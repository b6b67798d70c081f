from enum import IntEnum
from pathlib import Path
from typing import Any, Union

import numpy as np
import numpy.typing as npt

from .errors import DimensionMismatch, InvalidParams

__all__ = [
    "PathLike",
    "Vector",
    "DenseMatrix",
    "Point",
    "IndexSet",
    "WeightKind",
    "NscKind",
    "SolveMode",
    "as_vector",
    "as_matrix",
    "as_points",
]

PathLike = Union[Path, str, None]

Vector = npt.NDArray[np.float64]
DenseMatrix = npt.NDArray[np.float64]

# (x, y) in meters
Point = tuple[float, float]

IndexSet = tuple[int, ...]


class WeightKind(IntEnum):
    """Which diagonal a WeightDiagonal holds."""

    H = 1
    """The quadratic weight q / (|x|^(2-q) (p + |x|^q))."""
    F = 2
    """The reciprocal of H on the support, zero elsewhere."""


class NscKind(IntEnum):
    H_PQ = 1
    L1 = 2


class SolveMode(IntEnum):
    EQUALITY = 1
    CONSTRAINED = 2


def as_vector(v: Any, name: str = "vector") -> Vector:
    """
    Converts anything array-like to a 1-D float64 array and rejects non-finite entries.

    :param v:           Sequence or array
    :param name:        Name used in the error message
    """
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise DimensionMismatch(f"{name} must be one-dimensional, got shape {arr.shape}.")
    if not np.all(np.isfinite(arr)):
        raise InvalidParams(f"{name} contains non-finite entries.")
    return arr


def as_matrix(A: Any, name: str = "matrix") -> DenseMatrix:
    arr = np.asarray(A, dtype=np.float64)
    if arr.ndim != 2 or 0 in arr.shape:
        raise DimensionMismatch(f"{name} must be a non-empty 2-D array, got shape {arr.shape}.")
    if not np.all(np.isfinite(arr)):
        raise InvalidParams(f"{name} contains non-finite entries.")
    return arr


def as_points(points: Any, name: str = "points") -> npt.NDArray[np.float64]:
    arr = np.asarray(points, dtype=np.float64)
    if arr.ndim == 1 and arr.shape[0] == 2:
        arr = arr.reshape(1, 2)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise DimensionMismatch(f"{name} must be a sequence of 2-D positions, got shape {arr.shape}.")
    if not np.all(np.isfinite(arr)):
        raise InvalidParams(f"{name} contains non-finite coordinates.")
    return arr
