from __future__ import annotations

import math
from typing import Any
from dataclasses import dataclass as stdlib_dataclass

import numpy as np
from pydantic import Field

from ..utils.types import Vector, WeightKind, as_vector
from ..utils.dataclass import dataclass, strict_record

__all__ = [
    "SurrogateParams",
    "WeightDiagonal",
    "h_value",
    "h_norm",
    "h_derivative",
    "weight_diagonals",
    "rearrangement",
    "sine_surrogate",
    "nonzero_count_limit",
    "DEFAULT_ZERO_TOL",
]

DEFAULT_ZERO_TOL = 1e-10


@dataclass(frozen=True, config=strict_record)
class SurrogateParams:
    """
    The pair defining h(x) = log(1 + |x|^q / p).

    :param p:       Smoothing parameter. Smaller values make the surrogate closer to counting nonzeros.
    :param q:       Exponent in (0, 1].
    """

    p: float = Field(default=0.1, gt=0)
    q: float = Field(default=1.0, gt=0, le=1)


@stdlib_dataclass(frozen=True)
class WeightDiagonal:
    """Diagonal of H(x) or F(x). Both are zero exactly where x was treated as zero."""

    entries: Vector
    kind: WeightKind

    @property
    def matrix(self) -> np.ndarray:
        return np.diag(self.entries)

    def __len__(self) -> int:
        return len(self.entries)


def h_value(x: Any, params: SurrogateParams) -> Any:
    """
    Evaluates the surrogate elementwise. Scalars in, scalar out.

    :param x:           Scalar or array
    :param params:      Surrogate parameters
    """
    mag = np.abs(np.asarray(x, dtype=np.float64))
    out = np.log1p(mag**params.q / params.p)
    return float(out) if out.ndim == 0 else out


def h_norm(v: Any, params: SurrogateParams) -> float:
    return float(np.sum(h_value(as_vector(v), params)))


def h_derivative(x: Any, params: SurrogateParams) -> Any:
    """
    Derivative of the surrogate in |x|: q|x|^(q-1) / (p + |x|^q).
    Only meaningful for x != 0. Zero entries are mapped to 0.
    """
    mag = np.abs(np.asarray(x, dtype=np.float64))
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(mag > 0, params.q * mag ** (params.q - 1) / (params.p + mag**params.q), 0.0)
    return float(out) if out.ndim == 0 else out


def weight_diagonals(v: Any, params: SurrogateParams, zero_tol: float = DEFAULT_ZERO_TOL) -> tuple[WeightDiagonal, WeightDiagonal]:
    """
    Computes the diagonals of H(v) and F(v).

    Entries with |v_i| <= zero_tol are exact zeros in both. Elsewhere
    H_ii = q / (|v_i|^(2-q) (p + |v_i|^q)) and F_ii = 1 / H_ii.

    :param v:           Current iterate
    :param params:      Surrogate parameters
    :param zero_tol:    Magnitude treated as zero

    :return:            (H, F)
    """
    mag = np.abs(as_vector(v))
    support = mag > zero_tol
    h = np.zeros_like(mag)
    f = np.zeros_like(mag)
    s = mag[support]
    f[support] = s ** (2 - params.q) * (params.p + s**params.q) / params.q
    h[support] = 1.0 / f[support]
    return WeightDiagonal(h, WeightKind.H), WeightDiagonal(f, WeightKind.F)


def rearrangement(v: Any) -> Vector:
    """Magnitudes sorted nonincreasing."""
    return np.sort(np.abs(as_vector(v)))[::-1].copy()


def sine_surrogate(x: Any, p: float) -> Any:
    """
    (x/p) * sin(p/x), continued by 0 at x = 0.
    Tends to 1 for large x but is not monotone near 0, which is what breaks ℓ0 equivalence for it.
    """
    arr = np.asarray(x, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(arr != 0, (arr / p) * np.sin(p / np.where(arr != 0, arr, 1.0)), 0.0)
    return float(out) if out.ndim == 0 else out


def nonzero_count_limit(v: Any, params: SurrogateParams) -> float:
    """h_norm(v) / log(1 + 1/p). Tends to the number of nonzeros of v as p goes to 0."""
    return h_norm(v, params) / math.log1p(1.0 / params.p)
