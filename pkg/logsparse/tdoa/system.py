from __future__ import annotations

import math
from typing import Any
from dataclasses import dataclass as stdlib_dataclass

import numpy as np

from ..utils.log import error
from ..utils.errors import DimensionMismatch, InvalidParams
from ..utils.types import DenseMatrix, Vector, as_points
from .scene import DEFAULT_C, DelayTable, Grid, model_delays

__all__ = ["SparseSystem", "build_system", "default_epsilon", "delay_tolerance", "screen_columns", "indicator", "TIME_SCALE"]

# delays enter the moment functions in microseconds
TIME_SCALE = 1e6


@stdlib_dataclass(frozen=True)
class SparseSystem:
    """
    Moment system for the unlabeled delays. Row u*m + i holds tau_i(w_j)^(u+1) for every grid point j,
    divided by `row_scale[u*m + i]`, and b holds the matching moment sum of the measured delays under the same scaling.
    """

    A: DenseMatrix
    b: Vector
    U: int
    grid: Grid
    row_scale: Vector
    c: float = DEFAULT_C

    @property
    def m(self) -> int:
        return self.A.shape[0] // self.U


def build_system(grid: Grid, receivers: Any, L: DelayTable, U: int, c: float = DEFAULT_C) -> SparseSystem:
    """
    Builds A and b from the powers tau^u, u = 1..U, of the model delays of every grid point and of the measured delays.

    Every row of A and the matching entry of b are divided by the row norm, which leaves the solution set unchanged.

    :param grid:        Candidate positions
    :param receivers:   Receiver positions, reference first
    :param L:           Measured delays, one row per non-reference receiver
    :param U:           Highest moment
    :param c:           Propagation speed
    """
    receivers = as_points(receivers, "receivers")
    if U < 1:
        raise error(f"U must be positive, got {U}.", build_system, InvalidParams)
    if receivers.shape[0] - 1 != L.m:
        raise error(f"{receivers.shape[0]} receivers need {receivers.shape[0] - 1} delay rows, the table has {L.m}.", build_system, DimensionMismatch)
    if c <= 0:
        raise error("Propagation speed must be positive.", build_system, InvalidParams)

    tau = model_delays(grid.points, receivers, c) * TIME_SCALE
    measured = L.delays * TIME_SCALE

    powers = np.arange(1, U + 1)
    A = np.concatenate([tau**u for u in powers], axis=0)
    b = np.concatenate([np.sum(measured**u, axis=1) for u in powers])

    row_scale = np.linalg.norm(A, axis=1)
    row_scale[row_scale == 0] = 1.0
    return SparseSystem(A / row_scale[:, None], b / row_scale, int(U), grid, row_scale, float(c))


def default_epsilon(system: SparseSystem, L: DelayTable, noise_sigma: float = 0.0) -> float:
    """
    Residual bound for the constrained model: three standard deviations of the noise induced
    change of b plus the change caused by emitters sitting up to half a spacing off the grid.
    Both terms are taken per row in the normalized units of `system` and maximized over rows.

    The off-grid term of a row sums u * |l|^(u-1) * spacing / (2c) over the delays of that row only.
    There is no extra factor U * m, each row is bounded on its own in the infinity norm.

    :param system:          The built system
    :param L:               The delays b was built from
    :param noise_sigma:     Delay jitter in seconds
    """
    measured = L.delays * TIME_SCALE
    sigma = noise_sigma * TIME_SCALE
    offset = system.grid.spacing / (2.0 * system.c) * TIME_SCALE

    noise_rows = []
    quant_rows = []
    for u in range(1, system.U + 1):
        # derivative of the moment function u * l^(u-1)
        slope = u * np.abs(measured) ** (u - 1)
        noise_rows.append(sigma * np.sqrt(np.sum(slope**2, axis=1)))
        quant_rows.append(offset * np.sum(slope, axis=1))
    noise = np.concatenate(noise_rows) / system.row_scale
    quant = np.concatenate(quant_rows) / system.row_scale
    return float(3.0 * noise.max() + quant.max())


def indicator(n: int, indices: Any) -> Vector:
    x = np.zeros(n)
    x[list(indices)] = 1.0
    return x


def delay_tolerance(spacing: float, c: float = DEFAULT_C, noise_sigma: float = 0.0) -> float:
    """
    Largest gap in seconds between a measured delay and the model delay of the grid point nearest to its emitter.
    Moving a point by d changes each delay by at most 2d / c, no point of the zone is further than
    spacing / sqrt(2) from the grid, and the jitter adds three standard deviations.
    """
    return math.sqrt(2.0) * spacing / c + 3.0 * noise_sigma


def screen_columns(grid: Grid, receivers: Any, L: DelayTable, tolerance: float, c: float = DEFAULT_C) -> np.ndarray:
    """
    Indices of the grid points whose delay at every receiver lies within `tolerance` of one of the delays measured there.
    An emitter can only sit near such a point, every other column of the system can be left out.

    :param grid:        Candidate positions
    :param receivers:   Receiver positions, reference first
    :param L:           Measured delays
    :param tolerance:   Allowed gap in seconds, see `delay_tolerance`
    :param c:           Propagation speed
    """
    receivers = as_points(receivers, "receivers")
    if receivers.shape[0] - 1 != L.m:
        raise error(f"{receivers.shape[0]} receivers need {receivers.shape[0] - 1} delay rows, the table has {L.m}.", screen_columns, DimensionMismatch)
    tau = model_delays(grid.points, receivers, c)
    gap = np.min(np.abs(tau[:, :, None] - L.delays[:, None, :]), axis=2)
    return np.flatnonzero(np.all(gap <= tolerance, axis=0))
