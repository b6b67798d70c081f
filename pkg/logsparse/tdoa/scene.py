from __future__ import annotations

from typing import Any
from dataclasses import dataclass as stdlib_dataclass

import numpy as np
from pydantic import Field, model_validator

from ..utils.log import error
from ..utils.errors import InvalidParams, ParseError
from ..utils.types import DenseMatrix, PathLike, Point, as_points
from ..utils.dataclass import dataclass, strict_record, validate_as
from ..utils.parsing import parse_json, parse_matrix_csv
from ..utils.format import write_json, write_matrix_csv

__all__ = [
    "DEFAULT_C",
    "TdoaScene",
    "DelayTable",
    "Grid",
    "SceneFile",
    "model_delays",
    "true_delays",
    "simulate_measurements",
    "load_scene",
    "load_scene_file",
    "save_scene",
    "parse_delay_table",
    "write_delay_table",
]

DEFAULT_C = 3e8


@dataclass(frozen=True, config=strict_record)
class TdoaScene:
    """
    Receivers and emitters in the plane. Lengths are meters, times seconds.

    :param receivers:       Receiver positions. The first one is the reference.
    :param targets:         Emitter positions.
    :param c:               Propagation speed.
    :param noise_sigma:     Standard deviation of the jitter added to every measured delay.
    :param zone_min:        Lower corner coordinate of the square zone.
    :param zone_max:        Upper corner coordinate of the square zone.
    """

    receivers: tuple[tuple[float, float], ...]
    targets: tuple[tuple[float, float], ...]
    c: float = Field(default=DEFAULT_C, gt=0)
    noise_sigma: float = Field(default=0.0, ge=0)
    zone_min: float = 0.0
    zone_max: float = 10_000.0

    @model_validator(mode="after")
    def _check_layout(self):
        if len(self.receivers) < 2:
            raise ValueError("a scene needs at least 2 receivers")
        if len(self.targets) < 1:
            raise ValueError("a scene needs at least 1 target")
        if not self.zone_min < self.zone_max:
            raise ValueError("zone_min must be smaller than zone_max")
        for name, points in (("receiver", self.receivers), ("target", self.targets)):
            for x, y in points:
                if not (self.zone_min <= x <= self.zone_max and self.zone_min <= y <= self.zone_max):
                    raise ValueError(f"{name} ({x}, {y}) lies outside the zone [{self.zone_min}, {self.zone_max}]^2")
        return self

    @property
    def receiver_array(self) -> np.ndarray:
        return np.asarray(self.receivers, dtype=np.float64)

    @property
    def target_array(self) -> np.ndarray:
        return np.asarray(self.targets, dtype=np.float64)

    @property
    def m(self) -> int:
        """Number of non-reference receivers."""
        return len(self.receivers) - 1

    @property
    def K(self) -> int:
        return len(self.targets)


@stdlib_dataclass(frozen=True)
class DelayTable:
    """
    Unlabeled delay measurements. Row j belongs to receiver j+1 relative to the reference,
    column k to some emitter. Column order carries no meaning downstream.
    """

    delays: DenseMatrix

    def __post_init__(self):
        arr = np.asarray(self.delays, dtype=np.float64)
        if arr.ndim != 2 or 0 in arr.shape or not np.all(np.isfinite(arr)):
            raise InvalidParams(f"A delay table must be a finite non-empty matrix, got shape {arr.shape}.")
        object.__setattr__(self, "delays", arr)

    @property
    def m(self) -> int:
        return self.delays.shape[0]

    @property
    def K(self) -> int:
        return self.delays.shape[1]

    def in_ns(self) -> DenseMatrix:
        return self.delays * 1e9

    @classmethod
    def from_ns(cls, delays_ns: Any) -> DelayTable:
        return cls(np.asarray(delays_ns, dtype=np.float64) * 1e-9)


@stdlib_dataclass(frozen=True)
class Grid:
    """Candidate emitter positions and the spacing refinement steps are derived from."""

    points: DenseMatrix
    spacing: float

    def __post_init__(self):
        pts = as_points(self.points, "grid points")
        if not self.spacing > 0:
            raise InvalidParams(f"Grid spacing must be positive, got {self.spacing}.")
        if np.unique(pts, axis=0).shape[0] != pts.shape[0]:
            raise InvalidParams("Grid points must be pairwise distinct.")
        object.__setattr__(self, "points", pts)

    @classmethod
    def regular(cls, zone_min: float = 0.0, zone_max: float = 10_000.0, nx: int = 21, ny: int = 21) -> Grid:
        """nx x ny lattice covering the square zone including its border, x varying fastest."""
        if nx < 2 or ny < 2:
            raise InvalidParams("A regular grid needs at least 2 points per axis.")
        xs = np.linspace(zone_min, zone_max, nx)
        ys = np.linspace(zone_min, zone_max, ny)
        gx, gy = np.meshgrid(xs, ys)
        spacing = min(xs[1] - xs[0], ys[1] - ys[0])
        return cls(np.column_stack([gx.ravel(), gy.ravel()]), float(spacing))

    def with_point(self, index: int, point: Point | np.ndarray) -> Grid:
        points = self.points.copy()
        points[index] = np.asarray(point, dtype=np.float64)
        return Grid(points, self.spacing)

    def nearest(self, point: Point | np.ndarray) -> int:
        return int(np.argmin(np.linalg.norm(self.points - np.asarray(point, dtype=np.float64), axis=1)))

    def __len__(self) -> int:
        return self.points.shape[0]


def model_delays(points: Any, receivers: Any, c: float = DEFAULT_C) -> DenseMatrix:
    """
    Range-difference delays (|p - R_{i+1}| - |p - R_1|) / c for every point.

    :return:        (receivers - 1) x points matrix in seconds
    """
    pts = as_points(points)
    rec = as_points(receivers, "receivers")
    dist = np.linalg.norm(pts[None, :, :] - rec[:, None, :], axis=2)
    return (dist[1:] - dist[0][None, :]) / c


def true_delays(scene: TdoaScene) -> DelayTable:
    return DelayTable(model_delays(scene.target_array, scene.receiver_array, scene.c))


def simulate_measurements(scene: TdoaScene, seed: int) -> DelayTable:
    """True delays plus independent gaussian jitter of `scene.noise_sigma` per entry."""
    delays = true_delays(scene).delays
    if scene.noise_sigma == 0:
        return DelayTable(delays)
    rng = np.random.default_rng(seed)
    return DelayTable(delays + rng.normal(0.0, scene.noise_sigma, size=delays.shape))


@dataclass(config=strict_record)
class ZoneSpec:
    min: float = 0.0
    max: float = 10_000.0


@dataclass(config=strict_record)
class GridSpec:
    nx: int = Field(default=21, ge=2)
    ny: int = Field(default=21, ge=2)


@dataclass(config=strict_record)
class SceneFile:
    """
    Json layout of a scene file.

    ```json
    {
        "receivers": [[x, y], ...],
        "targets": [[x, y], ...],
        "c": 3e8,
        "noise_sigma_ns": 10,
        "zone": {"min": 0, "max": 10000},
        "grid": {"nx": 21, "ny": 21}
    }
    ```
    """

    receivers: list[tuple[float, float]]
    targets: list[tuple[float, float]] = Field(default_factory=list)
    c: float = DEFAULT_C
    noise_sigma_ns: float = 0.0
    zone: ZoneSpec = Field(default_factory=ZoneSpec)
    grid: GridSpec = Field(default_factory=GridSpec)

    def to_scene(self) -> TdoaScene:
        return validate_as(
            TdoaScene,
            dict(
                receivers=self.receivers,
                targets=self.targets,
                c=self.c,
                noise_sigma=self.noise_sigma_ns * 1e-9,
                zone_min=self.zone.min,
                zone_max=self.zone.max,
            ),
            self,
            ParseError,
        )

    def to_grid(self) -> Grid:
        return Grid.regular(self.zone.min, self.zone.max, self.grid.nx, self.grid.ny)


def load_scene_file(file: PathLike) -> SceneFile:
    """Reads a scene json file without requiring targets."""
    return validate_as(SceneFile, parse_json(file), load_scene_file, ParseError)


def load_scene(file: PathLike) -> tuple[TdoaScene, Grid]:
    """
    Reads a scene json file.

    :return:        The scene and its regular grid
    """
    spec = load_scene_file(file)
    return spec.to_scene(), spec.to_grid()


def save_scene(file: PathLike, scene: TdoaScene, nx: int = 21, ny: int = 21):
    data = dict(
        receivers=[list(p) for p in scene.receivers],
        targets=[list(p) for p in scene.targets],
        c=scene.c,
        noise_sigma_ns=scene.noise_sigma * 1e9,
        zone=dict(min=scene.zone_min, max=scene.zone_max),
        grid=dict(nx=nx, ny=ny),
    )
    return write_json(file, data)


def parse_delay_table(file: PathLike) -> DelayTable:
    """Delay table csv in nanoseconds, laid out like any matrix file."""
    try:
        return DelayTable.from_ns(parse_matrix_csv(file))
    except InvalidParams as e:
        raise error(str(e), parse_delay_table, ParseError)


def write_delay_table(file: PathLike, table: DelayTable):
    return write_matrix_csv(file, table.in_ns())
