from __future__ import annotations

import math
from typing import Any
from itertools import product
from dataclasses import dataclass as stdlib_dataclass

import numpy as np
from pydantic import Field

from ..utils.log import debug, error, info
from ..utils.errors import EmptySupport, Infeasible, ParseError, SingularSystem
from ..utils.types import PathLike
from ..utils.dataclass import dataclass, strict_record, validate_as
from ..utils.parsing import parse_ini_section, split_number_list
from ..utils.format import write_table_csv
from ..utils.progress import ProgressBarConfig, map_with_progress
from ..sparse.surrogate import SurrogateParams
from ..sparse.solver import SolverConfig, omp, weighted_l1_start
from .scene import DEFAULT_C, Grid, TdoaScene, simulate_measurements
from .system import build_system
from .locator import LocatorConfig, locate, match_errors

__all__ = [
    "SweepSpec",
    "TrialRecord",
    "CellSummary",
    "TRIAL_COLUMNS",
    "SUMMARY_COLUMNS",
    "BASELINE_COLUMNS",
    "run_trial",
    "run_sweep",
    "aggregate",
    "load_sweep_spec",
    "write_trials",
    "write_summary",
    "write_baseline",
]

TRIAL_COLUMNS = ("seed", "K", "m", "noise_ns", "success", "rmse_m", "iterations")
SUMMARY_COLUMNS = ("K", "m", "noise_ns", "trials", "success_ratio", "mean_rmse_m")
BASELINE_COLUMNS = ("seed", "K", "m", "noise_ns", "success", "rmse_m", "omp_success", "omp_rmse_m")


@dataclass(frozen=True, config=strict_record)
class SweepSpec:
    """
    Monte Carlo grid over target counts, receiver counts and noise levels.

    :param targets:         Target counts K.
    :param receivers:       Receiver counts m, the reference included.
    :param noise_ns:        Delay jitter levels in nanoseconds.
    :param trials:          Trials per cell. Trial t of every cell uses seed + t.
    :param seed:            Base seed.
    :param nx:              Grid points along x.
    :param ny:              Grid points along y.
    :param zone_min:        Lower corner of the square zone.
    :param zone_max:        Upper corner of the square zone.
    :param c:               Propagation speed.
    :param G:               Refinement depth of the locator.
    :param p:               Surrogate smoothing parameter.
    :param q:               Surrogate exponent.
    :param max_iters:       Iteration cap of the constrained solver.
    :param baseline:        Also score the weighted ℓ1 starting point alone and orthogonal matching pursuit on the same trials.
    :param off_grid:        Draw targets uniformly in the zone instead of on grid points.
    """

    targets: tuple[int, ...] = (1, 2, 3, 4, 5, 6, 7, 8)
    receivers: tuple[int, ...] = (6,)
    noise_ns: tuple[float, ...] = (10.0,)
    trials: int = Field(default=100, ge=1)
    seed: int = 0
    nx: int = Field(default=21, ge=2)
    ny: int = Field(default=21, ge=2)
    zone_min: float = 0.0
    zone_max: float = 10_000.0
    c: float = Field(default=DEFAULT_C, gt=0)
    G: int = Field(default=2, ge=1)
    p: float = Field(default=0.1, gt=0)
    q: float = Field(default=1.0, gt=0, le=1)
    max_iters: int = Field(default=30, ge=1)
    baseline: bool = False
    off_grid: bool = False

    def grid(self) -> Grid:
        return Grid.regular(self.zone_min, self.zone_max, self.nx, self.ny)

    def cells(self) -> list[tuple[int, int, float]]:
        return list(product(self.targets, self.receivers, self.noise_ns))

    def locator_config(self, K: int, noise_ns: float) -> LocatorConfig:
        return LocatorConfig(
            K=K,
            G=self.G,
            noise_sigma=noise_ns * 1e-9,
            c=self.c,
            solver=SolverConfig(max_iters=self.max_iters),
            surrogate=SurrogateParams(p=self.p, q=self.q),
        )


@stdlib_dataclass(frozen=True)
class TrialRecord:
    seed: int
    K: int
    m: int
    noise_ns: float
    success: bool
    rmse_m: float
    iterations: int
    baseline_success: bool | None = None
    baseline_rmse_m: float | None = None
    omp_success: bool | None = None
    omp_rmse_m: float | None = None

    def row(self) -> tuple:
        return (self.seed, self.K, self.m, self.noise_ns, self.success, self.rmse_m, self.iterations)


@stdlib_dataclass(frozen=True)
class CellSummary:
    K: int
    m: int
    noise_ns: float
    trials: int
    success_ratio: float
    mean_rmse_m: float
    baseline_success_ratio: float | None = None
    omp_success_ratio: float | None = None

    def row(self) -> tuple:
        return (self.K, self.m, self.noise_ns, self.trials, self.success_ratio, self.mean_rmse_m)


def _draw_scene(spec: SweepSpec, grid: Grid, K: int, m: int, noise_ns: float, seed: int) -> tuple[TdoaScene, np.ndarray]:
    rng = np.random.default_rng(seed)
    receivers = rng.uniform(spec.zone_min, spec.zone_max, size=(m, 2))
    if spec.off_grid:
        targets = rng.uniform(spec.zone_min, spec.zone_max, size=(K, 2))
    else:
        chosen = rng.choice(len(grid), size=K, replace=False)
        targets = grid.points[np.sort(chosen)]
    scene = TdoaScene(
        receivers=tuple(map(tuple, receivers)),
        targets=tuple(map(tuple, targets)),
        c=spec.c,
        noise_sigma=noise_ns * 1e-9,
        zone_min=spec.zone_min,
        zone_max=spec.zone_max,
    )
    return scene, targets


def _score(estimates: np.ndarray, truths: np.ndarray, spacing: float) -> tuple[bool, float]:
    errors = match_errors(estimates, truths)
    return bool(np.all(errors <= spacing / 2.0)), math.sqrt(float(np.mean(errors**2)))


def _top_points(grid: Grid, x: np.ndarray, K: int) -> np.ndarray:
    return grid.points[np.argsort(-np.abs(x), kind="stable")[:K]]


def run_trial(spec: SweepSpec, K: int, m: int, noise_ns: float, trial: int, grid: Grid | None = None) -> TrialRecord:
    """
    One seeded trial: random receivers in the zone, K targets on distinct grid points (or anywhere in the zone with
    `spec.off_grid`), jittered delays, then `locate`. A trial succeeds when every target has an estimate within
    half a grid spacing after optimal matching. Solver failures count as unsuccessful trials with an infinite error.

    The baselines pick the grid points of the K largest entries of the weighted ℓ1 point and of orthogonal matching pursuit,
    both on the full unrefined system.
    """
    grid = grid or spec.grid()
    seed = spec.seed + trial
    scene, truths = _draw_scene(spec, grid, K, m, noise_ns, seed)
    measured = simulate_measurements(scene, seed)
    cfg = spec.locator_config(K, noise_ns)

    try:
        result = locate(grid, scene.receiver_array, measured, cfg)
        success, error_m = _score(result.positions, truths, grid.spacing)
        iterations = result.solver_trace.iterations
    except (EmptySupport, Infeasible, SingularSystem) as e:
        debug(f"seed {seed} K={K} m={m}: {e}", run_trial)
        success, error_m, iterations = False, math.inf, 0

    baseline_success = baseline_rmse = omp_success = omp_rmse = None
    if spec.baseline:
        system = build_system(grid, scene.receiver_array, measured, cfg.moments, cfg.c)
        baseline_success, baseline_rmse = _score(_top_points(grid, weighted_l1_start(system.A, system.b), K), truths, grid.spacing)
        omp_success, omp_rmse = _score(_top_points(grid, omp(system.A, system.b, K), K), truths, grid.spacing)

    return TrialRecord(seed, K, m, float(noise_ns), success, error_m, iterations, baseline_success, baseline_rmse, omp_success, omp_rmse)


def run_sweep(spec: SweepSpec, threads: int = 1, progress: bool = True) -> list[TrialRecord]:
    """
    Runs every trial of every cell. Records come back ordered by cell (K, m, noise) and trial index,
    independent of the thread count.
    """
    grid = spec.grid()
    work = [(K, m, noise, trial) for K, m, noise in spec.cells() for trial in range(spec.trials)]
    info(f"{len(spec.cells())} cells x {spec.trials} trials on {len(grid)} grid points", run_sweep)

    def job(item: tuple[int, int, float, int]) -> TrialRecord:
        return run_trial(spec, *item, grid=grid)

    return map_with_progress(job, work, threads, ProgressBarConfig("Sweeping", disable=not progress))


def aggregate(records: list[TrialRecord]) -> list[CellSummary]:
    """Success ratio and mean finite error per cell, in order of first appearance."""
    cells: dict[tuple[int, int, float], list[TrialRecord]] = {}
    for record in records:
        cells.setdefault((record.K, record.m, record.noise_ns), []).append(record)

    summaries = []
    for (K, m, noise), group in cells.items():
        finite = [r.rmse_m for r in group if math.isfinite(r.rmse_m)]
        baseline = [r.baseline_success for r in group if r.baseline_success is not None]
        greedy = [r.omp_success for r in group if r.omp_success is not None]
        summaries.append(
            CellSummary(
                K,
                m,
                noise,
                len(group),
                sum(r.success for r in group) / len(group),
                float(np.mean(finite)) if finite else math.inf,
                sum(baseline) / len(baseline) if baseline else None,
                sum(greedy) / len(greedy) if greedy else None,
            )
        )
    return summaries


def load_sweep_spec(file: PathLike) -> SweepSpec:
    """
    Reads a [SWEEP] ini section. List keys accept comma separated values and inclusive integer ranges.

    ```ini
    [SWEEP]
    targets = 1..8
    receivers = 6,7,8
    noise_ns = 0,1,10
    trials = 50
    seed = 0
    baseline = true
    off_grid = false
    ```
    """
    section = parse_ini_section(file, "SWEEP")
    values: dict[str, Any] = dict(section)
    names = {"g": "G"}
    values = {names.get(k, k): v for k, v in values.items()}
    if "targets" in values:
        values["targets"] = tuple(split_number_list(values["targets"], int, load_sweep_spec))
    if "receivers" in values:
        values["receivers"] = tuple(split_number_list(values["receivers"], int, load_sweep_spec))
    if "noise_ns" in values:
        values["noise_ns"] = tuple(split_number_list(values["noise_ns"], float, load_sweep_spec))
    spec: SweepSpec = validate_as(SweepSpec, values, load_sweep_spec, ParseError)
    if min(spec.receivers) < 2 or min(spec.targets) < 1:
        raise error("Every cell needs at least 2 receivers and 1 target.", load_sweep_spec, ParseError)
    if max(spec.targets) > spec.nx * spec.ny:
        raise error("More targets than grid points.", load_sweep_spec, ParseError)
    return spec


def write_trials(file: PathLike, records: list[TrialRecord]):
    return write_table_csv(file, TRIAL_COLUMNS, [r.row() for r in records])


def write_summary(file: PathLike, summaries: list[CellSummary]):
    return write_table_csv(file, SUMMARY_COLUMNS, [s.row() for s in summaries])


def write_baseline(file: PathLike, records: list[TrialRecord]):
    rows = [
        (r.seed, r.K, r.m, r.noise_ns, r.baseline_success, r.baseline_rmse_m, r.omp_success, r.omp_rmse_m) for r in records if r.baseline_success is not None
    ]
    return write_table_csv(file, BASELINE_COLUMNS, rows)
