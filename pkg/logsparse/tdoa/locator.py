from __future__ import annotations

import math
from typing import Any
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass as stdlib_dataclass, field, replace

import numpy as np
from pydantic import Field, model_validator
from scipy.optimize import linear_sum_assignment

from ..utils.log import debug, error, warn
from ..utils.errors import CountMismatch, EmptySupport, Infeasible, InvalidParams, NoSuspects, ParseError, SingularSystem
from ..utils.types import IndexSet, PathLike, Point, as_points
from ..utils.dataclass import dataclass, strict_record, validate_as
from ..utils.parsing import parse_ini_section
from ..sparse.surrogate import SurrogateParams
from ..sparse.solver import SolveResult, SolverConfig, solve_constrained
from .scene import DEFAULT_C, DelayTable, Grid
from .system import SparseSystem, build_system, default_epsilon, delay_tolerance, screen_columns

__all__ = [
    "LocatorConfig",
    "RefinementStep",
    "LocalizationResult",
    "LocatorContext",
    "fa_value",
    "fa_score",
    "suspect_indices",
    "candidate_points",
    "refine_point",
    "locate",
    "match_errors",
    "rmse",
    "load_locator_config",
]


def _default_solver() -> SolverConfig:
    return SolverConfig(max_iters=30)


def _default_surrogate() -> SurrogateParams:
    return SurrogateParams(p=0.1, q=1.0)


@dataclass(frozen=True, config=strict_record)
class LocatorConfig:
    """
    Settings of the localization pipeline.

    :param K:               Number of emitters to report.
    :param a:               Peak of the score function, entries near it are the least decided.
    :param G:               Refinement depth. Level q moves candidates by spacing / 2^q.
    :param delta:           Pipeline stops once the score is at or below this. None means 0.3 * K.
    :param epsilon_score:   Entries scoring at least this are refined.
    :param U:               Highest moment in the system. None means K.
    :param epsilon:         Residual bound of the constrained model. None derives it from the noise level and the grid.
    :param noise_sigma:     Expected delay jitter in seconds, used for the derived residual bound.
    :param c:               Propagation speed.
    :param threads:         Workers evaluating the nine candidates of a refinement step.
    :param screen:          Leave out grid points whose delays match no measured delay, see `screen_columns`.
    :param rounds:          Refinement passes. A pass after the first recomputes the suspects and only runs while
                            the score is above delta and the previous pass moved a point.
    :param solver:          Constrained solver settings.
    :param surrogate:       Surrogate parameters.
    """

    K: int = Field(default=1, ge=1)
    a: float = Field(default=0.5, gt=0, lt=1)
    G: int = Field(default=2, ge=1)
    delta: float | None = Field(default=None, gt=0)
    epsilon_score: float = Field(default=0.3, ge=0)
    U: int | None = Field(default=None, ge=1)
    epsilon: float | None = Field(default=None, ge=0)
    noise_sigma: float = Field(default=0.0, ge=0)
    c: float = Field(default=DEFAULT_C, gt=0)
    threads: int = Field(default=1, ge=1)
    screen: bool = True
    rounds: int = Field(default=3, ge=1)
    solver: SolverConfig = Field(default_factory=_default_solver)
    surrogate: SurrogateParams = Field(default_factory=_default_surrogate)

    @model_validator(mode="after")
    def _check(self):
        if self.U is not None and self.U > self.K:
            raise ValueError(f"U ({self.U}) must not exceed K ({self.K})")
        return self

    @property
    def stop_score(self) -> float:
        return self.delta if self.delta is not None else 0.3 * self.K

    @property
    def moments(self) -> int:
        return self.U if self.U is not None else self.K


@stdlib_dataclass(frozen=True)
class RefinementStep:
    index: int
    q: int
    old_point: Point
    new_point: Point
    score_before: float
    score_after: float


@stdlib_dataclass(frozen=True)
class LocalizationResult:
    """
    :param positions:       K x 2 estimates, the grid points of the K largest solution entries.
    :param indices:         Grid indices of those points.
    :param matched_errors:  Distance of every estimate to its assigned truth. Empty without truths.
    :param fa_score:        Score of the final solution.
    :param initial_score:   Score before any refinement.
    :param grid:            The grid after refinement.
    :param no_suspects:     The score stayed above delta but no entry qualified for refinement.
    """

    positions: np.ndarray
    indices: IndexSet
    matched_errors: tuple[float, ...]
    fa_score: float
    initial_score: float
    refinement_log: tuple[RefinementStep, ...]
    solver_trace: SolveResult
    grid: Grid
    epsilon: float
    no_suspects: bool = False
    suspects: IndexSet = field(default=())

    @property
    def rmse(self) -> float | None:
        if not self.matched_errors:
            return None
        return math.sqrt(float(np.mean(np.square(self.matched_errors))))


@stdlib_dataclass(frozen=True)
class LocatorContext:
    """Everything a refinement step needs besides the point being moved."""

    grid: Grid
    index: int
    receivers: np.ndarray
    L: DelayTable
    config: LocatorConfig
    solver: SolverConfig


def fa_value(x: Any, a: float) -> Any:
    """
    |x| / a below a, |1 - |x|| / (1 - a) above. Zero at 0 and 1, one at a.
    """
    if not 0 < a < 1:
        raise error(f"a must lie in (0, 1), got {a}.", fa_value, InvalidParams)
    mag = np.abs(np.asarray(x, dtype=np.float64))
    out = np.where(mag <= a, mag / a, np.abs(1.0 - mag) / (1.0 - a))
    return float(out) if out.ndim == 0 else out


def fa_score(v: Any, a: float) -> float:
    return float(np.sum(fa_value(np.asarray(v, dtype=np.float64).reshape(-1), a)))


def suspect_indices(v: Any, a: float, epsilon_score: float) -> IndexSet:
    values = fa_value(np.asarray(v, dtype=np.float64).reshape(-1), a)
    return tuple(int(i) for i in np.flatnonzero(values >= epsilon_score))


def candidate_points(w: Point | np.ndarray, spacing: float, q: int) -> np.ndarray:
    """The point itself followed by eight points at radius spacing / 2^q, counterclockwise from angle 0."""
    w = np.asarray(w, dtype=np.float64)
    angles = np.pi * np.arange(8) / 4.0
    radius = spacing / 2.0**q
    ring = w[None, :] + radius * np.column_stack([np.cos(angles), np.sin(angles)])
    return np.vstack([w[None, :], ring])


def _expand(result: SolveResult, keep: np.ndarray, n: int) -> SolveResult:
    def scatter(v: np.ndarray) -> np.ndarray:
        full = np.zeros(n)
        full[keep] = v
        return full

    return replace(
        result,
        x=scatter(result.x),
        support=tuple(int(keep[i]) for i in result.support),
        iterates=tuple(scatter(v) for v in result.iterates),
    )


def _solve_system(system: SparseSystem, receivers: np.ndarray, L: DelayTable, config: LocatorConfig, solver: SolverConfig) -> SolveResult:
    n = len(system.grid)
    keep = np.arange(n)
    if config.screen:
        tolerance = delay_tolerance(system.grid.spacing, config.c, config.noise_sigma)
        screened = screen_columns(system.grid, receivers, L, tolerance, config.c)
        if len(screened) >= config.K:
            keep = screened
        else:
            debug(f"only {len(screened)} grid points match the delays, solving on the full grid", _solve_system)
    if len(keep) == n:
        return solve_constrained(system.A, system.b, config.surrogate, solver)
    return _expand(solve_constrained(system.A[:, keep], system.b, config.surrogate, solver), keep, n)


def _solve(grid: Grid, receivers: np.ndarray, L: DelayTable, config: LocatorConfig, solver: SolverConfig) -> tuple[SparseSystem, SolveResult]:
    system = build_system(grid, receivers, L, config.moments, config.c)
    return system, _solve_system(system, receivers, L, config, solver)


def _evaluate(point: np.ndarray, context: LocatorContext) -> tuple[float, SolveResult | None]:
    try:
        grid = context.grid.with_point(context.index, point)
        _, result = _solve(grid, context.receivers, context.L, context.config, context.solver)
    except (EmptySupport, Infeasible, SingularSystem, InvalidParams):
        # InvalidParams covers candidates landing on another grid point
        return math.inf, None
    return fa_score(result.x, context.config.a), result


def _refine(w: Point | np.ndarray, spacing: float, q: int, context: LocatorContext) -> tuple[np.ndarray, float, SolveResult | None]:
    candidates = candidate_points(w, spacing, q)
    if context.config.threads > 1:
        with ThreadPoolExecutor(max_workers=min(context.config.threads, len(candidates))) as pool:
            evaluated = list(pool.map(lambda z: _evaluate(z, context), candidates))
    else:
        evaluated = [_evaluate(z, context) for z in candidates]
    scores = np.array([score for score, _ in evaluated])
    # argmin returns the first minimum, so the unmoved point wins ties
    best = int(np.argmin(scores))
    return candidates[best], float(scores[best]), evaluated[best][1]


def refine_point(w: Point | np.ndarray, spacing: float, q: int, context: LocatorContext) -> tuple[Point, float]:
    """
    Moves grid point `context.index` to the best of the nine candidates around `w`.

    Every candidate rebuilds the system with the moved point and solves it again. Candidates whose solve fails score infinity.

    :param w:           Current position of the point
    :param spacing:     Grid spacing
    :param q:           Refinement level, 1 <= q <= G
    :param context:     Grid, receivers, delays and settings

    :return:            (best candidate, its score)
    """
    if not 1 <= q <= context.config.G:
        raise error(f"q must lie in [1, {context.config.G}], got {q}.", refine_point, InvalidParams)
    point, score, _ = _refine(w, spacing, q, context)
    return (float(point[0]), float(point[1])), score


def _ordered_suspects(x: np.ndarray, cfg: LocatorConfig) -> IndexSet:
    found = suspect_indices(x, cfg.a, cfg.epsilon_score)
    # largest entries first, stable on ties
    return tuple(sorted(found, key=lambda i: -abs(float(x[i]))))


def locate(grid: Grid, receivers: Any, L: DelayTable, cfg: LocatorConfig, truths: Any = None) -> LocalizationResult:
    """
    Localizes K emitters from unlabeled delay measurements.

    Solves the constrained model on the grid and scores the solution. While the score is above delta
    every suspect grid point, largest entry first, is moved to the best of its nine candidates for q = 1..G.
    The moved point stays in the grid for the following suspects and a move is only taken if the score does not rise.
    Up to `cfg.rounds` such passes run, each on the suspects of the current solution, as long as the previous pass moved a point.
    The whole loop ends as soon as the score reaches delta. The estimates are the grid points of the K largest solution entries.

    :param grid:        Candidate positions
    :param receivers:   Receiver positions, reference first
    :param L:           Measured delays
    :param cfg:         Pipeline settings
    :param truths:      True emitter positions. Fills `matched_errors` when given.

    :raises EmptySupport:   The initial solve found no entry inside the magnitude window.
    """
    receivers = as_points(receivers, "receivers")
    K = cfg.K
    if K > len(grid):
        raise error(f"Cannot report {K} positions from {len(grid)} grid points.", locate, InvalidParams)

    system = build_system(grid, receivers, L, cfg.moments, cfg.c)
    epsilon = cfg.epsilon if cfg.epsilon is not None else default_epsilon(system, L, cfg.noise_sigma)
    solver = cfg.solver.edit(epsilon=epsilon)
    result = _solve_system(system, receivers, L, cfg, solver)

    score = initial = fa_score(result.x, cfg.a)
    delta = cfg.stop_score
    log: list[RefinementStep] = []
    no_suspects = False
    suspects: IndexSet = ()

    if score >= delta:
        done = False
        for round_index in range(cfg.rounds):
            found = _ordered_suspects(result.x, cfg)
            if round_index == 0:
                suspects = found
                if not found:
                    no_suspects = True
                    warn(str(NoSuspects(f"Score {score:.4g} is at or above {delta:.4g} but no entry reaches {cfg.epsilon_score}.")), locate)
            moved = False
            for index in found:
                for q in range(1, cfg.G + 1):
                    context = LocatorContext(grid, index, receivers, L, cfg, solver)
                    old = (float(grid.points[index][0]), float(grid.points[index][1]))
                    point, new_score, new_result = _refine(old, grid.spacing, q, context)
                    before = score
                    if new_result is not None and new_score <= score:
                        moved = moved or not np.array_equal(point, grid.points[index])
                        grid = grid.with_point(index, point)
                        score = new_score
                        result = new_result
                    new = (float(grid.points[index][0]), float(grid.points[index][1]))
                    log.append(RefinementStep(index, q, old, new, before, score))
                    if score <= delta:
                        done = True
                        break
                if done:
                    break
            if done or not moved:
                break
        debug(f"refined {len(log)} times, score {initial:.4g} -> {score:.4g}", locate)

    order = np.argsort(-np.abs(result.x), kind="stable")[:K]
    indices = tuple(int(i) for i in order)
    positions = grid.points[list(indices)].copy()

    matched: tuple[float, ...] = ()
    if truths is not None:
        matched = tuple(float(d) for d in match_errors(positions, truths))
    debug(f"score {score:.4g} after {len(log)} refinement steps", locate)

    return LocalizationResult(positions, indices, matched, score, initial, tuple(log), result, grid, epsilon, no_suspects, suspects)


def match_errors(estimates: Any, truths: Any) -> np.ndarray:
    """
    Distance of every estimate to its truth under the assignment minimizing the summed distance.

    :raises CountMismatch:  Different number of estimates and truths.
    """
    est = as_points(estimates, "estimates")
    tru = as_points(truths, "truths")
    if est.shape[0] != tru.shape[0]:
        raise error(f"{est.shape[0]} estimates cannot be matched to {tru.shape[0]} truths.", match_errors, CountMismatch)
    cost = np.linalg.norm(est[:, None, :] - tru[None, :, :], axis=2)
    rows, cols = linear_sum_assignment(cost)
    errors = np.zeros(est.shape[0])
    errors[rows] = cost[rows, cols]
    return errors


def rmse(estimates: Any, truths: Any) -> float:
    """Root mean square of the matched distances."""
    return math.sqrt(float(np.mean(np.square(match_errors(estimates, truths)))))


_LOCATOR_KEYS = {"K", "a", "G", "delta", "epsilon_score", "U", "epsilon", "noise_sigma_ns", "c", "threads", "screen", "rounds"}
_SOLVER_KEYS = {"max_iters", "step_tol", "zero_tol", "ridge", "va_low", "va_high", "eta", "smoothing"}
_SURROGATE_KEYS = {"p", "q"}
# ini keys are lowercased by the parser
_CASED = {k.lower(): k for k in _LOCATOR_KEYS | _SOLVER_KEYS | _SURROGATE_KEYS}


def load_locator_config(file: PathLike | None = None, defaults: dict[str, Any] | None = None, overrides: dict[str, Any] | None = None) -> LocatorConfig:
    """
    Builds a LocatorConfig from an optional [LOCATOR] ini section.

    Keys: K, a, G, delta, epsilon_score, U, epsilon, noise_sigma_ns, c, threads, screen, rounds, p, q and the solver keys
    max_iters, step_tol, zero_tol, ridge, va_low, va_high, eta, smoothing. Missing keys keep their defaults.

    :param file:        Ini file or None for defaults only
    :param defaults:    Values the file may override, e.g. propagation speed and noise level of the scene
    :param overrides:   Values taking precedence over the file, e.g. command line flags
    """
    section = parse_ini_section(file, "LOCATOR") if file else {}
    unknown = set(section) - set(_CASED)
    if unknown:
        raise error(f"Unknown [LOCATOR] keys: {', '.join(sorted(unknown))}.", load_locator_config, ParseError)

    flat: dict[str, Any] = dict(defaults or {})
    flat.update({_CASED[k]: v for k, v in section.items()})
    flat.update({k: v for k, v in (overrides or {}).items() if v is not None})

    values = {k: v for k, v in flat.items() if k in _LOCATOR_KEYS or k == "noise_sigma"}
    if "noise_sigma_ns" in values:
        try:
            values["noise_sigma"] = float(values.pop("noise_sigma_ns")) * 1e-9
        except ValueError:
            raise error("noise_sigma_ns must be a number.", load_locator_config, ParseError)
    solver = {k: v for k, v in flat.items() if k in _SOLVER_KEYS}
    values["solver"] = validate_as(SolverConfig, {"max_iters": 30} | solver, load_locator_config, ParseError)
    surrogate = {k: v for k, v in flat.items() if k in _SURROGATE_KEYS}
    values["surrogate"] = validate_as(SurrogateParams, {"p": 0.1, "q": 1.0} | surrogate, load_locator_config, ParseError)
    return validate_as(LocatorConfig, values, load_locator_config, ParseError)
