from __future__ import annotations

import math
from typing import Any
from dataclasses import dataclass as stdlib_dataclass, field, replace

import numpy as np
from pydantic import Field, model_validator

from ..utils.log import debug, error, quiet, warn
from ..utils.errors import EmptySupport, Infeasible, InvalidParams, SingularSystem
from ..utils.types import DenseMatrix, IndexSet, SolveMode, Vector, as_matrix, as_vector
from ..utils.dataclass import dataclass, strict_record
from .surrogate import DEFAULT_ZERO_TOL, SurrogateParams, h_norm, weight_diagonals
from .numerics import _check_system, feasibility_scale, l1_min_equality, least_squares_on_support, weighted_minnorm_solve

__all__ = ["SolverConfig", "SolveResult", "irls_step", "fixed_point_residual", "solve_equality", "solve_constrained", "weighted_l1_start", "smoothed_start", "omp"]

# lift of every magnitude, relative to the peak of the starting point, for the successive smoothing passes
SMOOTHING_LEVELS = (1.0, 1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8)
SMOOTHING_ITERS = 30
# entries below this fraction of the peak are dropped from the smoothed point
PRUNE_RATIO = 1e-6


@dataclass(frozen=True, config=strict_record)
class SolverConfig:
    """
    Settings shared by both fixed-point solvers.

    :param max_iters:       Iteration cap. Hitting it is reported through `converged`, never raised.
    :param step_tol:        Relative iterate change below which the equality solver stops.
    :param zero_tol:        Magnitudes at or below this are exact zeros.
    :param ridge:           Explicit Gram regularization.
    :param va_low:          Lower end of the magnitude window that keeps an entry in the thresholded support.
    :param va_high:         Upper end of that window.
    :param epsilon:         Residual infinity-norm bound of the constrained model.
    :param eta:             Box bound on the solution of the constrained model.
    :param smoothing:       Also run the reweighting with lifted magnitudes from the ℓ1 point, which lets zero entries re-enter the support.
    """

    max_iters: int = Field(default=200, gt=0)
    step_tol: float = Field(default=1e-8, gt=0)
    zero_tol: float = Field(default=DEFAULT_ZERO_TOL, ge=0)
    ridge: float = Field(default=0.0, ge=0)
    va_low: float = 0.2
    va_high: float = 1.2
    epsilon: float = Field(default=1e-8, ge=0)
    eta: float = Field(default=1.5, gt=1)
    smoothing: bool = True

    @model_validator(mode="after")
    def _check_window(self):
        if not self.va_low < self.va_high:
            raise ValueError(f"va_low ({self.va_low}) must be smaller than va_high ({self.va_high})")
        return self

    def edit(self, **changes: Any) -> SolverConfig:
        return replace(self, **changes)


@stdlib_dataclass(frozen=True)
class SolveResult:
    """
    Outcome of one solver run.

    `objective_trace[k]` is the surrogate norm of `iterates[k]`, the first entry belongs to the initializer.
    `quadratic_pairs[k]` holds (x_{k+1}^T H(x_k) x_{k+1}, x_k^T H(x_k) x_k) for the reweighting steps.
    `residual_ok` and `box_ok` are only set by the constrained solver.
    """

    x: Vector
    objective_trace: tuple[float, ...]
    iterations: int
    converged: bool
    support: IndexSet
    fixed_point_residual: float
    mode: SolveMode = SolveMode.EQUALITY
    iterates: tuple[Vector, ...] = field(default=(), repr=False)
    quadratic_pairs: tuple[tuple[float, float], ...] = field(default=(), repr=False)
    residual_ok: bool | None = None
    box_ok: bool | None = None

    @property
    def feasible(self) -> bool:
        return self.residual_ok is not False and self.box_ok is not False


def _support(x: Vector, zero_tol: float) -> IndexSet:
    return tuple(int(i) for i in np.flatnonzero(np.abs(x) > zero_tol))


def _snap(x: Vector, zero_tol: float) -> Vector:
    x = x.copy()
    x[np.abs(x) <= zero_tol] = 0.0
    return x


def _relative_change(new: Vector, old: Vector) -> float:
    return float(np.linalg.norm(new - old)) / max(float(np.linalg.norm(old)), np.finfo(np.float64).tiny)


def irls_step(A: DenseMatrix, b: Vector, x: Vector, params: SurrogateParams, cfg: SolverConfig) -> Vector:
    """One application of the fixed-point map x -> F(x) A^T (A F(x) A^T)^+ b."""
    _, F = weight_diagonals(x, params, cfg.zero_tol)
    return _snap(weighted_minnorm_solve(A, F, b, cfg.ridge), cfg.zero_tol)


def fixed_point_residual(A: Any, b: Any, x: Any, params: SurrogateParams, cfg: SolverConfig | None = None) -> float:
    """
    ||Phi(x) - x|| for the fixed-point map Phi. Infinite if the map is undefined at x.
    """
    cfg = cfg or SolverConfig()
    A, b, x = as_matrix(A), as_vector(b, "b"), as_vector(x, "x")
    try:
        return float(np.linalg.norm(irls_step(A, b, x, params, cfg) - x))
    except SingularSystem:
        return float("inf")


def _fixed_point_run(A: DenseMatrix, b: Vector, x: Vector, params: SurrogateParams, cfg: SolverConfig) -> SolveResult:
    trace = [h_norm(x, params)]
    iterates = [x]
    pairs: list[tuple[float, float]] = []
    converged = False
    iterations = 0

    for _ in range(cfg.max_iters):
        H, F = weight_diagonals(x, params, cfg.zero_tol)
        x_new = _snap(weighted_minnorm_solve(A, F, b, cfg.ridge), cfg.zero_tol)
        iterations += 1
        pairs.append((float(x_new @ (H.entries * x_new)), float(x @ (H.entries * x))))
        trace.append(h_norm(x_new, params))
        iterates.append(x_new)

        change = _relative_change(x_new, x)
        x = x_new
        if change <= cfg.step_tol:
            converged = True
            break

    return SolveResult(
        x=x,
        objective_trace=tuple(trace),
        iterations=iterations,
        converged=converged,
        support=_support(x, cfg.zero_tol),
        fixed_point_residual=fixed_point_residual(A, b, x, params, cfg),
        mode=SolveMode.EQUALITY,
        iterates=tuple(iterates),
        quadratic_pairs=tuple(pairs),
    )


def solve_equality(A: Any, b: Any, params: SurrogateParams | None = None, cfg: SolverConfig | None = None) -> SolveResult:
    """
    Minimizes the surrogate norm subject to Ax = b with the reweighted fixed-point iteration.

    Starts at the ℓ1 minimizer and iterates x_{k+1} = F(x_k) A^T (A F(x_k) A^T)^+ b
    until the relative change drops to `cfg.step_tol` or `cfg.max_iters` steps were taken.
    An entry that reaches zero stays zero, so the ℓ1 support bounds every later iterate. With `cfg.smoothing`
    the iteration is repeated from `smoothed_start` and the run ending at the smaller surrogate norm is returned,
    the plain run on ties.

    :param A:           m x n matrix
    :param b:           Right hand side in the range of A
    :param params:      Surrogate parameters
    :param cfg:         Solver settings

    :return:            SolveResult with the full iterate history of the returned run
    """
    params = params or SurrogateParams()
    cfg = cfg or SolverConfig()
    A = as_matrix(A)
    b = as_vector(b, "b")
    _check_system(A, b, solve_equality)

    start = l1_min_equality(A, b)
    result = _fixed_point_run(A, b, _snap(start, cfg.zero_tol), params, cfg)
    if cfg.smoothing:
        smoothed = _fixed_point_run(A, b, _snap(smoothed_start(A, b, start, params, cfg), cfg.zero_tol), params, cfg)
        plain, lifted = h_norm(result.x, params), h_norm(smoothed.x, params)
        if lifted < plain - 1e-9 * max(1.0, plain):
            debug(f"smoothed start wins: objective {lifted:.6g} against {plain:.6g}", solve_equality)
            result = smoothed

    if not result.converged:
        warn(f"Stopped after {cfg.max_iters} iterations without reaching step_tol {cfg.step_tol:g}.", solve_equality)
    debug(
        f"{result.iterations} iterations, objective {result.objective_trace[-1]:.6g}, support {len(result.support)}, "
        f"fixed point residual {result.fixed_point_residual:.3g}",
        solve_equality,
    )
    return result


def weighted_l1_start(A: DenseMatrix, b: Vector) -> Vector:
    """
    Starting point of the constrained solver: the ℓ1 minimizer with column-norm weights, i.e. plain ℓ1 on the
    normalized columns. Falls back to the minimum-norm least squares fit when b is out of reach.
    """
    norms = np.linalg.norm(A, axis=0)
    norms[norms == 0] = 1.0
    try:
        return l1_min_equality(A, b, weights=norms)
    except Infeasible:
        return least_squares_on_support(A, range(A.shape[1]), b)


def _prune(A: DenseMatrix, b: Vector, x: Vector) -> Vector:
    mag = np.abs(x)
    S = np.flatnonzero(mag > PRUNE_RATIO * mag.max())
    candidate = least_squares_on_support(A, S, b)
    bound = max(1e-9 * feasibility_scale(b), float(np.linalg.norm(A @ x - b)))
    if float(np.linalg.norm(A @ candidate - b)) <= bound:
        return candidate
    return x


def smoothed_start(A: Any, b: Any, x: Any, params: SurrogateParams | None = None, cfg: SolverConfig | None = None) -> Vector:
    """
    Reweighting with every magnitude lifted by eps * max|x|, eps falling from 1 to 1e-8.

    The lifted weights are positive everywhere, so columns the starting point left at zero can still take over.
    Each level runs until the step is below sqrt(eps) / 100 relative to the iterate. The result is snapped onto its
    dominant entries whenever the least squares fit there reaches b at least as well.

    :param A:           m x n matrix
    :param b:           Right hand side
    :param x:           Starting point, usually an ℓ1 minimizer
    :param params:      Surrogate parameters the weights are taken from
    :param cfg:         Solver settings, only the ridge is used
    """
    params = params or SurrogateParams()
    cfg = cfg or SolverConfig()
    A = as_matrix(A)
    b = as_vector(b, "b")
    x = as_vector(x, "x")
    _check_system(A, b, smoothed_start)

    peak = float(np.max(np.abs(x))) if x.size else 0.0
    if peak == 0.0:
        return x.copy()

    for eps in SMOOTHING_LEVELS:
        for _ in range(SMOOTHING_ITERS):
            _, F = weight_diagonals(np.abs(x) + eps * peak, params, 0.0)
            try:
                x_new = weighted_minnorm_solve(A, F, b, cfg.ridge)
            except SingularSystem:
                debug(f"Lifted step undefined at level {eps:g}.", smoothed_start)
                return _prune(A, b, x)
            change = float(np.linalg.norm(x_new - x))
            x = x_new
            if change <= math.sqrt(eps) / 100.0 * max(1.0, float(np.linalg.norm(x))):
                break
    return _prune(A, b, x)


def solve_constrained(A: Any, b: Any, params: SurrogateParams | None = None, cfg: SolverConfig | None = None) -> SolveResult:
    """
    Thresholded variant for ||Ax - b||_inf <= epsilon, ||x||_inf <= eta.

    Every iteration takes one reweighting step, keeps the entries whose magnitude lies in
    [va_low, va_high] and refits b by least squares on them. Stops once that support repeats
    or after `cfg.max_iters` iterations. While the window holds no entry the unthresholded step
    is kept as the next iterate. An infeasible final iterate is returned with its flags set.

    The iteration starts at the column-norm weighted ℓ1 point, passed through `smoothed_start` when `cfg.smoothing` is set.

    :param A:           m x n matrix
    :param b:           Right hand side
    :param params:      Surrogate parameters
    :param cfg:         Solver settings, epsilon, eta and the va window are used here

    :raises EmptySupport:   The unthresholded steps stalled with an empty window and the residual still above epsilon.
    """
    params = params or SurrogateParams()
    cfg = cfg or SolverConfig()
    A = as_matrix(A)
    b = as_vector(b, "b")
    _check_system(A, b, solve_constrained)
    n = A.shape[1]

    if float(np.max(np.abs(b))) <= cfg.epsilon:
        zero = np.zeros(n)
        return SolveResult(zero, (0.0,), 0, True, (), 0.0, SolveMode.CONSTRAINED, (zero,), (), True, True)

    x = weighted_l1_start(A, b)
    if cfg.smoothing:
        x = smoothed_start(A, b, x, params, cfg)
    x = _snap(x, cfg.zero_tol)
    trace = [h_norm(x, params)]
    iterates = [x]
    pairs: list[tuple[float, float]] = []
    previous: IndexSet | None = None
    converged = False
    empty = False
    iterations = 0

    def residual(v: Vector) -> float:
        return float(np.max(np.abs(A @ v - b)))

    for _ in range(cfg.max_iters):
        H, F = weight_diagonals(x, params, cfg.zero_tol)
        try:
            step = weighted_minnorm_solve(A, F, b, cfg.ridge)
        except SingularSystem:
            debug("Reweighting step is undefined, keeping the current iterate.", solve_constrained)
            break
        iterations += 1
        mag = np.abs(step)
        S = tuple(int(i) for i in np.flatnonzero((mag >= cfg.va_low) & (mag <= cfg.va_high)))
        empty = not S

        if empty:
            x_new = _snap(step, cfg.zero_tol)
        else:
            x_new = _snap(least_squares_on_support(A, S, b), cfg.zero_tol)
        pairs.append((float(x_new @ (H.entries * x_new)), float(x @ (H.entries * x))))
        trace.append(h_norm(x_new, params))
        iterates.append(x_new)
        change = _relative_change(x_new, x)
        x = x_new

        if empty:
            previous = None
            if change <= cfg.step_tol:
                converged = residual(x) <= cfg.epsilon
                break
            continue
        if S == previous:
            converged = True
            break
        previous = S

    if empty and residual(x) > cfg.epsilon:
        raise quiet(
            f"No entry within [{cfg.va_low}, {cfg.va_high}] after {iterations} iterations, residual {residual(x):.3g} above {cfg.epsilon:.3g}.",
            solve_constrained,
            EmptySupport,
        )

    residual_inf = residual(x)
    residual_ok = residual_inf <= cfg.epsilon * (1 + 1e-9) + 1e-15 * feasibility_scale(b)
    box_ok = float(np.max(np.abs(x))) <= cfg.eta
    if not (residual_ok and box_ok):
        debug(f"Returning an infeasible iterate: residual {residual_inf:.3g} (epsilon {cfg.epsilon:.3g}), max |x| {np.max(np.abs(x)):.3g}.", solve_constrained)

    return SolveResult(
        x=x,
        objective_trace=tuple(trace),
        iterations=iterations,
        converged=converged,
        support=_support(x, cfg.zero_tol),
        fixed_point_residual=fixed_point_residual(A, b, x, params, cfg),
        mode=SolveMode.CONSTRAINED,
        iterates=tuple(iterates),
        quadratic_pairs=tuple(pairs),
        residual_ok=residual_ok,
        box_ok=box_ok,
    )


def omp(A: Any, b: Any, k: int, tol: float = 1e-9) -> Vector:
    """
    Orthogonal matching pursuit. Picks the column most correlated with the residual (after column normalization)
    and refits on the chosen set until k columns are chosen or the residual vanishes.

    :param A:       m x n matrix
    :param b:       Right hand side
    :param k:       Maximum number of columns
    :param tol:     Stops once ||Ax - b|| <= tol * max(1, ||b||)
    """
    A = as_matrix(A)
    b = as_vector(b, "b")
    _check_system(A, b, omp)
    if k < 1:
        raise error("k must be positive.", omp, InvalidParams)
    n = A.shape[1]
    norms = np.linalg.norm(A, axis=0)
    norms[norms == 0] = np.inf
    bound = tol * feasibility_scale(b)

    chosen: list[int] = []
    x = np.zeros(n)
    residual = b.copy()
    while len(chosen) < min(k, n) and np.linalg.norm(residual) > bound:
        scores = np.abs(A.T @ residual) / norms
        scores[chosen] = -1.0
        chosen.append(int(np.argmax(scores)))
        x = least_squares_on_support(A, chosen, b)
        residual = b - A @ x
    return x
