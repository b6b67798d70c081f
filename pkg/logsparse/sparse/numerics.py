from typing import Any
from collections.abc import Iterable

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve, lstsq

from ..utils.log import debug, error, quiet
from ..utils.errors import DimensionMismatch, Infeasible, InvalidParams, SingularSystem
from ..utils.types import DenseMatrix, Vector, WeightKind, as_matrix, as_vector
from .surrogate import WeightDiagonal

__all__ = ["weighted_minnorm_solve", "least_squares_on_support", "l1_min_equality", "residual_norm", "feasibility_scale"]

# Gram matrices above this condition number are solved through the ridge fallback.
COND_LIMIT = 1e10
FALLBACK_RIDGE = 1e-12
REFINEMENT_SWEEPS = 5
L1_EPSILONS = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8)
L1_INNER_ITERS = 50


def residual_norm(A: Any, x: Any, b: Any, ord: float = 2) -> float:
    return float(np.linalg.norm(as_matrix(A) @ as_vector(x) - as_vector(b), ord=ord))


def feasibility_scale(b: Vector) -> float:
    """max(1, ||b||), the scale all equality tolerances are relative to."""
    return max(1.0, float(np.linalg.norm(b)))


def _check_system(A: DenseMatrix, b: Vector, caller: Any):
    if A.shape[0] != b.shape[0]:
        raise error(f"Matrix has {A.shape[0]} rows but the right hand side has {b.shape[0]} entries.", caller, DimensionMismatch)


def _weights(f: WeightDiagonal | Any, n: int, caller: Any) -> Vector:
    if isinstance(f, WeightDiagonal):
        if f.kind != WeightKind.F:
            raise error("Expected an F-kind weight diagonal.", caller, InvalidParams)
        f = f.entries
    f = as_vector(f, "weights")
    if f.shape[0] != n:
        raise error(f"Weight diagonal has {f.shape[0]} entries, the matrix {n} columns.", caller, DimensionMismatch)
    if np.any(f < 0):
        raise error("Weight diagonal must be nonnegative.", caller, InvalidParams)
    return f


def weighted_minnorm_solve(A: Any, f: WeightDiagonal | Any, b: Any, ridge: float = 0.0) -> Vector:
    """
    Computes x = F A^T (A F A^T + ridge I)^+ b.

    The Gram matrix is factorized with Cholesky. If that fails or the matrix is badly conditioned,
    a ridge of 1e-12 * trace / m is added and the result is pulled back onto the unregularized system
    with a few sweeps of iterative refinement, which recovers the pseudo-inverse solution for consistent b.

    :param A:           m x n matrix
    :param f:           F-kind weight diagonal or its n entries
    :param b:           Right hand side with m entries
    :param ridge:       Explicit regularization. Kept as part of the solved system.
    """
    A = as_matrix(A)
    b = as_vector(b, "b")
    _check_system(A, b, weighted_minnorm_solve)
    f = _weights(f, A.shape[1], weighted_minnorm_solve)
    if ridge < 0:
        raise error("Ridge must be nonnegative.", weighted_minnorm_solve, InvalidParams)

    m = A.shape[0]
    if not np.any(b):
        return np.zeros(A.shape[1])

    AF = A * f
    gram = AF @ A.T + ridge * np.eye(m)

    factor = None
    if np.linalg.cond(gram) <= COND_LIMIT:
        try:
            factor = cho_factor(gram, check_finite=False)
        except LinAlgError:
            factor = None

    if factor is not None:
        y = cho_solve(factor, b, check_finite=False)
        return AF.T @ y

    trace = float(np.trace(gram))
    fallback = FALLBACK_RIDGE * trace / m
    regularized = gram + fallback * np.eye(m)
    if trace <= 0 or np.linalg.cond(regularized) > 1.0 / np.finfo(np.float64).eps:
        raise quiet("Gram matrix is numerically singular even after regularization.", weighted_minnorm_solve, SingularSystem)
    try:
        factor = cho_factor(regularized, check_finite=False)
    except LinAlgError:
        raise quiet("Regularized Gram matrix could not be factorized.", weighted_minnorm_solve, SingularSystem)

    y = cho_solve(factor, b, check_finite=False)
    scale = feasibility_scale(b)
    for _ in range(REFINEMENT_SWEEPS):
        residual = b - gram @ y
        if np.linalg.norm(residual) <= 1e-14 * scale:
            break
        y = y + cho_solve(factor, residual, check_finite=False)
    return AF.T @ y


def least_squares_on_support(A: Any, S: Iterable[int], b: Any) -> Vector:
    """
    Minimizes ||Ax - b|| over vectors supported on S.
    Rank deficient supports yield the minimum-norm minimizer (column pivoted QR).

    :param A:       m x n matrix
    :param S:       Column indices
    :param b:       Right hand side

    :return:        Full length vector, zero outside S
    """
    A = as_matrix(A)
    b = as_vector(b, "b")
    _check_system(A, b, least_squares_on_support)
    n = A.shape[1]
    S = sorted(set(int(i) for i in S))
    if any(i < 0 or i >= n for i in S):
        raise error(f"Support indices must lie in [0, {n}).", least_squares_on_support, InvalidParams)

    x = np.zeros(n)
    if not S:
        return x
    sol, *_ = lstsq(A[:, S], b, lapack_driver="gelsy", check_finite=False)
    x[S] = sol
    return x


def _weighted_l1(x: Vector, w: Vector) -> float:
    return float(np.sum(w * np.abs(x)))


def l1_min_equality(A: Any, b: Any, tol: float = 1e-9, weights: Any = None) -> Vector:
    """
    Approximates argmin sum_i w_i |x_i| subject to Ax = b.

    Runs reweighted least squares with D = (|x| + eps) / w for a decreasing eps schedule,
    starting from the weighted minimum 2-norm solution, and finally snaps onto the basic solution
    of the dominant entries when that is feasible and does not increase the objective.

    :param A:           m x n matrix
    :param b:           Right hand side in the range of A
    :param tol:         Feasibility tolerance relative to max(1, ||b||)
    :param weights:     Positive per-column weights. All ones when None.
    """
    A = as_matrix(A)
    b = as_vector(b, "b")
    _check_system(A, b, l1_min_equality)
    n = A.shape[1]
    w = np.ones(n) if weights is None else as_vector(weights, "weights")
    if w.shape[0] != n:
        raise error(f"Got {w.shape[0]} weights for {n} columns.", l1_min_equality, DimensionMismatch)
    if np.any(w <= 0):
        raise error("Weights must be positive.", l1_min_equality, InvalidParams)

    if not np.any(b):
        return np.zeros(n)

    bound = tol * feasibility_scale(b)

    def feasible(x: Vector) -> bool:
        return float(np.linalg.norm(A @ x - b)) <= bound

    try:
        x = weighted_minnorm_solve(A, 1.0 / w, b)
    except SingularSystem:
        raise quiet("Right hand side is not reachable, the matrix is degenerate.", l1_min_equality, Infeasible)
    if not feasible(x):
        raise quiet(f"No solution within {bound:.3g} of b: residual {residual_norm(A, x, b):.3g}.", l1_min_equality, Infeasible)

    scale = max(1.0, float(np.max(np.abs(x))))
    for eps in L1_EPSILONS:
        for _ in range(L1_INNER_ITERS):
            try:
                x_new = weighted_minnorm_solve(A, (np.abs(x) + eps * scale) / w, b)
            except SingularSystem:
                break
            change = float(np.linalg.norm(x_new - x))
            x = x_new
            if change <= 1e-10 * max(1.0, float(np.linalg.norm(x))):
                break

    x = _polish(A, b, x, w, feasible)
    if not feasible(x):
        raise quiet(f"Reweighting left the feasible set: residual {residual_norm(A, x, b):.3g}.", l1_min_equality, Infeasible)
    debug(f"l1 value {_weighted_l1(x, w):.6g} with {int(np.count_nonzero(x))} nonzeros", l1_min_equality)
    return x


def _polish(A: DenseMatrix, b: Vector, x: Vector, w: Vector, feasible) -> Vector:
    mag = np.abs(x)
    peak = float(mag.max()) if mag.size else 0.0
    if peak == 0.0:
        return x
    rank = int(np.linalg.matrix_rank(A))
    # stable sort keeps the lower index first on equal magnitudes
    order = np.argsort(-mag, kind="stable")
    S = [int(i) for i in order[:rank] if mag[i] > 1e-4 * peak]
    candidate = least_squares_on_support(A, S, b)
    if feasible(candidate) and _weighted_l1(candidate, w) <= _weighted_l1(x, w) + 1e-8 * max(1.0, _weighted_l1(x, w)):
        return candidate
    return x
