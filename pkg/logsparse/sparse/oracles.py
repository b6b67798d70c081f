from __future__ import annotations

from itertools import combinations
from typing import Any
from dataclasses import dataclass as stdlib_dataclass

import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage
from scipy.optimize import linprog
from scipy.spatial.distance import pdist

from ..utils.log import debug, error
from ..utils.errors import InvalidParams, NonRealRoots, TooLarge
from ..utils.types import IndexSet, Vector, as_matrix, as_vector
from .numerics import _check_system, feasibility_scale, least_squares_on_support

__all__ = ["L0Certificate", "brute_force_l0", "brute_force_l0_constrained", "power_sums", "multiset_from_power_sums"]

MAX_N = 16
ROOT_IMAG_TOL = 1e-6
CLUSTER_TOLERANCES = (0.0, 1e-9, 1e-7, 1e-5, 1e-4, 1e-3, 1e-2)


@stdlib_dataclass(frozen=True)
class L0Certificate:
    """
    Every sparsest solution found by exhaustive support enumeration.

    `supports_tested` counts the supports whose fit was computed, including those of the winning size.
    """

    solutions: tuple[Vector, ...]
    supports: tuple[IndexSet, ...]
    sparsity: int
    supports_tested: int


def _guard(n: int, max_n: int, caller: Any):
    if n > max_n:
        raise error(f"{n} columns exceed the enumeration limit of {max_n}.", caller, TooLarge)


def brute_force_l0(A: Any, b: Any, tol: float = 1e-9, max_n: int = MAX_N) -> L0Certificate:
    """
    Sparsest solutions of Ax = b.

    Supports are tried by increasing size in lexicographic order. A support is accepted when the least squares
    fit on it reaches ||Ax - b|| <= tol * max(1, ||b||) and all its coefficients are nonzero.
    Every accepted support of the first feasible size is returned.

    :raises TooLarge:   More than `max_n` columns.
    """
    A = as_matrix(A)
    b = as_vector(b, "b")
    _check_system(A, b, brute_force_l0)
    n = A.shape[1]
    _guard(n, max_n, brute_force_l0)

    if float(np.linalg.norm(b)) <= tol:
        return L0Certificate((np.zeros(n),), ((),), 0, 1)

    bound = tol * feasibility_scale(b)
    tested = 0
    for size in range(1, n + 1):
        solutions: list[Vector] = []
        supports: list[IndexSet] = []
        for S in combinations(range(n), size):
            tested += 1
            x = least_squares_on_support(A, S, b)
            if np.linalg.norm(A @ x - b) > bound:
                continue
            if np.any(np.abs(x[list(S)]) <= tol):
                continue
            solutions.append(x)
            supports.append(S)
        if solutions:
            debug(f"sparsity {size}, {len(solutions)} minimizers after {tested} supports", brute_force_l0)
            return L0Certificate(tuple(solutions), tuple(supports), size, tested)

    # a feasible b always has a solution on the full support
    raise error("No support reproduces b, it is not in the range of A.", brute_force_l0, InvalidParams)


def _chebyshev_fit(A: np.ndarray, S: IndexSet, b: np.ndarray, eta: float) -> tuple[float, Vector]:
    """min ||A_S z - b||_inf subject to |z| <= eta as a linear program in (z, t)."""
    cols = A[:, list(S)]
    m, k = cols.shape
    c = np.zeros(k + 1)
    c[-1] = 1.0
    ones = np.ones((m, 1))
    A_ub = np.vstack([np.hstack([cols, -ones]), np.hstack([-cols, -ones])])
    b_ub = np.concatenate([b, -b])
    bounds = [(-eta, eta)] * k + [(0, None)]
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if res.status != 0:
        return np.inf, np.zeros(k)
    return float(res.x[-1]), res.x[:-1]


def brute_force_l0_constrained(A: Any, b: Any, epsilon: float, eta: float, max_n: int = MAX_N) -> L0Certificate:
    """
    Sparsest x with ||Ax - b||_inf <= epsilon and ||x||_inf <= eta, by support enumeration with a
    Chebyshev fit per support.

    :raises TooLarge:   More than `max_n` columns.
    """
    A = as_matrix(A)
    b = as_vector(b, "b")
    _check_system(A, b, brute_force_l0_constrained)
    n = A.shape[1]
    _guard(n, max_n, brute_force_l0_constrained)
    if epsilon < 0 or eta <= 0:
        raise error("epsilon must be nonnegative and eta positive.", brute_force_l0_constrained, InvalidParams)

    if float(np.max(np.abs(b))) <= epsilon:
        return L0Certificate((np.zeros(n),), ((),), 0, 1)

    slack = 1e-9 * max(1.0, epsilon)
    tested = 0
    for size in range(1, n + 1):
        solutions: list[Vector] = []
        supports: list[IndexSet] = []
        for S in combinations(range(n), size):
            tested += 1
            value, z = _chebyshev_fit(A, S, b, eta)
            if value > epsilon + slack:
                continue
            x = np.zeros(n)
            x[list(S)] = z
            solutions.append(x)
            supports.append(S)
        if solutions:
            return L0Certificate(tuple(solutions), tuple(supports), size, tested)

    raise error(f"No x with |x| <= {eta} reaches the residual bound {epsilon}.", brute_force_l0_constrained, InvalidParams)


def power_sums(v: Any, count: int) -> Vector:
    """(sum v_i, sum v_i^2, ..., sum v_i^count)"""
    if count < 1:
        raise error("count must be positive.", power_sums, InvalidParams)
    v = as_vector(v)
    return np.array([float(np.sum(v**k)) for k in range(1, count + 1)])


def _elementary_symmetric(w: Vector) -> Vector:
    # Newton's identities: k e_k = sum_{i=1}^{k} (-1)^(i-1) e_{k-i} p_i
    n = w.shape[0]
    e = np.zeros(n + 1)
    e[0] = 1.0
    for k in range(1, n + 1):
        e[k] = sum((-1) ** (i - 1) * e[k - i] * w[i - 1] for i in range(1, k + 1)) / k
    return e


def _merge_roots(roots: np.ndarray, tolerance: float) -> np.ndarray:
    if tolerance == 0.0 or roots.shape[0] < 2:
        return roots
    points = np.column_stack([roots.real, roots.imag])
    labels = fcluster(linkage(pdist(points), method="complete"), t=tolerance, criterion="distance")
    merged = roots.copy()
    for label in np.unique(labels):
        members = labels == label
        merged[members] = roots[members].mean()
    return merged


def multiset_from_power_sums(w: Any) -> Vector:
    """
    Recovers the real multiset of size n whose first n power sums are w.

    Builds the elementary symmetric polynomials with Newton's identities and takes the roots of
    z^n - e_1 z^(n-1) + e_2 z^(n-2) - ... from the companion matrix. Repeated roots come back from
    the eigenvalue solver as small complex clusters, so clusters are merged at increasing tolerances
    and the merge reproducing w best is kept.

    :return:                Values sorted nonincreasing.
    :raises NonRealRoots:   A root has an imaginary part above 1e-6, w is not a real power sum vector.
    """
    w = as_vector(w)
    n = w.shape[0]
    if n == 0:
        return w.copy()
    e = _elementary_symmetric(w)
    coefficients = np.array([(-1) ** k * e[k] for k in range(n + 1)])
    roots = np.roots(coefficients).astype(np.complex128)
    if roots.shape[0] < n:
        # vanishing leading coefficients of the tail mean zero roots
        roots = np.concatenate([roots, np.zeros(n - roots.shape[0], dtype=np.complex128)])

    scale = max(1.0, float(np.max(np.abs(roots))))
    best: np.ndarray | None = None
    best_error = np.inf
    for tolerance in CLUSTER_TOLERANCES:
        merged = _merge_roots(roots, tolerance * scale)
        err = float(np.max(np.abs(power_sums(merged.real, n) - w) / np.maximum(1.0, np.abs(w))))
        if np.max(np.abs(merged.imag)) <= ROOT_IMAG_TOL and err < best_error:
            best, best_error = merged, err

    if best is None:
        worst = float(np.max(np.abs(_merge_roots(roots, CLUSTER_TOLERANCES[-1] * scale).imag)))
        raise error(f"Power sums belong to no real multiset, imaginary part {worst:.3g}.", multiset_from_power_sums, NonRealRoots)
    return np.sort(best.real)[::-1].copy()
