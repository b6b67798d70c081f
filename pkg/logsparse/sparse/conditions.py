from __future__ import annotations

import math
from itertools import combinations, islice
from typing import Any
from dataclasses import dataclass as stdlib_dataclass, field

import numpy as np
from scipy.linalg import null_space

from ..utils.log import debug, error
from ..utils.errors import InvalidParams, OutOfRange, TooLarge, TrivialNullSpace, ZeroColumn
from ..utils.types import NscKind, Vector, as_matrix, as_vector
from .surrogate import SurrogateParams, h_value

__all__ = [
    "NscEstimate",
    "coherence",
    "welch_bound",
    "omp_guarantee_k",
    "rip_constant",
    "rip_l1_hypothesis",
    "nsc_ratio",
    "nsc_estimate",
    "stability_bound",
    "RIP_MAX_COLUMNS",
    "RIP_MAX_SUPPORTS",
]

RIP_MAX_COLUMNS = 20
RIP_MAX_SUPPORTS = 200_000
RIP_BATCH = 8192

REFINE_ROUNDS = 50
REFINE_DECAY = 0.5
SCALE_RANGE = (-3.0, 3.0)


@stdlib_dataclass(frozen=True)
class NscEstimate:
    """
    Sampled lower bound on the null space constant.

    :param value:       Best ratio found, a certified lower bound.
    :param witness:     Null space vector attaining `value`.
    :param exact:       The bound is the constant itself (one dimensional null space with the ℓ1 ratio).
    """

    value: float
    witness: Vector
    k: int
    kind: NscKind
    seed: int
    n_samples: int
    nullity: int
    exact: bool = False
    params: SurrogateParams | None = field(default=None, repr=False)


def _column_norms(A: np.ndarray, caller: Any) -> np.ndarray:
    norms = np.linalg.norm(A, axis=0)
    if np.any(norms == 0):
        zero = [int(i) for i in np.flatnonzero(norms == 0)]
        raise error(f"Columns {zero} are identically zero.", caller, ZeroColumn)
    return norms


def coherence(A: Any) -> float:
    """
    Largest |<A_i, A_j>| / (||A_i|| ||A_j||) over distinct columns.

    :raises ZeroColumn:     A column is identically zero.
    """
    A = as_matrix(A)
    norms = _column_norms(A, coherence)
    if A.shape[1] == 1:
        return 0.0
    normalized = A / norms
    gram = np.abs(normalized.T @ normalized)
    np.fill_diagonal(gram, 0.0)
    return float(min(1.0, gram.max()))


def welch_bound(m: int, n: int) -> float:
    """Lowest coherence any m x n matrix can have."""
    if n <= 1 or n <= m:
        return 0.0
    return math.sqrt((n - m) / (m * (n - 1)))


def omp_guarantee_k(A: Any) -> int:
    """
    Largest k with k <= (1 + 1/coherence) / 2, the sparsity greedy pursuit is guaranteed to recover.
    Orthogonal columns report the column count.
    """
    A = as_matrix(A)
    kappa = coherence(A)
    if kappa <= 1e-15:
        return A.shape[1]
    # the small offset absorbs rounding in 1/kappa for exact fractions like 1/3
    return int(math.floor(0.5 * (1.0 + 1.0 / kappa) + 1e-9))


def _check_k(k: int, n: int, caller: Any, allow_n: bool = True):
    upper = n if allow_n else n - 1
    if not 1 <= k <= upper:
        raise error(f"k must lie in [1, {upper}], got {k}.", caller, InvalidParams)


def rip_constant(A: Any, k: int) -> float:
    """
    Restricted isometry constant of order k by enumerating every support of size k.

    :param A:       m x n matrix with n <= 20
    :param k:       Support size

    :raises TooLarge:   More than 20 columns or more than 200000 supports.
    """
    A = as_matrix(A)
    n = A.shape[1]
    if n > RIP_MAX_COLUMNS:
        raise error(f"{n} columns exceed the enumeration limit of {RIP_MAX_COLUMNS}.", rip_constant, TooLarge)
    _check_k(k, n, rip_constant)
    total = math.comb(n, k)
    if total > RIP_MAX_SUPPORTS:
        raise error(f"{total} supports exceed the enumeration limit of {RIP_MAX_SUPPORTS}.", rip_constant, TooLarge)

    gram = A.T @ A
    delta = 0.0
    supports = combinations(range(n), k)
    while batch := list(islice(supports, RIP_BATCH)):
        idx = np.asarray(batch)
        sub = gram[idx[:, :, None], idx[:, None, :]]
        eig = np.linalg.eigvalsh(sub)
        delta = max(delta, float(np.max(np.maximum(eig[:, -1] - 1.0, 1.0 - eig[:, 0]))))
    return delta


def rip_l1_hypothesis(A: Any, k: int) -> tuple[bool, float]:
    """
    Checks delta_2k <= (sqrt(2) - 1) / 2, under which every k-sparse vector is the unique ℓ1 minimizer.

    :return:        (holds, delta_2k)
    """
    delta = rip_constant(A, 2 * k)
    return delta <= (math.sqrt(2.0) - 1.0) / 2.0, delta


def _magnitudes(x: np.ndarray, params: SurrogateParams | None) -> np.ndarray:
    mag = np.abs(x)
    return mag if params is None else h_value(mag, params)


def nsc_ratio(x: Any, k: int, params: SurrogateParams | None = None) -> float:
    """
    Sum of the k largest entry values over the sum of the rest.
    Entry values are |x_i| for ℓ1 or the surrogate for given params.
    A vector with an all-zero remainder scores infinity, the zero vector scores 0.
    """
    values = np.sort(_magnitudes(as_vector(x), params))[::-1]
    top = float(values[:k].sum())
    rest = float(values[k:].sum())
    if rest <= 0.0:
        return math.inf if top > 0.0 else 0.0
    return top / rest


def _ratios(X: np.ndarray, k: int, params: SurrogateParams | None) -> np.ndarray:
    # X holds one candidate per row
    values = -np.sort(-_magnitudes(X, params), axis=1)
    top = values[:, :k].sum(axis=1)
    rest = values[:, k:].sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(rest > 0, top / np.where(rest > 0, rest, 1.0), np.where(top > 0, np.inf, 0.0))
    return out


def _refine(basis: np.ndarray, start: np.ndarray, k: int, params: SurrogateParams | None) -> np.ndarray:
    """Coordinate perturbation ascent on the null space coefficients. Returns the best coefficient vector."""
    best = start.copy()
    best_value = float(_ratios((basis @ best)[None, :], k, params)[0])
    step = 0.5
    for _ in range(REFINE_ROUNDS):
        scale = float(np.linalg.norm(best))
        for j in range(basis.shape[1]):
            for sign in (1.0, -1.0):
                trial = best.copy()
                trial[j] += sign * step * scale
                if not np.any(trial):
                    continue
                value = float(_ratios((basis @ trial)[None, :], k, params)[0])
                if value > best_value:
                    best, best_value = trial, value
        if params is not None:
            for factor in (1.0 + step, 1.0 / (1.0 + step)):
                value = float(_ratios((basis @ (best * factor))[None, :], k, params)[0])
                if value > best_value:
                    best, best_value = best * factor, value
        step *= REFINE_DECAY
    return best


def nsc_estimate(A: Any, k: int, params: SurrogateParams | NscKind | None = None, n_samples: int = 2000, seed: int = 0) -> NscEstimate:
    """
    Lower bound on the null space constant by sampling the null space.

    Candidates are random null space vectors at log-uniform scales in [1e-3, 1e3], the basis vectors
    over a scale grid, and coordinate-perturbation refinements of the best sample for every order up to k.
    The candidate pool for order k contains the pool of every smaller order, so the estimate is monotone in k.

    :param A:           m x n matrix with a nontrivial null space
    :param k:           Support size
    :param params:      Surrogate parameters for the h-constant, None or NscKind.L1 for the ℓ1 constant
    :param n_samples:   Number of random null space vectors
    :param seed:        Seed for the sampler

    :raises TrivialNullSpace:   A has full column rank.
    """
    A = as_matrix(A)
    n = A.shape[1]
    if isinstance(params, NscKind):
        if params == NscKind.H_PQ:
            raise error("The surrogate constant needs SurrogateParams.", nsc_estimate, InvalidParams)
        params = None
    kind = NscKind.L1 if params is None else NscKind.H_PQ
    _check_k(k, n, nsc_estimate, allow_n=False)
    if n_samples < 1:
        raise error("n_samples must be positive.", nsc_estimate, InvalidParams)

    basis = null_space(A)
    nullity = basis.shape[1]
    if nullity == 0:
        raise error("The matrix has full column rank, its null space is trivial.", nsc_estimate, TrivialNullSpace)

    rng = np.random.default_rng(seed)
    directions = rng.standard_normal((n_samples, nullity))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    scales = 10.0 ** rng.uniform(*SCALE_RANGE, size=n_samples)
    coefficients = directions * scales[:, None]

    grid = 10.0 ** np.linspace(-6.0, 6.0, 241)
    basis_coefficients = (np.eye(nullity)[:, None, :] * grid[None, :, None]).reshape(-1, nullity)
    pool = np.vstack([coefficients, basis_coefficients])

    for order in range(1, k + 1):
        values = _ratios(pool @ basis.T, order, params)
        start = pool[int(np.argmax(values))]
        pool = np.vstack([pool, _refine(basis, start, order, params)[None, :]])

    values = _ratios(pool @ basis.T, k, params)
    best = int(np.argmax(values))
    witness = basis @ pool[best]
    value = float(values[best])
    exact = nullity == 1 and kind == NscKind.L1
    debug(f"k={k} {kind.name} estimate {value:.6g} from {pool.shape[0]} candidates, nullity {nullity}", nsc_estimate)
    return NscEstimate(value, witness, k, kind, seed, n_samples, nullity, exact, params)


def stability_bound(rho: float) -> float:
    """
    Error amplification 2(1 + rho) / (1 - rho) for a null space constant rho in [0, 1).

    :raises OutOfRange:     rho outside [0, 1).
    """
    rho = float(rho)
    if not 0.0 <= rho < 1.0:
        raise error(f"rho must lie in [0, 1), got {rho}.", stability_bound, OutOfRange)
    return 2.0 * (1.0 + rho) / (1.0 - rho)
