import math

import numpy as np
import pytest
from scipy.optimize import linprog

from logsparse import (
    InvalidParams,
    NscKind,
    OutOfRange,
    SurrogateParams,
    TooLarge,
    TrivialNullSpace,
    ZeroColumn,
    coherence,
    h_value,
    nsc_estimate,
    nsc_ratio,
    omp_guarantee_k,
    rip_constant,
    rip_l1_hypothesis,
    solve_equality,
    stability_bound,
    welch_bound,
)


def normalized(A):
    return A / np.linalg.norm(A, axis=0)


class TestCoherence:
    def test_identity(self):
        assert coherence(np.eye(4)) == 0.0

    def test_repeated_column(self):
        A = np.array([[1.0, 2.0, 0.0], [1.0, 2.0, 1.0]])
        assert coherence(A) == pytest.approx(1.0)

    def test_example(self, example_system):
        A, _ = example_system
        assert coherence(A) == pytest.approx(1 / math.sqrt(2), abs=1e-12)

    def test_zero_column(self):
        with pytest.raises(ZeroColumn):
            coherence(np.array([[1.0, 0.0], [0.0, 0.0]]))

    def test_not_below_welch(self, rng):
        A = rng.normal(size=(5, 12))
        assert coherence(A) >= welch_bound(5, 12) - 1e-12


class TestOmpGuarantee:
    def test_third(self):
        # three unit vectors at pairwise coherence 1/3
        G = np.full((3, 3), 1 / 3) + np.eye(3) * (2 / 3)
        A = np.linalg.cholesky(G).T
        assert coherence(A) == pytest.approx(1 / 3)
        assert omp_guarantee_k(A) == 2

    def test_full_coherence(self):
        assert omp_guarantee_k(np.array([[1.0, 1.0], [0.0, 0.0]])) == 1

    def test_orthonormal(self):
        assert omp_guarantee_k(np.eye(5)) == 5


class TestRip:
    def test_orthonormal(self):
        assert rip_constant(np.eye(4), 1) == pytest.approx(0.0, abs=1e-12)

    def test_scaled_column(self):
        A = np.eye(3)
        A[:, 1] *= math.sqrt(2)
        assert rip_constant(A, 1) == pytest.approx(1.0)

    def test_matches_enumeration(self, rng):
        A = normalized(rng.normal(size=(6, 10)))
        expected = 0.0
        for i in range(10):
            for j in range(i + 1, 10):
                sub = A[:, [i, j]]
                s = np.linalg.svd(sub, compute_uv=False)
                expected = max(expected, s[0] ** 2 - 1, 1 - s[-1] ** 2)
        assert rip_constant(A, 2) == pytest.approx(expected, abs=1e-12)

    def test_nondecreasing(self, rng):
        A = normalized(rng.normal(size=(6, 9)))
        deltas = [rip_constant(A, k) for k in range(1, 5)]
        assert all(b >= a - 1e-12 for a, b in zip(deltas, deltas[1:]))

    def test_guard(self, rng):
        with pytest.raises(TooLarge):
            rip_constant(rng.normal(size=(10, 30)), 2)

    def test_hypothesis_on_orthonormal(self):
        holds, delta = rip_l1_hypothesis(np.eye(6), 2)
        assert holds and delta == pytest.approx(0.0, abs=1e-12)


class TestNsc:
    def test_example_k1(self, example_system):
        A, _ = example_system
        for params in (SurrogateParams(p=0.1), SurrogateParams(p=1e-3, q=0.5), None):
            estimate = nsc_estimate(A, 1, params, n_samples=200)
            assert estimate.value == pytest.approx(0.5, abs=1e-9)
            assert estimate.nullity == 1
            direction = estimate.witness / estimate.witness[0]
            np.testing.assert_allclose(direction, [1.0, 1.0, 1.0], atol=1e-9)
        assert nsc_estimate(A, 1, None).exact
        assert nsc_estimate(A, 1, NscKind.L1).kind == NscKind.L1

    def test_example_k2(self, example_system):
        A, _ = example_system
        assert nsc_estimate(A, 2, SurrogateParams(), n_samples=200).value == pytest.approx(2.0, abs=1e-9)
        assert nsc_estimate(A, 2, None, n_samples=200).value == pytest.approx(2.0, abs=1e-9)

    def test_witness_in_null_space(self, rng):
        A = rng.normal(size=(4, 8))
        estimate = nsc_estimate(A, 2, SurrogateParams(), n_samples=300, seed=3)
        assert np.linalg.norm(A @ estimate.witness) <= 1e-8 * np.linalg.norm(estimate.witness)
        assert nsc_ratio(estimate.witness, 2, SurrogateParams()) == pytest.approx(estimate.value)
        assert estimate.seed == 3 and estimate.n_samples == 300

    def test_defining_inequality_on_witness(self, rng):
        A = rng.normal(size=(4, 8))
        params = SurrogateParams(p=0.05)
        estimate = nsc_estimate(A, 2, params, n_samples=300)
        values = h_value(estimate.witness, params)
        for size in (1, 2):
            for _ in range(20):
                S = rng.choice(8, size, replace=False)
                rest = np.delete(values, S).sum()
                assert values[S].sum() <= estimate.value * rest + 1e-9

    def test_monotone_in_k(self, rng):
        A = rng.normal(size=(5, 9))
        for params in (SurrogateParams(p=0.1), None):
            values = [nsc_estimate(A, k, params, n_samples=300, seed=11).value for k in range(1, 5)]
            assert all(b >= a - 1e-9 for a, b in zip(values, values[1:]))

    def test_surrogate_below_l1(self, rng):
        for _ in range(20):
            A = rng.normal(size=(4, 8))
            params = SurrogateParams(p=10.0 ** rng.uniform(-3, 0), q=rng.uniform(0.3, 1.0))
            for k in (1, 2):
                estimate = nsc_estimate(A, k, params, n_samples=200, seed=int(rng.integers(1000)))
                assert estimate.value <= nsc_ratio(estimate.witness, k) + 1e-9

    def test_l1_estimate_below_lp_value(self, rng):
        # for k = 1 the ℓ1 constant is max_i max_{Az=0, |z|_1 <= 1} z_i / (1 - z_i), solved exactly by one LP per entry
        A = rng.normal(size=(4, 7))
        n = A.shape[1]
        best = 0.0
        for i in range(n):
            for sign in (1.0, -1.0):
                # variables z+ and z-, maximize sign * z_i with sum(z+ + z-) = 1 and A(z+ - z-) = 0
                c = np.zeros(2 * n)
                c[i] = -sign
                c[n + i] = sign
                A_eq = np.vstack([np.hstack([A, -A]), np.ones((1, 2 * n))])
                b_eq = np.concatenate([np.zeros(A.shape[0]), [1.0]])
                res = linprog(c, A_eq=A_eq, b_eq=b_eq, bounds=(0, None), method="highs")
                peak = -res.fun
                if peak < 1:
                    best = max(best, peak / (1 - peak))
        estimate = nsc_estimate(A, 1, None, n_samples=2000)
        assert estimate.value <= best + 1e-6
        assert estimate.value >= 0.5 * best

    def test_recoverable_instance_below_one(self):
        # a 4 x 8 matrix built from two orthonormal bases has coherence 1/2, so every 1-sparse vector is the ℓ1 minimizer
        H = np.array([[1, 1, 1, 1], [1, -1, 1, -1], [1, 1, -1, -1], [1, -1, -1, 1]]) / 2.0
        A = np.hstack([np.eye(4), H])
        assert omp_guarantee_k(A) >= 1
        assert nsc_estimate(A, 1, None, n_samples=2000).value < 1

    def test_trivial_null_space(self):
        with pytest.raises(TrivialNullSpace):
            nsc_estimate(np.eye(3), 1, None)

    def test_k_range(self, example_system):
        A, _ = example_system
        with pytest.raises(InvalidParams):
            nsc_estimate(A, 3, None)

    def test_deterministic(self, rng):
        A = rng.normal(size=(4, 8))
        first = nsc_estimate(A, 2, SurrogateParams(), n_samples=100, seed=5)
        second = nsc_estimate(A, 2, SurrogateParams(), n_samples=100, seed=5)
        assert first.value == second.value
        np.testing.assert_array_equal(first.witness, second.witness)


class TestStability:
    def test_values(self):
        assert stability_bound(0.0) == 2.0
        assert stability_bound(0.5) == pytest.approx(6.0)
        assert stability_bound(1 - 1e-6) > 1e6

    @pytest.mark.parametrize("rho", [1.0, 1.5, -0.1])
    def test_out_of_range(self, rho):
        with pytest.raises(OutOfRange):
            stability_bound(rho)

    def test_error_bound(self, rng):
        # one dimensional null space along (1, ..., 1): small dense vectors stay within the bound
        n, k = 6, 1
        A = np.hstack([np.eye(n - 1), -np.ones((n - 1, 1))])
        params = SurrogateParams(p=0.5, q=1.0)
        rho = nsc_estimate(A, k, params, n_samples=500).value
        assert rho < 1
        bound = stability_bound(rho)
        checked = 0
        for _ in range(30):
            x_star = np.zeros(n)
            x_star[0] = 3.0
            x_star[1:] = rng.normal(scale=0.05, size=n - 1)
            y = solve_equality(A, A @ x_star, params).x
            if np.sum(h_value(y, params)) > np.sum(h_value(x_star, params)):
                continue
            checked += 1
            tail = np.sort(h_value(x_star, params))[:-k].sum()
            assert np.sum(h_value(x_star - y, params)) <= bound * tail + 1e-6
        assert checked > 0
