import math

import numpy as np
import pytest
from pydantic import ValidationError

from logsparse import (
    SurrogateParams,
    WeightKind,
    h_derivative,
    h_norm,
    h_value,
    nonzero_count_limit,
    rearrangement,
    sine_surrogate,
    weight_diagonals,
)


class TestParams:
    def test_defaults(self):
        params = SurrogateParams()
        assert params.p == 0.1
        assert params.q == 1.0

    @pytest.mark.parametrize("p, q", [(0.0, 1.0), (-1.0, 0.5), (0.1, 0.0), (0.1, 1.5)])
    def test_rejects_out_of_range(self, p, q):
        with pytest.raises(ValidationError):
            SurrogateParams(p=p, q=q)


class TestValue:
    def test_zero(self):
        assert h_value(0.0, SurrogateParams(p=0.3, q=0.5)) == 0.0

    def test_known_value(self):
        assert h_value(1.0, SurrogateParams(p=0.1, q=1.0)) == pytest.approx(math.log(11.0))

    def test_normalization_limit(self):
        p = 1e-6
        assert h_value(1.0, SurrogateParams(p=p, q=1.0)) / math.log1p(1.0 / p) == pytest.approx(1.0, abs=1e-6)

    def test_even_and_increasing(self, rng):
        params = SurrogateParams(p=0.05, q=0.7)
        x = np.sort(rng.uniform(0.0, 10.0, 200))
        values = h_value(x, params)
        np.testing.assert_allclose(values, h_value(-x, params))
        assert np.all(np.diff(values) >= 0)

    def test_subadditive(self, rng):
        for _ in range(50):
            params = SurrogateParams(p=10.0 ** rng.uniform(-4, 1), q=rng.uniform(0.1, 1.0))
            x, y = rng.uniform(0.0, 5.0, 2)
            assert h_value(x + y, params) <= h_value(x, params) + h_value(y, params) + 1e-12

    def test_quadratic_majorization(self, rng):
        for _ in range(200):
            params = SurrogateParams(p=10.0 ** rng.uniform(-3, 0), q=rng.uniform(0.2, 1.0))
            alpha = rng.uniform(0.01, 5.0)
            x = rng.uniform(0.0, 5.0)
            slope = h_derivative(alpha, params)
            lhs = h_value(x, params) - slope / (2 * alpha) * x**2
            rhs = h_value(alpha, params) - alpha * slope / 2
            assert lhs <= rhs + 1e-10

    def test_derivative_matches_finite_difference(self, rng):
        step = 1e-6
        for _ in range(50):
            params = SurrogateParams(p=10.0 ** rng.uniform(-2, 0), q=rng.uniform(0.3, 1.0))
            x = rng.uniform(0.1, 5.0)
            numeric = (h_value(x + step, params) - h_value(x - step, params)) / (2 * step)
            assert numeric == pytest.approx(h_derivative(x, params), rel=1e-6)

    def test_derivative_zero_at_origin(self):
        assert h_derivative(0.0, SurrogateParams()) == 0.0


class TestNorm:
    def test_zero_vector(self):
        assert h_norm(np.zeros(4), SurrogateParams()) == 0.0

    def test_sparse_solution(self):
        assert h_norm([1.0, 0.0, 0.0], SurrogateParams(p=0.1, q=1.0)) == pytest.approx(math.log(11.0))

    def test_identical_entries(self):
        params = SurrogateParams(p=0.2, q=0.5)
        assert h_norm([0.7, -0.7, 0.7], params) == pytest.approx(3 * h_value(0.7, params))

    def test_permutation_and_sign_invariant(self, rng):
        params = SurrogateParams()
        v = rng.normal(size=8)
        assert h_norm(v, params) == pytest.approx(h_norm(-rng.permutation(v), params))

    def test_count_limit(self):
        v = np.array([1.0, 2.0, 0.0, -3.0, 0.0])
        errors = [abs(nonzero_count_limit(v, SurrogateParams(p=p)) - 3) for p in (1e-3, 1e-6, 1e-9)]
        assert all(e < 3 for e in errors)
        assert errors[0] > errors[1] > errors[2]


class TestWeights:
    def test_known_entries(self):
        H, F = weight_diagonals([1.0, 0.0], SurrogateParams(p=0.1, q=1.0))
        assert H.kind == WeightKind.H and F.kind == WeightKind.F
        np.testing.assert_allclose(H.entries, [1 / 1.1, 0.0])
        np.testing.assert_allclose(F.entries, [1.1, 0.0])

    def test_reciprocal_on_support(self, rng):
        v = rng.normal(size=10)
        v[[2, 5]] = 0.0
        H, F = weight_diagonals(v, SurrogateParams(p=0.01, q=0.6))
        support = v != 0
        np.testing.assert_allclose(H.entries[support] * F.entries[support], 1.0)
        assert np.all(H.entries[~support] == 0) and np.all(F.entries[~support] == 0)

    def test_zero_tol(self):
        H, F = weight_diagonals([1e-12, 1e-3], SurrogateParams(), zero_tol=1e-10)
        assert H.entries[0] == 0.0 and F.entries[0] == 0.0
        assert F.entries[1] > 0

    def test_matrix(self):
        _, F = weight_diagonals([2.0, 1.0], SurrogateParams())
        np.testing.assert_allclose(F.matrix, np.diag(F.entries))
        assert len(F) == 2


class TestRearrangement:
    def test_sorted_magnitudes(self):
        np.testing.assert_array_equal(rearrangement([-3.0, 1.0, 2.0]), [3.0, 2.0, 1.0])

    def test_zero(self):
        np.testing.assert_array_equal(rearrangement(np.zeros(3)), np.zeros(3))

    def test_permutation_invariant(self, rng):
        v = rng.normal(size=7)
        np.testing.assert_array_equal(rearrangement(v), rearrangement(rng.permutation(v)))


class TestSineSurrogate:
    def test_zero_at_origin(self):
        assert sine_surrogate(0.0, 1.0) == 0.0

    def test_tends_to_one(self):
        assert sine_surrogate(1e6, 1.0) == pytest.approx(1.0, abs=1e-6)

    def test_breaks_sparsity(self):
        # along the solution line of the example system the sparse point is not the minimizer
        p = 1.0
        found = False
        for n in range(1, 11):
            t = 1.0 / (p * (1.5 * math.pi + 2 * n * math.pi))
            if sine_surrogate(1 + t, p) + 2 * sine_surrogate(t, p) < sine_surrogate(1.0, p):
                found = True
                break
        assert found
