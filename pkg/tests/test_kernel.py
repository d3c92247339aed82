import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from votesig.kernel import (DIRECT_MAX_N, branch_points, even_majority_accuracy, kernel_derivative,
                            majority_accuracy, majority_increment, psi_kernel)

Q_GRID = np.linspace(0.0, 1.0, 101)


def enumerate_majority(q, n):
    """Brute force over all 2^(2n+1) vote vectors."""
    M = 2 * n + 1
    ones = ((np.arange(2**M)[:, None] >> np.arange(M)) & 1).sum(axis=1)
    q = np.asarray(q, dtype=float)[:, None]
    prob = q**ones * (1 - q) ** (M - ones)
    return (prob * (ones >= n + 1)).sum(axis=1)


def enumerate_even(q, n):
    M = 2 * n
    ones = ((np.arange(2**M)[:, None] >> np.arange(M)) & 1).sum(axis=1)
    q = np.asarray(q, dtype=float)[:, None]
    prob = q**ones * (1 - q) ** (M - ones)
    win = np.where(ones > n, 1.0, np.where(ones == n, 0.5, 0.0))
    return (prob * win).sum(axis=1)


class TestMajorityAccuracy:
    def test_known_values(self):
        assert majority_accuracy(0.5, 7) == pytest.approx(0.5, abs=1e-15)
        assert majority_accuracy(0.75, 1) == pytest.approx(0.84375, abs=1e-15)
        assert majority_accuracy(0.75, 2) == pytest.approx(0.896484375, abs=1e-15)
        assert majority_accuracy(0.3, 0) == 0.3

    def test_scalar_in_scalar_out(self):
        assert isinstance(majority_accuracy(0.6, 3), float)
        assert majority_accuracy(Q_GRID, 3).shape == Q_GRID.shape

    @pytest.mark.parametrize("n", range(7))
    def test_matches_enumeration(self, n):
        q = np.linspace(0, 1, 21)
        np.testing.assert_allclose(majority_accuracy(q, n), enumerate_majority(q, n), rtol=0, atol=1e-13)

    def test_reflection(self):
        for n in range(65):
            s = majority_accuracy(Q_GRID, n) + majority_accuracy(1 - Q_GRID, n)
            np.testing.assert_allclose(s, 1.0, atol=4e-16)

    def test_reflection_beta_path(self):
        for n in (65, 200, 5000, 10**6):
            s = majority_accuracy(Q_GRID, n) + majority_accuracy(1 - Q_GRID, n)
            np.testing.assert_allclose(s, 1.0, atol=1e-15)

    def test_direct_and_beta_agree_on_overlap(self):
        q = np.linspace(0.001, 0.999, 301)
        for n in (20, 40, DIRECT_MAX_N):
            a = majority_accuracy(q, n, method="direct")
            b = majority_accuracy(q, n, method="beta")
            np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-300)

    def test_large_n_against_normal_limit(self):
        # P_n(1/2 + z / (2 sqrt(M))) -> Phi(z)
        n = 10**6
        M = 2 * n + 1
        z = 1.3
        val = majority_accuracy(0.5 + z / (2 * math.sqrt(M)), n)
        assert val == pytest.approx(0.5 * math.erfc(-z / math.sqrt(2)), abs=1e-3)

    def test_endpoints_exact(self):
        for n in (0, 10, 100, 10**5):
            assert majority_accuracy(0.0, n) == 0.0
            assert majority_accuracy(1.0, n) == 1.0

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            majority_accuracy(1.2, 3)
        with pytest.raises(ValueError):
            majority_accuracy(0.5, -1)

    @settings(max_examples=200, deadline=None)
    @given(q=st.floats(0.5, 1.0), n=st.integers(0, 150))
    def test_monotone_concave_above_half(self, q, n):
        # log-domain pmf terms carry ~1e-15 relative rounding each
        assert majority_accuracy(q, n + 1) >= majority_accuracy(q, n) - 1e-14
        # concavity on the closed-form increments; value differences drown in rounding near q = 1
        d0, d1 = majority_increment(q, n), majority_increment(q, n + 1)
        assert 0.0 <= d1 <= d0


class TestIncrement:
    def test_examples(self):
        assert majority_increment(0.75, 0) == pytest.approx(0.09375, abs=1e-16)
        assert majority_increment(0.5, 5) == 0.0
        assert majority_increment(0.25, 0) == pytest.approx(-0.09375, abs=1e-16)

    def test_telescoping(self):
        total = Q_GRID.copy()
        for n in range(64):
            total = total + majority_increment(Q_GRID, n)
            np.testing.assert_allclose(total, majority_accuracy(Q_GRID, n + 1), atol=1e-10)

    def test_difference_identity(self):
        for n in range(65):
            d = majority_accuracy(Q_GRID, n + 1) - majority_accuracy(Q_GRID, n)
            np.testing.assert_allclose(majority_increment(Q_GRID, n), d, atol=1e-12)


class TestEvenBudget:
    def test_examples(self):
        assert even_majority_accuracy(0.6, 1) == pytest.approx(0.6, abs=1e-15)
        assert even_majority_accuracy(0.75, 2) == pytest.approx(0.84375, abs=1e-15)
        assert even_majority_accuracy(0.5, 3) == pytest.approx(0.5, abs=1e-15)

    @pytest.mark.parametrize("n", [1, 2, 3, 5])
    def test_matches_enumeration(self, n):
        q = np.linspace(0, 1, 21)
        np.testing.assert_allclose(even_majority_accuracy(q, n), enumerate_even(q, n), atol=1e-13)

    def test_collapse(self):
        for n in range(1, 33):
            np.testing.assert_allclose(even_majority_accuracy(Q_GRID, n),
                                       majority_accuracy(Q_GRID, n - 1), atol=1e-12)

    def test_collapse_large_n(self):
        for n in (100, 1000):
            np.testing.assert_allclose(even_majority_accuracy(Q_GRID, n),
                                       majority_accuracy(Q_GRID, n - 1), atol=1e-12)

    def test_needs_positive_n(self):
        with pytest.raises(ValueError):
            even_majority_accuracy(0.5, 0)


class TestDerivative:
    def test_examples(self):
        assert kernel_derivative(0.5, 1) == pytest.approx(1.5)
        assert kernel_derivative(0.0, 1) == 0.0
        assert kernel_derivative(0.5, 0) == pytest.approx(1.0)

    @pytest.mark.parametrize("n", [0, 1, 4, 30, 200])
    def test_finite_difference(self, n):
        q = np.linspace(0.05, 0.95, 19)
        h = 1e-6
        fd = (majority_accuracy(q + h, n) - majority_accuracy(q - h, n)) / (2 * h)
        np.testing.assert_allclose(kernel_derivative(q, n), fd, rtol=1e-5, atol=1e-8)


class TestBranchPoints:
    def test_examples(self):
        assert branch_points(0.0) == (1.0, 0.0)
        assert branch_points(0.25) == (0.5, 0.5)
        qp, qm = branch_points(3 / 16)
        assert qp == pytest.approx(0.75)
        assert qm == pytest.approx(0.25)

    def test_clamps_roundoff(self):
        qp, qm = branch_points(0.25 + 1e-17)
        assert qp == 0.5 and qm == 0.5

    @given(r=st.floats(0.0, 0.25))
    def test_inverse(self, r):
        qp, qm = branch_points(r)
        assert qp + qm == pytest.approx(1.0, abs=1e-15)
        assert qp * (1 - qp) == pytest.approx(r, abs=1e-15)


class TestPsiKernel:
    def test_examples(self):
        assert psi_kernel(0.0, 3) == pytest.approx(1.0)
        assert psi_kernel(0.25, 1) == pytest.approx(1.5)
        assert psi_kernel(0.25, 0) == pytest.approx(1.0)

    @pytest.mark.parametrize("n", [0, 1, 5, 40, 300])
    def test_continuous_at_quarter(self, n):
        limit = kernel_derivative(0.5, n)
        r = 0.25 - np.array([1e-7, 1e-9, 1e-11, 1e-13])
        np.testing.assert_allclose(psi_kernel(r, n), limit, rtol=1e-6 * max(1, n))

    def test_series_and_quotient_meet(self):
        # either side of the series cutoff
        for n in (1, 10, 100):
            x_lo = 0.25 * (1 - 0.99e-8)
            x_hi = 0.25 * (1 - 1.01e-8)
            assert psi_kernel(x_lo, n) == pytest.approx(psi_kernel(x_hi, n), rel=1e-7)

    def test_level_definition(self):
        r = np.linspace(0, 0.24, 13)
        for n in (0, 2, 7):
            qp, _ = branch_points(r)
            expect = (2 * majority_accuracy(qp, n) - 1) / np.sqrt(1 - 4 * r)
            np.testing.assert_allclose(psi_kernel(r, n), expect, rtol=1e-13)
