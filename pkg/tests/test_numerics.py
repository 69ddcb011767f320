"""Tests for the shared linear-algebra and integration kernel."""

import numpy as np
import pytest

from bittide_sim.numerics import (NonpositiveStepError, NotSymmetricError,
                                  SingularMatrixError, eig_symmetric,
                                  l2_norm_squared, lyapunov_residual,
                                  rk4_integrate, rk4_step_operator, solve)


class TestEigSymmetric:
    def test_identity(self):
        w, v = eig_symmetric(np.eye(3))
        assert np.allclose(w, [1.0, 1.0, 1.0])
        assert np.allclose(v @ v.T, np.eye(3), atol=1e-12)

    def test_diagonal_sorted_ascending(self):
        w, v = eig_symmetric(np.diag([3.0, 1.0, 2.0]))
        assert np.allclose(w, [1.0, 2.0, 3.0])
        # eigenvectors are signed permutation columns
        assert np.allclose(np.abs(v), np.eye(3)[:, [1, 2, 0]], atol=1e-12)

    def test_reconstruction_random(self):
        rng = np.random.RandomState(7)
        m = rng.randn(20, 20)
        m = (m + m.T) / 2
        w, v = eig_symmetric(m)
        resid = np.linalg.norm(v @ np.diag(w) @ v.T - m)
        assert resid <= 1e-9 * np.linalg.norm(m)
        assert np.linalg.norm(v.T @ v - np.eye(20)) <= 1e-10

    def test_rejects_asymmetric(self):
        m = np.array([[1.0, 2.0], [0.0, 1.0]])
        with pytest.raises(NotSymmetricError):
            eig_symmetric(m)

    def test_rejects_nonsquare(self):
        with pytest.raises(NotSymmetricError):
            eig_symmetric(np.ones((2, 3)))


class TestSolve:
    def test_identity(self):
        rhs = np.array([3.0, -1.0, 2.0])
        assert np.allclose(solve(np.eye(3), rhs), rhs)

    def test_diagonal(self):
        x = solve(np.diag([2.0, 4.0]), np.array([2.0, 4.0]))
        assert np.allclose(x, [1.0, 1.0])

    def test_random_residual(self):
        rng = np.random.RandomState(3)
        m = rng.randn(10, 10) + 10 * np.eye(10)
        rhs = rng.randn(10)
        x = solve(m, rhs)
        resid = np.linalg.norm(m @ x - rhs)
        assert resid <= 1e-9 * (np.linalg.norm(m) * np.linalg.norm(x) + np.linalg.norm(rhs))

    def test_singular_raises(self):
        m = np.array([[1.0, 1.0], [1.0, 1.0]])
        with pytest.raises(SingularMatrixError):
            solve(m, np.array([1.0, 0.0]))


class TestRk4:
    def test_zero_derivative_constant(self):
        times, states = rk4_integrate(lambda t, x: np.zeros_like(x),
                                      np.array([2.0, -1.0]), 0.0, 1.0, 0.1)
        assert np.allclose(states, states[0])
        assert times[0] == 0.0 and times[-1] == 1.0

    def test_exponential_decay(self):
        times, states = rk4_integrate(lambda t, x: -x, np.array([1.0]), 0.0, 1.0, 1e-3)
        assert abs(states[-1, 0] - np.exp(-1.0)) < 1e-8

    def test_fourth_order_convergence(self):
        # halving dt shrinks the error roughly 16x on a smooth linear system
        a = np.array([[0.0, 1.0], [-1.0, 0.0]])
        x0 = np.array([1.0, 0.0])
        exact = np.array([np.cos(2.0), -np.sin(2.0)])

        def err(dt):
            _, states = rk4_integrate(lambda t, x: a @ x, x0, 0.0, 2.0, dt)
            return np.linalg.norm(states[-1] - exact)

        ratio = err(0.02) / err(0.01)
        assert 12.0 < ratio < 20.0

    def test_partial_final_step(self):
        times, _ = rk4_integrate(lambda t, x: -x, np.array([1.0]), 0.0, 0.55, 0.1)
        assert times[-1] == pytest.approx(0.55, abs=0)
        assert len(times) == 7  # 5 full steps + shortened final + t0

    def test_nonpositive_step(self):
        with pytest.raises(NonpositiveStepError):
            rk4_integrate(lambda t, x: x, np.array([1.0]), 0.0, 1.0, 0.0)


class TestRk4StepOperator:
    def test_matches_generic_integrator(self):
        rng = np.random.RandomState(11)
        a = rng.randn(4, 4) * 0.3
        u = rng.randn(4)
        x0 = rng.randn(4)
        dt = 0.05
        phi, gamma = rk4_step_operator(a, dt)
        _, states = rk4_integrate(lambda t, x: a @ x + u, x0, 0.0, dt, dt)
        assert np.allclose(phi @ x0 + gamma @ u, states[-1], rtol=1e-12, atol=1e-13)

    def test_nonpositive_step(self):
        with pytest.raises(NonpositiveStepError):
            rk4_step_operator(np.eye(2), -1.0)


class TestL2NormSquared:
    def test_constant_equals_reference(self):
        t = np.linspace(0, 5, 100)
        y = np.full((100, 3), 2.0)
        assert l2_norm_squared(t, y, np.full(3, 2.0)) == 0.0

    def test_exponential_integral(self):
        t = np.arange(0.0, 20.0 + 1e-9, 1e-3)
        y = np.exp(-t)
        val = l2_norm_squared(t, y, 0.0)
        assert abs(val - 0.5) < 1e-4

    def test_quadratic_scaling(self):
        t = np.linspace(0, 3, 500)
        y = np.sin(t)[:, None]
        base = l2_norm_squared(t, y, np.zeros(1))
        assert l2_norm_squared(t, 3.0 * y, np.zeros(1)) == pytest.approx(9.0 * base)

    def test_second_order_convergence(self):
        # halving the grid spacing shrinks the trapezoid error roughly 4x
        exact = 0.5 * (1.0 - np.exp(-8.0))  # integral of e^{-2t} over [0, 4]

        def err(n):
            t = np.linspace(0.0, 4.0, n + 1)
            return abs(l2_norm_squared(t, np.exp(-t), 0.0) - exact)

        ratio = err(200) / err(400)
        assert 3.5 < ratio < 4.5

    def test_too_few_samples(self):
        with pytest.raises(ValueError):
            l2_norm_squared(np.array([0.0]), np.array([[1.0]]), np.zeros(1))


class TestLyapunovResidual:
    def test_exact_solution(self):
        a = -0.5 * np.eye(3)
        assert lyapunov_residual(a, np.eye(3), np.eye(3)) == pytest.approx(0.0, abs=1e-15)

    def test_perturbed_nonzero(self):
        a = -0.5 * np.eye(3)
        eps = 1e-6
        resid = lyapunov_residual(a, np.eye(3) + eps * np.eye(3), np.eye(3))
        assert resid == pytest.approx(eps * np.linalg.norm(a + a.T), rel=1e-9)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            lyapunov_residual(np.eye(3), np.eye(2), np.eye(3))
        with pytest.raises(ValueError):
            lyapunov_residual(np.eye(3), np.eye(3), np.ones((2, 4)))
