"""Small dense linear-algebra and integration kernel shared by all modules.

Everything here is deterministic: identical inputs produce identical outputs
on one platform. Eigendecomposition and linear solves are backed by LAPACK
through numpy; the fixed-step integrator and quadrature are written out
explicitly so traces are reproducible and comparable across runs.
"""

from __future__ import annotations

import numpy as np


class NotSymmetricError(ValueError):
    """Matrix handed to the symmetric eigensolver is not symmetric."""


class SingularMatrixError(ValueError):
    """Linear system is singular or too ill-conditioned to solve reliably."""


class NonpositiveStepError(ValueError):
    """Integrator step size must be strictly positive."""


def eig_symmetric(m: np.ndarray, asym_tol: float = 1e-12):
    """Eigendecomposition of a symmetric matrix.

    Returns (eigenvalues ascending, eigenvectors as orthonormal columns).
    The input is checked for symmetry (relative asymmetry <= asym_tol) and
    explicitly symmetrized before factoring, so rounding noise in the input
    cannot leak into the result.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise NotSymmetricError(f"expected a square matrix, got shape {m.shape}")
    scale = np.abs(m).max()
    if scale > 0 and np.abs(m - m.T).max() > asym_tol * scale:
        raise NotSymmetricError(
            f"matrix asymmetry {np.abs(m - m.T).max():.3e} exceeds "
            f"{asym_tol:.1e} * max|entry|"
        )
    w, v = np.linalg.eigh((m + m.T) / 2.0)
    return w, v


def solve(m: np.ndarray, rhs: np.ndarray, residual_tol: float = 1e-9) -> np.ndarray:
    """Solve m @ x = rhs for a numerically nonsingular square matrix.

    The solution is verified a posteriori: if the residual exceeds
    residual_tol * (|m| * |x| + |rhs|) the system is reported singular.
    """
    m = np.asarray(m, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    if rhs.shape[0] != m.shape[0]:
        raise ValueError(f"rhs length {rhs.shape[0]} != matrix size {m.shape[0]}")
    try:
        x = np.linalg.solve(m, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(str(exc)) from exc
    m_norm = np.linalg.norm(m)
    resid = np.linalg.norm(m @ x - rhs)
    bound = residual_tol * (m_norm * np.linalg.norm(x) + np.linalg.norm(rhs))
    if not np.isfinite(x).all() or resid > max(bound, 1e-300):
        raise SingularMatrixError(
            f"solve residual {resid:.3e} exceeds bound {bound:.3e}"
        )
    return x


def rk4_integrate(deriv, x0: np.ndarray, t0: float, t1: float, dt: float):
    """Integrate dx/dt = deriv(t, x) with classical fixed-step RK4.

    The final partial step is shortened to land exactly on t1; the returned
    trajectory includes both endpoints.

    Returns (times, states) with states[k] the state at times[k].
    """
    if dt <= 0:
        raise NonpositiveStepError(f"dt must be > 0, got {dt}")
    span = t1 - t0
    n_full = int(np.floor(span / dt + 1e-12))
    remainder = span - n_full * dt
    if remainder <= 1e-12 * max(abs(span), dt):
        remainder = 0.0
    x = np.array(x0, dtype=float)
    times = [t0]
    states = [x.copy()]
    for k in range(n_full + (1 if remainder else 0)):
        t = t0 + k * dt
        h = dt if k < n_full else remainder
        k1 = deriv(t, x)
        k2 = deriv(t + h / 2.0, x + (h / 2.0) * k1)
        k3 = deriv(t + h / 2.0, x + (h / 2.0) * k2)
        k4 = deriv(t + h, x + h * k3)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        times.append(t1 if k == n_full + (1 if remainder else 0) - 1 else t + h)
        states.append(x.copy())
    if len(times) == 1:
        # zero-length window: still report both endpoints
        times.append(t1)
        states.append(x.copy())
    return np.array(times), np.array(states)


def rk4_step_operator(a: np.ndarray, dt: float):
    """One-step map of classical RK4 for the affine system dx/dt = a x + u.

    For constant u over the step, RK4 is exactly x' = phi @ x + gamma @ u with

        phi   = I + h a + h^2 a^2/2 + h^3 a^3/6 + h^4 a^4/24
        gamma = h I + h^2 a/2 + h^3 a^2/6 + h^4 a^3/24

    Precomputing (phi, gamma) makes long linear-system runs cheap while
    producing the same classical fourth-order update.
    """
    if dt <= 0:
        raise NonpositiveStepError(f"dt must be > 0, got {dt}")
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    eye = np.eye(n)
    a2 = a @ a
    a3 = a2 @ a
    a4 = a3 @ a
    phi = eye + dt * a + dt**2 / 2.0 * a2 + dt**3 / 6.0 * a3 + dt**4 / 24.0 * a4
    gamma = dt * eye + dt**2 / 2.0 * a + dt**3 / 6.0 * a2 + dt**4 / 24.0 * a3
    return phi, gamma


def l2_norm_squared(times: np.ndarray, values: np.ndarray, reference) -> float:
    """Trapezoid approximation of the integral of |y(t) - ref|^2 over the trace.

    values has one row per sample; reference is a constant vector (or scalar)
    subtracted from every row.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if times.size < 2:
        raise ValueError("need at least 2 samples for quadrature")
    dev = values - np.asarray(reference, dtype=float)
    if dev.ndim == 1:
        dev = dev[:, None]
    integrand = np.sum(dev * dev, axis=1)
    dt = np.diff(times)
    return float(np.sum(dt * (integrand[:-1] + integrand[1:]) / 2.0))


def lyapunov_residual(a: np.ndarray, x: np.ndarray, c: np.ndarray) -> float:
    """Frobenius norm of a^T x + x a + c^T c."""
    a = np.asarray(a, dtype=float)
    x = np.asarray(x, dtype=float)
    c = np.asarray(c, dtype=float)
    if a.shape[0] != a.shape[1] or x.shape != a.shape:
        raise ValueError(f"dimension mismatch: a {a.shape}, x {x.shape}")
    if c.shape[1] != a.shape[0]:
        raise ValueError(f"dimension mismatch: c {c.shape} vs a {a.shape}")
    return float(np.linalg.norm(a.T @ x + x @ a + c.T @ c))
