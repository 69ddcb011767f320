"""Continuous-time linear approximation of the synchronization loop.

The closed loop under PI control, with quantization, sampling, and delays
removed, is a linear state-space system driven by the constant uncorrected
frequencies. State is x = (phase offsets, scaled integrator states); outputs
are per-node frequency and per-edge relative buffer occupancy.

The full 2n-state system carries the drift mode (mean phase grows linearly),
which is what the frame-exact model exhibits, so trajectory comparisons use
it. Stability and performance analysis use the reduced system obtained by
projecting onto the disagreement subspace.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import SpectralData
from .numerics import SingularMatrixError, rk4_step_operator, solve


@dataclass(frozen=True)
class Gains:
    """PI controller gains and the controller frequency constant.

    The closed-loop formulas depend on the proportional gain k_p and the
    scaled integral gain omega_c * k_i; both must be positive for stability.
    """

    k_p: float
    k_i: float
    omega_c: float = 1.0

    def __post_init__(self):
        if self.k_p <= 0:
            raise ValueError(f"k_p must be > 0, got {self.k_p}")
        if self.k_i <= 0:
            raise ValueError(f"k_i must be > 0, got {self.k_i}")
        if self.omega_c <= 0:
            raise ValueError(f"omega_c must be > 0, got {self.omega_c}")

    @property
    def effective_integral_gain(self) -> float:
        return self.omega_c * self.k_i


@dataclass(frozen=True)
class OdeSystem:
    """Full 2n-state closed loop: dx/dt = a x + b2 w,  omega = c1 x + w,  delta = c2 x."""

    a: np.ndarray
    b2: np.ndarray
    c1: np.ndarray
    d1: np.ndarray
    c2: np.ndarray
    spectral: SpectralData
    gains: Gains


@dataclass(frozen=True)
class ReducedSystem:
    """Disagreement-subspace dynamics: (2n-2)-state, Hurwitz for positive gains."""

    a_hat: np.ndarray
    b2_hat: np.ndarray
    c1_hat: np.ndarray
    c2_hat: np.ndarray
    c_hat: np.ndarray
    spectral: SpectralData
    gains: Gains


def build_full_system(sd: SpectralData, gains: Gains) -> OdeSystem:
    """Assemble the full closed-loop state-space matrices."""
    lap = sd.laplacian
    b_inc = sd.incidence
    n = sd.graph.n
    a_gain = gains.k_p
    b_gain = gains.effective_integral_gain
    eye = np.eye(n)
    zero = np.zeros((n, n))
    a = np.block([[-a_gain * lap, b_gain * eye], [-lap, zero]])
    b2 = np.vstack([eye, zero])
    c1 = np.hstack([-a_gain * lap, b_gain * eye])
    c2 = np.hstack([-b_inc.T, np.zeros((sd.graph.m, n))])
    return OdeSystem(a=a, b2=b2, c1=c1, d1=eye, c2=c2, spectral=sd, gains=gains)


def build_reduced_system(sd: SpectralData, gains: Gains) -> ReducedSystem:
    """Assemble the reduced dynamics on the disagreement subspace."""
    u1 = sd.disagreement_basis
    lap_hat = sd.reduced_laplacian
    n1 = u1.shape[1]
    a_gain = gains.k_p
    b_gain = gains.effective_integral_gain
    eye = np.eye(n1)
    a_hat = np.block([[-a_gain * lap_hat, b_gain * eye], [-lap_hat, np.zeros((n1, n1))]])
    b2_hat = np.vstack([u1.T, np.zeros((n1, sd.graph.n))])
    c1_hat = np.hstack([-a_gain * sd.laplacian @ u1, b_gain * u1])
    c2_hat = np.hstack([-sd.incidence.T @ u1, np.zeros((sd.graph.m, n1))])
    c_hat = np.vstack([c1_hat, c2_hat])
    return ReducedSystem(
        a_hat=a_hat, b2_hat=b2_hat, c1_hat=c1_hat, c2_hat=c2_hat, c_hat=c_hat,
        spectral=sd, gains=gains,
    )


@dataclass(frozen=True)
class OdeTrace:
    """Sampled trajectory of the full system from x(0) = 0.

    theta_bar is the phase offset per node, omega the per-node frequency,
    delta the per-edge relative buffer occupancy in frame units (directly
    comparable to frame-exact occupancy offsets). state holds the raw x.
    """

    times: np.ndarray
    state: np.ndarray
    theta_bar: np.ndarray
    omega: np.ndarray
    delta: np.ndarray
    omega_u: np.ndarray

    @property
    def omega_avg(self) -> float:
        return float(np.mean(self.omega_u))


def default_time_step(sd: SpectralData, gains: Gains) -> float:
    """Step resolving the fastest closed-loop mode with a 20x safety factor.

    The block structure gives proportional modes at rate k_p*lambda and
    oscillatory modes at rate sqrt(b*lambda); the step tracks the faster.
    """
    lam_max = sd.lambda_max
    a_gain = gains.k_p
    b_gain = gains.effective_integral_gain
    return min(1.0 / (a_gain * lam_max), 1.0 / np.sqrt(b_gain * lam_max)) / 20.0


def simulate_ode(sys: OdeSystem, omega_u, t_end: float, dt: float | None = None) -> OdeTrace:
    """RK4 trajectory of the full system from x(0) = 0.

    The input is constant, so each classical RK4 step reduces to a fixed
    affine update precomputed once; the final partial step lands exactly
    on t_end.
    """
    omega_u = np.asarray(omega_u, dtype=float)
    if omega_u.shape != (sys.spectral.graph.n,):
        raise ValueError(
            f"omega_u has shape {omega_u.shape}, expected ({sys.spectral.graph.n},)"
        )
    if dt is None:
        dt = default_time_step(sys.spectral, sys.gains)
    if dt <= 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    n_full = int(np.floor(t_end / dt + 1e-12))
    remainder = t_end - n_full * dt
    u = sys.b2 @ omega_u
    phi, gamma = rk4_step_operator(sys.a, dt)
    drive = gamma @ u
    dim = sys.a.shape[0]
    count = n_full + (2 if remainder > 1e-12 * max(t_end, 1.0) else 1)
    states = np.empty((count, dim))
    times = np.empty(count)
    x = np.zeros(dim)
    states[0] = x
    times[0] = 0.0
    for k in range(1, n_full + 1):
        x = phi @ x + drive
        states[k] = x
        times[k] = k * dt
    if count == n_full + 2:
        phi_r, gamma_r = rk4_step_operator(sys.a, remainder)
        x = phi_r @ x + gamma_r @ u
        states[-1] = x
    times[-1] = t_end
    omega = states @ sys.c1.T + omega_u
    delta = states @ sys.c2.T
    n = sys.spectral.graph.n
    return OdeTrace(
        times=times, state=states, theta_bar=states[:, :n],
        omega=omega, delta=delta, omega_u=omega_u,
    )


@dataclass(frozen=True)
class SteadyState:
    """Steady state of the reduced dynamics, via closed form and linear solve.

    omega_ss is the common steady-state frequency vector (the average of the
    uncorrected frequencies at every node).
    """

    x_closed: np.ndarray
    x_solved: np.ndarray
    omega_ss: np.ndarray
    rel_gap: float


def steady_state(reduced: ReducedSystem, omega_u) -> SteadyState:
    """Steady state of the reduced system under constant drive.

    The closed form stacks a zero block over -(1/b) U1^T omega_u: transient
    phase modes vanish and the integrators absorb the per-node frequency
    errors (b x2 -> omega_avg - omega_u in node coordinates). The solve-based
    route -A_hat^{-1} B2_hat omega_u must agree to rounding.
    """
    omega_u = np.asarray(omega_u, dtype=float)
    u1 = reduced.spectral.disagreement_basis
    b_gain = reduced.gains.effective_integral_gain
    n1 = u1.shape[1]
    x_closed = np.concatenate([np.zeros(n1), -(1.0 / b_gain) * (u1.T @ omega_u)])
    try:
        x_solved = -solve(reduced.a_hat, reduced.b2_hat @ omega_u)
    except SingularMatrixError:
        raise SingularMatrixError(
            "reduced system matrix is singular; this signals non-positive gains"
        )
    scale = max(np.linalg.norm(x_closed), 1e-300)
    rel_gap = float(np.linalg.norm(x_closed - x_solved) / scale)
    omega_ss = np.full(omega_u.shape, float(np.mean(omega_u)))
    return SteadyState(x_closed=x_closed, x_solved=x_solved, omega_ss=omega_ss, rel_gap=rel_gap)


@dataclass(frozen=True)
class DecoupledCoordinates:
    """Trajectory of the full system expressed in the spectral basis.

    disagreement_phase/integ are the (n-1)-dimensional transient blocks that
    decay to the steady state; agreement_phase is the drift mode growing as
    sqrt(n) * omega_avg * t, and agreement_integ stays identically zero.
    """

    disagreement_phase: np.ndarray
    disagreement_integ: np.ndarray
    agreement_phase: np.ndarray
    agreement_integ: np.ndarray


def decoupled_coordinates(trace: OdeTrace, sd: SpectralData) -> DecoupledCoordinates:
    """Project a full-system trace onto disagreement and agreement components."""
    n = sd.graph.n
    u1 = sd.disagreement_basis
    u2 = np.full(n, 1.0 / np.sqrt(n))
    x1 = trace.state[:, :n]
    x2 = trace.state[:, n:]
    return DecoupledCoordinates(
        disagreement_phase=x1 @ u1,
        disagreement_integ=x2 @ u1,
        agreement_phase=x1 @ u2,
        agreement_integ=x2 @ u2,
    )
