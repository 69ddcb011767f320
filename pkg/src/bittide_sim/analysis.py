"""Closed-form stability and performance layer.

For positive gains the reduced dynamics are Hurwitz, and the L2 norms of the
frequency deviation and relative occupancy have exact values

    |omega - omega_ss|^2 = q / (2 a)        q = omega_u^T Lpinv omega_u
    |delta|^2            = q / (2 a b)

with a the proportional gain and b the scaled integral gain. The quadratic
form q reduces to the resistance distance R_ij when exactly two nodes are
perturbed symmetrically, and is maximized over a norm ball by the Fiedler
vector. Stability is certified two independent ways: eigenvalue abscissa of
the reduced matrix, and explicit positive-definite Lyapunov solutions whose
residuals are checked numerically.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .graph import SpectralData, fiedler_vector, resistance_distance
from .numerics import l2_norm_squared, lyapunov_residual
from .ode import Gains, OdeTrace, ReducedSystem


class PositivityViolationError(RuntimeError):
    """A Lyapunov solution that must be positive definite is not."""


class InsufficientHorizonWarning(UserWarning):
    """Empirical norm integral likely truncated too early."""


@dataclass(frozen=True)
class HurwitzResult:
    is_hurwitz: bool
    spectral_abscissa: float


def hurwitz_check(a_hat: np.ndarray, tol: float | None = None) -> HurwitzResult:
    """Stability via the eigenvalue abscissa of the reduced system matrix.

    Hurwitz iff the maximum real part stays below -tol, with tol defaulting
    to 1e-10 * |a_hat|_F to absorb rounding on the imaginary axis.
    """
    a_hat = np.asarray(a_hat, dtype=float)
    if tol is None:
        tol = 1e-10 * float(np.linalg.norm(a_hat))
    try:
        eigs = np.linalg.eigvals(a_hat)
    except np.linalg.LinAlgError:
        # non-converged eigenvalue iteration counts as a stability failure
        return HurwitzResult(is_hurwitz=False, spectral_abscissa=float("nan"))
    abscissa = float(np.max(eigs.real))
    return HurwitzResult(is_hurwitz=bool(abscissa < -tol), spectral_abscissa=abscissa)


@dataclass(frozen=True)
class LyapunovCertificate:
    """Explicit Lyapunov solutions for the reduced loop and their residuals.

    x1 certifies the frequency-deviation norm, x2 the occupancy norm, and
    their sum solves the joint equation with the stacked output matrix;
    positive definiteness of the sum independently witnesses stability.
    """

    x1: np.ndarray
    x2: np.ndarray
    residual1: float
    residual2: float
    residual_sum: float
    min_eig_x1: float
    min_eig_x2: float

    @property
    def relative_residuals(self):
        return (self.residual1, self.residual2, self.residual_sum)


def build_lyapunov_certificate(reduced: ReducedSystem, sd: SpectralData,
                               gains: Gains) -> LyapunovCertificate:
    """Assemble the block Lyapunov solutions and verify them numerically.

    With L the reduced Laplacian, a, b the gains, and I the identity:

        x1 = [[a/2 L + b/(2a) I,  -b/2 I      ],
              [-b/2 I,             b^2/(2a) L^-1]]
        x2 = [[1/(2a) I,  0            ],
              [0,         b/(2a) L^-1  ]]

    Residuals are reported relative to |C^T C|_F for each output block.
    """
    lap_hat = sd.reduced_laplacian
    n1 = lap_hat.shape[0]
    a = gains.k_p
    b = gains.effective_integral_gain
    eye = np.eye(n1)
    lap_hat_inv = np.linalg.inv(lap_hat)
    lap_hat_inv = (lap_hat_inv + lap_hat_inv.T) / 2.0
    x1 = np.block([
        [a / 2.0 * lap_hat + b / (2.0 * a) * eye, -b / 2.0 * eye],
        [-b / 2.0 * eye, b * b / (2.0 * a) * lap_hat_inv],
    ])
    x2 = np.block([
        [1.0 / (2.0 * a) * eye, np.zeros((n1, n1))],
        [np.zeros((n1, n1)), b / (2.0 * a) * lap_hat_inv],
    ])
    r1 = lyapunov_residual(reduced.a_hat, x1, reduced.c1_hat)
    r2 = lyapunov_residual(reduced.a_hat, x2, reduced.c2_hat)
    rs = lyapunov_residual(reduced.a_hat, x1 + x2, reduced.c_hat)
    r1 /= np.linalg.norm(reduced.c1_hat.T @ reduced.c1_hat)
    r2 /= np.linalg.norm(reduced.c2_hat.T @ reduced.c2_hat)
    rs /= np.linalg.norm(reduced.c_hat.T @ reduced.c_hat)
    min1 = float(np.linalg.eigvalsh((x1 + x1.T) / 2.0)[0])
    min2 = float(np.linalg.eigvalsh((x2 + x2.T) / 2.0)[0])
    if min1 <= 0 or min2 <= 0:
        raise PositivityViolationError(
            f"Lyapunov solution not positive definite (min eigs {min1:.3e}, {min2:.3e}); "
            "this indicates an implementation bug, not a valid parameter case"
        )
    return LyapunovCertificate(
        x1=x1, x2=x2, residual1=float(r1), residual2=float(r2),
        residual_sum=float(rs), min_eig_x1=min1, min_eig_x2=min2,
    )


@dataclass(frozen=True)
class PerformanceReport:
    """Closed-form L2 performance of a run: norms scale as q/2a and q/2ab."""

    freq_dev_norm_sq: float
    occupancy_norm_sq: float
    quadratic_form: float
    k_p: float
    integral_gain_scaled: float


def predicted_performance(sd: SpectralData, gains: Gains, omega_u) -> PerformanceReport:
    """Exact L2 norms from the Laplacian pseudo-inverse quadratic form."""
    omega_u = np.asarray(omega_u, dtype=float)
    q = float(omega_u @ sd.pseudo_inverse @ omega_u)
    a = gains.k_p
    b = gains.effective_integral_gain
    return PerformanceReport(
        freq_dev_norm_sq=q / (2.0 * a),
        occupancy_norm_sq=q / (2.0 * a * b),
        quadratic_form=q,
        k_p=a,
        integral_gain_scaled=b,
    )


def two_node_perturbation(sd: SpectralData, gains: Gains, i: int, j: int,
                          alpha: float, base_freq: float = 1.0):
    """Performance when only nodes i and j deviate by +/- alpha from base_freq.

    The quadratic form collapses to alpha^2 * R_ij, so both norms follow
    directly from the resistance distance between the perturbed nodes.
    """
    if i == j:
        raise ValueError("perturbed nodes must differ")
    n = sd.graph.n
    if not (0 <= i < n and 0 <= j < n):
        raise IndexError(f"node index out of range: ({i},{j}) for n={n}")
    omega_u = np.full(n, float(base_freq))
    omega_u[i] += alpha
    omega_u[j] -= alpha
    r_ij = resistance_distance(sd, i, j)
    q = alpha * alpha * r_ij
    a = gains.k_p
    b = gains.effective_integral_gain
    report = PerformanceReport(
        freq_dev_norm_sq=q / (2.0 * a),
        occupancy_norm_sq=q / (2.0 * a * b),
        quadratic_form=q,
        k_p=a,
        integral_gain_scaled=b,
    )
    return omega_u, report


@dataclass(frozen=True)
class WorstCaseResult:
    """Worst frequency distribution on the |omega_u| <= gamma ball."""

    omega_u: np.ndarray
    attained_quadratic_form: float
    degenerate: bool


def worst_case_frequency(sd: SpectralData, gamma: float) -> WorstCaseResult:
    """Frequency vector maximizing the performance quadratic form.

    The maximizer of x^T Lpinv x over the gamma-ball is gamma times the
    Fiedler vector, attaining gamma^2 / lambda_2. When lambda_2 is repeated
    the maximizer is any unit vector of the eigenspace; the result is
    flagged so callers do not treat the returned one as unique.
    """
    if gamma <= 0:
        raise ValueError(f"gamma must be > 0, got {gamma}")
    fied = fiedler_vector(sd)
    return WorstCaseResult(
        omega_u=gamma * fied.vector,
        attained_quadratic_form=gamma * gamma / fied.algebraic_connectivity,
        degenerate=fied.degenerate,
    )


def empirical_norms(trace: OdeTrace, omega_ss, spectral_abscissa: float | None = None,
                    tail_tol: float = 1e-3):
    """Quadrature estimates of the two performance integrals from a trace.

    Integrates |omega(t) - omega_ss|^2 and |delta(t)|^2 over the trace window
    by the composite trapezoid rule. If the estimated truncated tail (decay
    extrapolation of the final integrand) exceeds tail_tol of the integral,
    an InsufficientHorizonWarning is issued.
    """
    omega_ss = np.asarray(omega_ss, dtype=float)
    freq_sq = l2_norm_squared(trace.times, trace.omega, omega_ss)
    occ_sq = l2_norm_squared(trace.times, trace.delta, np.zeros(trace.delta.shape[1]))
    dev_end = trace.omega[-1] - omega_ss
    tail_rate = None
    if spectral_abscissa is not None and spectral_abscissa < 0:
        tail_rate = -spectral_abscissa
    for integral, final_sq, label in (
        (freq_sq, float(dev_end @ dev_end), "frequency deviation"),
        (occ_sq, float(trace.delta[-1] @ trace.delta[-1]), "occupancy"),
    ):
        if integral <= 0 or tail_rate is None:
            continue
        tail = final_sq / (2.0 * tail_rate)
        if tail > tail_tol * integral:
            warnings.warn(
                f"{label} integral tail estimate {tail:.3e} exceeds "
                f"{tail_tol:.1e} of the integral {integral:.3e}; extend t_end",
                InsufficientHorizonWarning,
                stacklevel=2,
            )
    return freq_sq, occ_sq
