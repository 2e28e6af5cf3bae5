"""Closed-form costs, regret bounds and competitive-ratio bounds."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import DimensionMismatch, InvalidParameter
from .schedules import (
    CoefficientSchedule,
    lai_gamma_schedule,
    lai_schedule,
    robd_matrix,
)
from .spectral import SpectralMatrix, as_spectral, fixed_point_eigvals

ZERO_SET_TOL = 1e-12


def _cov_matrix(A: SpectralMatrix, Sigma) -> np.ndarray:
    """Covariance expressed in A's eigenbasis, ``P^T Sigma P``."""
    if isinstance(Sigma, SpectralMatrix):
        S = Sigma.reconstruct()
    else:
        S = np.asarray(Sigma, dtype=float)
        if S.ndim == 0:
            S = float(S) * np.eye(A.dim)
    if S.shape != (A.dim, A.dim):
        raise DimensionMismatch(f"covariance shape {S.shape} does not match dim {A.dim}")
    P = A.eigvecs
    return P.T @ S @ P


def _per_round_cov(A: SpectralMatrix, Sigma, T: int) -> np.ndarray:
    """``(T, d, d)`` eigenbasis covariances from one matrix or a per-round list."""
    if isinstance(Sigma, (list, tuple)) or (isinstance(Sigma, np.ndarray) and Sigma.ndim == 3):
        covs = [_cov_matrix(A, S) for S in Sigma]
        if len(covs) != T:
            raise DimensionMismatch(f"{len(covs)} per-round covariances for horizon {T}")
        return np.stack(covs)
    return np.broadcast_to(_cov_matrix(A, Sigma), (T, A.dim, A.dim))


def lai_expected_cost(A, Sigma, T: int, x0_gap=None) -> tuple[float, float]:
    """Expected LAI cost and its fixed-point upper bound.

    ``exact = sum_t 1/2 tr((I - C_t) Sigma_t)``; ``upper`` uses ``C_L`` in
    place of every ``C_t``. ``x0_gap`` is a deterministic offset ``v_0 - x_0``
    added to the first increment (zero under the ``v_0 = x_0`` convention).
    """
    A = as_spectral(A)
    sched = lai_schedule(A, T)
    covs = _per_round_cov(A, Sigma, T)
    diag = np.diagonal(covs, axis1=1, axis2=2).copy()
    if x0_gap is not None:
        g = A.to_eigen(np.asarray(x0_gap, dtype=float))
        diag[0] = diag[0] + g * g
    exact = 0.5 * float(np.sum((1.0 - sched.rho) * diag))
    upper = 0.5 * float(np.sum((1.0 - fixed_point_eigvals(A.eigvals)) * diag))
    return exact, upper


def interpolation_expected_cost(schedule: CoefficientSchedule, Sigma) -> float:
    """Exact expected cost of an interpolation schedule under martingale increments.

    Propagates the tracking-error covariance ``E_t = C_t (E_{t-1} + S_t) C_t``
    in A's eigenbasis; round ``t`` costs
    ``1/2 tr((C_t D_A C_t + (I - C_t)^2)(E_{t-1} + S_t))``. Starts from
    ``x_0 = v_0``.
    """
    A = schedule.A
    covs = _per_round_cov(A, Sigma, schedule.horizon)
    lam = A.eigvals
    E = np.zeros((A.dim, A.dim))
    total = 0.0
    for c, S in zip(schedule.rho, covs):
        M = E + S
        weight = lam * c * c + (1.0 - c) ** 2
        total += 0.5 * float(np.sum(weight * np.diagonal(M)))
        E = c[:, None] * M * c[None, :]
    return total


def static_optimal_expected_cost(lam: float, sigma2: float, T: int) -> float:
    """Expected cost of the best fixed action in hindsight, ``A = lam I``.

    Sum of the hitting-cost term, which grows like ``T^2``, and the expected
    initial move ``1/2 E||x* - x0||^2``. ``sigma2`` is the per-round increment
    variance ``E||v_t - v_{t-1}||^2``.
    """
    if sigma2 == 0:
        return 0.0
    if lam <= 0 or sigma2 < 0 or T < 1:
        raise InvalidParameter("need lam > 0, sigma2 >= 0, T >= 1")
    denom = (1.0 + lam * T) ** 2
    quad = sigma2 * lam**2 / 12.0 * (lam * T + 2.0) * (T - 1) * T * (T + 1) / denom
    linear = lam * sigma2 / (2.0 * denom) * (T * (T + 1) / 2.0)
    move = 0.5 * lam**2 * sigma2 / denom * (T * (T + 1) * (2 * T + 1) / 6.0)
    return quad + linear + move


def w_function(alpha, c):
    """Stationary per-unit-variance cost of fixed interpolation ``c`` at curvature ``alpha``."""
    alpha = np.asarray(alpha, dtype=float)
    c = np.asarray(c, dtype=float)
    return (alpha * c * c + (1.0 - c) ** 2) / (1.0 - c * c)


def _fi_lower(A: SpectralMatrix, Sigma, c: np.ndarray, T: int, zero_set: np.ndarray) -> float:
    S = _cov_matrix(A, Sigma)
    lam_L = fixed_point_eigvals(A.eigvals)
    gap = w_function(A.eigvals, c) - (1.0 - lam_L)
    linear = 0.5 * T * float(np.sum(np.where(zero_set, 0.0, gap * np.diagonal(S))))
    cmax = float(np.max(c))
    correction = cmax**2 / (1.0 - cmax**2) * float(np.trace(S)) / 2.0
    return linear - correction


def fi_regret_lower(A, Sigma, C_eigvals, T: int) -> float:
    """Regret lower bound for fixed interpolation with eigenvalues ``C_eigvals``.

    Coordinates whose eigenvalue equals the fixed point (within 1e-12) are
    excluded from the linear term.
    """
    A = as_spectral(A)
    c = np.broadcast_to(np.asarray(C_eigvals, dtype=float), (A.dim,))
    if np.any(c <= 0) or np.any(c >= 1):
        raise InvalidParameter("FI eigenvalues must lie in (0, 1)")
    zero_set = np.abs(c - fixed_point_eigvals(A.eigvals)) <= ZERO_SET_TOL
    return _fi_lower(A, Sigma, c, T, zero_set)


def robd_regret_lower(A, Sigma, T: int) -> float:
    A = as_spectral(A)
    c = robd_matrix(A).rho[0]
    zero_set = np.abs(A.eigvals - A.lambda_min) <= ZERO_SET_TOL * max(1.0, A.lambda_min)
    return _fi_lower(A, Sigma, c, T, zero_set)


def lai_gamma_regret_upper(A, sigma2: float, gamma: float, variant: str = "min_eig") -> float:
    """Constant regret bound of LAI(gamma) relative to LAI.

    ``min_eig`` assumes identical increment covariance and uses the smallest
    eigenvalue; ``dim_sum`` only needs identical variance and sums over all
    eigenvalues.
    """
    A = as_spectral(A)
    if not 0.0 <= gamma <= 1.0:
        raise InvalidParameter(f"gamma must lie in [0, 1], got {gamma}")

    def term(lam):
        return np.expm1(0.5 * gamma * np.log1p(4.0 / lam)) / (lam + 2.0)

    if variant == "min_eig":
        return sigma2 / 4.0 * float(term(A.lambda_min))
    if variant == "dim_sum":
        return sigma2 / 4.0 * float(np.sum(term(A.eigvals)))
    raise InvalidParameter(f"unknown variant {variant!r}")


def ftm_regret_lower(lambda_max: float, sigma2: float, T: int) -> float:
    """Follow-the-minimizer regret floor, ``lambda_min(C_L) sigma^2 T / 2``."""
    if sigma2 == 0:
        return 0.0
    lam_L_min = float(fixed_point_eigvals(lambda_max))
    return lam_L_min * sigma2 / 2.0 * T


def robd_cr(lambda_min: float) -> float:
    return 1.0 + 0.5 * (math.sqrt(1.0 + 4.0 / lambda_min) - 1.0)


def lai_cr_upper(lambda_min: float) -> float:
    return 1.0 + 1.0 / lambda_min


def lai_gamma_cr_upper(A, gamma: float) -> float:
    """Larger of the two branches of the LAI(gamma) competitive-ratio bound."""
    A = as_spectral(A)
    m, kappa = A.lambda_min, A.condition_number
    first = 0.5 * (math.sqrt(kappa**2 + 4.0 * kappa / m) - kappa)
    second = (2.0 / m) / (math.exp(0.5 * gamma * math.log1p(4.0 / m)) + 1.0)
    return 1.0 + max(first, second)


def lai_gamma_cr_smalllambda(A, gamma: float) -> float:
    """Small-eigenvalue form of the LAI(gamma) bound, valid for gamma in (0, 1]."""
    A = as_spectral(A)
    if not 0.0 < gamma <= 1.0:
        raise InvalidParameter("small-eigenvalue bound needs gamma in (0, 1]")
    m, kappa = A.lambda_min, A.condition_number
    return 1.0 + max(math.sqrt(kappa / m), 2.0 ** (1.0 - gamma) / m ** (1.0 - gamma / 2.0))


def lai1_cr_smalllambda(A) -> float:
    A = as_spectral(A)
    return 1.0 + math.sqrt(A.condition_number / A.lambda_min)


def framework_cr(m: float, alpha: float, beta: float, alpha_prime_min: float, beta_prime_max: float) -> float:
    """Competitive ratio of any rule ``argmin f_t + D_h(x||x_{t-1}) + D_{g_t}(x||v_t)``.

    ``m``: strong convexity of the hitting cost; ``alpha``/``beta``: strong
    convexity and smoothness of ``h``; the primed values bound the ``g_t``.
    """
    if not (m > 0 and alpha > 0 and beta >= alpha and beta_prime_max >= alpha_prime_min >= 0):
        raise InvalidParameter(
            "need m > 0, alpha > 0, beta >= alpha, beta_prime_max >= alpha_prime_min >= 0"
        )
    return 1.0 + max(beta_prime_max / m, (beta * beta / alpha) / (alpha_prime_min + m))


def schedule_regularizer_extremes(schedule: CoefficientSchedule) -> tuple[np.ndarray, np.ndarray]:
    """Per-round smallest and largest eigenvalue of ``C_t^{-1} - I - A``.

    Clipped at zero: the terminal LAI round is zero up to rounding.
    """
    g = 1.0 / schedule.rho - 1.0 - schedule.A.eigvals
    g = np.maximum(g, 0.0)
    return g.min(axis=1), g.max(axis=1)


def schedule_framework_cr(schedule: CoefficientSchedule) -> float:
    a, b = schedule_regularizer_extremes(schedule)
    return framework_cr(schedule.A.lambda_min, 1.0, 1.0, float(a.min()), float(b.max()))


@dataclass
class BoundReport:
    lai_cost_exact: float | None = None
    lai_cost_upper: float | None = None
    fi_regret_lower: float | None = None
    lai_gamma_regret_upper: float | None = None
    lai_gamma_regret_upper_dimsum: float | None = None
    robd_cr: float | None = None
    lai_cr_upper: float | None = None
    lai_gamma_cr_upper: float | None = None
    lai1_cr_smalllambda: float | None = None
    ftm_regret_lower: float | None = None
    framework_cr: float | None = None

    def to_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def cr_bounds(A, gamma: float | None = None) -> BoundReport:
    A = as_spectral(A)
    m = A.lambda_min
    report = BoundReport(robd_cr=robd_cr(m), lai_cr_upper=lai_cr_upper(m), lai1_cr_smalllambda=lai1_cr_smalllambda(A))
    if gamma is not None:
        report.lai_gamma_cr_upper = lai_gamma_cr_upper(A, gamma)
    return report


def bound_report(A, Sigma=None, T: int | None = None, gamma: float | None = None, C_eigvals=None) -> BoundReport:
    """Every bound that the supplied configuration determines."""
    A = as_spectral(A)
    report = cr_bounds(A, gamma)
    g = 1.0 if gamma is None else gamma
    if T is not None:
        sched = lai_schedule(A, T) if gamma is None else lai_gamma_schedule(A, T, gamma)
        report.framework_cr = schedule_framework_cr(sched)
    if Sigma is not None:
        S = _cov_matrix(A, Sigma)
        sigma2 = float(np.trace(S))
        report.lai_gamma_regret_upper = lai_gamma_regret_upper(A, sigma2, g)
        report.lai_gamma_regret_upper_dimsum = lai_gamma_regret_upper(A, sigma2, g, "dim_sum")
        if T is not None:
            report.lai_cost_exact, report.lai_cost_upper = lai_expected_cost(A, Sigma, T)
            if C_eigvals is None:
                report.fi_regret_lower = robd_regret_lower(A, Sigma, T)
            else:
                report.fi_regret_lower = fi_regret_lower(A, Sigma, C_eigvals, T)
            report.ftm_regret_lower = ftm_regret_lower(A.lambda_max, sigma2, T)
    return report
