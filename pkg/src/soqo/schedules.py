"""Time-indexed interpolation coefficient families.

A schedule stores, for each round ``t = 1..T``, the eigenvalues of the
interpolation matrix ``C_t`` in the eigenbasis of ``A``. Row ``t - 1`` of
``rho`` holds round ``t``. The recursion ``1/rho[t] = 2 + lam - rho[t+1]`` is
run per coordinate, never as a matrix inversion.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EigvalOutOfRange, GammaOutOfRange, InvalidParameter
from .spectral import SpectralMatrix, as_spectral, fixed_point_eigvals

LAI = "lai"
LAI_GAMMA = "lai-gamma"
FI = "fi"
ROBD = "robd"
KINDS = (LAI, LAI_GAMMA, FI, ROBD)


@dataclass(frozen=True, eq=False)
class CoefficientSchedule:
    A: SpectralMatrix
    rho: np.ndarray  # shape (T, d)
    kind: str
    gamma: float | None = None

    def __post_init__(self):
        rho = np.array(self.rho, dtype=float)
        if rho.ndim != 2 or rho.shape[1] != self.A.dim or rho.shape[0] < 1:
            raise InvalidParameter(f"rho must be (T, {self.A.dim}), got {rho.shape}")
        if np.any(rho <= 0) or np.any(rho >= 1):
            raise EigvalOutOfRange("schedule eigenvalues must lie in (0, 1)")
        rho.setflags(write=False)
        object.__setattr__(self, "rho", rho)

    @property
    def horizon(self) -> int:
        return self.rho.shape[0]

    @property
    def dim(self) -> int:
        return self.rho.shape[1]

    def at(self, t: int) -> np.ndarray:
        """Eigenvalues of ``C_t`` for a 1-based round ``t``."""
        if not 1 <= t <= self.horizon:
            raise IndexError(f"round {t} outside 1..{self.horizon}")
        return self.rho[t - 1]

    def matrix(self, t: int) -> np.ndarray:
        P = self.A.eigvecs
        return (P * self.at(t)) @ P.T

    def recursion_residual(self) -> float:
        """``max |1/rho_t - (2 + lam - rho_{t+1})|`` over recursive rounds."""
        if self.horizon < 2:
            return 0.0
        r = self.rho
        return float(np.max(np.abs(1.0 / r[:-1] - (2.0 + self.A.eigvals - r[1:]))))

    def rows(self):
        """Yield ``(t, i, rho)`` triples with 1-based round and 0-based coordinate."""
        for t, row in enumerate(self.rho, start=1):
            for i, value in enumerate(row):
                yield t, i, float(value)

    def label(self) -> str:
        if self.kind == LAI_GAMMA:
            return f"{LAI_GAMMA}:{self.gamma:g}"
        return self.kind


def gamma_offset(lam, gamma: float) -> np.ndarray:
    """``lam/2 * ((1 + 4/lam)^(gamma/2) - 1)``, evaluated via log1p."""
    lam = np.asarray(lam, dtype=float)
    return 0.5 * lam * np.expm1(0.5 * gamma * np.log1p(4.0 / lam))


def robd_regularizer(lambda_min: float) -> float:
    """Optimal ROBD weight ``mu_2^*`` for the smallest eigenvalue of A."""
    return float(gamma_offset(lambda_min, 1.0))


def _backward(lam: np.ndarray, terminal: np.ndarray, T: int) -> np.ndarray:
    rho = np.empty((T, lam.size))
    rho[-1] = terminal
    for t in range(T - 2, -1, -1):
        rho[t] = 1.0 / (2.0 + lam - rho[t + 1])
    return rho


def _check_horizon(T) -> int:
    if int(T) != T or T < 1:
        raise InvalidParameter(f"horizon must be a positive integer, got {T}")
    return int(T)


def lai_schedule(A, T: int) -> CoefficientSchedule:
    """Lazy adaptive interpolation: ``C_T = (I + A)^-1`` then backward recursion."""
    A = as_spectral(A)
    T = _check_horizon(T)
    lam = A.eigvals
    return CoefficientSchedule(A, _backward(lam, 1.0 / (1.0 + lam), T), LAI)


def lai_gamma_schedule(A, T: int, gamma: float) -> CoefficientSchedule:
    """LAI with terminal eigenvalues ``1 / (1 + lam + gamma_offset(lam, gamma))``.

    ``gamma = 0`` recovers :func:`lai_schedule`; ``gamma = 1`` puts the terminal
    coefficient at the recursion's fixed point, so every round equals ``C_L``.
    """
    if not (0.0 <= gamma <= 1.0):
        raise GammaOutOfRange(f"gamma must lie in [0, 1], got {gamma}")
    A = as_spectral(A)
    T = _check_horizon(T)
    lam = A.eigvals
    terminal = 1.0 / (1.0 + lam + gamma_offset(lam, gamma))
    if gamma == 1.0:
        # exact fixed point; the recursion then stays put to the last ulp
        terminal = fixed_point_eigvals(lam)
    return CoefficientSchedule(A, _backward(lam, terminal, T), LAI_GAMMA, float(gamma))


def robd_matrix(A, T: int = 1) -> CoefficientSchedule:
    """ROBD with ``mu_1 = 1`` and the optimal ``mu_2`` as a constant schedule."""
    A = as_spectral(A)
    T = _check_horizon(T)
    mu2 = robd_regularizer(A.lambda_min)
    rho = 1.0 / (A.eigvals + 1.0 + mu2)
    return CoefficientSchedule(A, np.tile(rho, (T, 1)), ROBD)


def fi_schedule(A, C_eigvals, T: int) -> CoefficientSchedule:
    A = as_spectral(A)
    T = _check_horizon(T)
    c = np.broadcast_to(np.asarray(C_eigvals, dtype=float), (A.dim,))
    if np.any(~np.isfinite(c)) or np.any(c <= 0) or np.any(c >= 1):
        raise EigvalOutOfRange(f"FI eigenvalues must lie in (0, 1), got {c}")
    return CoefficientSchedule(A, np.tile(c, (T, 1)), FI)


def eigen_gap_bound(A, T: int, gamma: float, t: int) -> np.ndarray:
    """Upper bound on ``rho_lai[t] - rho_lai_gamma[t]`` per coordinate."""
    A = as_spectral(A)
    if not 1 <= t <= T:
        raise InvalidParameter(f"round {t} outside 1..{T}")
    lam = A.eigvals
    terminal = 1.0 / (1.0 + lam)
    return gamma_offset(lam, gamma) * terminal ** (2 * (T - t + 1))


def make_schedule(kind: str, A, T: int, gamma: float | None = None, C_eigvals=None) -> CoefficientSchedule:
    """Dispatch by kind name, as used by the CLI's ``dump-schedule``."""
    if kind == LAI:
        return lai_schedule(A, T)
    if kind == LAI_GAMMA:
        return lai_gamma_schedule(A, T, 0.0 if gamma is None else gamma)
    if kind == ROBD:
        return robd_matrix(A, T)
    if kind == FI:
        if C_eigvals is None:
            raise InvalidParameter("fi schedule needs eigenvalues")
        return fi_schedule(A, C_eigvals, T)
    raise InvalidParameter(f"unknown schedule kind {kind!r}; expected one of {KINDS}")
