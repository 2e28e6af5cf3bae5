"""Spectral machinery for symmetric positive-definite matrices.

Every matrix in the model (the hitting-cost curvature ``A``, the increment
covariance, the interpolation coefficients) shares or is expressed through an
orthonormal eigenbasis, so formulas are evaluated on eigenvalues and mapped
back only when a dense matrix is actually needed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import NotPositiveDefinite, NotSymmetric, RangeViolation

SYMMETRY_TOL = 1e-10
ORTHO_TOL = 1e-10
EIG_FLOOR = 1e-12
JACOBI_TOL = 1e-12
_JACOBI_MAX_SWEEPS = 100


@dataclass(frozen=True, eq=False)
class SpectralMatrix:
    """An SPD matrix held as ``P diag(eigvals) P^T``.

    ``eigvecs`` holds the eigenvectors as columns; ``eigvals`` are sorted
    ascending by :func:`decompose`, though matrices built from an explicit
    eigenvalue list keep the caller's ordering.
    """

    eigvecs: np.ndarray
    eigvals: np.ndarray

    def __post_init__(self):
        P = np.array(self.eigvecs, dtype=float)
        lam = np.array(self.eigvals, dtype=float).reshape(-1)
        if P.ndim != 2 or P.shape != (lam.size, lam.size):
            raise ValueError(f"eigvecs shape {P.shape} does not match {lam.size} eigenvalues")
        if not np.all(np.isfinite(lam)) or np.any(lam <= 0):
            raise NotPositiveDefinite(f"eigenvalues must be finite and > 0, got {lam}")
        if np.linalg.norm(P.T @ P - np.eye(lam.size)) > ORTHO_TOL:
            raise ValueError("eigvecs are not orthonormal")
        P.setflags(write=False)
        lam.setflags(write=False)
        object.__setattr__(self, "eigvecs", P)
        object.__setattr__(self, "eigvals", lam)

    @classmethod
    def from_eigvals(cls, eigvals, eigvecs=None) -> "SpectralMatrix":
        lam = np.asarray(eigvals, dtype=float).reshape(-1)
        P = np.eye(lam.size) if eigvecs is None else eigvecs
        return cls(P, lam)

    @classmethod
    def scalar(cls, value: float, dim: int) -> "SpectralMatrix":
        return cls(np.eye(dim), np.full(dim, float(value)))

    @property
    def dim(self) -> int:
        return self.eigvals.size

    @property
    def lambda_min(self) -> float:
        return float(self.eigvals.min())

    @property
    def lambda_max(self) -> float:
        return float(self.eigvals.max())

    @property
    def condition_number(self) -> float:
        return self.lambda_max / self.lambda_min

    def reconstruct(self) -> np.ndarray:
        P = self.eigvecs
        return (P * self.eigvals) @ P.T

    def to_eigen(self, x: np.ndarray) -> np.ndarray:
        """Coordinates of ``x`` (last axis) in this matrix's eigenbasis."""
        return np.asarray(x, dtype=float) @ self.eigvecs

    def from_eigen(self, y: np.ndarray) -> np.ndarray:
        return np.asarray(y, dtype=float) @ self.eigvecs.T

    def with_eigvals(self, eigvals) -> "SpectralMatrix":
        """Same eigenbasis, new spectrum."""
        return SpectralMatrix(self.eigvecs, np.asarray(eigvals, dtype=float))

    def shares_basis(self, other: "SpectralMatrix") -> bool:
        return self.eigvecs is other.eigvecs or np.array_equal(self.eigvecs, other.eigvecs)

    def is_scalar(self, tol: float = 1e-12) -> bool:
        return float(np.ptp(self.eigvals)) <= tol * max(1.0, self.lambda_max)

    def quad_form(self, z: np.ndarray) -> np.ndarray:
        """``z^T M z`` along the last axis of ``z``."""
        y = self.to_eigen(z)
        return np.sum(self.eigvals * y * y, axis=-1)

    def to_dict(self) -> dict:
        return {"dim": self.dim, "data": self.reconstruct().reshape(-1).tolist()}

    def __repr__(self) -> str:
        return f"SpectralMatrix(dim={self.dim}, eigvals={np.array2string(self.eigvals, precision=6)})"


def _jacobi_eigh(M: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi eigen-solver for a symmetric matrix.

    Sweeps over all (p, q) pairs until the off-diagonal Frobenius norm falls
    below ``JACOBI_TOL`` relative to the matrix scale.
    """
    S = np.array(M, dtype=float)
    n = S.shape[0]
    V = np.eye(n)
    scale = max(1.0, float(np.linalg.norm(S)))
    for _ in range(_JACOBI_MAX_SWEEPS):
        off = float(np.linalg.norm(S - np.diag(np.diag(S))))
        if off < JACOBI_TOL * scale:
            return np.diag(S).copy(), V
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = S[p, q]
                if abs(apq) <= 1e-300:
                    S[p, q] = S[q, p] = 0.0
                    continue
                theta = (S[q, q] - S[p, p]) / (2.0 * apq)
                t = np.copysign(1.0, theta) / (abs(theta) + np.hypot(1.0, theta))
                c = 1.0 / np.hypot(1.0, t)
                s = t * c
                Sp, Sq = S[:, p].copy(), S[:, q].copy()
                S[:, p] = c * Sp - s * Sq
                S[:, q] = s * Sp + c * Sq
                Sp, Sq = S[p, :].copy(), S[q, :].copy()
                S[p, :] = c * Sp - s * Sq
                S[q, :] = s * Sp + c * Sq
                S[p, q] = S[q, p] = 0.0
                Vp, Vq = V[:, p].copy(), V[:, q].copy()
                V[:, p] = c * Vp - s * Vq
                V[:, q] = s * Vp + c * Vq
    raise RuntimeError("Jacobi iteration did not converge")


def decompose(M) -> SpectralMatrix:
    """Eigendecompose a symmetric positive-definite matrix.

    Raises :class:`NotSymmetric` when ``max|M - M^T| > 1e-10`` and
    :class:`NotPositiveDefinite` when an eigenvalue is ``<= 1e-12``.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise NotSymmetric(f"expected a square matrix, got shape {M.shape}")
    if np.max(np.abs(M - M.T)) > SYMMETRY_TOL:
        raise NotSymmetric("matrix is not symmetric")
    lam, V = _jacobi_eigh(0.5 * (M + M.T))
    if np.any(lam <= EIG_FLOOR):
        raise NotPositiveDefinite(f"smallest eigenvalue {lam.min():.3e} <= {EIG_FLOOR}")
    order = np.argsort(lam, kind="stable")
    return SpectralMatrix(V[:, order], lam[order])


def as_spectral(value) -> SpectralMatrix:
    """Coerce a SpectralMatrix, a dense matrix, or a 1-D eigenvalue list.

    A 1-D input is read as the spectrum of a diagonal matrix (identity
    eigenvectors).
    """
    if isinstance(value, SpectralMatrix):
        return value
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return SpectralMatrix.from_eigvals([float(arr)])
    if arr.ndim == 1:
        return SpectralMatrix.from_eigvals(arr)
    return decompose(arr)


def apply_scalar_fn(M: SpectralMatrix, f: Callable) -> SpectralMatrix:
    """Matrix function by eigenvalue mapping: ``P diag(f(lam)) P^T``."""
    try:
        mapped = np.asarray(f(M.eigvals.copy()), dtype=float)
        if mapped.shape != M.eigvals.shape:
            raise TypeError
    except (TypeError, ValueError):
        mapped = np.array([f(float(lam)) for lam in M.eigvals], dtype=float)
    if not np.all(np.isfinite(mapped)) or np.any(mapped <= 0):
        raise RangeViolation(f"mapped eigenvalues must be finite and > 0, got {mapped}")
    return M.with_eigvals(mapped)


def fixed_point_eigvals(lam) -> np.ndarray:
    """Fixed point of ``c -> 1 / (2 + lam - c)`` lying in (0, 1).

    Uses ``2 / (lam + 2 + sqrt(lam^2 + 4 lam))`` which avoids cancellation for
    large ``lam``.
    """
    lam = np.asarray(lam, dtype=float)
    return 2.0 / (lam + 2.0 + np.sqrt(lam * lam + 4.0 * lam))


def fixed_point_matrix(A) -> SpectralMatrix:
    """``C_L = (A + 2I - sqrt(A^2 + 4A)) / 2`` in A's eigenbasis."""
    A = as_spectral(A)
    return A.with_eigvals(fixed_point_eigvals(A.eigvals))
