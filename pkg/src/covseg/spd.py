"""Dense symmetric linear algebra on SPD matrices."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

SYM_RTOL = 1e-12


class ShapeError(ValueError):
    """Raised on non-square, asymmetric or mismatched matrix arguments."""


class DomainError(ValueError):
    """Raised when a matrix is outside the domain of an operation."""


class SvdFactors(NamedTuple):
    u: np.ndarray
    sigma: np.ndarray
    v: np.ndarray


def _check_square(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {m.shape}")
    return m


def is_symmetric(m: np.ndarray, rtol: float = SYM_RTOL) -> bool:
    m = _check_square(m)
    return bool(np.all(np.abs(m - m.T) <= rtol * np.maximum(1.0, np.abs(m))))


def check_symmetric(m: np.ndarray, rtol: float = SYM_RTOL) -> np.ndarray:
    """Validate symmetry and return the symmetrized ``(m + m.T) / 2``."""
    m = _check_square(m)
    if not is_symmetric(m, rtol):
        raise ShapeError("matrix is not symmetric within tolerance")
    return 0.5 * (m + m.T)


def regularize(m: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    """Shift a symmetric matrix onto the SPD cone.

    Returns ``m + eps * (trace(m) / dim + 1) * I``; the shift follows the data
    scale but stays positive on the zero matrix.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    m = check_symmetric(m)
    dim = m.shape[0]
    shift = eps * (np.trace(m) / dim + 1.0)
    return m + shift * np.eye(dim)


def sym_eigh(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    x = check_symmetric(x)
    return np.linalg.eigh(x)


def matrix_log(x: np.ndarray) -> np.ndarray:
    """Principal logarithm of an SPD matrix via symmetric eigendecomposition."""
    w, q = sym_eigh(x)
    if w[0] <= 0:
        raise DomainError(
            f"matrix_log needs a positive definite matrix (min eigenvalue {w[0]:.3e}); "
            "regularize first"
        )
    out = (q * np.log(w)) @ q.T
    return 0.5 * (out + out.T)


def matrix_exp_sym(x: np.ndarray) -> np.ndarray:
    """Exponential of a symmetric matrix (inverse of :func:`matrix_log`)."""
    w, q = sym_eigh(x)
    out = (q * np.exp(w)) @ q.T
    return 0.5 * (out + out.T)


def log_euclidean_distance(a: np.ndarray, b: np.ndarray) -> float:
    a = _check_square(a)
    b = _check_square(b)
    if a.shape != b.shape:
        raise ShapeError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(np.linalg.norm(matrix_log(a) - matrix_log(b), "fro"))


def rbf_kernel(a: np.ndarray, b: np.ndarray, sigma: float) -> float:
    """Log-Euclidean Gaussian kernel ``exp(-sigma * d_LE(a, b)**2)``."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    d = log_euclidean_distance(a, b)
    return float(np.exp(-sigma * d * d))


def log_stack(mats) -> np.ndarray:
    """Matrix logs of a sequence of SPD matrices, shape (n, d, d)."""
    return np.stack([matrix_log(m) for m in mats])


def le_distance_matrix(mats) -> np.ndarray:
    """Pairwise Log-Euclidean distances between a list of SPD matrices.

    The logs are taken once; the result is exactly symmetric with a zero
    diagonal.
    """
    logs = log_stack(mats)
    flat = logs.reshape(len(logs), -1)
    sq = np.sum(flat * flat, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * flat @ flat.T
    d2 = np.maximum(0.5 * (d2 + d2.T), 0.0)
    np.fill_diagonal(d2, 0.0)
    return np.sqrt(d2)


def rbf_gram(mats, sigma: float) -> np.ndarray:
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    d = le_distance_matrix(mats)
    return np.exp(-sigma * d * d)


def svd(a: np.ndarray) -> SvdFactors:
    u, s, vt = np.linalg.svd(np.asarray(a, dtype=np.float64), full_matrices=False)
    return SvdFactors(u, s, vt.T)


def svt(a: np.ndarray, tau: float) -> np.ndarray:
    """Singular value thresholding, the proximal map of ``tau * ||.||_*``."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    u, s, v = svd(a)
    s = np.maximum(s - tau, 0.0)
    keep = s > 0
    return (u[:, keep] * s[keep]) @ v[:, keep].T
