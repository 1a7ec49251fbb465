"""Low-rank representation of a stack of SPD matrices, solved by ALM.

The slices are treated as vectors in the ambient space of d x d matrices,
so every quantity the solver needs is expressed through the Gram matrix
``delta[i, j] = tr(X_i X_j)``. A square root of ``delta`` is never formed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .spd import ShapeError, svd, svt


@dataclass(frozen=True)
class LrrProblem:
    slices: tuple
    lam: float
    mu0: float = 1e-6
    mu_max: float = 1e10
    rho: float = 1.9
    eps_conv: float = 1e-8
    max_iters: int = 500

    def __post_init__(self):
        slices = tuple(np.asarray(s, dtype=np.float64) for s in self.slices)
        if len(slices) < 2:
            raise ValueError("need at least two slices")
        d = slices[0].shape
        if any(s.shape != d for s in slices) or len(d) != 2 or d[0] != d[1]:
            raise ShapeError("all slices must be square with the same dimension")
        if self.lam <= 0:
            raise ValueError("lam must be positive")
        if not self.mu0 < self.mu_max:
            raise ValueError("mu0 must be below mu_max")
        if self.rho <= 1:
            raise ValueError("rho must exceed 1")
        object.__setattr__(self, "slices", slices)


@dataclass
class LrrSolution:
    z: np.ndarray
    j: np.ndarray
    y_mult: np.ndarray
    delta: np.ndarray
    iterations: int
    converged: bool
    residual_trace: list = field(default_factory=list)
    mu_trace: list = field(default_factory=list)

    def trace_text(self) -> str:
        rows = ["iteration residual mu"]
        rows += [f"{i + 1} {r:.12e} {m:.6e}"
                 for i, (r, m) in enumerate(zip(self.residual_trace, self.mu_trace))]
        return "\n".join(rows) + "\n"


def gram_delta(slices) -> np.ndarray:
    mats = [np.asarray(s, dtype=np.float64) for s in slices]
    if any(m.shape != mats[0].shape for m in mats):
        raise ShapeError("all slices must have the same dimension")
    flat = np.stack([m.ravel() for m in mats])
    # tr(X_i X_j) = vec(X_i) . vec(X_j^T); slices are symmetric
    flat_t = np.stack([m.T.ravel() for m in mats])
    delta = flat @ flat_t.T
    return 0.5 * (delta + delta.T)


def update_j(z, y_mult, mu: float) -> np.ndarray:
    """Nuclear-norm step: SVT of ``z + y/mu`` at threshold ``1/mu``."""
    if mu <= 0:
        raise ValueError("mu must be positive")
    return svt(np.asarray(z) + np.asarray(y_mult) / mu, 1.0 / mu)


def update_z(j, y_mult, delta, lam: float, mu: float) -> np.ndarray:
    """Closed-form Z step: ``(lam*mu*J - lam*Y + 2*delta) (2*delta + lam*mu*I)^-1``."""
    if lam * mu <= 0:
        raise ValueError("lam * mu must be positive")
    delta = np.asarray(delta, dtype=np.float64)
    n = delta.shape[0]
    a = 2.0 * delta + lam * mu * np.eye(n)
    rhs = lam * mu * np.asarray(j) - lam * np.asarray(y_mult) + 2.0 * delta
    # Z A = rhs with A symmetric  <=>  A Z^T = rhs^T
    try:
        zt = scipy.linalg.solve(a, rhs.T, assume_a="sym")
    except np.linalg.LinAlgError as exc:  # pragma: no cover - A is SPD for lam*mu > 0
        raise FloatingPointError("singular Z-update system") from exc
    return zt.T


def solve(problem: LrrProblem) -> LrrSolution:
    delta = gram_delta(problem.slices)
    n = delta.shape[0]
    z = np.zeros((n, n))
    j = np.zeros((n, n))
    y = np.zeros((n, n))
    mu = problem.mu0
    residuals, mus = [], []
    converged = False
    it = 0
    for it in range(1, problem.max_iters + 1):
        j = update_j(z, y, mu)
        z = update_z(j, y, delta, problem.lam, mu)
        res = float(np.linalg.norm(z - j, "fro"))
        residuals.append(res)
        mus.append(mu)
        if res < problem.eps_conv:
            converged = True
            break
        y = y + mu * (z - j)
        mu = min(problem.rho * mu, problem.mu_max)
    return LrrSolution(z=z, j=j, y_mult=y, delta=delta, iterations=it,
                       converged=converged, residual_trace=residuals, mu_trace=mus)


def affinity_from_z(z, rank_tol: float = 1e-8) -> np.ndarray:
    """Squared entries of ``U~ U~^T`` with ``U~`` the row-normalised left
    singular vectors of ``z`` above ``rank_tol * sigma_1``."""
    z = np.asarray(z, dtype=np.float64)
    if not np.all(np.isfinite(z)):
        raise ValueError("z contains non-finite values")
    u, s, _ = svd(z)
    if s.size == 0 or s[0] <= 0:
        return np.zeros_like(z)
    u = u[:, s > rank_tol * s[0]]
    norms = np.linalg.norm(u, axis=1, keepdims=True)
    u = np.divide(u, norms, out=np.zeros_like(u), where=norms > 0)
    return (u @ u.T) ** 2


def error_norm_sq(slices, z) -> float:
    """``sum_i ||X_i - sum_j z_ij X_j||_F^2`` computed slice by slice."""
    mats = np.stack([np.asarray(s, dtype=np.float64) for s in slices])
    recon = np.einsum("ij,jab->iab", np.asarray(z), mats)
    return float(np.sum((mats - recon) ** 2))


def error_norm_sq_gram(delta, z) -> float:
    """Same quantity from the Gram matrix: tr(D) - 2 tr(Z D) + tr(Z D Z^T)."""
    z = np.asarray(z)
    return float(np.trace(delta) - 2.0 * np.trace(z @ delta) + np.trace(z @ delta @ z.T))


def z_objective(z, j, y_mult, delta, lam: float, mu: float) -> float:
    """Z-subproblem objective of the augmented Lagrangian."""
    fit = error_norm_sq_gram(delta, z) / lam
    dz = np.asarray(z) - np.asarray(j)
    return float(fit + np.sum(np.asarray(y_mult) * dz) + 0.5 * mu * np.sum(dz * dz))


def scale_slices(slices) -> list[np.ndarray]:
    """Rescale a stack to unit mean squared Frobenius norm.

    Makes the balance parameter independent of the feature units; z is
    invariant to a common scaling only when lam scales with it.
    """
    mats = [np.asarray(s, dtype=np.float64) for s in slices]
    ms = np.mean([np.sum(m * m) for m in mats])
    if ms <= 0:
        return mats
    return [m / np.sqrt(ms) for m in mats]


def layer_affinity(slices, lam: float, rank_tol: float = 1e-8, normalize: bool = True,
                   **solver_kw) -> tuple[np.ndarray, LrrSolution]:
    """LRR affinity for one superpixel layer."""
    mats = scale_slices(slices) if normalize else list(slices)
    sol = solve(LrrProblem(tuple(mats), lam, **solver_kw))
    return affinity_from_z(sol.z, rank_tol), sol
