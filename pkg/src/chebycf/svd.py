"""Leading right singular vectors of the normalized interaction matrix and the ideal pass projector."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np

from chebycf.sparse import NormalizedGraph, apply_gram

logger = logging.getLogger(__name__)

# squared singular values below this are treated as exact zeros (rank deficiency)
RANK_TOL = 1e-12


@dataclass(frozen=True)
class IdealPassBasis:
    """``eta`` leading right singular vectors (columns) with their singular values."""

    vectors: np.ndarray
    singular_values: np.ndarray
    iterations: int = 0
    converged: bool = True

    def __post_init__(self):
        for name in ("vectors", "singular_values"):
            a = np.ascontiguousarray(getattr(self, name), dtype=np.float64)
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        if self.vectors.ndim != 2 or self.vectors.shape[1] != len(self.singular_values):
            raise ValueError("vectors must be (num_items, eta) matching singular_values")

    @property
    def eta(self) -> int:
        return self.vectors.shape[1]

    @property
    def num_items(self) -> int:
        return self.vectors.shape[0]


def _fix_signs(v: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(v), axis=0)
    signs = np.sign(v[idx, np.arange(v.shape[1])])
    signs[signs == 0] = 1.0
    return v * signs


def truncated_svd(
    g: NormalizedGraph,
    eta: int,
    tol: float = 1e-9,
    max_iters: int = 500,
    seed: int = 42,
    oversample: int = 8,
    residual_tol: float = 1e-10,
) -> IdealPassBasis:
    """Top-``eta`` right singular subspace of ``R~`` by block subspace iteration.

    Iterates ``V <- orth(R~^T R~ V)`` with a Rayleigh-Ritz step each round.
    Stops once the leading ``eta`` Ritz values change by at most ``tol``
    (relative) and every kept Ritz pair has residual
    ``||R~^T R~ v - s^2 v|| <= residual_tol``, or after ``max_iters``.
    """
    n = g.num_items
    if not 1 <= eta <= n:
        raise ValueError(f"eta must be in [1, {n}], got {eta}")
    if tol <= 0:
        raise ValueError("tol must be positive")

    block = min(eta + oversample, n)
    rng = np.random.default_rng(seed)
    v, _ = np.linalg.qr(rng.standard_normal((n, block)))

    prev = None
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        z = apply_gram(g, v)
        b = v.T @ z
        theta, w = np.linalg.eigh(0.5 * (b + b.T))
        theta, w = theta[::-1], w[:, ::-1]
        v = v @ w
        z = z @ w

        resid = np.linalg.norm(z[:, :eta] - v[:, :eta] * theta[:eta], axis=0).max()
        if prev is not None:
            # relative to the spectral scale; null-space Ritz values are pure noise
            scale = max(abs(theta[0]), RANK_TOL)
            change = np.max(np.abs(theta[:eta] - prev)) / scale
            if change <= tol and resid <= residual_tol:
                converged = True
                break
        prev = theta[:eta].copy()
        v, _ = np.linalg.qr(z)

    if not converged:
        warnings.warn(f"truncated_svd stopped at max_iters={max_iters} before converging", RuntimeWarning)
    logger.debug("truncated_svd eta=%d iterations=%d converged=%s", eta, it, converged)

    return _finish(v[:, :eta], theta[:eta], eta, it, converged)


def _finish(vecs, theta, eta, iterations, converged) -> IdealPassBasis:
    theta = np.clip(theta, 0.0, None)
    rank = int(np.sum(theta > RANK_TOL))
    sigma = np.sqrt(theta)
    if rank < eta:
        warnings.warn(
            f"R~ has numerical rank {rank} < eta={eta}; padding with null-space vectors", RuntimeWarning
        )
        # trailing Ritz vectors already span part of the null space
        sigma[rank:] = 0.0
    return IdealPassBasis(
        vectors=_fix_signs(vecs), singular_values=sigma, iterations=iterations, converged=converged
    )


def truncated_svd_arpack(g: NormalizedGraph, eta: int, seed: int = 42, tol: float = 0.0) -> IdealPassBasis:
    """Same contract as :func:`truncated_svd`, backed by ARPACK (``scipy.sparse.linalg.svds``).

    Meant for production-size graphs where ``eta`` is in the thousands.
    """
    from scipy.sparse.linalg import svds

    n = min(g.num_users, g.num_items)
    if not 1 <= eta <= g.num_items:
        raise ValueError(f"eta must be in [1, {g.num_items}], got {eta}")
    if eta >= n:
        # ARPACK needs k < min(shape); fall back to the block iteration
        return truncated_svd(g, eta, seed=seed)
    rng = np.random.default_rng(seed)
    v0 = rng.standard_normal(n)
    _, s, vt = svds(g.r_tilde, k=eta, tol=tol, v0=v0, which="LM")
    order = np.argsort(-s, kind="stable")
    return _finish(vt[order].T, s[order] ** 2, eta, 0, True)


def apply_ideal(basis: IdealPassBasis, x) -> np.ndarray:
    """Orthogonal projection ``V V^T x`` onto the stored singular subspace."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim not in (1, 2) or x.shape[0] != basis.num_items:
        raise ValueError(f"expected leading dimension {basis.num_items}, got shape {x.shape}")
    return basis.vectors @ (basis.vectors.T @ x)
