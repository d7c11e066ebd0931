"""Dense reference computations for small graphs.

Everything here densifies the item-item Laplacian and decomposes it, so it
only scales to a few thousand items. It exists to check the matrix-free
code paths and to reproduce the spectral identities behind the method.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg

from chebycf.sparse import NormalizedGraph, apply_gram

logger = logging.getLogger(__name__)

DEFAULT_ITEM_CAP = 2000
WARN_ITEMS = 500


class OracleSizeError(ValueError):
    pass


@dataclass(frozen=True)
class DenseSpectrum:
    """Eigenpairs of ``L* = I - R~^T R~`` (ascending) and the SVD of ``R~``."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    singular_values: np.ndarray
    right_singular_vectors: np.ndarray  # columns, descending singular value
    left_singular_vectors: np.ndarray
    r_tilde: np.ndarray

    @property
    def num_items(self) -> int:
        return len(self.eigenvalues)

    def laplacian(self) -> np.ndarray:
        n = self.num_items
        return np.eye(n) - self.r_tilde.T @ self.r_tilde


def dense_spectrum(g: NormalizedGraph, cap: int = DEFAULT_ITEM_CAP) -> DenseSpectrum:
    n = g.num_items
    if n > cap:
        raise OracleSizeError(f"{n} items exceeds the dense oracle cap of {cap}; use the matrix-free operators")
    if n > WARN_ITEMS:
        logger.warning("dense spectrum on %d items may be slow", n)
    r = g.dense()
    lap = np.eye(n) - r.T @ r
    lam, q = scipy.linalg.eigh(lap)
    lam = np.clip(lam, 0.0, 1.0)
    u, s, vt = np.linalg.svd(r, full_matrices=True)
    return DenseSpectrum(
        eigenvalues=lam,
        eigenvectors=q,
        singular_values=s,
        right_singular_vectors=vt.T,
        left_singular_vectors=u,
        r_tilde=r,
    )


def extended_singular_values(spec: DenseSpectrum) -> np.ndarray:
    """Singular values padded with zeros to one per item."""
    s = np.zeros(spec.num_items)
    k = min(len(spec.singular_values), spec.num_items)
    s[:k] = spec.singular_values[:k]
    return s


def dense_filter(spec: DenseSpectrum, h: Callable, x) -> np.ndarray:
    """``Q diag(h(lambda)) Q^T x`` with ``h`` evaluated on L* eigenvalues in [0, 1]."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] != spec.num_items:
        raise ValueError(f"expected leading dimension {spec.num_items}, got {x.shape}")
    q = spec.eigenvectors
    gains = np.asarray(h(spec.eigenvalues), dtype=np.float64)
    if x.ndim == 1:
        return q @ (gains * (q.T @ x))
    return q @ (gains[:, None] * (q.T @ x))


def cheby_transfer(coefficients) -> Callable:
    """Eigenvalue-domain response of a Chebyshev filter, via numpy's own series evaluator."""
    coefficients = np.asarray(coefficients, dtype=np.float64)
    return lambda lam: np.polynomial.chebyshev.chebval(2.0 * np.asarray(lam) - 1.0, coefficients)


def ideal_transfer(spec: DenseSpectrum, eta: int) -> Callable:
    """Indicator of the ``eta`` lowest frequencies (by index in ascending order)."""

    def h(lam):
        out = np.zeros(spec.num_items)
        out[:eta] = 1.0
        return out

    return h


def generalized_filter(
    spec: DenseSpectrum,
    item_degrees: np.ndarray,
    beta: float,
    coefficients,
    alpha: float = 0.0,
    eta: int | None = None,
) -> np.ndarray:
    """Dense operator ``H(D^b L* D^-b) + alpha D^b V V^T D^-b``.

    The polynomial part is built directly on the non-symmetric generalized
    Laplacian by the matrix Chebyshev recurrence, with no eigendecomposition.
    """
    n = spec.num_items
    d = np.where(item_degrees > 0, item_degrees, 1.0)
    up, down = d**beta, d ** (-beta)
    lbar = up[:, None] * spec.laplacian() * down[None, :]
    lres = 2.0 * lbar - np.eye(n)
    coefficients = np.asarray(coefficients, dtype=np.float64)
    t_prev, t = np.eye(n), lres
    h = coefficients[0] * t_prev
    for k in range(1, len(coefficients)):
        if k > 1:
            t_prev, t = t, 2.0 * lres @ t - t_prev
        h = h + coefficients[k] * t
    if alpha > 0:
        v = spec.eigenvectors[:, :eta]
        h = h + alpha * (up[:, None] * (v @ v.T) * down[None, :])
    return h


def linear_lowpass_filter(g: NormalizedGraph, layers: int, x) -> np.ndarray:
    """``(1/L) sum_{l=1..L} (R~^T R~)^l x``, matrix-free."""
    if layers < 1:
        raise ValueError("layers must be >= 1")
    x = np.asarray(x, dtype=np.float64)
    acc = np.zeros_like(x)
    cur = x
    for _ in range(layers):
        cur = apply_gram(g, cur)
        acc = acc + cur
    return acc / layers


def linear_lowpass_transfer(layers: int) -> Callable:
    return lambda lam: sum((1.0 - np.asarray(lam)) ** l for l in range(1, layers + 1)) / layers


def truncated_filter(spec: DenseSpectrum, base: Callable, keep_ratio: float, x) -> np.ndarray:
    """Apply ``base`` on the lowest ``ceil(keep_ratio * n)`` frequencies only."""
    if not 0 < keep_ratio <= 1:
        raise ValueError("keep_ratio must be in (0, 1]")
    keep = max(1, math.ceil(keep_ratio * spec.num_items - 1e-12))

    def h(lam):
        out = np.asarray(base(lam), dtype=np.float64).copy()
        out[keep:] = 0.0
        return out

    return dense_filter(spec, h, x)


class LinearLowpassModel:
    """Untrained ``L``-layer linear low-pass filter, scored on raw interaction rows."""

    def __init__(self, graph: NormalizedGraph, layers: int, dataset_checksum: bytes):
        self.graph = graph
        self.layers = layers
        self.dataset_checksum = dataset_checksum
        self.params = None

    def predict(self, rows):
        rows = np.asarray(rows, dtype=np.float64)
        return linear_lowpass_filter(self.graph, self.layers, rows.T).T


class DenseFilterModel:
    """Scores rows with an arbitrary dense spectral filter plus degree normalization."""

    def __init__(self, spec: DenseSpectrum, h: Callable, item_degrees, beta: float, dataset_checksum: bytes):
        d = np.where(item_degrees > 0, item_degrees, 1.0)
        self.up, self.down = d**beta, d ** (-beta)
        self.spec = spec
        self.h = h
        self.dataset_checksum = dataset_checksum
        self.params = None

    def predict(self, rows):
        rows = np.asarray(rows, dtype=np.float64)
        y = rows.T * self.down[:, None]
        return (dense_filter(self.spec, self.h, y) * self.up[:, None]).T


# --- identity checks -------------------------------------------------------


@dataclass
class LowRankCheck:
    deviation: float
    d_requested: int
    d_used: int
    degenerate: bool


def verify_theorem_3_1(
    g: NormalizedGraph, d: int, spec: DenseSpectrum | None = None, gap_tol: float = 1e-8
) -> float:
    """Max deviation between the rank-``d`` one-layer LGCN prediction and its spectral form.

    See :func:`check_low_rank_equivalence` for the full result record.
    """
    return check_low_rank_equivalence(g, d, spec, gap_tol).deviation


def check_low_rank_equivalence(
    g: NormalizedGraph, d: int, spec: DenseSpectrum | None = None, gap_tol: float = 1e-8
) -> LowRankCheck:
    """Compare ``r~_u (U_d S_d V_d^T)^T R~`` with the filter ``(1-lambda) 1[lambda <= lambda_d]`` on ``r~_u``.

    If ``sigma_d == sigma_{d+1}`` the rank-``d`` truncation is ambiguous; the
    check then falls back to the nearest smaller ``d`` with a spectral gap
    (or the next larger one) and warns.
    """
    spec = spec or dense_spectrum(g)
    m, n = spec.r_tilde.shape
    if not 1 <= d <= min(m, n):
        raise ValueError(f"d must be in [1, {min(m, n)}]")
    sig = extended_singular_values(spec)

    def separated(k):
        return k >= min(m, n) or sig[k - 1] - sig[k] > gap_tol

    d_used = d
    if not separated(d):
        below = [k for k in range(d - 1, 0, -1) if separated(k)]
        above = [k for k in range(d + 1, min(m, n) + 1) if separated(k)]
        d_used = below[0] if below else above[0]
        warnings.warn(f"sigma_{d} is degenerate; verifying on the separated rank {d_used}", RuntimeWarning)

    r = spec.r_tilde
    u = spec.left_singular_vectors[:, :d_used]
    s = spec.singular_values[:d_used]
    v = spec.right_singular_vectors[:, :d_used]
    low_rank = (u * s) @ v.T
    lgcn = r @ low_rank.T @ r  # every user's r~_u (U S V^T)^T R~ at once

    def h(lam):
        out = 1.0 - lam
        out[d_used:] = 0.0
        return out

    filtered = dense_filter(spec, h, r.T).T
    return LowRankCheck(
        deviation=float(np.max(np.abs(lgcn - filtered))),
        d_requested=d,
        d_used=d_used,
        degenerate=d_used != d,
    )


def eckart_young_residual(spec: DenseSpectrum, d: int) -> tuple[float, float]:
    """``(||R~ - U_d S_d V_d^T||_F, sqrt(sum_{i>d} sigma_i^2))``."""
    u = spec.left_singular_vectors[:, :d]
    s = spec.singular_values[:d]
    v = spec.right_singular_vectors[:, :d]
    resid = np.linalg.norm(spec.r_tilde - (u * s) @ v.T, "fro")
    tail = math.sqrt(math.fsum(spec.singular_values[d:] ** 2))
    return float(resid), tail


def eigen_singular_pairing(spec: DenseSpectrum) -> float:
    """Max ``|1 - sigma_i^2 - lambda_i|`` over extended singular values."""
    sig = extended_singular_values(spec)
    return float(np.max(np.abs(1.0 - sig**2 - spec.eigenvalues)))


def clusters(values: np.ndarray, tol: float) -> list[tuple[int, int]]:
    """Half-open index ranges of runs of values within ``tol`` of their neighbour."""
    out, start = [], 0
    for i in range(1, len(values) + 1):
        if i == len(values) or abs(values[i] - values[i - 1]) > tol:
            out.append((start, i))
            start = i
    return out


def max_subspace_angle(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.max(scipy.linalg.subspace_angles(a, b)))


def eigenvector_identification(spec: DenseSpectrum, cluster_tol: float = 1e-6) -> float:
    """Largest principal angle between right singular vectors and L* eigenvectors.

    Compared cluster by cluster so degenerate eigenvalues only need to agree
    up to rotation.
    """
    n = spec.num_items
    v = spec.right_singular_vectors
    if v.shape[1] < n:
        raise ValueError("need full right singular basis")
    worst = 0.0
    for lo, hi in clusters(spec.eigenvalues, cluster_tol):
        worst = max(worst, max_subspace_angle(v[:, lo:hi], spec.eigenvectors[:, lo:hi]))
    return worst


def reconstruction_error(spec: DenseSpectrum) -> float:
    lap = spec.laplacian()
    q, lam = spec.eigenvectors, spec.eigenvalues
    return float(np.linalg.norm((q * lam) @ q.T - lap, "fro") / max(np.linalg.norm(lap, "fro"), 1e-300))
