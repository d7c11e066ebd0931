"""ChebyCF model: normalized Chebyshev filter plus weighted ideal pass filter.

For a user's binary interaction row ``r``::

    r_hat = D^beta (H_cheby + alpha * V V^T) D^-beta r

with ``D`` the item-degree matrix of the training data.
"""

from __future__ import annotations

import hashlib
import io
import struct
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from chebycf.chebyshev import (
    ChebyFilterSpec,
    chebyshev_terms,
    combine_terms,
    plateau_filter_spec,
)
from chebycf.sparse import InteractionDataset, NormalizedGraph, normalize
from chebycf.svd import IdealPassBasis, apply_ideal, truncated_svd, truncated_svd_arpack

MAGIC = b"CHEBYCF\x00"
FORMAT_VERSION = 1


class ModelFormatError(ValueError):
    """Unreadable or corrupted model file."""


class ModelVersionError(ModelFormatError):
    def __init__(self, found: int, expected: int):
        self.found = found
        self.expected = expected
        super().__init__(f"model file format version {found} is not supported (expected {expected})")


class ChecksumError(ModelFormatError):
    pass


class DatasetMismatchError(ValueError):
    """Model was fitted on a different train/test split."""


# Hyperparameter grid of the published protocol.
PHI_GRID = tuple(float(x) for x in np.arange(1.0, 20.0 + 1e-9, 0.5))
ALPHA_GRID = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5)
ETA_GRID = (128, 256, 512, 1024, 2048)
BETA_GRID = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5)
DEFAULT_ORDER = 8


@dataclass(frozen=True, order=True)
class HyperParams:
    phi: float = 1.0
    alpha: float = 0.0
    eta: int = 256
    beta: float = 0.0
    order_k: int = DEFAULT_ORDER

    def __post_init__(self):
        if not self.phi > 0:
            raise ValueError(f"phi must be > 0, got {self.phi}")
        if self.alpha < 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if self.beta < 0:
            raise ValueError(f"beta must be >= 0, got {self.beta}")
        if self.eta < 1:
            raise ValueError(f"eta must be >= 1, got {self.eta}")
        if self.order_k < 0:
            raise ValueError(f"order_k must be >= 0, got {self.order_k}")

    def as_dict(self) -> dict:
        return asdict(self)


def degree_powers(item_degrees: np.ndarray, beta: float) -> tuple[np.ndarray, np.ndarray]:
    """``(d^beta, d^-beta)`` with zero-degree items mapped to 1 in both."""
    up = np.ones_like(item_degrees, dtype=np.float64)
    down = np.ones_like(item_degrees, dtype=np.float64)
    if beta != 0:
        nz = item_degrees > 0
        up[nz] = item_degrees[nz] ** beta
        down[nz] = item_degrees[nz] ** (-beta)
    return up, down


@dataclass(frozen=True)
class ChebyCFModel:
    graph: NormalizedGraph
    train: sp.csr_matrix
    filter: ChebyFilterSpec
    ideal: IdealPassBasis | None
    params: HyperParams
    degree_up: np.ndarray
    degree_down: np.ndarray
    dataset_checksum: bytes = b"\x00" * 32
    seed: int = 42

    @property
    def num_items(self) -> int:
        return self.graph.num_items

    def predict(self, rows) -> np.ndarray:
        return predict(self, rows)


def fit(
    dataset: InteractionDataset,
    params: HyperParams,
    seed: int = 42,
    graph: NormalizedGraph | None = None,
    ideal: IdealPassBasis | None = None,
    svd_method: str = "subspace",
) -> ChebyCFModel:
    """Precompute every ingredient of the filter. Deterministic given ``seed``.

    ``graph`` / ``ideal`` may be passed in to reuse earlier work (they must
    come from the same dataset and ``eta``).
    """
    if dataset.train.nnz == 0:
        raise ValueError("cannot fit on an empty training matrix")
    if graph is None:
        graph = normalize(dataset)
    spec = plateau_filter_spec(params.phi, params.order_k)
    if params.alpha > 0:
        if ideal is None:
            ideal = compute_ideal(graph, params.eta, seed, svd_method)
        elif ideal.eta != params.eta:
            raise ValueError(f"ideal basis has eta={ideal.eta}, params ask for {params.eta}")
    else:
        ideal = None
    up, down = degree_powers(graph.item_degrees, params.beta)
    return ChebyCFModel(
        graph=graph,
        train=dataset.train,
        filter=spec,
        ideal=ideal,
        params=params,
        degree_up=up,
        degree_down=down,
        dataset_checksum=dataset.checksum(),
        seed=seed,
    )


def compute_ideal(g: NormalizedGraph, eta: int, seed: int, method: str = "subspace") -> IdealPassBasis:
    if method == "subspace":
        return truncated_svd(g, eta, seed=seed)
    if method == "arpack":
        return truncated_svd_arpack(g, eta, seed=seed)
    raise ValueError(f"unknown svd method {method!r}")


# The three helpers below are shared with grid search so both paths perform
# the same floating-point operations in the same order.


def _scaled_signal(rows: np.ndarray, degree_down: np.ndarray) -> np.ndarray:
    # rows: (b, items) -> items-major block
    return np.ascontiguousarray(rows.T) * degree_down[:, None]


def _mix(cheb: np.ndarray, alpha: float, ideal_part: np.ndarray | None) -> np.ndarray:
    if alpha == 0 or ideal_part is None:
        return cheb
    return cheb + alpha * ideal_part


def _unscale(z: np.ndarray, degree_up: np.ndarray) -> np.ndarray:
    return (z * degree_up[:, None]).T


def predict(model: ChebyCFModel, rows) -> np.ndarray:
    """Scores for one interaction row ``(num_items,)`` or a batch ``(b, num_items)``."""
    rows = np.asarray(rows, dtype=np.float64)
    single = rows.ndim == 1
    if single:
        rows = rows[None, :]
    if rows.ndim != 2 or rows.shape[1] != model.num_items:
        raise ValueError(f"expected {model.num_items} items per row, got shape {rows.shape}")

    y = _scaled_signal(rows, model.degree_down)
    cheb = combine_terms(model.filter.coefficients, chebyshev_terms(model.graph, y, model.filter.order))
    ideal_part = apply_ideal(model.ideal, y) if model.ideal is not None else None
    out = _unscale(_mix(cheb, model.params.alpha, ideal_part), model.degree_up)
    return out[0] if single else out


def top_n(scores: np.ndarray, n: int) -> np.ndarray:
    """Indices of the ``n`` largest finite scores; ties go to the smaller index."""
    if n < 1:
        raise ValueError("n must be >= 1")
    finite = np.isfinite(scores) | (scores == np.inf)
    available = int(np.count_nonzero(finite))
    n = min(n, available)
    if n == 0:
        return np.empty(0, dtype=np.int64)
    if n < scores.size:
        kth = np.partition(scores, scores.size - n)[scores.size - n]
        cand = np.flatnonzero(scores >= kth)
    else:
        cand = np.arange(scores.size)
    cand = cand[finite[cand]]
    order = np.lexsort((cand, -scores[cand]))
    return cand[order[:n]]


def mask_seen(scores: np.ndarray, rows) -> np.ndarray:
    scores = np.array(scores, dtype=np.float64, copy=True)
    if sp.issparse(rows):
        r, c = rows.nonzero()
        scores[r, c] = -np.inf
    else:
        scores[np.asarray(rows) > 0] = -np.inf
    return scores


def recommend_topn(model, r_u, n: int) -> list[tuple[int, float]]:
    """Top-``n`` unseen items for one user as ``(item, score)`` pairs."""
    r_u = np.asarray(r_u, dtype=np.float64)
    scores = model.predict(r_u)
    scores = np.where(r_u > 0, -np.inf, scores)
    idx = top_n(scores, n)
    return [(int(i), float(scores[i])) for i in idx]


# --- persistence -----------------------------------------------------------

_PARAMS = struct.Struct("<dqdqdqqqq")  # phi, eta, alpha, order, beta, seed, users, items, has_ideal


def _write_array(buf: io.BytesIO, a: np.ndarray, dtype: str) -> None:
    a = np.ascontiguousarray(a, dtype=dtype)
    buf.write(struct.pack("<q", a.size))
    buf.write(a.tobytes(order="C"))


def _read_array(view: memoryview, pos: int, dtype: str, shape=None):
    (size,) = struct.unpack_from("<q", view, pos)
    pos += 8
    nbytes = size * np.dtype(dtype).itemsize
    if size < 0 or pos + nbytes > len(view):
        raise ModelFormatError("array extends past end of model payload")
    a = np.frombuffer(view[pos : pos + nbytes], dtype=dtype).copy()
    if shape is not None:
        a = a.reshape(shape)
    return a, pos + nbytes


def save_model(model: ChebyCFModel, path) -> None:
    """Write a single-file binary model.

    Layout: magic, u32 format version, payload, SHA-256 of everything before it.
    """
    p = model.params
    buf = io.BytesIO()
    buf.write(model.dataset_checksum)
    buf.write(
        _PARAMS.pack(
            p.phi, p.eta, p.alpha, p.order_k, p.beta, model.seed,
            model.graph.num_users, model.graph.num_items, int(model.ideal is not None),
        )
    )
    _write_array(buf, model.filter.coefficients, "<f8")
    if model.ideal is not None:
        _write_array(buf, model.ideal.singular_values, "<f8")
        _write_array(buf, model.ideal.vectors, "<f8")
        buf.write(struct.pack("<qq", model.ideal.iterations, int(model.ideal.converged)))
    _write_array(buf, model.graph.user_degrees, "<f8")
    _write_array(buf, model.graph.item_degrees, "<f8")
    _write_array(buf, model.degree_up, "<f8")
    _write_array(buf, model.degree_down, "<f8")
    _write_array(buf, model.train.indptr, "<i8")
    _write_array(buf, model.train.indices, "<i8")

    body = MAGIC + struct.pack("<I", FORMAT_VERSION) + buf.getvalue()
    Path(path).write_bytes(body + hashlib.sha256(body).digest())


def load_model(path) -> ChebyCFModel:
    raw = Path(path).read_bytes()
    head = len(MAGIC) + 4
    if len(raw) < head or raw[: len(MAGIC)] != MAGIC:
        raise ModelFormatError(f"{path}: not a ChebyCF model file")
    (version,) = struct.unpack_from("<I", raw, len(MAGIC))
    if version != FORMAT_VERSION:
        raise ModelVersionError(version, FORMAT_VERSION)
    if len(raw) < head + 32:
        raise ChecksumError(f"{path}: file truncated (checksum missing)")
    body, digest = raw[:-32], raw[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise ChecksumError(f"{path}: checksum mismatch (file truncated or corrupted)")

    view = memoryview(body)
    pos = head
    checksum = bytes(view[pos : pos + 32])
    pos += 32
    phi, eta, alpha, order, beta, seed, n_users, n_items, has_ideal = _PARAMS.unpack_from(view, pos)
    pos += _PARAMS.size
    coeffs, pos = _read_array(view, pos, "<f8")
    ideal = None
    if has_ideal:
        sv, pos = _read_array(view, pos, "<f8")
        vecs, pos = _read_array(view, pos, "<f8", (n_items, eta))
        iterations, converged = struct.unpack_from("<qq", view, pos)
        pos += 16
        ideal = IdealPassBasis(vectors=vecs, singular_values=sv, iterations=iterations, converged=bool(converged))
    user_deg, pos = _read_array(view, pos, "<f8")
    item_deg, pos = _read_array(view, pos, "<f8")
    up, pos = _read_array(view, pos, "<f8")
    down, pos = _read_array(view, pos, "<f8")
    indptr, pos = _read_array(view, pos, "<i8")
    indices, pos = _read_array(view, pos, "<i8")
    if pos != len(body):
        raise ModelFormatError(f"{path}: {len(body) - pos} trailing bytes")

    train = sp.csr_matrix((np.ones(len(indices)), indices, indptr), shape=(n_users, n_items))
    graph = normalize(train)
    if not (np.array_equal(graph.user_degrees, user_deg) and np.array_equal(graph.item_degrees, item_deg)):
        raise ModelFormatError(f"{path}: stored degrees disagree with stored interactions")
    params = HyperParams(phi=phi, alpha=alpha, eta=eta, beta=beta, order_k=order)
    spec = plateau_filter_spec(phi, order)
    spec = ChebyFilterSpec(coefficients=coeffs, target=spec.target, phi=phi)
    return ChebyCFModel(
        graph=graph,
        train=train,
        filter=spec,
        ideal=ideal,
        params=params,
        degree_up=up,
        degree_down=down,
        dataset_checksum=checksum,
        seed=seed,
    )
