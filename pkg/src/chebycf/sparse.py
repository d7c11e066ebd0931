"""Interaction storage, degree normalization and matrix-free graph operators.

Signals are item-indexed. Every ``apply_*`` operator accepts either a single
signal of shape ``(num_items,)`` or a block of signals stacked as columns,
shape ``(num_items, b)``.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

logger = logging.getLogger(__name__)


class DatasetError(ValueError):
    """Raised for invalid interaction data."""


class DatasetParseError(DatasetError):
    def __init__(self, path, lineno: int, token: str):
        self.path = str(path)
        self.lineno = lineno
        self.token = token
        super().__init__(f"{path}:{lineno}: invalid token {token!r} (expected a non-negative integer)")


@dataclass(frozen=True)
class InteractionDataset:
    """Binary user-item interactions split into train and test.

    ``user_ids[k]`` / ``item_ids[k]`` hold the external id of dense index ``k``.
    """

    train: sp.csr_matrix
    test: sp.csr_matrix
    user_ids: np.ndarray
    item_ids: np.ndarray
    duplicates_dropped: int = 0

    def __post_init__(self):
        if self.train.shape != self.test.shape:
            raise DatasetError(f"train shape {self.train.shape} != test shape {self.test.shape}")
        if self.train.shape != (len(self.user_ids), len(self.item_ids)):
            raise DatasetError("id vocabularies do not match matrix shape")
        for name, m in (("train", self.train), ("test", self.test)):
            if m.nnz and not np.all(m.data == 1.0):
                raise DatasetError(f"{name} matrix must be binary")
        if self.train.nnz and self.test.nnz:
            overlap = self.train.multiply(self.test)
            overlap.eliminate_zeros()
            if overlap.nnz:
                u, i = overlap.nonzero()
                raise DatasetError(
                    f"{overlap.nnz} (user, item) pairs appear in both train and test, "
                    f"e.g. user {self.user_ids[u[0]]} item {self.item_ids[i[0]]}"
                )

    @property
    def num_users(self) -> int:
        return self.train.shape[0]

    @property
    def num_items(self) -> int:
        return self.train.shape[1]

    @classmethod
    def from_matrices(cls, train, test=None) -> InteractionDataset:
        """Build a dataset from dense or sparse 0/1 matrices; ids are the dense indices."""
        train = _binary_csr(train)
        test = sp.csr_matrix(train.shape, dtype=np.float64) if test is None else _binary_csr(test)
        return cls(
            train=train,
            test=test,
            user_ids=np.arange(train.shape[0], dtype=np.int64),
            item_ids=np.arange(train.shape[1], dtype=np.int64),
        )

    def checksum(self) -> bytes:
        """SHA-256 over shape and the sparsity structure of both splits."""
        h = hashlib.sha256()
        h.update(np.asarray(self.train.shape, dtype="<i8").tobytes())
        for m in (self.train, self.test):
            h.update(np.asarray(m.indptr, dtype="<i8").tobytes())
            h.update(np.asarray(m.indices, dtype="<i8").tobytes())
        h.update(np.asarray(self.user_ids, dtype="<i8").tobytes())
        h.update(np.asarray(self.item_ids, dtype="<i8").tobytes())
        return h.digest()


def _binary_csr(m) -> sp.csr_matrix:
    m = sp.csr_matrix(m, dtype=np.float64)
    m.sum_duplicates()
    m.eliminate_zeros()
    m.data[:] = 1.0
    m.sort_indices()
    return m


def _parse_adjacency(path) -> list[tuple[int, list[int]]]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            tokens = line.split()
            if not tokens:
                continue
            values = []
            for tok in tokens:
                if not (tok.isascii() and tok.isdigit()):
                    raise DatasetParseError(path, lineno, tok)
                values.append(int(tok))
            rows.append((values[0], values[1:]))
    return rows


def _to_csr(rows, user_index, item_index, shape) -> tuple[sp.csr_matrix, int]:
    us, its = [], []
    for uid, items in rows:
        u = user_index[uid]
        for iid in items:
            us.append(u)
            its.append(item_index[iid])
    n = len(us)
    coo = sp.coo_matrix(
        (np.ones(n), (np.asarray(us, dtype=np.int64), np.asarray(its, dtype=np.int64))), shape=shape
    )
    m = _binary_csr(coo)
    return m, n - m.nnz


def load_interactions(train_path, test_path) -> InteractionDataset:
    """Read a train/test pair of adjacency-list files (``uid iid iid ...`` per line).

    Ids found in either file get a dense index; indices follow ascending
    external id, so already-contiguous ids map to themselves.
    """
    train_rows = _parse_adjacency(train_path)
    test_rows = _parse_adjacency(test_path)

    user_ids = np.array(sorted({u for u, _ in train_rows} | {u for u, _ in test_rows}), dtype=np.int64)
    item_ids = np.array(
        sorted({i for _, items in train_rows + test_rows for i in items}), dtype=np.int64
    )
    user_index = {int(u): k for k, u in enumerate(user_ids)}
    item_index = {int(i): k for k, i in enumerate(item_ids)}
    shape = (len(user_ids), len(item_ids))

    train, dup_train = _to_csr(train_rows, user_index, item_index, shape)
    test, dup_test = _to_csr(test_rows, user_index, item_index, shape)
    dropped = dup_train + dup_test
    if dropped:
        logger.info("dropped %d duplicate interactions (train %d, test %d)", dropped, dup_train, dup_test)

    return InteractionDataset(
        train=train, test=test, user_ids=user_ids, item_ids=item_ids, duplicates_dropped=dropped
    )


def resolve_split(root, name: str) -> tuple[Path, Path]:
    """Locate ``<root>/<name>/train.txt`` and ``test.txt``."""
    base = Path(root) / name
    return base / "train.txt", base / "test.txt"


def _inv_sqrt(deg: np.ndarray) -> np.ndarray:
    out = np.zeros_like(deg, dtype=np.float64)
    nz = deg > 0
    out[nz] = 1.0 / np.sqrt(deg[nz])
    return out


@dataclass(frozen=True)
class NormalizedGraph:
    """Degree-normalized interaction matrix ``D_u^-1/2 R D_i^-1/2``.

    Holds the matrix twice (CSR and transposed CSR) so both product
    directions run row-wise. Immutable once built.
    """

    r_tilde: sp.csr_matrix
    user_degrees: np.ndarray
    item_degrees: np.ndarray
    r_tilde_t: sp.csr_matrix = field(repr=False, default=None)

    def __post_init__(self):
        if self.r_tilde_t is None:
            object.__setattr__(self, "r_tilde_t", self.r_tilde.T.tocsr())

    @property
    def num_users(self) -> int:
        return self.r_tilde.shape[0]

    @property
    def num_items(self) -> int:
        return self.r_tilde.shape[1]

    @property
    def nnz(self) -> int:
        return self.r_tilde.nnz

    def dense(self) -> np.ndarray:
        return self.r_tilde.toarray()


def normalize(dataset_or_train) -> NormalizedGraph:
    """Normalize the training interactions; degrees come from train only.

    Zero-degree users/items get all-zero rows/columns.
    """
    if isinstance(dataset_or_train, InteractionDataset):
        r = dataset_or_train.train
    else:
        r = _binary_csr(dataset_or_train)
    if r.nnz == 0:
        raise DatasetError("cannot normalize an empty training matrix")

    user_deg = np.asarray(r.sum(axis=1), dtype=np.float64).ravel()
    item_deg = np.asarray(r.sum(axis=0), dtype=np.float64).ravel()
    du = _inv_sqrt(user_deg)
    di = _inv_sqrt(item_deg)

    coo = r.tocoo()
    data = du[coo.row] * di[coo.col]
    r_tilde = sp.csr_matrix((data, (coo.row, coo.col)), shape=r.shape)
    r_tilde.sort_indices()
    return NormalizedGraph(r_tilde=r_tilde, user_degrees=user_deg, item_degrees=item_deg)


def _check(x, n: int, what: str) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim not in (1, 2) or x.shape[0] != n:
        raise ValueError(f"{what}: expected leading dimension {n}, got shape {x.shape}")
    return x


def apply_r_tilde(g: NormalizedGraph, x) -> np.ndarray:
    """Item signal(s) -> user signal(s): ``R~ x``."""
    x = _check(x, g.num_items, "apply_r_tilde")
    return g.r_tilde @ x


def apply_r_tilde_t(g: NormalizedGraph, y) -> np.ndarray:
    """User signal(s) -> item signal(s): ``R~^T y``."""
    y = _check(y, g.num_users, "apply_r_tilde_t")
    return g.r_tilde_t @ y


def apply_gram(g: NormalizedGraph, x) -> np.ndarray:
    """``R~^T (R~ x)`` without forming the item-item matrix."""
    x = _check(x, g.num_items, "apply_gram")
    return g.r_tilde_t @ (g.r_tilde @ x)


def apply_rescaled_laplacian(g: NormalizedGraph, x) -> np.ndarray:
    """``(2 L* - I) x = x - 2 R~^T R~ x``; maps the spectrum of L* onto [-1, 1]."""
    x = _check(x, g.num_items, "apply_rescaled_laplacian")
    return x - 2.0 * apply_gram(g, x)
