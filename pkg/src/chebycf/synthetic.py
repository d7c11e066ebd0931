"""Seeded random interaction data for tests and oracle checks."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from chebycf.sparse import InteractionDataset


def random_interactions(num_users: int, num_items: int, density: float, rng) -> sp.csr_matrix:
    """Bernoulli(``density``) binary matrix where every user has at least one item."""
    rng = np.random.default_rng(rng)
    dense = rng.random((num_users, num_items)) < density
    empty = ~dense.any(axis=1)
    dense[np.flatnonzero(empty), rng.integers(0, num_items, size=int(empty.sum()))] = True
    return sp.csr_matrix(dense.astype(np.float64))


def random_dataset(
    num_users: int, num_items: int, density: float, seed: int = 0, test_fraction: float = 0.2
) -> InteractionDataset:
    """Random interactions split per user into train/test (each user keeps >= 1 train item)."""
    rng = np.random.default_rng(seed)
    full = random_interactions(num_users, num_items, density, rng).tolil()
    train = np.zeros((num_users, num_items))
    test = np.zeros((num_users, num_items))
    for u, items in enumerate(full.rows):
        items = np.array(items, dtype=np.int64)
        rng.shuffle(items)
        n_test = int(round(test_fraction * len(items))) if len(items) > 1 else 0
        n_test = min(n_test, len(items) - 1)
        test[u, items[:n_test]] = 1.0
        train[u, items[n_test:]] = 1.0
    return InteractionDataset.from_matrices(train, test)
