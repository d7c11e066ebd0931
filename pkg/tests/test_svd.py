import numpy as np
import pytest
import scipy.linalg
import scipy.sparse as sp

from chebycf.sparse import normalize
from chebycf.svd import IdealPassBasis, apply_ideal, truncated_svd, truncated_svd_arpack
from chebycf.synthetic import random_interactions


def dense_right_subspace(g, k):
    _, s, vt = np.linalg.svd(g.dense())
    return s, vt[:k].T


@pytest.fixture(scope="module")
def graph40x60():
    rng = np.random.default_rng(5)
    while True:
        g = normalize(random_interactions(40, 60, 0.1, rng))
        s = np.linalg.svd(g.dense(), compute_uv=False)
        if s[7] - s[8] > 1e-3:
            return g


def test_identity_graph():
    g = normalize(sp.identity(5, format="csr"))
    basis = truncated_svd(g, 3)
    np.testing.assert_allclose(basis.singular_values, [1, 1, 1], atol=1e-12)
    np.testing.assert_allclose(basis.vectors.T @ basis.vectors, np.eye(3), atol=1e-12)


def test_two_by_two():
    g = normalize(np.array([[1, 1], [1, 0]]))
    basis = truncated_svd(g, 1)
    _, s, vt = np.linalg.svd(g.dense())
    assert abs(basis.singular_values[0] - s[0]) <= 1e-8
    v = basis.vectors[:, 0]
    assert min(np.linalg.norm(v - vt[0]), np.linalg.norm(v + vt[0])) <= 1e-8


def test_subspace_matches_dense(graph40x60):
    basis = truncated_svd(graph40x60, 8)
    s, v = dense_right_subspace(graph40x60, 8)
    assert basis.converged
    assert np.max(scipy.linalg.subspace_angles(basis.vectors, v)) <= 1e-6
    np.testing.assert_allclose(basis.singular_values, s[:8], atol=1e-8)


def test_invariants(graph40x60):
    basis = truncated_svd(graph40x60, 8)
    v, s = basis.vectors, basis.singular_values
    np.testing.assert_allclose(v.T @ v, np.eye(8), atol=1e-8)
    assert np.all(np.diff(s) <= 0)
    assert np.all((s >= 0) & (s <= 1 + 1e-8))
    r = graph40x60.dense()
    resid = np.linalg.norm(r.T @ (r @ v) - v * s**2, axis=0)
    assert resid.max() <= 1e-9


def test_sign_convention(graph40x60):
    v = truncated_svd(graph40x60, 8).vectors
    peak = v[np.argmax(np.abs(v), axis=0), np.arange(v.shape[1])]
    assert np.all(peak > 0)


def test_seed_determinism(graph40x60):
    a = truncated_svd(graph40x60, 8, seed=7)
    b = truncated_svd(graph40x60, 8, seed=7)
    np.testing.assert_array_equal(a.vectors, b.vectors)
    np.testing.assert_array_equal(a.singular_values, b.singular_values)


def test_rank_deficient_pads_with_null_space():
    r = np.zeros((2, 6))
    r[0, :3] = 1
    r[1, 3:] = 1
    g = normalize(r)  # rank 2
    with pytest.warns(RuntimeWarning, match="rank"):
        basis = truncated_svd(g, 4)
    np.testing.assert_allclose(basis.singular_values, [1, 1, 0, 0], atol=1e-12)
    np.testing.assert_allclose(basis.vectors.T @ basis.vectors, np.eye(4), atol=1e-10)
    gram = g.dense().T @ g.dense()
    np.testing.assert_allclose(gram @ basis.vectors[:, 2:], 0, atol=1e-10)


def test_eta_bounds(graph40x60):
    with pytest.raises(ValueError):
        truncated_svd(graph40x60, 61)
    with pytest.raises(ValueError):
        truncated_svd(graph40x60, 0)


def test_max_iters_warns(graph40x60):
    with pytest.warns(RuntimeWarning, match="max_iters"):
        basis = truncated_svd(graph40x60, 8, max_iters=2)
    assert not basis.converged


def test_arpack_agrees(graph40x60):
    a = truncated_svd(graph40x60, 8)
    b = truncated_svd_arpack(graph40x60, 8)
    assert np.max(scipy.linalg.subspace_angles(a.vectors, b.vectors)) <= 1e-6
    np.testing.assert_allclose(a.singular_values, b.singular_values, atol=1e-10)


@pytest.fixture(scope="module")
def basis(graph40x60):
    return truncated_svd(graph40x60, 8)


class TestApplyIdeal:
    def test_fixes_range(self, basis):
        x = basis.vectors @ np.arange(1.0, 9.0)
        np.testing.assert_allclose(apply_ideal(basis, x), x, atol=1e-12)

    def test_kills_complement(self, basis):
        x = np.random.default_rng(0).standard_normal(60)
        x -= basis.vectors @ (basis.vectors.T @ x)
        np.testing.assert_allclose(apply_ideal(basis, x), 0, atol=1e-12)

    def test_idempotent_and_symmetric(self, basis):
        rng = np.random.default_rng(1)
        x, y = rng.standard_normal((2, 60))
        px = apply_ideal(basis, x)
        np.testing.assert_allclose(apply_ideal(basis, px), px, atol=1e-9)
        assert abs(px @ y - x @ apply_ideal(basis, y)) <= 1e-9

    def test_matches_eigen_projector(self, basis, graph40x60):
        r = graph40x60.dense()
        lam, q = np.linalg.eigh(np.eye(60) - r.T @ r)
        x = np.random.default_rng(2).standard_normal(60)
        ref = q[:, :8] @ (q[:, :8].T @ x)
        np.testing.assert_allclose(apply_ideal(basis, x), ref, atol=1e-7)

    def test_dimension_mismatch(self, basis):
        with pytest.raises(ValueError):
            apply_ideal(basis, np.zeros(3))


def test_basis_shape_validation():
    with pytest.raises(ValueError):
        IdealPassBasis(vectors=np.zeros((5, 2)), singular_values=np.zeros(3))
