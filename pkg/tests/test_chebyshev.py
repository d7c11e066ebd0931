import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from chebycf.chebyshev import (
    ChebyFilterSpec,
    apply_chebyshev_filter,
    chebyshev_eval,
    chebyshev_nodes,
    chebyshev_T,
    format_transfer_csv,
    interpolation_coefficients,
    plateau,
    plateau_filter_spec,
    transfer_samples,
)
from chebycf.sparse import normalize
from chebycf.synthetic import random_interactions

# numpy.polynomial.chebyshev.chebinterpolate(plateau(., 4), 8), an independent
# implementation sampling the same first-kind Chebyshev points
PLATEAU4_K8 = [
    5.0000000000000000e-01, -3.3952544298270815e-01, 0.0, -1.4553147599387622e-01,
    0.0, -1.6123579439868405e-02, 0.0, 1.3576628763250448e-03, 0.0,
]
# same, phi = 2.5 (non-integer power)
PLATEAU25_K8 = [
    5.0000000000000000e-01, -3.9746725559137430e-01, 0.0, -1.0830700805806565e-01,
    0.0, 7.0487369882078731e-03, 0.0, -1.5522681457536428e-03, 0.0,
]


class TestT:
    def test_t0(self):
        assert chebyshev_T(0, 0.7) == 1.0

    def test_t2(self):
        assert chebyshev_T(2, 0.5) == pytest.approx(-0.5, abs=1e-15)

    def test_t5_trig(self):
        theta = np.random.default_rng(0).uniform(0, np.pi, 20)
        np.testing.assert_allclose(chebyshev_T(5, np.cos(theta)), np.cos(5 * theta), atol=1e-12)

    @settings(max_examples=200)
    @given(st.integers(0, 32), st.floats(0, math.pi))
    def test_trig_identity(self, k, theta):
        assert abs(chebyshev_T(k, math.cos(theta)) - math.cos(k * theta)) <= 1e-10

    def test_negative_order(self):
        with pytest.raises(ValueError):
            chebyshev_T(-1, 0.0)


class TestNodes:
    def test_one(self):
        np.testing.assert_allclose(chebyshev_nodes(1), [0.0], atol=1e-16)

    def test_two(self):
        np.testing.assert_allclose(chebyshev_nodes(2), [-math.sqrt(0.5), math.sqrt(0.5)], atol=1e-15)

    def test_roots_of_t9(self):
        x = chebyshev_nodes(9)
        assert np.all(np.abs(chebyshev_T(9, x)) < 1e-12)
        assert np.all(np.diff(x) > 0)
        assert np.all(np.abs(x) < 1)

    def test_zero(self):
        with pytest.raises(ValueError):
            chebyshev_nodes(0)


class TestPlateau:
    @pytest.mark.parametrize("phi", [0.5, 1.0, 4.0, 17.5])
    def test_fixed_points(self, phi):
        assert plateau(-1.0, phi) == 1.0
        assert plateau(0.0, phi) == 0.5
        assert plateau(1.0, phi) == 0.0

    def test_substitution(self):
        assert plateau(0.5, 2) == pytest.approx(0.375, abs=1e-15)
        assert plateau(-0.5, 2) == pytest.approx(0.625, abs=1e-15)

    def test_non_integer_power_is_real(self):
        out = plateau(np.linspace(-1, 1, 101), 2.5)
        assert out.dtype == np.float64
        assert np.all((out >= 0) & (out <= 1))

    def test_phi_one_is_linear(self):
        x = np.linspace(-1, 1, 11)
        np.testing.assert_allclose(plateau(x, 1.0), 0.5 - 0.5 * x, atol=1e-15)

    @pytest.mark.parametrize("phi", [0.0, -1.0])
    def test_bad_phi(self, phi):
        with pytest.raises(ValueError):
            plateau(0.1, phi)


class TestInterpolation:
    def test_constant(self):
        np.testing.assert_allclose(interpolation_coefficients(lambda x: np.ones_like(x), 3), [1, 0, 0, 0], atol=1e-15)

    def test_identity(self):
        np.testing.assert_allclose(interpolation_coefficients(lambda x: x, 1), [0, 1], atol=1e-15)

    def test_scalar_only_target(self):
        c = interpolation_coefficients(lambda x: math.cos(x), 6)
        np.testing.assert_allclose(c, interpolation_coefficients(np.cos, 6), atol=1e-15)

    def test_plateau_at_nodes(self):
        c = interpolation_coefficients(lambda x: plateau(x, 4), 8)
        nodes = chebyshev_nodes(9)
        np.testing.assert_allclose(chebyshev_eval(c, nodes), plateau(nodes, 4), atol=1e-12)

    @pytest.mark.parametrize("phi, expected", [(4.0, PLATEAU4_K8), (2.5, PLATEAU25_K8)])
    def test_frozen_coefficients(self, phi, expected):
        np.testing.assert_allclose(plateau_filter_spec(phi, 8).coefficients, expected, atol=1e-14)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 12), st.data())
    def test_polynomial_exactness(self, order, data):
        degree = data.draw(st.integers(0, order))
        seed = data.draw(st.integers(0, 2**32 - 1))
        rng = np.random.default_rng(seed)
        mono = rng.uniform(-1, 1, degree + 1)
        target = lambda x: np.polynomial.polynomial.polyval(x, mono)
        c = interpolation_coefficients(target, order)
        pts = rng.uniform(-1, 1, 100)
        np.testing.assert_allclose(chebyshev_eval(c, pts), target(pts), atol=1e-9, rtol=0)

    def test_plateau_error_non_increasing(self):
        grid = np.linspace(-1, 1, 1001)
        errs = [np.max(np.abs(plateau_filter_spec(4.0, k).transfer(grid) - plateau(grid, 4.0))) for k in (2, 4, 8, 16)]
        assert all(b <= a for a, b in zip(errs, errs[1:])), errs


@pytest.fixture(scope="module")
def graph60():
    return normalize(random_interactions(45, 60, 0.08, np.random.default_rng(11)))


class TestFilter:
    def test_identity_coefficients(self, graph60):
        x = np.random.default_rng(0).standard_normal(60)
        spec = ChebyFilterSpec([1.0, 0.0, 0.0, 0.0])
        np.testing.assert_array_equal(apply_chebyshev_filter(spec, graph60, x), x)

    def test_t1_on_identity_graph(self):
        g = normalize(sp.identity(5, format="csr"))
        x = np.arange(5.0)
        np.testing.assert_array_equal(apply_chebyshev_filter(ChebyFilterSpec([0.0, 1.0]), g, x), -x)

    def test_against_eigendecomposition(self, graph60):
        r = graph60.dense()
        lam, q = np.linalg.eigh(np.eye(60) - r.T @ r)
        spec = plateau_filter_spec(4.0, 8)
        x = np.random.default_rng(1).standard_normal(60)
        ref = q @ (np.polynomial.chebyshev.chebval(2 * lam - 1, spec.coefficients) * (q.T @ x))
        np.testing.assert_allclose(apply_chebyshev_filter(spec, graph60, x), ref, atol=1e-8, rtol=0)

    def test_eigenvector_gain(self, graph60):
        r = graph60.dense()
        lam, q = np.linalg.eigh(np.eye(60) - r.T @ r)
        spec = plateau_filter_spec(10.0, 8)
        for j in range(0, 60, 7):
            out = apply_chebyshev_filter(spec, graph60, q[:, j])
            np.testing.assert_allclose(out, spec.transfer(2 * lam[j] - 1) * q[:, j], atol=1e-8)

    def test_linearity(self, graph60):
        rng = np.random.default_rng(2)
        x, y = rng.standard_normal((2, 60))
        a, b = 0.7, -2.3
        spec = plateau_filter_spec(4.0, 8)
        lhs = apply_chebyshev_filter(spec, graph60, a * x + b * y)
        rhs = a * apply_chebyshev_filter(spec, graph60, x) + b * apply_chebyshev_filter(spec, graph60, y)
        np.testing.assert_allclose(lhs, rhs, atol=1e-10)

    def test_uses_k_laplacian_applications(self, graph60, monkeypatch):
        import chebycf.chebyshev as mod

        calls = []
        orig = mod.apply_rescaled_laplacian
        monkeypatch.setattr(mod, "apply_rescaled_laplacian", lambda g, x: calls.append(1) or orig(g, x))
        apply_chebyshev_filter(plateau_filter_spec(2.0, 8), graph60, np.ones(60))
        assert len(calls) == 8

    def test_block_matches_columns(self, graph60):
        x = np.random.default_rng(3).standard_normal((60, 4))
        spec = plateau_filter_spec(3.0, 8)
        out = apply_chebyshev_filter(spec, graph60, x)
        for j in range(4):
            np.testing.assert_array_equal(out[:, j], apply_chebyshev_filter(spec, graph60, x[:, j]))

    def test_dimension_mismatch(self, graph60):
        with pytest.raises(ValueError):
            apply_chebyshev_filter(plateau_filter_spec(1.0), graph60, np.zeros(59))


def test_spec_order_and_immutability():
    spec = plateau_filter_spec(4.0, 8)
    assert spec.order == 8 and len(spec.coefficients) == 9
    with pytest.raises(ValueError):
        spec.coefficients[0] = 1.0


def test_export_csv_weight_at_zero():
    lam, w = transfer_samples(plateau_filter_spec(1.0, 8))
    text = format_transfer_csv(lam, w)
    lines = text.splitlines()
    assert lines[0] == "lambda,weight"
    assert len(lines) == 1002
    assert lines[501] == "0,0.5"
