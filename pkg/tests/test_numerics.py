import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st

from btlab import numerics as nm


def _random_hermitian(n, seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return 0.5 * (a + a.conj().T)


# quadrature -------------------------------------------------------------


@pytest.mark.parametrize("n", [1, 2, 5, 32, 200])
def test_gauss_legendre_matches_numpy(n):
    rule = nm.gauss_legendre(n)
    x, w = np.polynomial.legendre.leggauss(n)
    np.testing.assert_allclose(rule.nodes, x, atol=1e-14)
    np.testing.assert_allclose(rule.weights, w, rtol=1e-12, atol=1e-14)


@pytest.mark.parametrize("n", [3, 10, 40])
def test_gauss_legendre_polynomial_exactness(n):
    rule = nm.gauss_legendre(n)
    for k in range(2 * n):
        exact = 0.0 if k % 2 else 2.0 / (k + 1)
        assert abs(rule.integrate(lambda x: x**k) - exact) < 1e-13


def test_gauss_legendre_large_n_sum_of_weights():
    rule = nm.gauss_legendre(4096)
    assert abs(float(nm.tree_sum(rule.weights)) - 2.0) < 1e-12
    assert np.all(np.diff(rule.nodes) > 0)


@pytest.mark.parametrize("n", [0, 4097, 2.5])
def test_gauss_legendre_rejects_bad_n(n):
    with pytest.raises(ValueError):
        nm.gauss_legendre(n)


def test_periodic_trapezoid_exact_on_fourier_modes():
    n = 16
    rule = nm.periodic_trapezoid(n)
    for k in range(-n + 1, n):
        val = rule.integrate(lambda t: np.exp(1j * k * t))
        assert abs(val - (2 * math.pi if k == 0 else 0.0)) < 1e-13


# deterministic sums ---------------------------------------------------------


@given(st.lists(st.integers(-10**6, 10**6), min_size=0, max_size=300))
def test_tree_sum_exact_on_integers(xs):
    assert nm.tree_sum(np.array(xs, dtype=float)) == sum(xs)


@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=300))
def test_tree_sum_close_to_fsum(xs):
    assert abs(nm.tree_sum(np.array(xs)) - math.fsum(xs)) <= 1e-12 * (1 + sum(abs(x) for x in xs))


def test_tree_sum_axis():
    a = np.arange(24.0).reshape(2, 3, 4)
    np.testing.assert_array_equal(nm.tree_sum(a, axis=1), a.sum(axis=1))


def test_weighted_inner_matches_direct_product():
    rng = np.random.default_rng(3)
    n = 2500  # crosses the 1024-row block boundary
    a = rng.normal(size=(n, 4)) + 1j * rng.normal(size=(n, 4))
    b = rng.normal(size=(n, 3)) + 1j * rng.normal(size=(n, 3))
    w = rng.uniform(size=n)
    np.testing.assert_allclose(nm.weighted_inner(a, b, w), a.conj().T @ (w[:, None] * b), rtol=1e-12)


def test_dzdzbar_fd_on_known_potentials():
    z = np.array([0.0, 0.5 + 0.2j, -1.3j])
    np.testing.assert_allclose(nm.dzdzbar_fd(lambda z: np.abs(z) ** 2, z), 1.0, atol=1e-9)
    t = np.abs(z) ** 2
    got = nm.dzdzbar_fd(lambda z: np.log1p(np.abs(z) ** 2), z)
    np.testing.assert_allclose(got, 1 / (1 + t) ** 2, atol=1e-9)


# Cholesky and triangular solves -------------------------------------------


def test_cholesky_matches_numpy():
    a = _random_hermitian(7, 1) + 8 * np.eye(7)
    low = nm.cholesky(a)
    np.testing.assert_allclose(low, np.linalg.cholesky(a), atol=1e-12)
    np.testing.assert_allclose(low @ low.conj().T, a, atol=1e-12)


def test_cholesky_reports_failing_pivot():
    a = np.diag([1.0, 2.0, -1.0, 4.0])
    with pytest.raises(nm.NotPositiveDefinite) as info:
        nm.cholesky(a)
    assert info.value.k == 2


def test_solve_lower_matches_scipy():
    a = _random_hermitian(6, 2) + 7 * np.eye(6)
    low = nm.cholesky(a)
    b = np.arange(12.0).reshape(6, 2) + 1j
    np.testing.assert_allclose(nm.solve_lower(low, b), scipy.linalg.solve_triangular(low, b, lower=True), atol=1e-12)


# eigensolver -------------------------------------------------------------


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 14), st.integers(0, 10**6))
def test_hermitian_eig_matches_lapack(n, seed):
    a = _random_hermitian(n, seed)
    res = nm.hermitian_eig(a)
    np.testing.assert_allclose(res.eigenvalues, scipy.linalg.eigvalsh(a), atol=1e-11)
    v = res.eigenvectors
    np.testing.assert_allclose(v.conj().T @ v, np.eye(n), atol=1e-11)
    np.testing.assert_allclose(a @ v, v * res.eigenvalues, atol=1e-10)


def test_hermitian_eig_degenerate_and_diagonal():
    np.testing.assert_allclose(nm.hermitian_eig(np.eye(5)).eigenvalues, np.ones(5))
    d = np.diag([3.0, -1.0, 2.0])
    np.testing.assert_allclose(nm.hermitian_eig(d, vectors=False).eigenvalues, [-1.0, 2.0, 3.0])


def test_hermitian_eig_fuzzy_sphere_spectrum():
    # spin-j J_z in a dense random unitary frame
    m = 40
    lam = (2 * np.arange(m + 1) - m) / (m + 2)
    q, _ = np.linalg.qr(_random_hermitian(m + 1, 5) + 1j * np.eye(m + 1))
    a = q @ np.diag(lam) @ q.conj().T
    np.testing.assert_allclose(nm.hermitian_eig(a, vectors=False).eigenvalues, lam, atol=1e-12)


@pytest.mark.parametrize("shape", [(4, 4), (5, 3)])
def test_spectral_norm_matches_numpy(shape):
    rng = np.random.default_rng(9)
    a = rng.normal(size=shape) + 1j * rng.normal(size=shape)
    assert abs(nm.spectral_norm(a) - np.linalg.norm(a, 2)) < 1e-11
    h = _random_hermitian(6, 4)
    assert abs(nm.spectral_norm(h) - np.linalg.norm(h, 2)) < 1e-11


def test_hermitian_defect():
    a = np.array([[1.0, 2.0], [2.0 + 1e-3, 1.0]])
    assert nm.hermitian_defect(a) > 0
    assert nm.hermitian_defect(np.eye(3)) == 0
