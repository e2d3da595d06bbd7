import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from btlab.hilbert import cached_level
from btlab.numerics import hermitian_eig, spectral_norm
from btlab.operators import (
    adjoint_defect,
    commutator,
    dirac_defect,
    norm_bounds,
    op_norm,
    product_defect,
    spectral_measure_gap,
    spectrum,
    toeplitz,
    trace,
    trace_gap,
    tuynman_gq,
)


def x3_diag(m):
    return (2 * np.arange(m + 1) - m) / (m + 2)


@pytest.mark.parametrize("kind", ["round_sphere", "deformed", "torus"])
def test_identity_symbol(request, kind):
    model = request.getfixturevalue(kind)
    for m in (1, 5, 12):
        level = cached_level(model, m)
        t = toeplitz(level, model.observables["one"]).matrix
        np.testing.assert_allclose(t, np.eye(level.dim), atol=1e-10)
        assert op_norm(toeplitz(level, model.observables["one"])) == pytest.approx(1, abs=1e-10)


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 40))
def test_fuzzy_sphere_x3(m):
    from btlab.geometry import make_model

    model = make_model("round_sphere")
    t = toeplitz(cached_level(model, m), model.observables["x3"]).matrix
    np.testing.assert_allclose(t, np.diag(x3_diag(m)), atol=1e-9)
    np.testing.assert_allclose(hermitian_eig(t, vectors=False).eigenvalues, x3_diag(m), atol=1e-9)


def test_x3_small_cases_and_norms(round_sphere):
    t2 = toeplitz(cached_level(round_sphere, 2), round_sphere.observables["x3"]).matrix
    np.testing.assert_allclose(np.diag(t2).real, [-0.5, 0, 0.5], atol=1e-12)
    np.testing.assert_allclose(hermitian_eig(t2, vectors=False).eigenvalues, [-0.5, 0, 0.5], atol=1e-12)
    for m in (2, 8, 32):
        n = op_norm(toeplitz(cached_level(round_sphere, m), round_sphere.observables["x3"]))
        assert abs(n - m / (m + 2)) < 1e-12
    assert spectral_norm(np.zeros((3, 3))) == 0
    assert spectral_norm(np.diag([-5.0, 2.0])) == pytest.approx(5)


def test_norm_bounded_by_sup(round_sphere):
    o = round_sphere.observables
    f = o["x1"] + o["x3"] * o["x3"]
    sup = round_sphere.sup_norm(f)
    for m in (2, 8, 16, 32):
        nb = norm_bounds(cached_level(round_sphere, m), f, sup)
        assert nb["norm"] <= sup + 1e-9
        assert nb["C"] <= 4


def test_real_symbols_are_hermitian(deformed):
    level = cached_level(deformed, 9)
    for name in ("x1", "y3p2", "y40"):
        op = toeplitz(level, deformed.observables[name])
        assert op.hermiticity_defect <= 1e-10 * np.max(np.abs(op.matrix))


@settings(max_examples=20, deadline=None)
@given(st.complex_numbers(max_magnitude=5, allow_nan=False, allow_infinity=False),
       st.complex_numbers(max_magnitude=5, allow_nan=False, allow_infinity=False))
def test_linearity(a, b):
    from btlab.geometry import make_model

    model = make_model("deformed_sphere", epsilon=-0.2)
    level = cached_level(model, 7)
    f, g = model.observables["x2"], model.observables["y2p1"]
    lhs = toeplitz(level, a * f + b * g).matrix
    rhs = a * toeplitz(level, f).matrix + b * toeplitz(level, g).matrix
    np.testing.assert_allclose(lhs, rhs, atol=1e-12 * (1 + abs(a) + abs(b)))


def test_positivity(deformed):
    o = deformed.observables
    f = (o["x1"] + 0.3) ** 2 + o["y2m2"] ** 2
    for m in (4, 16):
        assert hermitian_eig(toeplitz(cached_level(deformed, m), f).matrix, vectors=False).eigenvalues[0] >= -1e-10


def test_adjoint_identity(round_sphere, torus):
    o = round_sphere.observables
    for m in (2, 8, 32):
        assert adjoint_defect(cached_level(round_sphere, m), o["x1"] + 1j * o["x2"]) <= 1e-10
    assert adjoint_defect(cached_level(torus, 8), torus.observables["f_2_1"]) <= 1e-10


# defects with closed forms --------------------------------------------------


@pytest.mark.parametrize("m", [2, 4, 8, 16, 32])
def test_sphere_defect_oracles(round_sphere, m):
    o = round_sphere.observables
    level = cached_level(round_sphere, m)
    assert dirac_defect(level, o["x1"], o["x2"]) == pytest.approx(4 * m / (m + 2) ** 2, abs=1e-10)
    assert product_defect(level, o["x3"], o["x3"]) == pytest.approx(1 / (m + 3), abs=1e-10)
    gap = spectral_norm(tuynman_gq(level, o["x1"]).matrix - toeplitz(level, o["x1"]).matrix)
    assert gap == pytest.approx(1 / (m + 2), abs=1e-10)


def test_trivial_defects(round_sphere, torus):
    o = round_sphere.observables
    level = cached_level(round_sphere, 6)
    assert dirac_defect(level, o["x1"], o["x1"]) <= 1e-10
    assert dirac_defect(level, o["one"], o["x2"]) <= 1e-10
    assert product_defect(level, o["y20"], o["one"]) <= 1e-10
    assert product_defect(cached_level(round_sphere, 4), o["x3"], o["x3"]) > product_defect(
        cached_level(round_sphere, 8), o["x3"], o["x3"]) > 0
    d8 = dirac_defect(cached_level(round_sphere, 8), o["x1"], o["x2"])
    d16 = dirac_defect(cached_level(round_sphere, 16), o["x1"], o["x2"])
    assert d16 < d8


def test_torus_modulus_one_product(torus):
    level = cached_level(torus, 8)
    f, fb = torus.observables["f_1_0"], torus.observables["f_m1_0"]
    a = toeplitz(level, f).matrix @ toeplitz(level, fb).matrix - np.eye(8)
    assert product_defect(level, f, fb) == pytest.approx(spectral_norm(a), abs=1e-14)
    # T_f10 is c * shift, so T_f10 T_f-10 = |c|^2 I
    c = abs(toeplitz(level, f).matrix[1, 0])
    assert product_defect(level, f, fb) == pytest.approx(1 - c * c, abs=1e-10)


def test_torus_fourier_mode_is_shift(torus):
    t = toeplitz(cached_level(torus, 4), torus.observables["f_1_0"]).matrix
    k = np.arange(4)
    shifted = t[(k + 1) % 4, k]
    mask = np.ones((4, 4), bool)
    mask[(k + 1) % 4, k] = False
    assert np.max(np.abs(t[mask])) <= 1e-10
    assert np.min(np.abs(shifted)) > 0.1
    np.testing.assert_allclose(shifted, shifted[0], atol=1e-12)


def test_commutator():
    a = np.array([[0, 1], [0, 0]])
    b = a.T
    np.testing.assert_array_equal(commutator(a, b), np.diag([1, -1]))


def test_tuynman_examples(round_sphere):
    level = cached_level(round_sphere, 4)
    op = tuynman_gq(level, round_sphere.observables["x3"])
    assert op.times_i
    np.testing.assert_allclose(op.matrix, 1.25 * np.diag(x3_diag(4)), atol=1e-12)
    c = tuynman_gq(level, 3.0 * round_sphere.observables["one"])
    np.testing.assert_allclose(c.matrix, 3 * np.eye(5), atol=1e-12)


# traces and spectral measure ---------------------------------------------------


@pytest.mark.parametrize("m", [1, 8, 16, 32, 64])
def test_trace_gap_oracles(round_sphere, m):
    o = round_sphere.observables
    level = cached_level(round_sphere, m)
    assert trace_gap(level, o["one"]) == pytest.approx(1, abs=1e-10)
    assert abs(trace_gap(level, o["x3"])) <= 1e-10
    # Beta integrals give Tr T_{x3^2} = (m+1)/3, hence a gap of 1/3
    assert trace_gap(level, o["x3"] * o["x3"]) == pytest.approx(1 / 3, abs=1e-10)
    assert trace(toeplitz(level, o["x3"] * o["x3"])).real == pytest.approx((m + 1) / 3, abs=1e-10)


def test_trace_gap_torus(torus):
    for m in (3, 8):
        assert trace_gap(cached_level(torus, m), torus.observables["one"]) == pytest.approx(0, abs=1e-10)


@pytest.mark.parametrize("m", [8, 16, 32])
def test_spectral_measure_oracles(round_sphere, m):
    level = cached_level(round_sphere, m)
    x3 = round_sphere.observables["x3"]
    assert spectral_measure_gap(level, x3, lambda lam: np.ones_like(lam)) == pytest.approx(1 / m, abs=1e-12)
    assert spectral_measure_gap(level, x3, lambda lam: lam) <= 1e-12
    discrete = float(np.sum(x3_diag(m) ** 2)) / m
    assert spectral_measure_gap(level, x3, lambda lam: lam**2) == pytest.approx(abs(discrete - 1 / 3), abs=1e-12)
    assert discrete == pytest.approx((m + 1) / (3 * (m + 2)), abs=1e-14)


def test_spectrum_requires_real(round_sphere):
    level = cached_level(round_sphere, 3)
    with pytest.raises(ValueError):
        spectrum(level, round_sphere.observables["x1"] + 1j * round_sphere.observables["x2"])
    np.testing.assert_allclose(spectrum(level, round_sphere.observables["x3"]), x3_diag(3), atol=1e-12)
