import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from btlab.geometry import make_model
from btlab.observables import UnknownObservable, constant, parse_observable, value_only

Z, ZB = sp.symbols("z zb")
T = Z * ZB
SYMBOLIC = {
    "x1": (Z + ZB) / (1 + T),
    "x2": -sp.I * (Z - ZB) / (1 + T),
    "x3": (T - 1) / (T + 1),
}
SYMBOLIC["y2m2"] = SYMBOLIC["x1"] * SYMBOLIC["x2"]
SYMBOLIC["y40"] = 35 * SYMBOLIC["x3"] ** 4 - 30 * SYMBOLIC["x3"] ** 2 + 3
SYMBOLIC["y3p1"] = SYMBOLIC["x1"] * (5 * SYMBOLIC["x3"] ** 2 - 1)

POINTS = np.array([0.2 + 0.1j, -0.7 + 0.4j, 1.3 - 0.9j, 0.05j])


def _sym_derivs(expr):
    fns = [expr, sp.diff(expr, Z), sp.diff(expr, ZB), sp.diff(expr, Z, ZB)]
    return [sp.lambdify((Z, ZB), f, "numpy") for f in fns]


@pytest.fixture(scope="module")
def sphere_obs():
    return make_model("round_sphere").observables


@pytest.mark.parametrize("name", sorted(SYMBOLIC))
def test_derivatives_match_symbolic_oracle(sphere_obs, name):
    obs = sphere_obs[name]
    v, dz, dzb, dzdzb = _sym_derivs(SYMBOLIC[name])
    zb = np.conj(POINTS)
    np.testing.assert_allclose(obs(POINTS), v(POINTS, zb), atol=1e-12)
    np.testing.assert_allclose(obs.dz(POINTS), dz(POINTS, zb), atol=1e-12)
    np.testing.assert_allclose(obs.dzbar(POINTS), dzb(POINTS, zb), atol=1e-12)
    np.testing.assert_allclose(obs.dzdzbar(POINTS), dzdzb(POINTS, zb), atol=1e-11)


def test_algebra_propagates_derivatives(sphere_obs):
    x1, x2, x3 = sphere_obs["x1"], sphere_obs["x2"], sphere_obs["x3"]
    f = (2 * x1 * x3 - x2**3 + 0.5) / 3 + (x1 + 1j * x2).conj()
    expr = (2 * SYMBOLIC["x1"] * SYMBOLIC["x3"] - SYMBOLIC["x2"] ** 3 + sp.Rational(1, 2)) / 3 + (
        SYMBOLIC["x1"] - sp.I * SYMBOLIC["x2"]
    )
    v, dz, dzb, dzdzb = _sym_derivs(expr)
    zb = np.conj(POINTS)
    np.testing.assert_allclose(f(POINTS), v(POINTS, zb), atol=1e-12)
    np.testing.assert_allclose(f.dz(POINTS), dz(POINTS, zb), atol=1e-12)
    np.testing.assert_allclose(f.dzbar(POINTS), dzb(POINTS, zb), atol=1e-12)
    np.testing.assert_allclose(f.dzdzbar(POINTS), dzdzb(POINTS, zb), atol=1e-11)


def test_real_and_imag_parts(sphere_obs):
    w = sphere_obs["x1"] + 1j * sphere_obs["x2"]
    np.testing.assert_allclose(w.real()(POINTS), sphere_obs["x1"](POINTS), atol=1e-15)
    np.testing.assert_allclose(w.imag()(POINTS), sphere_obs["x2"](POINTS), atol=1e-15)
    assert w.real().is_real and not w.is_real
    np.testing.assert_allclose(w.imag().dz(POINTS), sphere_obs["x2"].dz(POINTS), atol=1e-14)


@settings(max_examples=30, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 4))
def test_leibniz_rule_for_mixed_derivative(a, b, n):
    obs = make_model("round_sphere").observables
    f = a * obs["x1"] + obs["x3"] ** n
    g = obs["x2"] + b
    fg = f * g
    expect = f.dzdzbar(POINTS) * g(POINTS) + f.dz(POINTS) * g.dzbar(POINTS) + f.dzbar(POINTS) * g.dz(POINTS) + f(
        POINTS
    ) * g.dzdzbar(POINTS)
    np.testing.assert_allclose(fg.dzdzbar(POINTS), expect, atol=1e-10)


def test_constant_has_zero_derivatives():
    c = constant(2.5)
    np.testing.assert_array_equal(c.dz(POINTS), 0)
    np.testing.assert_array_equal(c.dzdzbar(POINTS), 0)
    np.testing.assert_array_equal(c(POINTS), 2.5)


def test_value_only_has_no_derivatives():
    f = value_only("f", lambda z: np.abs(z))
    assert not f.has_derivatives and not f.has_second_derivative


def test_parse_expressions(sphere_obs):
    f = parse_observable("x1 + i*x2", sphere_obs)
    np.testing.assert_allclose(f(POINTS), sphere_obs["x1"](POINTS) + 1j * sphere_obs["x2"](POINTS))
    g = parse_observable("re(x3**2) - conj(y2m2)/2", sphere_obs)
    expect = sphere_obs["x3"](POINTS) ** 2 - sphere_obs["y2m2"](POINTS) / 2
    np.testing.assert_allclose(g(POINTS), expect, atol=1e-15)
    assert parse_observable("x3", sphere_obs) is sphere_obs["x3"]


@pytest.mark.parametrize("text", ["x9", "x1 +", "sin(x1)", "x1 ** x2", "__import__('os')"])
def test_parse_rejects(sphere_obs, text):
    with pytest.raises(UnknownObservable):
        parse_observable(text, sphere_obs)
