"""Expansions in 1/m over ladders of levels.

``richardson_fit`` solves the least-squares Vandermonde problem
``value(m) ~ sum_j c_j m^-j``; ``decay_rate`` is the log-log slope of a
positive sequence against 1/m. The star-product helpers extract the
first-order coefficient C1(f, g) pointwise from covariant symbols of
``m (T_f T_g - T_fg)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .coherent import covariant_symbol
from .geometry import KahlerModel
from .hilbert import QuantumLevel, cached_level
from .numerics import spectral_norm
from .observables import Observable
from .operators import toeplitz, toeplitz_from_values

MAX_CONDITION = 1e12


class IllConditioned(ArithmeticError):
    pass


class NonPositiveSample(ValueError):
    pass


@dataclass(frozen=True)
class AsymptoticFit:
    ms: tuple[int, ...]
    values: np.ndarray = field(repr=False)
    order: int
    coeffs: np.ndarray
    residual: float
    rate: float | None = None

    @property
    def c0(self):
        return self.coeffs[0]

    def predict(self, m) -> np.ndarray:
        x = 1.0 / np.asarray(m, dtype=float)
        return np.polynomial.polynomial.polyval(x, self.coeffs)

    def as_dict(self) -> dict:
        def num(v):
            v = complex(v)
            return v.real if v.imag == 0 else [v.real, v.imag]

        return {
            "ms": list(self.ms),
            "order": self.order,
            "coeffs": [num(c) for c in self.coeffs],
            "residual": self.residual,
            "rate": self.rate,
        }


def _check_ladder(ms: Sequence[int]) -> np.ndarray:
    m = np.asarray(ms, dtype=float)
    if np.any(np.diff(m) <= 0):
        raise ValueError(f"ladder must be strictly increasing, got {list(ms)}")
    return m


def richardson_fit(ms: Sequence[int], values, order: int) -> AsymptoticFit:
    """Least-squares fit of ``values`` by a polynomial of degree ``order`` in 1/m.

    ``values`` may be shape (len(ms),) or (len(ms), k) for k independent
    series sharing the ladder; coefficients then have shape (order+1, k).
    """
    m = _check_ladder(ms)
    vals = np.asarray(values)
    if len(m) < order + 2:
        raise ValueError(f"order {order} needs at least {order + 2} samples, got {len(m)}")
    vander = np.vander(1.0 / m, order + 1, increasing=True)
    scale = np.max(np.abs(vander), axis=0)
    cond = np.linalg.cond(vander / scale)
    if cond > MAX_CONDITION:
        raise IllConditioned(f"Vandermonde condition {cond:.2e} exceeds {MAX_CONDITION:.0e}")
    sol, *_ = np.linalg.lstsq(vander / scale, vals, rcond=None)
    coeffs = sol / (scale if sol.ndim == 1 else scale[:, None])
    resid = float(np.max(np.abs(vander @ coeffs - vals)))
    rate = None
    if vals.ndim == 1 and np.all(np.isreal(vals)) and np.all(np.real(vals) > 0):
        rate = decay_rate(ms, np.real(vals))
    return AsymptoticFit(tuple(int(v) for v in ms), vals, order, coeffs, resid, rate)


def decay_rate(ms: Sequence[int], values) -> float:
    """Slope of log(value) against log(1/m)."""
    m = _check_ladder(ms)
    v = np.asarray(values, dtype=float)
    if np.any(v <= 0):
        raise NonPositiveSample("decay rate needs strictly positive samples")
    slope, _ = np.polyfit(np.log(1.0 / m), np.log(v), 1)
    return float(slope)


# star product ---------------------------------------------------------------


@dataclass(frozen=True)
class C1Extraction:
    ms: tuple[int, ...]
    z: np.ndarray = field(repr=False)
    c1: np.ndarray
    residual: np.ndarray
    c0: np.ndarray
    c0_error: float

    @property
    def c0_ok(self) -> bool:
        return self.c0_error <= 0.01


def _levels(model: KahlerModel, ms: Sequence[int], levels=None) -> list[QuantumLevel]:
    if levels is not None:
        return list(levels)
    return [cached_level(model, int(m)) for m in ms]


def extract_C1(
    model: KahlerModel,
    f: Observable,
    g: Observable,
    ms: Sequence[int],
    z,
    order: int = 2,
    levels=None,
) -> C1Extraction:
    """C1(f, g) at points ``z`` from sigma(m (T_f T_g - T_fg)) fitted in 1/m.

    Also fits sigma(T_f T_g) and records the relative error of its limit
    against f g (the zeroth-order coefficient).
    """
    _check_ladder(ms)
    if len(ms) < 4:
        raise ValueError("extract_C1 needs at least four levels")
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    d, p = [], []
    for level in _levels(model, ms, levels):
        tf = toeplitz(level, f).matrix
        tg = toeplitz(level, g).matrix
        tfg = toeplitz(level, f * g).matrix
        prod = tf @ tg
        p.append(covariant_symbol(level, prod, z))
        d.append(covariant_symbol(level, level.m * (prod - tfg), z))
    fit = richardson_fit(ms, np.array(d), order)
    fit0 = richardson_fit(ms, np.array(p), order)
    fg = f(z) * g(z)
    c0_err = float(np.max(np.abs(fit0.coeffs[0] - fg)) / max(np.max(np.abs(fg)), 1e-3))
    vander = np.vander(1.0 / np.asarray(ms, float), order + 1, increasing=True)
    resid = np.max(np.abs(vander @ fit.coeffs - np.array(d)), axis=0)
    return C1Extraction(tuple(ms), z, fit.coeffs[0], resid, fit0.coeffs[0], c0_err)


def antisymmetry_error(model: KahlerModel, f: Observable, g: Observable, ms, z) -> dict:
    """Compare C1(f,g) - C1(g,f) with -i{f,g} at ``z``."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    a = extract_C1(model, f, g, ms, z)
    b = extract_C1(model, g, f, ms, z)
    lhs = a.c1 - b.c1
    rhs = -1j * model.poisson_bracket(f, g, z)
    rel = np.abs(lhs - rhs) / (np.abs(rhs) + 0.01)
    return {
        "lhs": lhs,
        "rhs": rhs,
        "max_rel_error": float(np.max(rel)),
        "c0_error": max(a.c0_error, b.c0_error),
        "residual": float(max(np.max(a.residual), np.max(b.residual))),
    }


def star_remainder(
    model: KahlerModel, f: Observable, g: Observable, ms: Sequence[int], fit_ms: Sequence[int] | None = None
) -> list[float]:
    """||T_f T_g - T_fg - T_{C1}/m|| per level, C1 extracted on each level's grid."""
    fit_ms = tuple(fit_ms or ms)
    fit_levels = _levels(model, fit_ms)
    out = []
    for m in ms:
        level = cached_level(model, int(m))
        c1 = extract_C1(model, f, g, fit_ms, level.grid.z, levels=fit_levels).c1
        tc1 = toeplitz_from_values(level, c1, "C1").matrix
        tf = toeplitz(level, f).matrix
        tg = toeplitz(level, g).matrix
        rem = tf @ tg - toeplitz(level, f * g).matrix - tc1 / level.m
        out.append(spectral_norm(rem))
    return out


def corrected_rate(ms: Sequence[int], values) -> float:
    """Decay exponent r from log v = c - r log m + a/m + b/m^2.

    Unlike :func:`decay_rate` this absorbs the subleading terms of an
    expansion that starts at m^-r.
    """
    m = _check_ladder(ms)
    v = np.asarray(values, dtype=float)
    if np.any(v <= 0):
        raise NonPositiveSample("decay rate needs strictly positive samples")
    if len(m) < 5:
        raise ValueError("corrected_rate needs at least five samples")
    design = np.column_stack([np.ones_like(m), -np.log(m), 1 / m, 1 / m**2])
    sol, *_ = np.linalg.lstsq(design, np.log(v), rcond=None)
    return float(sol[1])
