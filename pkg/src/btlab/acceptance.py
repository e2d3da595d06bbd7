"""Acceptance criteria as executable checks.

Each ``criterion_XX`` function computes its numbers from scratch (levels are
cached across criteria), compares them with pinned tolerances and returns a
:class:`CriterionResult`. Closed-form oracles used here are written out
directly and do not go through the code paths they check.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import coherent
from .asymptotics import antisymmetry_error, corrected_rate, decay_rate, extract_C1, richardson_fit, star_remainder
from .experiments import SPHERE_LADDER, TORUS_LADDER, sample_points
from .geometry import make_model
from .hilbert import cached_level
from .numerics import spectral_norm
from .operators import (
    adjoint_defect,
    dirac_defect,
    op_norm,
    product_defect,
    spectral_measure_gap,
    toeplitz,
    trace_gap,
    tuynman_gq,
)


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    metrics: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.number:2d}. {self.title}"


def _round_sphere():
    return make_model("round_sphere")


def _deformed(eps: float = 0.1):
    return make_model("deformed_sphere", epsilon=eps)


def _torus():
    return make_model("torus", tau=1j)


def _x3_diag(m: int) -> np.ndarray:
    # Beta-integral closed form
    return (2 * np.arange(m + 1) - m) / (m + 2)


def _smooth_mix(model):
    """A fixed smooth test function mixing harmonics of degree 1..4."""
    obs = model.observables
    names = ["x1", "x2", "x3", "y2m2", "y20", "y3p1", "y4m3", "y40"]
    out = obs[names[0]] * math.sin(1.0)
    for k, name in enumerate(names[1:], start=2):
        out = out + obs[name] * math.sin(float(k))
    return out.renamed("mix")


# -- criteria ------------------------------------------------------------


def criterion_01() -> CriterionResult:
    t0 = time.perf_counter()
    model = _round_sphere()
    x3 = model.observables["x3"]
    errs = {}
    for m in (2, 4, 8, 16, 32):
        t = toeplitz(cached_level(model, m), x3).matrix
        errs[m] = float(np.max(np.abs(t - np.diag(_x3_diag(m)))))
    dt = time.perf_counter() - t0
    ok = max(errs.values()) <= 1e-9 and dt < 10.0
    return CriterionResult(1, "fuzzy sphere: T_x3 = diag((2k-m)/(m+2))", ok, {"max_error": errs, "runtime_s_lt_10": dt < 10.0})


def criterion_02() -> CriterionResult:
    model = _round_sphere()
    obs = model.observables
    ms = SPHERE_LADDER
    metrics = {}
    ok = True
    for name, f in (("x1", obs["x1"]), ("x3", obs["x3"]), ("x3^2", obs["x3"] * obs["x3"])):
        sup = model.sup_norm(f)
        norms = [op_norm(toeplitz(cached_level(model, m), f)) for m in ms]
        lower = all(n >= sup - 4.0 / m for m, n in zip(ms, norms))
        upper = all(n <= sup + 1e-9 for n in norms)
        c0 = float(richardson_fit(ms, norms, 3).c0)
        limit_ok = abs(c0 - sup) <= 1e-3
        metrics[name] = {"sup": sup, "norms": norms, "c0": c0, "lower": lower, "upper": upper}
        ok &= lower and upper and limit_ok
    return CriterionResult(2, "norm sandwich sup-4/m <= ||T_f|| <= sup, limit = sup", ok, metrics)


def criterion_03() -> CriterionResult:
    model = _round_sphere()
    obs = model.observables
    ms = SPHERE_LADDER
    d = [dirac_defect(cached_level(model, m), obs["x1"], obs["x2"]) for m in ms]
    rate = decay_rate(ms, d)
    ok = rate >= 0.9 and d[-1] < d[0]
    return CriterionResult(3, "Dirac defect (x1,x2) decays at rate >= 0.9", ok,
                           {"defects": d, "rate": rate, "supplementary_corrected_rate": corrected_rate(ms, d)})


def criterion_04() -> CriterionResult:
    model = _round_sphere()
    obs = model.observables
    ms = SPHERE_LADDER
    metrics = {}
    ok = True
    for pair in (("x1", "x2"), ("x3", "x3")):
        f, g = obs[pair[0]], obs[pair[1]]
        d = [product_defect(cached_level(model, m), f, g) for m in ms]
        rate = decay_rate(ms, d)
        metrics[",".join(pair)] = {"defects": d, "rate": rate, "supplementary_corrected_rate": corrected_rate(ms, d)}
        ok &= rate >= 0.9
    return CriterionResult(4, "product defects decay at rate >= 0.9", ok, metrics)


def criterion_05() -> CriterionResult:
    model = _round_sphere()
    x3 = model.observables["x3"]
    mix = _smooth_mix(model)
    pts = sample_points(model, 20)
    metrics = {}
    ok = True
    for m in (2, 4, 8, 16, 32):
        level = cached_level(model, m)
        exact = m / (m + 2) * x3(pts)
        sym = float(np.max(np.abs(coherent.berezin_transform(level, x3, pts, "symbolic") - exact)))
        itg = float(np.max(np.abs(coherent.berezin_transform(level, x3, pts, "integral") - exact)))
        gap = coherent.berezin_route_gap(level, mix, pts)
        metrics[m] = {"symbolic": sym, "integral": itg, "route_gap": gap}
        ok &= sym <= 1e-8 and itg <= 1e-6 and gap <= 1e-8
    return CriterionResult(5, "Berezin transform of x3 = m/(m+2) x3; routes agree", ok, metrics)


def criterion_06() -> CriterionResult:
    model = _round_sphere()
    ms = (8, 12, 16, 24, 32)
    pts = sample_points(model, 24)
    metrics = {}
    ok = True
    for name in ("x3", "y2m2"):
        f = model.observables[name]
        lap = model.laplacian(f, pts)
        fields = [m * (coherent.berezin_transform(cached_level(model, m), f, pts) - f(pts)) for m in ms]
        c0 = richardson_fit(ms, np.array(fields), 2).coeffs[0]
        err = float(np.max(np.abs(c0 - lap)) / np.max(np.abs(lap)))
        metrics[name] = {"rel_linf_error": err}
        ok &= err <= 0.05
    return CriterionResult(6, "m (I f - f) -> lap f within 5%", ok, metrics)


def criterion_07() -> CriterionResult:
    model = _round_sphere()
    obs = model.observables
    ms = SPHERE_LADDER
    grid = model.quadrature_grid(16)
    pts = grid.z[:: len(grid) // 10][:10]
    res = antisymmetry_error(model, obs["x1"], obs["x2"], ms, pts)
    null = extract_C1(model, obs["one"], obs["x1"], ms, pts)
    null_max = float(np.max(np.abs(null.c1)))
    null_resid = float(np.max(null.residual))
    null_ok = null_max <= max(null_resid, 1e-12)
    ok = res["max_rel_error"] <= 0.05 and null_ok and res["c0_error"] <= 0.01
    return CriterionResult(
        7,
        "C1(f,g) - C1(g,f) = -i{f,g}; C1(1,g) = 0; C0 = fg",
        ok,
        {"antisym_rel_error": res["max_rel_error"], "c0_rel_error": res["c0_error"], "C1(1,x1)_max": null_max, "fit_residual": null_resid},
    )


def criterion_08() -> CriterionResult:
    model = _round_sphere()
    obs = model.observables
    ms = (8, 12, 16, 24, 32, 48)
    rem = star_remainder(model, obs["x1"], obs["x2"], ms)
    rate = decay_rate(ms, rem)
    return CriterionResult(8, "second-order star remainder decays at rate >= 1.8", rate >= 1.8, {"remainders": rem, "rate": rate})


def criterion_09() -> CriterionResult:
    rs = _round_sphere()
    pts = sample_points(rs, 50)
    spreads = {}
    for m in SPHERE_LADDER:
        v = 2 * math.pi * coherent.bergman_diag(cached_level(rs, m), pts)
        spreads[m] = float(np.max(np.abs(v - (m + 1))) / (m + 1))
    round_ok = max(spreads.values()) <= 1e-9
    ds = _deformed(0.1)
    pts_d = sample_points(ds, 24)
    scaled = np.array([2 * math.pi * coherent.bergman_diag(cached_level(ds, m), pts_d) / m for m in SPHERE_LADDER])
    c0 = richardson_fit(SPHERE_LADDER, scaled, 2).coeffs[0]
    c0_err = float(np.max(np.abs(c0 - 1.0)))
    ok = round_ok and c0_err <= 0.02
    return CriterionResult(9, "2 pi u_m = m+1 (round); leading coeff 1 +- 0.02 (deformed)", ok,
                           {"round_rel_spread": spreads, "deformed_c0_error": c0_err})


def criterion_10() -> CriterionResult:
    rs = _round_sphere()
    pts = sample_points(rs, 24)
    pts = pts[np.abs(pts) < 3.0]
    round_corr = max(float(np.max(np.abs(coherent.fs_correction(cached_level(rs, m), pts)))) for m in (8, 16, 32))
    ds = _deformed(0.1)
    sign = coherent.fs_sign()
    maxima, min_density = {}, math.inf
    for m in (8, 16, 32):
        level = cached_level(ds, m)
        corr = coherent.fs_correction(level, pts)
        maxima[m] = float(np.max(np.abs(corr)))
        min_density = min(min_density, float(np.min(m * ds.density(pts) + sign * corr)))
    spread = (max(maxima.values()) - min(maxima.values())) / max(maxima.values())
    ok = round_corr <= 1e-6 and spread < 0.25 and min_density > 0
    return CriterionResult(
        10,
        "FS pullback: round correction <= 1e-6; deformed correction max varies < 25%, density > 0",
        ok,
        {"round_max_correction": round_corr, "deformed_max_correction": maxima, "spread": spread,
         "min_density": min_density, "sign": sign},
    )


def criterion_11() -> CriterionResult:
    model = _round_sphere()
    obs = model.observables
    one_err = max(abs(trace_gap(cached_level(model, m), obs["one"]) - 1.0) for m in SPHERE_LADDER)
    gaps = [trace_gap(cached_level(model, m), obs["x3"] * obs["x3"]) for m in SPHERE_LADDER]
    ok = one_err <= 1e-10 and max(abs(g) for g in gaps) <= 1.0
    return CriterionResult(11, "trace gap: f=1 gives exactly 1; x3^2 bounded by 1", ok, {"one_error": one_err, "x3^2_gaps": gaps})


def criterion_12() -> CriterionResult:
    model = _round_sphere()
    x3 = model.observables["x3"]
    ms = (8, 12, 16, 24, 32)
    gaps = [spectral_measure_gap(cached_level(model, m), x3, lambda lam: lam**2) for m in ms]
    ok = gaps[-1] <= 0.05 and all(b < a for a, b in zip(gaps, gaps[1:]))
    return CriterionResult(12, "spectral measure of x3 with g = l^2 within 0.05 at m=32, decreasing", ok, {"gaps": gaps})


def criterion_13() -> CriterionResult:
    model = _round_sphere()
    obs = model.observables
    f = obs["x1"] + 1j * obs["x2"]
    defects = {m: adjoint_defect(cached_level(model, m), f) for m in (2, 4, 8, 16, 32)}
    return CriterionResult(13, "adjoint T_f^H = T_conj(f) for f = x1 + i x2", max(defects.values()) <= 1e-10, {"defects": defects})


def criterion_14() -> CriterionResult:
    model = _torus()
    obs = model.observables
    dims_ok = all(cached_level(model, m).dim == m for m in (1, 2, 3) + TORUS_LADDER)
    gram_off = 0.0
    shift_off = 0.0
    for m in (3,) + TORUS_LADDER:
        level = cached_level(model, m)
        g = level.gram
        off = g - np.diag(np.diag(g))
        gram_off = max(gram_off, float(np.max(np.abs(off)) / np.max(np.abs(np.diag(g)))))
        t = toeplitz(level, obs["f_1_0"]).matrix
        mask = np.ones_like(t, dtype=bool)
        k = np.arange(m)
        mask[(k + 1) % m, k] = False
        shift_off = max(shift_off, float(np.max(np.abs(t[mask]))) if mask.any() else 0.0)
    f10 = obs["f_1_0"]
    d = [dirac_defect(cached_level(model, m), f10.real(), f10.imag()) for m in TORUS_LADDER]
    rate = decay_rate(TORUS_LADDER, d) if min(d) > 0 else float("nan")
    # supplementary pair with a non-vanishing bracket (not gating)
    d2 = [dirac_defect(cached_level(model, m), f10.real(), obs["f_0_1"].real()) for m in TORUS_LADDER]
    ok = dims_ok and gram_off <= 1e-10 and shift_off <= 1e-10 and rate >= 0.9
    return CriterionResult(
        14,
        "torus: dim = m, theta Gram diagonal, T_f10 shift, Dirac (Re f10, Im f10) rate >= 0.9",
        ok,
        {"dims_ok": dims_ok, "gram_offdiag_rel": gram_off, "shift_offdiag": shift_off,
         "dirac_re_im_f10": d, "rate": rate,
         "supplementary_dirac_re_f10_re_f01": d2, "supplementary_rate": decay_rate(TORUS_LADDER, d2)},
    )


def criterion_15() -> CriterionResult:
    model = _round_sphere()
    x1 = model.observables["x1"]
    ms = SPHERE_LADDER
    gaps = []
    for m in ms:
        level = cached_level(model, m)
        gaps.append(spectral_norm(tuynman_gq(level, x1).matrix - toeplitz(level, x1).matrix))
    rate = decay_rate(ms, gaps)
    return CriterionResult(15, "||Q_f/i - T_f|| decays at rate >= 0.9 for x1", rate >= 0.9, {"gaps": gaps, "rate": rate})


CRITERIA: dict[int, Callable[[], CriterionResult]] = {
    1: criterion_01,
    2: criterion_02,
    3: criterion_03,
    4: criterion_04,
    5: criterion_05,
    6: criterion_06,
    7: criterion_07,
    8: criterion_08,
    9: criterion_09,
    10: criterion_10,
    11: criterion_11,
    12: criterion_12,
    13: criterion_13,
    14: criterion_14,
    15: criterion_15,
}

VERIFY_BUDGET_S = 15 * 60


def run_criterion(number: int) -> CriterionResult:
    t0 = time.perf_counter()
    res = CRITERIA[number]()
    res.seconds = time.perf_counter() - t0
    return res


def run_all(numbers=None) -> list[CriterionResult]:
    return [run_criterion(n) for n in (numbers or sorted(CRITERIA))]
