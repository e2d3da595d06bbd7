"""Experiment orchestration over level ladders.

An :class:`ExperimentSpec` names a model, an experiment kind, observables,
a ladder of levels and pass/fail thresholds. :func:`run_experiment`
evaluates one scalar sample per level (cells are independent and may run
concurrently), fits it in 1/m where meaningful and evaluates the checks.
All numeric output is deterministic; wall-clock times live in a separate
``timing`` block.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from . import coherent
from .asymptotics import antisymmetry_error, corrected_rate, decay_rate, richardson_fit, star_remainder
from .geometry import KahlerModel, SphereModel, TorusModel, make_model
from .hilbert import QuantumLevel, cached_level
from .operators import (
    dirac_defect,
    op_norm,
    product_defect,
    spectral_measure_gap,
    toeplitz,
    trace_gap,
    tuynman_gq,
)

EXPERIMENT_KINDS = (
    "norms",
    "dirac",
    "product",
    "berezin",
    "star",
    "trace",
    "spectral",
    "umexpand",
    "fspullback",
    "tuynman",
)

SPHERE_LADDER = (8, 12, 16, 24, 32, 48, 64)
TORUS_LADDER = (8, 12, 16, 24, 32)

DEFAULT_THRESHOLDS: dict[str, float] = {
    "norm_C": 4.0,
    "norm_upper_slack": 1e-9,
    "limit_tol": 1e-3,
    "min_rate": 0.9,
    "min_rate_star": 1.8,
    "berezin_rel_tol": 0.05,
    "antisym_rel_tol": 0.05,
    "c0_rel_tol": 0.01,
    "trace_bound": 1.0,
    "spectral_tol": 0.05,
    "um_c0_tol": 0.02,
    "um_spread": 1e-9,
    "fs_round_tol": 1e-6,
    "fs_spread": 0.25,
}

NEEDS_F = {"norms", "dirac", "product", "berezin", "star", "trace", "spectral", "tuynman"}
NEEDS_G = {"dirac", "product", "star"}


class ValidationError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass(frozen=True)
class ExperimentSpec:
    model: str
    experiment: str
    f: str | None = None
    g: str | None = None
    epsilon: float | None = None
    tau: complex | None = None
    ladder: tuple[int, ...] | None = None
    n_res: int | None = None
    out: str | None = None
    jobs: int = 1
    power: int = 2
    thresholds: dict[str, float] = field(default_factory=dict)

    def build_model(self) -> KahlerModel:
        params = {}
        if self.epsilon is not None:
            params["epsilon"] = self.epsilon
        if self.tau is not None:
            params["tau"] = self.tau
        return make_model(self.model, **params)

    @property
    def levels(self) -> tuple[int, ...]:
        if self.ladder:
            return self.ladder
        return TORUS_LADDER if self.model == "torus" else SPHERE_LADDER

    def threshold(self, name: str) -> float:
        return self.thresholds.get(name, DEFAULT_THRESHOLDS[name])

    def validate(self) -> "ExperimentSpec":
        if self.experiment not in EXPERIMENT_KINDS:
            raise ValidationError("experiment", f"unknown kind {self.experiment!r}")
        model = self.build_model()
        for role in ("f", "g"):
            name = getattr(self, role)
            needed = self.experiment in (NEEDS_G if role == "g" else NEEDS_F)
            if name is None:
                if needed:
                    raise ValidationError(role, f"experiment {self.experiment!r} needs observable {role}")
                continue
            try:
                model.observable(name)
            except KeyError as exc:
                raise ValidationError(role, f"unknown observable {name!r} for {self.model}") from exc
        ladder = self.levels
        if any(m < 1 for m in ladder) or any(b <= a for a, b in zip(ladder, ladder[1:])):
            raise ValidationError("ladder", f"must be strictly increasing positive levels, got {ladder}")
        unknown = set(self.thresholds) - set(DEFAULT_THRESHOLDS)
        if unknown:
            raise ValidationError("thresholds", f"unknown thresholds {sorted(unknown)}")
        if self.jobs < 1:
            raise ValidationError("jobs", "must be >= 1")
        return self

    def echo(self) -> dict:
        d = asdict(self)
        d["tau"] = None if self.tau is None else [self.tau.real, self.tau.imag]
        d["ladder"] = list(self.levels)
        d["thresholds"] = {k: self.threshold(k) for k in sorted(DEFAULT_THRESHOLDS)}
        d.pop("out")
        d.pop("jobs")
        return d


@dataclass
class Check:
    name: str
    value: float
    threshold: float
    passed: bool

    def as_dict(self) -> dict:
        return {"value": _num(self.value), "threshold": self.threshold, "pass": bool(self.passed)}


@dataclass
class Report:
    spec: dict
    samples: list[dict]
    fits: dict[str, dict]
    checks: dict[str, Check]
    environment: dict
    timing: dict
    error: str | None = None

    @property
    def passed(self) -> bool:
        return self.error is None and all(c.passed for c in self.checks.values())

    def as_dict(self, with_timing: bool = True) -> dict:
        d = {
            "spec": self.spec,
            "samples": self.samples,
            "fits": self.fits,
            "checks": {k: c.as_dict() for k, c in self.checks.items()},
            "passed": self.passed,
            "environment": self.environment,
            "error": self.error,
        }
        if with_timing:
            d["timing"] = self.timing
        return d


def _num(v):
    if v is None:
        return None
    if isinstance(v, (complex, np.complexfloating)):
        v = complex(v)
        return v.real if v.imag == 0 else [v.real, v.imag]
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    return float(v)


def sample_points(model: KahlerModel, n: int = 24) -> np.ndarray:
    """Deterministic, roughly uniform chart points (no RNG).

    Sphere: Fibonacci lattice with x3 <= 0.9 mapped to the southern chart.
    Torus: golden-ratio lattice in the fundamental domain.
    """
    k = np.arange(n)
    golden = (math.sqrt(5) - 1) / 2
    if isinstance(model, TorusModel):
        a = (k * golden) % 1.0
        b = (k + 0.5) / n
        return model.param_to_chart(a, b)
    x3 = -1 + (2 * k + 1) / n * 0.95
    phi = 2 * math.pi * ((k * golden) % 1.0)
    r = np.sqrt(1 - x3**2)
    return r * np.exp(1j * phi) / (1 - x3)


# per-kind evaluators ---------------------------------------------------------


def _sample_cells(spec: ExperimentSpec, fn: Callable[[QuantumLevel], float], model: KahlerModel):
    def cell(m):
        t0 = time.perf_counter()
        level = cached_level(model, m, spec.n_res)
        value = fn(level)
        return m, value, level.summary(), time.perf_counter() - t0

    with ThreadPoolExecutor(max_workers=spec.jobs) as pool:
        results = list(pool.map(cell, spec.levels))
    return results


def run_experiment(spec: ExperimentSpec) -> Report:
    """Run one experiment; failures inside a cell are recorded, not raised."""
    t_start = time.perf_counter()
    spec = spec.validate()
    model = spec.build_model()
    f = model.observable(spec.f) if spec.f else None
    g = model.observable(spec.g) if spec.g else None
    ms = spec.levels
    checks: dict[str, Check] = {}
    fits: dict[str, dict] = {}
    values: list = []
    fitted = None
    levels_env: list[dict] = []
    cell_times: dict[str, float] = {}
    error = None
    primary = None

    def chk(name, value, threshold, ok):
        checks[name] = Check(name, value, threshold, bool(ok))

    def sample(fn):
        res = _sample_cells(spec, fn, model)
        for m, _, summ, dt in res:
            levels_env.append(summ)
            cell_times[str(m)] = dt
        return [v for _, v, _, _ in res]

    try:
        kind = spec.experiment
        pts = sample_points(model)
        if kind == "norms":
            sup = model.sup_norm(f)
            values = sample(lambda lv: op_norm(toeplitz(lv, f)))
            fit = richardson_fit(ms, values, min(3, len(ms) - 2))
            fits["norm"] = fit.as_dict()
            fitted = fit.predict(ms)
            c = spec.threshold("norm_C")
            lower = min(v - (sup - c / m) for m, v in zip(ms, values))
            upper = max(v - sup for v in values)
            chk("lower_bound_margin", lower, 0.0, lower >= 0)
            chk("upper_bound_excess", upper, spec.threshold("norm_upper_slack"), upper <= spec.threshold("norm_upper_slack"))
            err = abs(fit.c0 - sup)
            chk("limit_error", err, spec.threshold("limit_tol"), err <= spec.threshold("limit_tol"))
            primary = "limit_error"
        elif kind in ("dirac", "product", "tuynman"):
            if kind == "dirac":
                values = sample(lambda lv: dirac_defect(lv, f, g))
            elif kind == "product":
                values = sample(lambda lv: product_defect(lv, f, g))
            else:
                values = sample(
                    lambda lv: op_norm(tuynman_gq(lv, f).matrix - toeplitz(lv, f).matrix)
                )
            rate = decay_rate(ms, values) if min(values) > 0 else float("nan")
            fit = richardson_fit(ms, values, min(2, len(ms) - 2))
            fits["defect"] = fit.as_dict()
            if len(ms) >= 5 and min(values) > 0:
                fits["defect"]["corrected_rate"] = corrected_rate(ms, values)
            fitted = fit.predict(ms)
            chk("rate", rate, spec.threshold("min_rate"), rate >= spec.threshold("min_rate"))
            chk("last_below_first", values[-1] - values[0], 0.0, values[-1] < values[0])
            primary = "rate"
        elif kind == "berezin":
            lap = model.laplacian(f, pts)
            fields = sample(lambda lv: lv.m * (coherent.berezin_transform(lv, f, pts) - f(pts)))
            scale = float(np.max(np.abs(lap)))
            values = [float(np.max(np.abs(v - lap)) / scale) for v in fields]
            fit = richardson_fit(ms, np.array(fields), min(2, len(ms) - 2))
            err = float(np.max(np.abs(fit.coeffs[0] - lap)) / scale)
            fits["first_order"] = {"order": fit.order, "rel_linf_error": err, "residual": fit.residual}
            chk("first_order_rel_error", err, spec.threshold("berezin_rel_tol"), err <= spec.threshold("berezin_rel_tol"))
            primary = "first_order_rel_error"
        elif kind == "star":
            grid_pts = model.quadrature_grid(16).z[::37][:10]
            res = antisymmetry_error(model, f, g, ms, grid_pts)
            fits["antisymmetry"] = {
                "max_rel_error": res["max_rel_error"],
                "c0_error": res["c0_error"],
                "residual": res["residual"],
            }
            chk("antisymmetry", res["max_rel_error"], spec.threshold("antisym_rel_tol"),
                res["max_rel_error"] <= spec.threshold("antisym_rel_tol"))
            chk("c0", res["c0_error"], spec.threshold("c0_rel_tol"), res["c0_error"] <= spec.threshold("c0_rel_tol"))
            rem_ms = tuple(m for m in ms if m <= 48)
            values = star_remainder(model, f, g, rem_ms)
            for m in rem_ms:
                levels_env.append(cached_level(model, m, spec.n_res).summary())
            ms = rem_ms
            rate = decay_rate(ms, values)
            fits["remainder"] = {"ms": list(ms), "rate": rate}
            chk("remainder_rate", rate, spec.threshold("min_rate_star"), rate >= spec.threshold("min_rate_star"))
            primary = "remainder_rate"
        elif kind == "trace":
            values = sample(lambda lv: trace_gap(lv, f))
            worst = max(abs(v) for v in values)
            chk("bounded", worst, spec.threshold("trace_bound"), worst <= spec.threshold("trace_bound"))
            primary = "bounded"
        elif kind == "spectral":
            p = spec.power
            values = sample(lambda lv: spectral_measure_gap(lv, f, lambda x: x**p))
            chk("last_gap", values[-1], spec.threshold("spectral_tol"), values[-1] <= spec.threshold("spectral_tol"))
            dec = all(b < a for a, b in zip(values, values[1:]))
            chk("decreasing", float(dec), 1.0, dec)
            primary = "last_gap"
        elif kind == "umexpand":
            fields = sample(lambda lv: 2 * math.pi * coherent.bergman_diag(lv, pts))
            values = [float(np.max(v) - np.min(v)) / float(np.mean(v)) for v in fields]
            scaled = np.array([v / m for m, v in zip(ms, fields)])
            fit = richardson_fit(ms, scaled, min(2, len(ms) - 2))
            c0 = fit.coeffs[0]
            err = float(np.max(np.abs(c0 - 1.0)))
            fits["um"] = {"order": fit.order, "c0_min": float(np.min(c0)), "c0_max": float(np.max(c0)), "residual": fit.residual}
            chk("c0_error", err, spec.threshold("um_c0_tol"), err <= spec.threshold("um_c0_tol"))
            primary = "c0_error"
            if isinstance(model, SphereModel) and not model.deformed:
                worst = max(values)
                chk("round_spread", worst, spec.threshold("um_spread"), worst <= spec.threshold("um_spread"))
                exact = max(float(np.max(np.abs(v - (m + 1)))) / (m + 1) for m, v in zip(ms, fields))
                chk("round_exact", exact, spec.threshold("um_spread"), exact <= spec.threshold("um_spread"))
        elif kind == "fspullback":
            fs_pts = pts[np.abs(pts) < 3.0]
            corr = sample(lambda lv: coherent.fs_correction(lv, fs_pts))
            dens = [m * model.density(fs_pts) + coherent.fs_sign() * c for m, c in zip(ms, corr)]
            values = [float(np.max(np.abs(c))) for c in corr]
            min_dens = min(float(np.min(d)) for d in dens)
            chk("density_positive", min_dens, 0.0, min_dens > 0)
            if isinstance(model, TorusModel):
                # u_m is constant only up to terms exponentially small in m
                worst = max(values)
                chk("correction_bounded", worst, values[0], worst <= values[0])
                primary = "correction_bounded"
            elif not model.deformed:
                worst = max(values)
                chk("round_correction", worst, spec.threshold("fs_round_tol"), worst <= spec.threshold("fs_round_tol"))
                primary = "round_correction"
            else:
                spread = (max(values) - min(values)) / max(values)
                chk("correction_spread", spread, spec.threshold("fs_spread"), spread < spec.threshold("fs_spread"))
                primary = "correction_spread"
            fits["fs"] = {"sign": coherent.fs_sign()}
    except Exception as exc:  # report records partial results
        error = f"{type(exc).__module__}.{type(exc).__name__}: {exc}"

    samples = []
    thr = checks[primary].threshold if primary in checks else None
    ok = checks[primary].passed if primary in checks else False
    for i, m in enumerate(ms[: len(values)]):
        raw = _num(values[i])
        fv = None if fitted is None else _num(fitted[i])
        samples.append(
            {
                "m": int(m),
                "raw": raw,
                "fitted": fv,
                "residual": None if fv is None else abs(raw - fv),
                "threshold": thr,
                "pass": ok,
            }
        )
    env = {"levels": sorted(levels_env, key=lambda d: d["m"]) if levels_env else [], "sign_convention": {"laplacian": "x3 -> -2 x3"}}
    timing = {"total_seconds": time.perf_counter() - t_start, "cells": cell_times}
    return Report(spec.echo(), samples, fits, checks, env, timing, error)


__all__ = [
    "EXPERIMENT_KINDS",
    "DEFAULT_THRESHOLDS",
    "ExperimentSpec",
    "Report",
    "ValidationError",
    "run_experiment",
    "sample_points",
]
