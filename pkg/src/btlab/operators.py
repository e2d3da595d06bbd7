"""Toeplitz operators and the semiclassical defects built from them.

All matrices are in the orthonormal basis of a :class:`QuantumLevel`:
``T_f[j, k] = sum_i w_i f(x_i) conj(U[i, j]) U[i, k]``. Commutators and
products are pure matrix algebra; only the construction of ``T_f`` touches
the quadrature.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .geometry import VOLUME
from .hilbert import QuantumLevel
from .numerics import hermitian_defect, hermitian_eig, spectral_norm, tree_sum, weighted_inner
from .observables import Observable


@dataclass(frozen=True, eq=False)
class ToeplitzOp:
    level: QuantumLevel
    source: str
    matrix: np.ndarray = field(repr=False)
    hermiticity_defect: float = 0.0
    times_i: bool = False

    @property
    def m(self) -> int:
        return self.level.m


def toeplitz(level: QuantumLevel, f: Observable) -> ToeplitzOp:
    return toeplitz_from_values(level, f(level.grid.z), f.name, f.is_real)


def toeplitz_from_values(level: QuantumLevel, values, name: str = "f", real: bool = False) -> ToeplitzOp:
    """Toeplitz matrix of a symbol given by its values on the level's grid."""
    u = level.ortho_evals
    fv = np.asarray(values)
    a = weighted_inner(u, fv[:, None] * u, level.grid.weights)
    defect = 0.0
    if real:
        defect = hermitian_defect(a)
        a = 0.5 * (a + a.conj().T)
    return ToeplitzOp(level, name, a, defect)


def op_norm(op: ToeplitzOp | np.ndarray) -> float:
    a = op.matrix if isinstance(op, ToeplitzOp) else op
    return spectral_norm(a)


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def dirac_operator(level: QuantumLevel, f: Observable, g: Observable) -> np.ndarray:
    """m i [T_f, T_g] - T_{f,g}."""
    tf = toeplitz(level, f).matrix
    tg = toeplitz(level, g).matrix
    tb = toeplitz(level, level.model.bracket_observable(f, g)).matrix
    return level.m * 1j * commutator(tf, tg) - tb


def dirac_defect(level: QuantumLevel, f: Observable, g: Observable) -> float:
    return spectral_norm(dirac_operator(level, f, g))


def product_defect(level: QuantumLevel, f: Observable, g: Observable) -> float:
    tf = toeplitz(level, f).matrix
    tg = toeplitz(level, g).matrix
    return spectral_norm(tf @ tg - toeplitz(level, f * g).matrix)


def tuynman_gq(level: QuantumLevel, f: Observable) -> ToeplitzOp:
    """Geometric-quantization operator i T_{f - lap f / 2m}.

    The returned matrix is the Toeplitz part; ``times_i`` marks the
    prefactor i.
    """
    lap = level.model.laplacian_observable(f)
    corrected = Observable(
        f"{f.name}-lap({f.name})/{2 * level.m}",
        lambda z: f(z) - lap(z) / (2 * level.m),
        is_real=f.is_real,
    )
    op = toeplitz(level, corrected)
    return ToeplitzOp(level, corrected.name, op.matrix, op.hermiticity_defect, times_i=True)


def trace(op: ToeplitzOp | np.ndarray) -> complex:
    a = op.matrix if isinstance(op, ToeplitzOp) else op
    return complex(tree_sum(np.diagonal(a)))


def trace_gap(level: QuantumLevel, f: Observable) -> float:
    """Tr T_f - (m / vol) * integral of f, with vol = 2 pi."""
    integral = level.grid.integrate(f(level.grid.z))
    gap = trace(toeplitz(level, f)) - level.m / VOLUME * integral
    return float(gap.real) if f.is_real else gap


def spectrum(level: QuantumLevel, f: Observable) -> np.ndarray:
    if not f.is_real:
        raise ValueError("spectrum requires a real observable")
    return hermitian_eig(toeplitz(level, f).matrix, vectors=False).eigenvalues


def spectral_measure_gap(
    level: QuantumLevel,
    f: Observable,
    g: Callable[[np.ndarray], np.ndarray],
    classical_n_res: int = 96,
) -> float:
    """|(1/m) sum g(lambda_i) - (1/vol) integral of g(f)|."""
    lam = spectrum(level, f)
    discrete = float(tree_sum(g(lam))) / level.m
    grid = level.model.quadrature_grid(classical_n_res)
    continuum = grid.integrate(g(f(grid.z).real)).real / VOLUME
    return abs(discrete - continuum)


def adjoint_defect(level: QuantumLevel, f: Observable) -> float:
    """max |T_f^H - T_conj(f)| relative to max |T_f|."""
    tf = toeplitz(level, f).matrix
    tfb = toeplitz(level, f.conj()).matrix
    return float(np.max(np.abs(tf.conj().T - tfb)) / max(np.max(np.abs(tf)), 1e-300))


def norm_bounds(level: QuantumLevel, f: Observable, sup: float | None = None) -> dict:
    """Norm of T_f against sup|f| and the implied constant C = m (sup - norm)."""
    sup = level.model.sup_norm(f) if sup is None else sup
    nrm = op_norm(toeplitz(level, f))
    return {"m": level.m, "norm": nrm, "sup": sup, "C": level.m * (sup - nrm)}


__all__ = [
    "ToeplitzOp",
    "toeplitz",
    "toeplitz_from_values",
    "op_norm",
    "commutator",
    "dirac_operator",
    "dirac_defect",
    "product_defect",
    "tuynman_gq",
    "trace",
    "trace_gap",
    "spectrum",
    "spectral_measure_gap",
    "adjoint_defect",
    "norm_bounds",
]
