"""Holomorphic sections of L^m as a finite-dimensional Hilbert space.

A :class:`QuantumLevel` samples the raw section basis on a quadrature grid,
forms the Gram matrix of the L^2 pairing, and orthonormalizes by Cholesky:
``U = E (L^H)^-1``. Off-grid values reuse the same triangular transform.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from .geometry import KahlerModel, QuadratureGrid, TorusModel
from .numerics import NotPositiveDefinite, cholesky, solve_lower, weighted_inner

log = logging.getLogger(__name__)

AUDIT_FACTOR = 1.5
AUDIT_TOL = 1e-9


class DimensionMismatch(ValueError):
    pass


def default_n_res(model: KahlerModel, m: int) -> int:
    if isinstance(model, TorusModel):
        return max(24, 4 * m)
    return max(24, 2 * m + 16)


def _relative_gram_change(g1: np.ndarray, g2: np.ndarray) -> float:
    scale = np.sqrt(np.outer(g1.diagonal().real, g1.diagonal().real))
    return float(np.max(np.abs(g1 - g2) / scale))


@dataclass(frozen=True, eq=False)
class QuantumLevel:
    model: KahlerModel
    m: int
    grid: QuadratureGrid
    raw_evals: np.ndarray = field(repr=False)
    gram: np.ndarray = field(repr=False)
    chol: np.ndarray = field(repr=False)
    ortho_evals: np.ndarray = field(repr=False)
    transform: np.ndarray = field(repr=False)
    audit: float | None = None

    @property
    def dim(self) -> int:
        return self.gram.shape[0]

    @property
    def n_res(self) -> int:
        return self.grid.n_res

    @property
    def audit_ok(self) -> bool | None:
        return None if self.audit is None else self.audit <= AUDIT_TOL

    def ortho_at(self, z) -> np.ndarray:
        """Orthonormal basis values at arbitrary chart points."""
        return self.model.basis(self.m, z) @ self.transform

    def orthonormality_defect(self) -> float:
        u = self.ortho_evals
        s = weighted_inner(u, u, self.grid.weights)
        return float(np.max(np.abs(s - np.eye(self.dim))))

    def summary(self) -> dict:
        return {
            "model": str(self.model),
            "m": self.m,
            "dim": self.dim,
            "n_res": self.n_res,
            "nodes": len(self.grid),
            "orthonormality_defect": self.orthonormality_defect(),
            "resolution_audit": self.audit,
        }


def level_from_evals(
    model: KahlerModel, m: int, grid: QuadratureGrid, evals: np.ndarray, audit: float | None = None
) -> QuantumLevel:
    gram = weighted_inner(evals, evals, grid.weights)
    gram = 0.5 * (gram + gram.conj().T)
    low = cholesky(gram)
    transform = solve_lower(low, np.eye(low.shape[0], dtype=complex)).conj().T
    ortho = evals @ transform
    return QuantumLevel(model, m, grid, evals, gram, low, ortho, transform, audit)


def build_level(model: KahlerModel, m: int, n_res: int | None = None, audit: bool = True) -> QuantumLevel:
    """Gram matrix, Cholesky factor and orthonormal basis on the grid at level ``m``.

    If the Gram matrix is numerically not positive definite the grid
    resolution is doubled once before giving up.
    """
    if m < 1:
        raise ValueError(f"level m must be >= 1, got {m}")
    n_res = n_res or default_n_res(model, m)
    for attempt in range(2):
        grid = model.quadrature_grid(n_res)
        evals = model.basis(m, grid.z)
        try:
            level = level_from_evals(model, m, grid, evals)
            break
        except NotPositiveDefinite:
            if attempt:
                raise
            log.warning("Gram matrix not positive definite at m=%d, n_res=%d; doubling", m, n_res)
            n_res *= 2
    if audit:
        fine = model.quadrature_grid(int(round(AUDIT_FACTOR * n_res)))
        e2 = model.basis(m, fine.z)
        g2 = weighted_inner(e2, e2, fine.weights)
        level = replace(level, audit=_relative_gram_change(level.gram, g2))
    return level


@lru_cache(maxsize=64)
def cached_level(model: KahlerModel, m: int, n_res: int | None = None) -> QuantumLevel:
    return build_level(model, m, n_res)


def section_eval(level: QuantumLevel, coeffs, z) -> np.ndarray:
    """Value of sum_j coeffs_j u_j at chart points ``z`` (unit frame)."""
    coeffs = np.asarray(coeffs)
    if coeffs.shape != (level.dim,):
        raise DimensionMismatch(f"expected {level.dim} coefficients, got {coeffs.shape}")
    return level.ortho_at(z) @ coeffs
