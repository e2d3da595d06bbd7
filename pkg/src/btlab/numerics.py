"""Dense complex linear algebra and quadrature primitives.

Everything here works on plain numpy arrays. Matrices are 2-D complex (or
real) ndarrays; nothing is sparse. The Hermitian eigensolver is a
Householder reduction to real tridiagonal form followed by implicit QL,
which keeps the spectral computations free of LAPACK.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

__all__ = [
    "NoConvergence",
    "NotPositiveDefinite",
    "QuadratureRule1D",
    "HermitianEigen",
    "gauss_legendre",
    "periodic_trapezoid",
    "cholesky",
    "solve_lower",
    "hermitian_eig",
    "hermitian_defect",
    "spectral_norm",
    "tree_sum",
    "weighted_inner",
    "dzdzbar_fd",
]

GL_MAX_NODES = 4096
NEWTON_TOL = 1e-15
NEWTON_MAXITER = 100
BLOCK = 1024


class NotPositiveDefinite(ArithmeticError):
    """Raised by :func:`cholesky` when pivot ``k`` is not positive."""

    def __init__(self, k: int, pivot: float):
        super().__init__(f"matrix is not positive definite (pivot {k} = {pivot:.3e})")
        self.k = k
        self.pivot = pivot


class NoConvergence(ArithmeticError):
    pass


@dataclass(frozen=True)
class QuadratureRule1D:
    nodes: np.ndarray
    weights: np.ndarray
    domain: Literal["interval", "periodic"]

    def integrate(self, f) -> complex:
        return tree_sum(self.weights * f(self.nodes))

    def __len__(self) -> int:
        return len(self.nodes)


@dataclass(frozen=True)
class HermitianEigen:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def _legendre_and_derivative(n: int, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    p0 = np.ones_like(x)
    p1 = x.copy()
    if n == 0:
        return p0, np.zeros_like(x)
    for k in range(2, n + 1):
        p0, p1 = p1, ((2 * k - 1) * x * p1 - (k - 1) * p0) / k
    dp = n * (x * p1 - p0) / (x * x - 1.0)
    return p1, dp


def gauss_legendre(n: int) -> QuadratureRule1D:
    """Gauss-Legendre rule with ``n`` nodes on [-1, 1].

    Nodes are Newton-polished roots of P_n started from the Chebyshev-like
    guesses cos(pi (i + 3/4) / (n + 1/2)).
    """
    if not isinstance(n, (int, np.integer)) or not 1 <= n <= GL_MAX_NODES:
        raise ValueError(f"gauss_legendre needs 1 <= n <= {GL_MAX_NODES}, got {n!r}")
    if n == 1:
        return QuadratureRule1D(np.array([0.0]), np.array([2.0]), "interval")
    i = np.arange(n)
    x = np.cos(np.pi * (i + 0.75) / (n + 0.5))
    for _ in range(NEWTON_MAXITER):
        p, dp = _legendre_and_derivative(n, x)
        dx = p / dp
        x = x - dx
        if np.max(np.abs(dx)) <= NEWTON_TOL:
            break
    else:
        raise NoConvergence(f"Legendre root polish did not converge for n={n}")
    _, dp = _legendre_and_derivative(n, x)
    w = 2.0 / ((1.0 - x * x) * dp * dp)
    order = np.argsort(x)
    x, w = x[order], w[order]
    # exact antisymmetry of the nodes about 0
    x = 0.5 * (x - x[::-1])
    w = 0.5 * (w + w[::-1])
    return QuadratureRule1D(x, w, "interval")


def periodic_trapezoid(n: int) -> QuadratureRule1D:
    if n < 1:
        raise ValueError(f"periodic_trapezoid needs n >= 1, got {n!r}")
    nodes = 2.0 * np.pi * np.arange(n) / n
    return QuadratureRule1D(nodes, np.full(n, 2.0 * np.pi / n), "periodic")


def tree_sum(values, axis: int = 0):
    """Balanced pairwise sum along ``axis``.

    The pairing pattern depends only on the length of the reduced axis, so
    the rounding is reproducible no matter how the inputs were produced.
    """
    x = np.asarray(values)
    if x.ndim == 0:
        return x[()]
    x = np.moveaxis(x, axis, 0)
    if x.shape[0] == 0:
        return np.zeros(x.shape[1:], dtype=np.result_type(x.dtype, float))[()]
    while x.shape[0] > 1:
        half = x.shape[0] // 2
        paired = x[: 2 * half : 2] + x[1 : 2 * half : 2]
        if x.shape[0] % 2:
            paired = np.concatenate([paired, x[-1:]], axis=0)
        x = paired
    return x[0][()]


def weighted_inner(a: np.ndarray, b: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Return ``a^H diag(w) b`` reduced over the node axis (axis 0).

    Nodes are split into fixed-size blocks; each block is a plain matrix
    product and the block partials are combined with :func:`tree_sum`.
    """
    n = a.shape[0]
    partials = [
        a[s : s + BLOCK].conj().T @ (w[s : s + BLOCK, None] * b[s : s + BLOCK])
        for s in range(0, n, BLOCK)
    ]
    return tree_sum(np.stack(partials), axis=0)


def dzdzbar_fd(func, z, h: float = 1e-3):
    """Mixed derivative d^2F/dz dzbar = (F_xx + F_yy)/4 by 5-point stencils.

    ``func`` maps complex chart points (any shape) to real or complex values.
    """
    z = np.asarray(z, dtype=complex)
    offsets = np.array([-2.0, -1.0, 1.0, 2.0])
    coef = np.array([-1.0, 16.0, 16.0, -1.0])
    centre = func(z)
    acc = -60.0 * centre
    for off, c in zip(offsets, coef):
        acc = acc + c * (func(z + off * h) + func(z + 1j * off * h))
    return acc / (12.0 * h * h) / 4.0


def hermitian_defect(a: np.ndarray) -> float:
    scale = np.max(np.abs(a)) if a.size else 0.0
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(a - a.conj().T)) / scale)


def cholesky(g: np.ndarray) -> np.ndarray:
    """Lower-triangular ``L`` with ``g = L L^H`` and positive real diagonal."""
    g = np.asarray(g)
    n = g.shape[0]
    if g.ndim != 2 or g.shape[1] != n:
        raise ValueError("cholesky needs a square matrix")
    low = np.zeros((n, n), dtype=np.result_type(g.dtype, complex))
    for k in range(n):
        row = low[k, :k]
        pivot = g[k, k].real - np.vdot(row, row).real
        if not pivot > 0.0:
            raise NotPositiveDefinite(k, float(pivot))
        d = math.sqrt(pivot)
        low[k, k] = d
        if k + 1 < n:
            low[k + 1 :, k] = (g[k + 1 :, k] - low[k + 1 :, :k] @ row.conj()) / d
    return low


def solve_lower(low: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Forward substitution ``low @ x = b`` for one or many right-hand sides."""
    b = np.asarray(b)
    vector = b.ndim == 1
    x = np.array(b[:, None] if vector else b, dtype=np.result_type(low.dtype, b.dtype))
    n = low.shape[0]
    for k in range(n):
        if k:
            x[k] -= low[k, :k] @ x[:k]
        x[k] /= low[k, k]
    return x[:, 0] if vector else x


def _householder_tridiagonal(a: np.ndarray, want_vectors: bool):
    """Reduce Hermitian ``a`` to real symmetric tridiagonal form.

    Returns ``(d, e, q)`` with ``a = q T q^H``, ``T`` having diagonal ``d``
    and real non-negative sub-diagonal ``e`` (``e[-1]`` is a 0 pad).
    """
    a = np.array(a, dtype=complex)
    n = a.shape[0]
    q = np.eye(n, dtype=complex) if want_vectors else None
    for k in range(n - 2):
        x = a[k + 1 :, k]
        norm_x = np.linalg.norm(x)
        if norm_x == 0.0:
            continue
        phase = x[0] / abs(x[0]) if x[0] != 0 else 1.0
        alpha = -phase * norm_x
        v = x.copy()
        v[0] -= alpha
        v /= np.linalg.norm(v)
        sub = a[k + 1 :, k + 1 :]
        p = sub @ v
        kk = np.vdot(v, p).real
        w = p - kk * v
        sub -= 2.0 * (np.outer(v, w.conj()) + np.outer(w, v.conj()))
        a[k + 1, k] = alpha
        a[k, k + 1] = np.conj(alpha)
        a[k + 2 :, k] = 0.0
        a[k, k + 2 :] = 0.0
        if q is not None:
            qs = q[:, k + 1 :]
            qs -= 2.0 * np.outer(qs @ v, v.conj())
    d = a.diagonal().real.copy()
    off = np.append(a.diagonal(-1), 0.0) if n > 1 else np.zeros(1, dtype=complex)
    e = np.abs(off)
    if q is not None:
        phases = np.ones(n, dtype=complex)
        for k in range(n - 1):
            phases[k + 1] = phases[k] * (off[k] / e[k] if e[k] != 0 else 1.0)
        q = q * phases[None, :]
    return d, e.astype(float), q


def _tql(d: np.ndarray, e: np.ndarray, z: np.ndarray | None) -> None:
    """Implicit-shift QL on a symmetric tridiagonal matrix, in place.

    ``e[i]`` couples rows ``i`` and ``i+1``; ``z`` (if given) accumulates
    the rotations column-wise.
    """
    n = len(d)
    d_ = [float(v) for v in d]
    e_ = [float(v) for v in e]
    eps = 2.0 ** -52
    f = 0.0
    tst1 = 0.0
    sweeps = 0
    cap = 100 * max(n, 1)
    for l in range(n):
        tst1 = max(tst1, abs(d_[l]) + abs(e_[l]))
        m = l
        while m < n - 1 and abs(e_[m]) > eps * tst1:
            m += 1
        if m > l:
            while True:
                sweeps += 1
                if sweeps > cap:
                    raise NoConvergence(f"QL iteration exceeded {cap} sweeps")
                g = d_[l]
                p = (d_[l + 1] - g) / (2.0 * e_[l])
                r = math.hypot(p, 1.0)
                if p < 0:
                    r = -r
                d_[l] = e_[l] / (p + r)
                d_[l + 1] = e_[l] * (p + r)
                dl1 = d_[l + 1]
                h = g - d_[l]
                for i in range(l + 2, n):
                    d_[i] -= h
                f += h
                p = d_[m]
                c = c2 = c3 = 1.0
                el1 = e_[l + 1]
                s = s2 = 0.0
                for i in range(m - 1, l - 1, -1):
                    c3 = c2
                    c2 = c
                    s2 = s
                    g = c * e_[i]
                    h = c * p
                    r = math.hypot(p, e_[i])
                    e_[i + 1] = s * r
                    s = e_[i] / r
                    c = p / r
                    p = c * d_[i] - s * g
                    d_[i + 1] = h + s * (c * g + s * d_[i])
                    if z is not None:
                        zi = z[:, i].copy()
                        z[:, i] = c * zi - s * z[:, i + 1]
                        z[:, i + 1] = s * zi + c * z[:, i + 1]
                p = -s * s2 * c3 * el1 * e_[l] / dl1
                e_[l] = s * p
                d_[l] = c * p
                if abs(e_[l]) <= eps * tst1:
                    break
        d_[l] += f
        e_[l] = 0.0
    d[:] = d_
    e[:] = e_


def hermitian_eig(a: np.ndarray, vectors: bool = True) -> HermitianEigen:
    """Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.

    The input is symmetrized as ``(a + a^H)/2`` first. With
    ``vectors=False`` the eigenvector field is ``None``.
    """
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise ValueError("hermitian_eig needs a non-empty square matrix")
    a = 0.5 * (a + a.conj().T)
    d, e, q = _householder_tridiagonal(a, vectors)
    z = np.eye(len(d)) if vectors else None
    _tql(d, e, z)
    order = np.argsort(d, kind="stable")
    evals = d[order]
    if not vectors:
        return HermitianEigen(evals, None)
    return HermitianEigen(evals, q @ z[:, order])


def spectral_norm(a: np.ndarray, hermitian: bool | None = None) -> float:
    """Largest singular value of ``a``.

    Hermitian input (detected to 1e-12 relative unless ``hermitian`` is
    given) uses max |eigenvalue|; otherwise the largest eigenvalue of
    ``a^H a``.
    """
    a = np.asarray(a)
    if a.size == 0 or not np.any(a):
        return 0.0
    if hermitian is None:
        hermitian = a.shape[0] == a.shape[1] and hermitian_defect(a) <= 1e-12
    if hermitian:
        ev = hermitian_eig(a, vectors=False).eigenvalues
        return float(max(abs(ev[0]), abs(ev[-1])))
    ev = hermitian_eig(a.conj().T @ a, vectors=False).eigenvalues
    return math.sqrt(max(ev[-1], 0.0))
