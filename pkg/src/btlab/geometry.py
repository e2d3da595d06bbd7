"""Concrete compact Kähler models with a quantum line bundle.

Three models are supported, each described in a single chart:

* ``round_sphere``: the Riemann sphere with omega = i/(1+|z|^2)^2 dz^dzbar
  and the hyperplane bundle, frame potential log(1+|z|^2).
* ``deformed_sphere``: same line bundle, potential
  log(1+|z|^2) + eps * x3, which changes omega but not the total volume.
* ``torus``: C / (Z + tau Z) with omega = (i pi / Im tau) dz^dzbar and the
  degree-one theta bundle.

The metric density ``g`` is the coefficient of ``i dz^dzbar`` in omega, so the
Liouville measure is ``2 g dx dy`` and every model has volume 2 pi.
Hermitian fibre metrics are ``h = exp(-Phi)`` in the holomorphic frame; the
unit-frame value of a section s at level m is ``s_hat * exp(-m Phi / 2)``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property

import numpy as np

from .numerics import dzdzbar_fd, gauss_legendre, periodic_trapezoid, tree_sum
from .observables import Observable, constant, value_only

VOLUME = 2.0 * math.pi
MAX_EPSILON = 0.3
MIN_IM_TAU = 0.2


class PositivityViolation(ValueError):
    pass


class BadModulus(ValueError):
    pass


class Chart(Enum):
    SPHERE_SOUTH = "sphere-south"
    SPHERE_NORTH = "sphere-north"
    TORUS = "torus-fundamental"


@dataclass(frozen=True)
class ChartPoint:
    chart: Chart
    z: complex


@dataclass(frozen=True)
class QuadratureGrid:
    """Product quadrature on M in the model's primary chart.

    ``params`` holds the two underlying product coordinates (u, theta) on
    the sphere or (a, b) on the torus, raveled like ``z``; ``shape`` is the
    product shape.
    """

    z: np.ndarray
    weights: np.ndarray
    n_res: int
    params: tuple[np.ndarray, np.ndarray]
    shape: tuple[int, int]

    def __len__(self) -> int:
        return len(self.z)

    def integrate(self, values) -> complex:
        return complex(tree_sum(self.weights * np.asarray(values)))


class KahlerModel:
    """Shared evaluators; subclasses supply potential, density and sections."""

    kind: str
    volume = VOLUME

    # chart data -------------------------------------------------------
    def potential(self, z):
        raise NotImplementedError

    def density(self, z):
        raise NotImplementedError

    def dim(self, m: int) -> int:
        raise NotImplementedError

    def basis(self, m: int, z) -> np.ndarray:
        """Unit-frame values of the raw section basis, shape ``z.shape + (dim,)``."""
        raise NotImplementedError

    def quadrature_grid(self, n_res: int) -> QuadratureGrid:
        raise NotImplementedError

    def param_to_chart(self, p, q):
        raise NotImplementedError

    def param_bounds(self) -> tuple[tuple[float, float], tuple[float, float]]:
        raise NotImplementedError

    def to_chart(self, pt: ChartPoint) -> complex:
        return pt.z

    @cached_property
    def observables(self) -> dict[str, Observable]:
        raise NotImplementedError

    # evaluators ------------------------------------------------------
    def basis_eval(self, m: int, k: int, z):
        n = self.dim(m)
        if not 0 <= k < n:
            raise IndexError(f"section index {k} out of range for dim {n}")
        return self.basis(m, z)[..., k]

    def poisson_bracket(self, f: Observable, g: Observable, z):
        if not (f.has_derivatives and g.has_derivatives):
            raise ValueError("Poisson bracket needs analytic first derivatives")
        z = np.asarray(z, dtype=complex)
        return 1j / self.density(z) * (f.dzbar(z) * g.dz(z) - f.dz(z) * g.dzbar(z))

    def bracket_observable(self, f: Observable, g: Observable) -> Observable:
        real = f.is_real and g.is_real
        return value_only(
            f"{{{f.name},{g.name}}}", lambda z: self.poisson_bracket(f, g, z), is_real=real
        )

    def laplacian(self, f: Observable, z):
        if not f.has_second_derivative:
            raise ValueError("Laplacian needs the analytic mixed derivative")
        z = np.asarray(z, dtype=complex)
        return f.dzdzbar(z) / self.density(z)

    def laplacian_observable(self, f: Observable) -> Observable:
        return value_only(f"lap({f.name})", lambda z: self.laplacian(f, z), is_real=f.is_real)

    def quantization_residual(self, z, h: float = 1e-3) -> np.ndarray:
        """|-d dbar log h_hat - g| with the mixed derivative by finite differences."""
        z = np.asarray(z, dtype=complex)
        return np.abs(dzdzbar_fd(self.potential, z, h) - self.density(z))

    def observable(self, name: str) -> Observable:
        from .observables import parse_observable

        return parse_observable(name, self.observables)

    def sup_norm(self, f: Observable, n_res: int = 48, rounds: int = 60, seeds: int = 5) -> float:
        """sup |f| from a grid scan refined by repeated 3x3 sub-grid searches."""
        grid = self.quadrature_grid(n_res)
        vals = np.abs(f(grid.z))
        (plo, phi), (qlo, qhi) = self.param_bounds()
        n1, n2 = grid.shape
        best = float(vals.max())
        starts = np.argsort(vals, kind="stable")[::-1][:seeds]
        for idx in starts:
            p, q = grid.params[0][idx], grid.params[1][idx]
            dp, dq = (phi - plo) / n1, (qhi - qlo) / n2
            cur = float(vals[idx])
            for _ in range(rounds):
                pp = np.clip(p + dp * np.array([-1.0, 0.0, 1.0]), plo, phi)
                qq = q + dq * np.array([-1.0, 0.0, 1.0])
                P, Q = np.meshgrid(pp, qq, indexing="ij")
                cand = np.abs(f(self.param_to_chart(P.ravel(), Q.ravel())))
                j = int(np.argmax(cand))
                if cand[j] > cur:
                    cur = float(cand[j])
                    p, q = P.ravel()[j], Q.ravel()[j]
                else:
                    dp, dq = dp / 2, dq / 2
            best = max(best, cur)
        return best


# sphere -----------------------------------------------------------------


def _t(z):
    return (z * np.conj(z)).real


def _x1(z):
    return (z + np.conj(z)).real / (1 + _t(z))


def _x2(z):
    return (-1j * (z - np.conj(z))).real / (1 + _t(z))


def _x3(z):
    t = _t(z)
    return (t - 1) / (t + 1)


def _sphere_coordinates() -> dict[str, Observable]:
    def g(z):
        return 1.0 / (1 + _t(z)) ** 2

    x1 = Observable(
        "x1",
        _x1,
        lambda z: (1 - np.conj(z) ** 2) * g(z),
        lambda z: (1 - z**2) * g(z),
        lambda z: -2 * _x1(z) * g(z),
        True,
    )
    x2 = Observable(
        "x2",
        _x2,
        lambda z: -1j * (1 + np.conj(z) ** 2) * g(z),
        lambda z: 1j * (1 + z**2) * g(z),
        lambda z: -2 * _x2(z) * g(z),
        True,
    )
    x3 = Observable(
        "x3",
        _x3,
        lambda z: 2 * np.conj(z) * g(z),
        lambda z: 2 * z * g(z),
        lambda z: -2 * _x3(z) * g(z),
        True,
    )
    return {"x1": x1, "x2": x2, "x3": x3}


def _sphere_harmonics(x: Observable, y: Observable, z: Observable) -> dict[str, tuple[int, Observable]]:
    """Unnormalized real spherical harmonics of degree 2..4 as polynomials on S^2."""
    one = constant(1.0)
    polys = {
        "y2m2": (2, x * y),
        "y2m1": (2, y * z),
        "y20": (2, 3 * z * z - one),
        "y2p1": (2, x * z),
        "y2p2": (2, x * x - y * y),
        "y3m3": (3, y * (3 * x * x - y * y)),
        "y3m2": (3, x * y * z),
        "y3m1": (3, y * (5 * z * z - one)),
        "y30": (3, z * (5 * z * z - 3 * one)),
        "y3p1": (3, x * (5 * z * z - one)),
        "y3p2": (3, z * (x * x - y * y)),
        "y3p3": (3, x * (x * x - 3 * y * y)),
        "y4m4": (4, x * y * (x * x - y * y)),
        "y4m3": (4, y * z * (3 * x * x - y * y)),
        "y4m2": (4, x * y * (7 * z * z - one)),
        "y4m1": (4, y * z * (7 * z * z - 3 * one)),
        "y40": (4, 35 * z**4 - 30 * z * z + 3 * one),
        "y4p1": (4, x * z * (7 * z * z - 3 * one)),
        "y4p2": (4, (x * x - y * y) * (7 * z * z - one)),
        "y4p3": (4, x * z * (x * x - 3 * y * y)),
        "y4p4": (4, x**4 - 6 * x * x * y * y + y**4),
    }
    return {name: (deg, obs.renamed(name)) for name, (deg, obs) in polys.items()}


HARMONIC_DEGREE: dict[str, int] = {"one": 0, "x1": 1, "x2": 1, "x3": 1}


@dataclass(frozen=True)
class SphereModel(KahlerModel):
    """Round (eps = 0) or deformed Riemann sphere in the southern chart."""

    epsilon: float = 0.0
    deformed: bool = False

    def __post_init__(self):
        eps = float(self.epsilon)
        if eps != 0.0 and not self.deformed:
            raise ValueError("a round sphere has epsilon = 0; use deformed=True")
        if abs(eps) > MAX_EPSILON:
            raise PositivityViolation(
                f"|epsilon| = {abs(eps)} exceeds {MAX_EPSILON}; metric density 1 - 2 eps x3 "
                "is not safely positive"
            )
        grid = self.quadrature_grid(64)
        if np.min(self.density(grid.z)) <= 0.0:
            raise PositivityViolation(f"metric density not positive on grid for epsilon = {eps}")

    @property
    def kind(self) -> str:
        return "deformed_sphere" if self.deformed else "round_sphere"

    def __str__(self) -> str:
        return f"{self.kind}(eps={self.epsilon})" if self.deformed else self.kind

    def dim(self, m: int) -> int:
        return m + 1

    def potential(self, z):
        t = _t(np.asarray(z))
        return np.log1p(t) + self.epsilon * (t - 1) / (t + 1)

    def density(self, z):
        t = _t(np.asarray(z))
        return (1 - 2 * self.epsilon * (t - 1) / (t + 1)) / (1 + t) ** 2

    def to_chart(self, pt: ChartPoint) -> complex:
        if pt.chart is Chart.SPHERE_SOUTH:
            return complex(pt.z)
        if pt.chart is Chart.SPHERE_NORTH:
            if pt.z == 0:
                raise ValueError("the north pole is not in the southern chart")
            return 1.0 / complex(pt.z)
        raise ValueError(f"{pt.chart} is not a sphere chart")

    def holomorphic_sections(self, m: int, z) -> tuple[np.ndarray, np.ndarray]:
        """Raw monomials z^k and their z-derivatives (no frame factor)."""
        z = np.asarray(z, dtype=complex)
        k = np.arange(m + 1)
        s = z[..., None] ** k
        ds = np.zeros_like(s)
        ds[..., 1:] = k[1:] * z[..., None] ** (k[1:] - 1)
        return s, ds

    def basis(self, m: int, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        k = np.arange(m + 1)
        t = _t(z)[..., None]
        with np.errstate(divide="ignore", invalid="ignore"):
            log_r = 0.5 * np.log(t)
            log_mag = np.where(k == 0, 0.0, k * log_r) - 0.5 * m * self.potential(z)[..., None]
        phase = np.exp(1j * k * np.angle(z)[..., None])
        return np.exp(log_mag) * phase

    def quadrature_grid(self, n_res: int) -> QuadratureGrid:
        if n_res < 8:
            raise ValueError("n_res must be >= 8")
        gl = gauss_legendre(n_res)
        tr = periodic_trapezoid(2 * n_res)
        U, TH = np.meshgrid(gl.nodes, tr.nodes, indexing="ij")
        W = 0.5 * np.outer(gl.weights, tr.weights) * (1 - 2 * self.epsilon * U)
        u, th = U.ravel(), TH.ravel()
        return QuadratureGrid(self.param_to_chart(u, th), W.ravel(), n_res, (u, th), U.shape)

    def param_to_chart(self, u, theta):
        u = np.asarray(u, dtype=float)
        t = (1 + u) / (1 - u)
        return np.sqrt(t) * np.exp(1j * np.asarray(theta))

    def param_bounds(self):
        return (-1.0, 1.0 - 1e-12), (0.0, 2 * math.pi)

    @cached_property
    def harmonics(self) -> dict[str, tuple[int, Observable]]:
        c = _sphere_coordinates()
        return _sphere_harmonics(c["x1"], c["x2"], c["x3"])

    @cached_property
    def observables(self) -> dict[str, Observable]:
        obs = {"one": constant(1.0, "one")}
        obs.update(_sphere_coordinates())
        obs.update({name: o for name, (_, o) in self.harmonics.items()})
        return obs

    def harmonic_degree(self, name: str) -> int:
        if name in HARMONIC_DEGREE:
            return HARMONIC_DEGREE[name]
        return self.harmonics[name][0]


# torus ------------------------------------------------------------------


def _mode_name(p: int, q: int) -> str:
    def s(n):
        return f"m{-n}" if n < 0 else str(n)

    return f"f_{s(p)}_{s(q)}"


@dataclass(frozen=True)
class TorusModel(KahlerModel):
    """Elliptic curve C/(Z + tau Z) with the theta line bundle."""

    tau: complex = 1j
    kind: str = field(default="torus", init=False)

    def __post_init__(self):
        tau = complex(self.tau)
        if tau.imag <= 0:
            raise BadModulus(f"Im tau must be positive, got {tau}")
        if tau.imag < MIN_IM_TAU:
            raise BadModulus(f"Im tau = {tau.imag} below supported minimum {MIN_IM_TAU}")
        object.__setattr__(self, "tau", tau)

    def __str__(self) -> str:
        return f"torus(tau={self.tau})"

    def dim(self, m: int) -> int:
        return m

    def potential(self, z):
        y = np.asarray(z).imag
        return 2 * math.pi * y * y / self.tau.imag

    def density(self, z):
        return np.full(np.shape(z), math.pi / self.tau.imag)

    def lattice_coords(self, z):
        z = np.asarray(z, dtype=complex)
        b = z.imag / self.tau.imag
        a = z.real - b * self.tau.real
        return a, b

    def theta_cutoff(self, m: int) -> int:
        return math.ceil(math.sqrt(40.0 / (math.pi * m * self.tau.imag))) + 2

    def basis(self, m: int, z) -> np.ndarray:
        """Unit-frame theta functions of level m, index k = 0..m-1.

        The Gaussian factor of the n-th term combines with the frame to
        exp(-(pi m / Im tau) (Im tau * nu + y)^2), nu = n + k/m, so the
        summation window is centred on nu = -b.
        """
        z = np.asarray(z, dtype=complex)
        shape = z.shape
        zf = z.ravel()
        x, y = zf.real, zf.imag
        a_im = self.tau.imag
        _, b = self.lattice_coords(zf)
        n0 = -np.floor(b)
        ncut = self.theta_cutoff(m)
        n = n0[:, None, None] + np.arange(-ncut, ncut + 1)[None, :, None]
        nu = n + np.arange(m)[None, None, :] / m
        expo = -(math.pi * m / a_im) * (a_im * nu + y[:, None, None]) ** 2 + 1j * (
            math.pi * self.tau.real * m * nu**2 + 2 * math.pi * m * nu * x[:, None, None]
        )
        return np.exp(expo).sum(axis=1).reshape(shape + (m,))

    def quadrature_grid(self, n_res: int) -> QuadratureGrid:
        if n_res < 8:
            raise ValueError("n_res must be >= 8")
        s = np.arange(n_res) / n_res
        A, B = np.meshgrid(s, s, indexing="ij")
        a, b = A.ravel(), B.ravel()
        w = np.full(a.size, VOLUME / n_res**2)
        return QuadratureGrid(self.param_to_chart(a, b), w, n_res, (a, b), A.shape)

    def param_to_chart(self, a, b):
        return np.asarray(a) + np.asarray(b) * self.tau

    def param_bounds(self):
        return (0.0, 1.0), (0.0, 1.0)

    def to_chart(self, pt: ChartPoint) -> complex:
        if pt.chart is not Chart.TORUS:
            raise ValueError(f"{pt.chart} is not the torus chart")
        return complex(pt.z)

    def fourier_mode(self, p: int, q: int) -> Observable:
        tau = self.tau
        d = tau - np.conj(tau)
        lz = 2j * math.pi * (p * (-np.conj(tau) / d) + q / d)
        lzb = 2j * math.pi * (p * (tau / d) - q / d)

        def value(z):
            a, b = self.lattice_coords(z)
            return np.exp(2j * math.pi * (p * a + q * b))

        return Observable(
            _mode_name(p, q),
            value,
            lambda z: lz * value(z),
            lambda z: lzb * value(z),
            lambda z: lz * lzb * value(z),
            p == 0 and q == 0,
        )

    @cached_property
    def observables(self) -> dict[str, Observable]:
        obs = {"one": constant(1.0, "one")}
        for p in range(-3, 4):
            for q in range(-3, 4):
                obs[_mode_name(p, q)] = self.fourier_mode(p, q)
        return obs


def make_model(kind: str, **params) -> KahlerModel:
    """Construct a model by kind name: round_sphere, deformed_sphere or torus."""
    kind = kind.strip().lower()
    if kind == "round_sphere":
        if params:
            raise TypeError(f"round_sphere takes no parameters, got {sorted(params)}")
        return SphereModel()
    if kind == "deformed_sphere":
        return SphereModel(epsilon=float(params.pop("epsilon", 0.1)), deformed=True, **params)
    if kind == "torus":
        tau = params.pop("tau", 1j)
        if isinstance(tau, str):
            text = tau.replace(" ", "").replace("i", "j")
            tau = complex(re.sub(r"(^|[+-])j", r"\g<1>1j", text))
        return TorusModel(tau=complex(tau), **params)
    raise ValueError(f"unknown model kind {kind!r}")


MODEL_KINDS = ("round_sphere", "deformed_sphere", "torus")
