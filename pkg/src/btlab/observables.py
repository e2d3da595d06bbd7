"""Smooth functions on a chart with analytic first and mixed second derivatives.

An :class:`Observable` carries four vectorized callables on complex chart
coordinates: the value, d/dz, d/dzbar and d^2/dz dzbar. Sums, products,
scalar multiples and conjugates propagate the derivatives exactly, so any
polynomial in the built-in coordinate functions keeps analytic derivatives.
"""

from __future__ import annotations

import ast
import numbers
from dataclasses import dataclass, replace
from typing import Callable, Mapping

import numpy as np

Func = Callable[[np.ndarray], np.ndarray]


class UnknownObservable(KeyError):
    pass


def _zero(z):
    return np.zeros(np.shape(z), dtype=complex)


@dataclass(frozen=True, eq=False)
class Observable:
    name: str
    value: Func
    dz: Func | None = None
    dzbar: Func | None = None
    dzdzbar: Func | None = None
    is_real: bool = False

    def __call__(self, z) -> np.ndarray:
        out = np.asarray(self.value(np.asarray(z)), dtype=complex)
        return out.real.astype(complex) if self.is_real else out

    def __repr__(self) -> str:
        return f"Observable({self.name!r})"

    @property
    def has_derivatives(self) -> bool:
        return self.dz is not None and self.dzbar is not None

    @property
    def has_second_derivative(self) -> bool:
        return self.dzdzbar is not None

    def renamed(self, name: str) -> "Observable":
        return replace(self, name=name)

    # algebra
    def __add__(self, other):
        other = as_observable(other)
        return Observable(
            f"({self.name}+{other.name})",
            lambda z: self.value(z) + other.value(z),
            _lift2(self.dz, other.dz, lambda a, b: a + b),
            _lift2(self.dzbar, other.dzbar, lambda a, b: a + b),
            _lift2(self.dzdzbar, other.dzdzbar, lambda a, b: a + b),
            self.is_real and other.is_real,
        )

    __radd__ = __add__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-as_observable(other))

    def __rsub__(self, other):
        return as_observable(other) + (-self)

    def __mul__(self, other):
        if isinstance(other, numbers.Number):
            c = complex(other)
            real = self.is_real and c.imag == 0.0
            name = f"{_fmt(other)}*{self.name}"
            return Observable(
                name,
                lambda z: c * self.value(z),
                _scale(self.dz, c),
                _scale(self.dzbar, c),
                _scale(self.dzdzbar, c),
                real,
            )
        other = as_observable(other)
        f, g = self, other
        dz = dzbar = dzdzbar = None
        if f.has_derivatives and g.has_derivatives:
            dz = lambda z: f.dz(z) * g.value(z) + f.value(z) * g.dz(z)
            dzbar = lambda z: f.dzbar(z) * g.value(z) + f.value(z) * g.dzbar(z)
            if f.has_second_derivative and g.has_second_derivative:
                dzdzbar = lambda z: (
                    f.dzdzbar(z) * g.value(z)
                    + f.dz(z) * g.dzbar(z)
                    + f.dzbar(z) * g.dz(z)
                    + f.value(z) * g.dzdzbar(z)
                )
        return Observable(
            f"{f.name}*{g.name}",
            lambda z: f.value(z) * g.value(z),
            dz,
            dzbar,
            dzdzbar,
            f.is_real and g.is_real,
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, numbers.Number):
            raise TypeError("observables can only be divided by constants")
        return (self * (1 / other)).renamed(f"{self.name}/{_fmt(other)}")

    def __pow__(self, n):
        if not isinstance(n, numbers.Integral) or n < 0:
            raise ValueError("only non-negative integer powers are supported")
        if n == 0:
            return constant(1.0)
        out = self
        for _ in range(n - 1):
            out = out * self
        return out.renamed(f"{self.name}^{n}")

    def conj(self) -> "Observable":
        if self.is_real:
            return self
        f = self
        return Observable(
            f"conj({f.name})",
            lambda z: np.conj(f.value(z)),
            None if f.dzbar is None else (lambda z: np.conj(f.dzbar(z))),
            None if f.dz is None else (lambda z: np.conj(f.dz(z))),
            None if f.dzdzbar is None else (lambda z: np.conj(f.dzdzbar(z))),
            False,
        )

    def real(self) -> "Observable":
        if self.is_real:
            return self
        out = (self + self.conj()) * 0.5
        return replace(out, name=f"re({self.name})", is_real=True)

    def imag(self) -> "Observable":
        out = (self - self.conj()) * (-0.5j)
        return replace(out, name=f"im({self.name})", is_real=True)


def _fmt(c) -> str:
    return repr(c) if not isinstance(c, float) or not c.is_integer() else str(int(c))


def _lift2(a, b, op):
    if a is None or b is None:
        return None
    return lambda z: op(a(z), b(z))


def _scale(fn, c):
    if fn is None:
        return None
    return lambda z: c * fn(z)


def constant(c, name: str | None = None) -> Observable:
    c = complex(c)
    return Observable(
        name or _fmt(c.real if c.imag == 0 else c),
        lambda z: np.full(np.shape(z), c, dtype=complex),
        _zero,
        _zero,
        _zero,
        c.imag == 0.0,
    )


def as_observable(x) -> Observable:
    if isinstance(x, Observable):
        return x
    if isinstance(x, numbers.Number):
        return constant(x)
    raise TypeError(f"cannot interpret {x!r} as an observable")


def value_only(name: str, value: Func, is_real: bool = False) -> Observable:
    """Observable without derivative data (e.g. a materialized bracket)."""
    return Observable(name, value, is_real=is_real)


_FUNCS = {
    "re": Observable.real,
    "im": Observable.imag,
    "conj": Observable.conj,
}


def parse_observable(text: str, registry: Mapping[str, Observable]) -> Observable:
    """Build an observable from an arithmetic expression over ``registry``.

    Supports ``+ - * /`` (division by constants), integer ``**``, numbers,
    ``i``/``1j`` and the functions ``re``, ``im``, ``conj``.
    """
    text = text.strip()
    if text in registry:
        return registry[text]
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as exc:
        raise UnknownObservable(text) from exc

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float, complex)):
            return node.value
        if isinstance(node, ast.Name):
            if node.id in registry:
                return registry[node.id]
            if node.id == "i":
                return 1j
            raise UnknownObservable(node.id)
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp):
            lhs, rhs = ev(node.left), ev(node.right)
            if isinstance(node.op, ast.Add):
                return lhs + rhs
            if isinstance(node.op, ast.Sub):
                return lhs - rhs
            if isinstance(node.op, ast.Mult):
                return lhs * rhs
            if isinstance(node.op, ast.Div):
                return lhs / rhs
            if isinstance(node.op, ast.Pow) and isinstance(rhs, int):
                return lhs**rhs
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and len(node.args) == 1:
            fn = _FUNCS.get(node.func.id)
            if fn is not None:
                return fn(as_observable(ev(node.args[0])))
        raise UnknownObservable(f"unsupported expression {ast.unparse(node)!r} in {text!r}")

    return as_observable(ev(tree)).renamed(text)
