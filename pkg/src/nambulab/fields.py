"""Scalar fields on extended phase space, with an exact-derivative algebra.

A field maps coordinate arrays ``(..., N)`` to values ``(...)``, where the
last coordinate is time. Fields are immutable and close under sums,
products, scaling and partial differentiation:

* expression-backed fields differentiate through nested forward-mode dual
  passes, so any order of partial derivative is exact to round-off
  ("analytic" provenance);
* callable-backed fields fall back to central finite differences with step
  ``1e-5 * max(1, |coordinate|)`` ("numeric" provenance).

Sums and products propagate derivatives by linearity and the Leibniz rule,
so combinations of analytic fields stay analytic.
"""

from __future__ import annotations

import numpy as np

from . import exprs
from .exprs import Dual, Expr

FD_STEP = 1e-5


class ScalarField:
    """Base class; subclasses implement ``at`` and ``partial``."""

    analytic: bool = False

    def at(self, coords: np.ndarray):
        raise NotImplementedError

    def partial(self, j: int) -> "ScalarField":
        raise NotImplementedError

    def __call__(self, coords):
        return self.at(np.asarray(coords, dtype=float))

    def __add__(self, other):
        return SumField([self, as_field(other)])

    def __radd__(self, other):
        return SumField([as_field(other), self])

    def __sub__(self, other):
        return SumField([self, ScaledField(-1.0, as_field(other))])

    def __rsub__(self, other):
        return SumField([as_field(other), ScaledField(-1.0, self)])

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return ScaledField(float(other), self)
        return ProductField(self, as_field(other))

    __rmul__ = __mul__

    def __neg__(self):
        return ScaledField(-1.0, self)


def as_field(obj) -> ScalarField:
    if isinstance(obj, ScalarField):
        return obj
    if isinstance(obj, (int, float)):
        return ConstField(float(obj))
    if isinstance(obj, Expr):
        return ExprField(obj)
    if isinstance(obj, str):
        return ExprField(exprs.parse(obj))
    if callable(obj):
        return CallableField(obj)
    raise TypeError(f"cannot interpret {obj!r} as a scalar field")


class ConstField(ScalarField):
    analytic = True

    def __init__(self, value: float):
        self.value = float(value)

    def at(self, coords):
        return np.broadcast_to(self.value, coords.shape[:-1]).copy() \
            if coords.ndim > 1 else np.float64(self.value)

    def partial(self, j):
        return ConstField(0.0)

    def __repr__(self):
        return f"ConstField({self.value})"


def _nested_const(c: float, depth: int):
    if depth == 0:
        return c
    return Dual(_nested_const(c, depth - 1), _nested_const(0.0, depth - 1))


def _nested_input(value, seeds):
    """Lift a primal value into a nested dual carrying one seed per level."""
    if not seeds:
        return value
    return Dual(_nested_input(value, seeds[:-1]),
                _nested_const(seeds[-1], len(seeds) - 1))


def _eval_expr_partial(expr: Expr, coords: np.ndarray, order: tuple[int, ...]):
    """Mixed partial of ``expr`` at ``coords``, nested-dual forward mode.

    ``order`` lists coordinate indices (time = N-1); its length is the
    derivative order.
    """
    n = coords.shape[-1] - 1
    depth = len(order)
    values = {}
    for slot in expr.variables():
        idx = n if slot == exprs.TIME else slot
        if slot != exprs.TIME and slot >= n:
            raise exprs.UnboundVariableError(
                f"variable x{slot + 1} is not bound by a "
                f"{n + 1}-component coordinate array")
        seeds = [1.0 if idx == d else 0.0 for d in order]
        values[slot] = _nested_input(coords[..., idx], seeds)
    r = exprs.eval_dual(expr, values)
    for _ in range(depth):
        r = r.eps if isinstance(r, Dual) else (
            np.zeros(coords.shape[:-1]) if coords.ndim > 1 else 0.0)
    return r


class ExprField(ScalarField):
    """Field backed by a parsed expression; derivatives are exact."""

    analytic = True

    def __init__(self, expr):
        self.expr = exprs.parse(expr) if isinstance(expr, str) else expr

    def at(self, coords):
        v = exprs.evaluate(self.expr, coords)
        if coords.ndim > 1 and np.ndim(v) == 0:
            return np.broadcast_to(v, coords.shape[:-1]).copy()
        return v

    def partial(self, j):
        return DerivField(self.expr, (j,))

    def __repr__(self):
        return f"ExprField({exprs.render(self.expr)!r})"


class DerivField(ScalarField):
    """Exact mixed partial of an expression, of arbitrary order."""

    analytic = True

    def __init__(self, expr: Expr, order: tuple[int, ...]):
        self.expr = expr
        self.order = order

    def at(self, coords):
        return _eval_expr_partial(self.expr, coords, self.order)

    def partial(self, j):
        return DerivField(self.expr, self.order + (j,))

    def __repr__(self):
        return f"DerivField({exprs.render(self.expr)!r}, order={self.order})"


class CallableField(ScalarField):
    """Field backed by an arbitrary callable ``coords (..., N) -> (...)``.

    Provenance is numeric: partial derivatives use central differences.
    """

    analytic = False

    def __init__(self, fn, label: str = "callable"):
        self.fn = fn
        self.label = label

    def at(self, coords):
        return np.asarray(self.fn(coords), dtype=float)

    def partial(self, j):
        return FDPartialField(self, j)

    def __repr__(self):
        return f"CallableField({self.label})"


class FDPartialField(ScalarField):
    analytic = False

    def __init__(self, base: ScalarField, j: int):
        self.base = base
        self.j = j

    def at(self, coords):
        h = FD_STEP * np.maximum(1.0, np.abs(coords[..., self.j]))
        up = coords.copy()
        dn = coords.copy()
        up[..., self.j] += h
        dn[..., self.j] -= h
        return (self.base.at(up) - self.base.at(dn)) / (2.0 * h)

    def partial(self, j):
        return FDPartialField(self, j)

    def __repr__(self):
        return f"FDPartialField({self.base!r}, {self.j})"


class SumField(ScalarField):
    def __init__(self, terms):
        flat = []
        for t in terms:
            if isinstance(t, SumField):
                flat.extend(t.terms)
            else:
                flat.append(as_field(t))
        self.terms = tuple(flat)

    @property
    def analytic(self):
        return all(t.analytic for t in self.terms)

    def at(self, coords):
        out = self.terms[0].at(coords)
        for t in self.terms[1:]:
            out = out + t.at(coords)
        return out

    def partial(self, j):
        return SumField([t.partial(j) for t in self.terms])

    def __repr__(self):
        return f"SumField({list(self.terms)!r})"


class ProductField(ScalarField):
    def __init__(self, f, g):
        self.f = as_field(f)
        self.g = as_field(g)

    @property
    def analytic(self):
        return self.f.analytic and self.g.analytic

    def at(self, coords):
        return self.f.at(coords) * self.g.at(coords)

    def partial(self, j):
        return SumField([ProductField(self.f.partial(j), self.g),
                         ProductField(self.f, self.g.partial(j))])

    def __repr__(self):
        return f"ProductField({self.f!r}, {self.g!r})"


class ScaledField(ScalarField):
    def __init__(self, c: float, f: ScalarField):
        self.c = float(c)
        self.f = as_field(f)

    @property
    def analytic(self):
        return self.f.analytic

    def at(self, coords):
        return self.c * self.f.at(coords)

    def partial(self, j):
        return ScaledField(self.c, self.f.partial(j))

    def __repr__(self):
        return f"ScaledField({self.c}, {self.f!r})"


ZERO = ConstField(0.0)
ONE = ConstField(1.0)


def directional_derivative(field: ScalarField, components) -> ScalarField:
    """The derivative of ``field`` along a coordinate-component list
    (one ScalarField per coordinate, time included)."""
    terms = [ProductField(as_field(c), field.partial(j))
             for j, c in enumerate(components)]
    return SumField(terms)
