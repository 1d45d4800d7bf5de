"""Flat evaluation tapes for expression trees.

A tape is a topologically ordered list of register operations compiled from
an :class:`~nambulab.exprs.Expr`. Tapes drive the hot loops (batched field
evaluation and batched value-plus-gradient passes inside the ODE
integrators) and have two interchangeable backends:

* ``nambulab._tape_kernel`` - Cython, built at install time;
* ``nambulab._tape_fallback`` - pure numpy, always available.

The compiled backend is selected at import when present. Set the
environment variable ``NAMBULAB_PURE=1`` to force the fallback (used by the
backend-agreement tests and the benchmark).
"""

from __future__ import annotations

import os

import numpy as np

from . import exprs
from .exprs import BinOp, EvalDomainError, Expr, Func, Neg, Num, UnboundVariableError, Var

OP_CONST = 0
OP_VAR = 1
OP_ADD = 2
OP_SUB = 3
OP_MUL = 4
OP_DIV = 5
OP_NEG = 6
OP_SIN = 7
OP_COS = 8
OP_EXP = 9
OP_LOG = 10
OP_SQRT = 11
OP_IPOW = 12
OP_POWC = 13
OP_POW = 14

_ERROR_MESSAGES = {
    1: "division by zero",
    2: "log of a non-positive value",
    3: "sqrt of a negative value",
    4: "invalid power (non-positive base or zero to a negative power)",
}

if os.environ.get("NAMBULAB_PURE"):
    from . import _tape_fallback as _backend

    BACKEND = "pure"
else:
    try:
        from . import _tape_kernel as _backend  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        from . import _tape_fallback as _backend

        BACKEND = "pure"


def backend_name() -> str:
    return BACKEND


class Tape:
    """Compiled form of one expression over ``ncols`` coordinate columns.

    Column layout matches coordinate arrays elsewhere in the package:
    columns ``0 .. n-1`` are ``x1 .. xn`` and column ``n`` is ``t``.
    """

    __slots__ = ("code", "arg1", "arg2", "consts", "ncols", "source")

    def __init__(self, code, arg1, arg2, consts, ncols: int, source: str):
        self.code = code
        self.arg1 = arg1
        self.arg2 = arg2
        self.consts = consts
        self.ncols = ncols
        self.source = source

    def __len__(self) -> int:
        return len(self.code)

    def _prep(self, points: np.ndarray) -> np.ndarray:
        pts = np.ascontiguousarray(points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != self.ncols:
            raise ValueError(
                f"expected points of shape (batch, {self.ncols}), got {pts.shape}")
        return pts

    def values(self, points: np.ndarray) -> np.ndarray:
        """Evaluate on a ``(batch, ncols)`` array; returns ``(batch,)``."""
        pts = self._prep(points)
        out = np.empty(pts.shape[0], dtype=np.float64)
        err = np.zeros(3, dtype=np.int64)
        _backend.tape_values(self.code, self.arg1, self.arg2, self.consts, pts, out, err)
        if err[0]:
            raise EvalDomainError(
                f"{_ERROR_MESSAGES[int(err[0])]} while evaluating "
                f"{self.source!r} (batch index {int(err[2])})")
        return out

    def values_and_gradients(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Batched forward-mode pass: values ``(batch,)`` plus the gradient
        with respect to every column, ``(batch, ncols)``."""
        pts = self._prep(points)
        out = np.empty(pts.shape[0], dtype=np.float64)
        grad = np.zeros((pts.shape[0], self.ncols), dtype=np.float64)
        err = np.zeros(3, dtype=np.int64)
        _backend.tape_values_and_gradients(
            self.code, self.arg1, self.arg2, self.consts, pts, out, grad, err)
        if err[0]:
            raise EvalDomainError(
                f"{_ERROR_MESSAGES[int(err[0])]} while differentiating "
                f"{self.source!r} (batch index {int(err[2])})")
        return out, grad


def compile_expr(e: Expr, ncols: int) -> Tape:
    """Flatten a tree into a tape over ``ncols`` coordinate columns."""
    code: list[int] = []
    arg1: list[int] = []
    arg2: list[int] = []
    consts: list[float] = []

    def emit(op: int, a: int = 0, b: int = 0, c: float = 0.0) -> int:
        code.append(op)
        arg1.append(a)
        arg2.append(b)
        consts.append(c)
        return len(code) - 1

    def walk(node: Expr) -> int:
        if isinstance(node, Num):
            return emit(OP_CONST, c=node.value)
        if isinstance(node, Var):
            col = ncols - 1 if node.slot == exprs.TIME else node.slot
            if node.slot != exprs.TIME and node.slot >= ncols - 1:
                raise UnboundVariableError(
                    f"variable {node.name!r} exceeds the {ncols - 1} spatial columns")
            return emit(OP_VAR, a=col)
        if isinstance(node, Neg):
            return emit(OP_NEG, a=walk(node.arg))
        if isinstance(node, Func):
            opmap = {"sin": OP_SIN, "cos": OP_COS, "exp": OP_EXP,
                     "log": OP_LOG, "sqrt": OP_SQRT}
            return emit(opmap[node.name], a=walk(node.arg))
        if isinstance(node, BinOp):
            if node.op == "^":
                k = _literal_exponent(node.rhs)
                if k is not None:
                    base = walk(node.lhs)
                    if float(k).is_integer():
                        return emit(OP_IPOW, a=base, b=int(k))
                    return emit(OP_POWC, a=base, c=float(k))
                return emit(OP_POW, a=walk(node.lhs), b=walk(node.rhs))
            a = walk(node.lhs)
            b = walk(node.rhs)
            opmap = {"+": OP_ADD, "-": OP_SUB, "*": OP_MUL, "/": OP_DIV}
            return emit(opmap[node.op], a=a, b=b)
        raise TypeError(f"not an Expr node: {node!r}")

    walk(e)
    return Tape(
        np.asarray(code, dtype=np.int64),
        np.asarray(arg1, dtype=np.int64),
        np.asarray(arg2, dtype=np.int64),
        np.asarray(consts, dtype=np.float64),
        ncols,
        exprs.render(e),
    )


def _literal_exponent(node: Expr) -> float | None:
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Neg) and isinstance(node.arg, Num):
        return -node.arg.value
    return None
