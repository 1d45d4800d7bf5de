"""Closed expression language for scalar fields on extended phase space.

Grammar (infix, usual precedence, ``^`` binds tightest and associates right):

    expr   := term   (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := '-' factor | power
    power  := atom ('^' factor)?
    atom   := NUMBER | VAR | FUNC '(' expr ')' | '(' expr ')'

Variables are the fixed names ``x1`` .. ``x6`` and ``t``; there are no
user-defined identifiers. Functions: ``sin``, ``cos``, ``exp``, ``log``,
``sqrt``. ``0^0`` evaluates to 1 (polynomial convention).

Evaluation binds a coordinate array ``(x1, ..., xn, t)``: the last entry is
always ``t``. Domain violations (log of a non-positive value, sqrt of a
negative, division by zero, fractional power of a non-positive base) raise
:class:`EvalDomainError` instead of silently producing NaN.

Derivatives are forward-mode, via :class:`Dual`. A dual number carries a
value and one derivative slot; nesting duals inside duals yields exact
higher-order partials without symbolic manipulation.
"""

from __future__ import annotations

import re

import numpy as np

VAR_NAMES = ("x1", "x2", "x3", "x4", "x5", "x6")
FUNC_NAMES = ("sin", "cos", "exp", "log", "sqrt")
TIME = -1  # sentinel slot for the t variable


class ExprError(ValueError):
    """Base class for parse and evaluation failures."""


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, pos: int):
        super().__init__(f"{message} (byte offset {pos})")
        self.pos = pos


class UnknownIdentifierError(ExprSyntaxError):
    pass


class UnboundVariableError(ExprError):
    pass


class EvalDomainError(ExprError):
    pass


# ---------------------------------------------------------------------------
# Expression tree


class Expr:
    """Immutable node of a parsed expression tree."""

    __slots__ = ("pos",)

    def variables(self) -> set[int]:
        """Variable slots used by this tree (0-based spatial index, TIME for t)."""
        out: set[int] = set()
        _collect_vars(self, out)
        return out


class Num(Expr):
    __slots__ = ("value",)

    def __init__(self, value: float, pos: int = 0):
        self.value = float(value)
        self.pos = pos


class Var(Expr):
    __slots__ = ("name", "slot")

    def __init__(self, name: str, pos: int = 0):
        self.name = name
        self.slot = TIME if name == "t" else int(name[1:]) - 1
        self.pos = pos


class Neg(Expr):
    __slots__ = ("arg",)

    def __init__(self, arg: Expr, pos: int = 0):
        self.arg = arg
        self.pos = pos


class BinOp(Expr):
    __slots__ = ("op", "lhs", "rhs")

    def __init__(self, op: str, lhs: Expr, rhs: Expr, pos: int = 0):
        self.op = op
        self.lhs = lhs
        self.rhs = rhs
        self.pos = pos


class Func(Expr):
    __slots__ = ("name", "arg")

    def __init__(self, name: str, arg: Expr, pos: int = 0):
        self.name = name
        self.arg = arg
        self.pos = pos


def _collect_vars(e: Expr, out: set[int]) -> None:
    if isinstance(e, Var):
        out.add(e.slot)
    elif isinstance(e, Neg):
        _collect_vars(e.arg, out)
    elif isinstance(e, BinOp):
        _collect_vars(e.lhs, out)
        _collect_vars(e.rhs, out)
    elif isinstance(e, Func):
        _collect_vars(e.arg, out)


# ---------------------------------------------------------------------------
# Parser

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))"
)


def _tokenize(source: str) -> list[tuple[str, str, int]]:
    tokens = []
    i = 0
    while i < len(source):
        m = _TOKEN_RE.match(source, i)
        if m is None:
            stripped = source[i:].lstrip()
            if not stripped:
                break
            pos = len(source) - len(stripped)
            raise ExprSyntaxError(f"unexpected character {stripped[0]!r}", pos)
        if m.lastgroup == "num":
            tokens.append(("num", m.group("num"), m.start("num")))
        elif m.lastgroup == "ident":
            tokens.append(("ident", m.group("ident"), m.start("ident")))
        else:
            tokens.append(("op", m.group("op"), m.start("op")))
        i = m.end()
    tokens.append(("end", "", len(source)))
    return tokens


class _Parser:
    def __init__(self, source: str):
        self.source = source
        self.tokens = _tokenize(source)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op: str):
        kind, text, pos = self.peek()
        if kind != "op" or text != op:
            raise ExprSyntaxError(f"expected {op!r}", pos)
        self.advance()

    def parse(self) -> Expr:
        e = self.expr()
        kind, text, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected token {text!r}", pos)
        return e

    def expr(self) -> Expr:
        lhs = self.term()
        while True:
            kind, text, pos = self.peek()
            if kind == "op" and text in "+-":
                self.advance()
                lhs = BinOp(text, lhs, self.term(), pos)
            else:
                return lhs

    def term(self) -> Expr:
        lhs = self.factor()
        while True:
            kind, text, pos = self.peek()
            if kind == "op" and text in "*/":
                self.advance()
                lhs = BinOp(text, lhs, self.factor(), pos)
            else:
                return lhs

    def factor(self) -> Expr:
        kind, text, pos = self.peek()
        if kind == "op" and text == "-":
            self.advance()
            return Neg(self.factor(), pos)
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        kind, text, pos = self.peek()
        if kind == "op" and text == "^":
            self.advance()
            return BinOp("^", base, self.factor(), pos)
        return base

    def atom(self) -> Expr:
        kind, text, pos = self.advance()
        if kind == "num":
            return Num(float(text), pos)
        if kind == "ident":
            if text in FUNC_NAMES:
                self.expect_op("(")
                arg = self.expr()
                self.expect_op(")")
                return Func(text, arg, pos)
            if text in VAR_NAMES or text == "t":
                return Var(text, pos)
            raise UnknownIdentifierError(f"unknown identifier {text!r}", pos)
        if kind == "op" and text == "(":
            e = self.expr()
            self.expect_op(")")
            return e
        shown = text if text else "end of input"
        raise ExprSyntaxError(f"syntax error at {shown!r}", pos)


def parse(source: str) -> Expr:
    """Parse an expression string; raises ExprSyntaxError with a byte offset."""
    if not source or not source.strip():
        raise ExprSyntaxError("empty expression", 0)
    return _Parser(source).parse()


# ---------------------------------------------------------------------------
# Rendering (round-trip: parse(render(e)) evaluates identically to e)

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4, "atom": 5}


def render(e: Expr) -> str:
    text, _ = _render(e)
    return text


def _render(e: Expr) -> tuple[str, int]:
    if isinstance(e, Num):
        return repr(e.value), _PREC["atom"]
    if isinstance(e, Var):
        return e.name, _PREC["atom"]
    if isinstance(e, Func):
        return f"{e.name}({_render(e.arg)[0]})", _PREC["atom"]
    if isinstance(e, Neg):
        arg, prec = _render(e.arg)
        if prec < _PREC["neg"]:
            arg = f"({arg})"
        return f"-{arg}", _PREC["neg"]
    if isinstance(e, BinOp):
        lhs, lp = _render(e.lhs)
        rhs, rp = _render(e.rhs)
        prec = _PREC[e.op]
        if e.op == "^":
            # right-associative, and the base must bind at least as an atom
            if lp <= prec:
                lhs = f"({lhs})"
            if rp < _PREC["neg"]:
                rhs = f"({rhs})"
        else:
            if lp < prec:
                lhs = f"({lhs})"
            # -, / are left-associative: parenthesize an equal-precedence rhs
            if rp < prec or (rp == prec and e.op in ("-", "/")):
                rhs = f"({rhs})"
        return f"{lhs} {e.op} {rhs}", prec
    raise TypeError(f"not an Expr node: {e!r}")


# ---------------------------------------------------------------------------
# Dual numbers (forward mode)


class Dual:
    """Value plus one derivative slot. Components may be floats, arrays,
    or Duals; nesting gives exact second and higher derivatives."""

    __slots__ = ("val", "eps")

    def __init__(self, val, eps):
        self.val = val
        self.eps = eps

    def __repr__(self):
        return f"Dual({self.val!r}, {self.eps!r})"

    def __add__(self, other):
        if isinstance(other, Dual):
            return Dual(self.val + other.val, self.eps + other.eps)
        return Dual(self.val + other, self.eps)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Dual):
            return Dual(self.val - other.val, self.eps - other.eps)
        return Dual(self.val - other, self.eps)

    def __rsub__(self, other):
        return Dual(other - self.val, -self.eps)

    def __mul__(self, other):
        if isinstance(other, Dual):
            return Dual(self.val * other.val,
                        self.val * other.eps + self.eps * other.val)
        return Dual(self.val * other, self.eps * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Dual):
            q = self.val / other.val
            return Dual(q, (self.eps - q * other.eps) / other.val)
        return Dual(self.val / other, self.eps / other)

    def __rtruediv__(self, other):
        q = other / self.val
        return Dual(q, -q * self.eps / self.val)

    def __neg__(self):
        return Dual(-self.val, -self.eps)

    def __pow__(self, k):
        return _pow(self, k)


def _real(u):
    """Innermost primal value of a possibly nested dual."""
    while isinstance(u, Dual):
        u = u.val
    return u


def sin(u):
    if isinstance(u, Dual):
        return Dual(sin(u.val), cos(u.val) * u.eps)
    return np.sin(u)


def cos(u):
    if isinstance(u, Dual):
        return Dual(cos(u.val), -sin(u.val) * u.eps)
    return np.cos(u)


def exp(u):
    if isinstance(u, Dual):
        e = exp(u.val)
        return Dual(e, e * u.eps)
    return np.exp(u)


def log(u):
    if isinstance(u, Dual):
        return Dual(log(u.val), u.eps / u.val)
    if np.any(np.asarray(u) <= 0.0):
        raise EvalDomainError("log of a non-positive value")
    return np.log(u)


def sqrt(u):
    if isinstance(u, Dual):
        s = sqrt(u.val)
        return Dual(s, u.eps / (2.0 * s))
    if np.any(np.asarray(u) < 0.0):
        raise EvalDomainError("sqrt of a negative value")
    return np.sqrt(u)


_FUNCS = {"sin": sin, "cos": cos, "exp": exp, "log": log, "sqrt": sqrt}


def _ipow(u, k: int):
    """Integer power by repeated squaring; 0^0 == 1."""
    if k == 0:
        return 1.0 if not isinstance(u, Dual) else Dual(_ipow(u.val, 0), u.eps * 0.0)
    if k < 0:
        return 1.0 / _ipow(u, -k)
    result = None
    base = u
    while k:
        if k & 1:
            result = base if result is None else result * base
        k >>= 1
        if k:
            base = base * base
    return result


def _pow(u, k):
    if isinstance(k, Dual):
        # variable exponent: u^k = exp(k log u), positive base required
        return exp(k * log(u))
    kf = float(k)
    if kf.is_integer():
        ki = int(kf)
        if ki < 0 and np.any(np.asarray(_real(u)) == 0.0):
            raise EvalDomainError("zero raised to a negative power")
        return _ipow(u, ki)
    base = np.asarray(_real(u))
    if isinstance(u, Dual):
        if np.any(base <= 0.0):
            raise EvalDomainError(
                "fractional power of a non-positive base (no derivative)")
        return Dual(_pow(u.val, kf), kf * _pow(u.val, kf - 1.0) * u.eps)
    if np.any(base < 0.0):
        raise EvalDomainError("fractional power of a negative base")
    if kf < 0.0 and np.any(base == 0.0):
        raise EvalDomainError("zero raised to a negative power")
    return np.power(u, kf)


# ---------------------------------------------------------------------------
# Evaluation


def _eval(e: Expr, bind):
    """Evaluate a tree with ``bind(slot)`` supplying variable values."""
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        return bind(e.slot, e)
    if isinstance(e, Neg):
        return -_eval(e.arg, bind)
    if isinstance(e, Func):
        return _FUNCS[e.name](_eval(e.arg, bind))
    if isinstance(e, BinOp):
        a = _eval(e.lhs, bind)
        if e.op == "^":
            rhs = e.rhs
            if isinstance(rhs, Num):
                return _pow(a, rhs.value)
            if isinstance(rhs, Neg) and isinstance(rhs.arg, Num):
                return _pow(a, -rhs.arg.value)
            return _pow(a, _eval(rhs, bind))
        b = _eval(e.rhs, bind)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        # division, with an explicit zero-denominator check
        if np.any(np.asarray(_real(b)) == 0.0):
            raise EvalDomainError(f"division by zero (byte offset {e.pos})")
        return a / b
    raise TypeError(f"not an Expr node: {e!r}")


def _coord_bind(coords):
    coords = np.asarray(coords, dtype=float)
    n = coords.shape[-1] - 1

    def bind(slot, node):
        if slot == TIME:
            return coords[..., n]
        if slot >= n:
            raise UnboundVariableError(
                f"variable {node.name!r} is not bound by a "
                f"{n + 1}-component coordinate array")
        return coords[..., slot]

    return bind


def evaluate(e: Expr, coords) -> float | np.ndarray:
    """Evaluate at a coordinate array ``(x1, ..., xn, t)``.

    ``coords`` may carry leading batch axes; the last axis holds the
    coordinates, with ``t`` in the final entry.
    """
    return _eval(e, _coord_bind(coords))


def eval_dual(e: Expr, values: dict[int, object]):
    """Evaluate with arbitrary per-slot values (floats, arrays or Duals)."""

    def bind(slot, node):
        try:
            return values[slot]
        except KeyError:
            raise UnboundVariableError(f"variable {node.name!r} is unbound") from None

    return _eval(e, bind)


def gradient(e: Expr, coords) -> np.ndarray:
    """Gradient ``(d/dx1, ..., d/dxn, d/dt)`` by one dual pass per variable.

    Exact to round-off for the supported operator set. Batch axes in
    ``coords`` are carried through: the result has one trailing axis of
    length ``n + 1``.
    """
    coords = np.asarray(coords, dtype=float)
    n = coords.shape[-1] - 1
    used = e.variables()
    for slot in used:
        if slot != TIME and slot >= n:
            raise UnboundVariableError(
                f"variable x{slot + 1} is not bound by a "
                f"{n + 1}-component coordinate array")
    out = np.zeros(coords.shape, dtype=float)
    slots = [TIME if j == n else j for j in range(n + 1)]
    for j, slot in enumerate(slots):
        if slot not in used:
            continue  # derivative is identically zero
        values = {}
        for s in used:
            idx = n if s == TIME else s
            v = coords[..., idx]
            values[s] = Dual(v, 1.0) if s == slot else v
        r = eval_dual(e, values)
        out[..., j] = r.eps if isinstance(r, Dual) else 0.0
    return out
