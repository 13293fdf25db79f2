"""Selection-function mini language.

Grammar (whitespace ignored)::

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := '-' factor | atom ('^' uint)?
    atom   := number | 'x' | 'y' | '(' expr ')'

``^`` binds tighter than unary minus, so ``-x^2`` is ``-(x^2)``. Exponents must
be non-negative integer literals; a chain ``x^2^3`` is read right-associatively
as ``x^(2^3)``. Only polynomial/rational expressions are expressible, which
keeps every symbolic derivative exact.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DomainError, EvalError, ExprSyntaxError
from .grid import GridSpec

__all__ = [
    "Expr", "Const", "Var", "Neg", "BinOp", "Pow",
    "parse_selection", "differentiate", "evaluate", "to_source",
    "SelectionFn", "bind",
]


# --------------------------------------------------------------------------
# AST
# --------------------------------------------------------------------------

class Expr:
    """Base class of expression nodes. Nodes are immutable."""

    prec = 5

    def __call__(self, x, y):
        return evaluate(self, x, y)

    def __str__(self) -> str:
        return to_source(self)

    def free_vars(self) -> frozenset:
        return frozenset()


@dataclass(frozen=True, eq=True)
class Const(Expr):
    value: float
    span: tuple = field(default=(0, 0), compare=False, repr=False)

    @property
    def prec(self):
        return 5 if self.value >= 0 else 3


@dataclass(frozen=True, eq=True)
class Var(Expr):
    name: str
    span: tuple = field(default=(0, 0), compare=False, repr=False)

    def free_vars(self):
        return frozenset((self.name,))


@dataclass(frozen=True, eq=True)
class Neg(Expr):
    arg: Expr
    span: tuple = field(default=(0, 0), compare=False, repr=False)
    prec = 3

    def free_vars(self):
        return self.arg.free_vars()


@dataclass(frozen=True, eq=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr
    span: tuple = field(default=(0, 0), compare=False, repr=False)

    @property
    def prec(self):
        return 1 if self.op in "+-" else 2

    def free_vars(self):
        return self.left.free_vars() | self.right.free_vars()


@dataclass(frozen=True, eq=True)
class Pow(Expr):
    base: Expr
    exponent: int
    span: tuple = field(default=(0, 0), compare=False, repr=False)
    prec = 4

    def free_vars(self):
        return self.base.free_vars()


# --------------------------------------------------------------------------
# Parsing
# --------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<var>[xy])|(?P<op>[-+*/^()]))"
)


@dataclass
class _Tok:
    kind: str  # 'num' | 'var' | 'op' | 'end'
    text: str
    offset: int  # byte offset into the source


def _tokenize(src: str) -> list[_Tok]:
    toks = []
    pos = 0
    byte_off = lambda i: len(src[:i].encode("utf-8"))  # noqa: E731
    while pos < len(src):
        if src[pos:].strip() == "":
            break
        mt = _TOKEN_RE.match(src, pos)
        if mt is None:
            j = pos
            while src[j].isspace():
                j += 1
            raise ExprSyntaxError(f"unexpected character {src[j]!r}", src, byte_off(j))
        kind = mt.lastgroup
        toks.append(_Tok(kind, mt.group(kind), byte_off(mt.start(kind))))
        pos = mt.end()
    toks.append(_Tok("end", "", len(src.encode("utf-8"))))
    return toks


class _Parser:
    def __init__(self, src: str):
        self.src = src
        self.toks = _tokenize(src)
        self.i = 0

    @property
    def cur(self) -> _Tok:
        return self.toks[self.i]

    def take(self) -> _Tok:
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def error(self, msg, tok=None):
        tok = tok or self.cur
        return ExprSyntaxError(msg, self.src, tok.offset)

    def parse(self) -> Expr:
        if self.cur.kind == "end":
            raise self.error("empty expression")
        e = self.expr()
        if self.cur.kind != "end":
            raise self.error(f"unexpected token {self.cur.text!r}")
        return e

    def expr(self) -> Expr:
        left = self.term()
        while self.cur.kind == "op" and self.cur.text in "+-":
            op = self.take().text
            right = self.term()
            left = BinOp(op, left, right, span=(left.span[0], right.span[1]))
        return left

    def term(self) -> Expr:
        left = self.factor()
        while self.cur.kind == "op" and self.cur.text in "*/":
            op = self.take().text
            right = self.factor()
            left = BinOp(op, left, right, span=(left.span[0], right.span[1]))
        return left

    def factor(self) -> Expr:
        if self.cur.kind == "op" and self.cur.text == "-":
            tok = self.take()
            arg = self.factor()
            return Neg(arg, span=(tok.offset, arg.span[1]))
        base = self.atom()
        if self.cur.kind == "op" and self.cur.text == "^":
            self.take()
            k = self.exponent()
            return Pow(base, k, span=(base.span[0], self.cur.offset))
        return base

    def exponent(self) -> int:
        tok = self.cur
        if tok.kind == "end":
            raise self.error("missing exponent")
        if tok.kind == "op" and tok.text in "+*/^)":
            raise self.error(f"unexpected {tok.text!r} in exponent")
        if tok.kind != "num":
            raise DomainError(
                f"exponent must be a non-negative integer literal (offset {tok.offset})",
                tok.offset)
        if not tok.text.isdigit():
            raise DomainError(
                f"exponent {tok.text!r} is not a non-negative integer literal "
                f"(offset {tok.offset})", tok.offset)
        self.take()
        k = int(tok.text)
        if self.cur.kind == "op" and self.cur.text == "^":
            self.take()
            k = k ** self.exponent()
        return k

    def atom(self) -> Expr:
        tok = self.cur
        end = tok.offset + len(tok.text)
        if tok.kind == "num":
            self.take()
            return Const(float(tok.text), span=(tok.offset, end))
        if tok.kind == "var":
            self.take()
            return Var(tok.text, span=(tok.offset, end))
        if tok.kind == "op" and tok.text == "(":
            self.take()
            e = self.expr()
            if not (self.cur.kind == "op" and self.cur.text == ")"):
                raise self.error("expected ')'")
            self.take()
            return e
        if tok.kind == "end":
            raise self.error("unexpected end of input")
        raise self.error(f"unexpected token {tok.text!r}")


def parse_selection(src: str) -> Expr:
    """Parse ``src`` into an expression tree.

    Raises :class:`ExprSyntaxError` (with byte ``offset``) on malformed input
    and :class:`DomainError` when an exponent is not a non-negative integer
    literal.
    """
    return _Parser(src).parse()


# --------------------------------------------------------------------------
# Printing
# --------------------------------------------------------------------------

def _fmt_const(v: float) -> str:
    if float(v).is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


def to_source(e: Expr) -> str:
    """Render ``e`` as text that reparses to an identical tree."""
    if isinstance(e, Const):
        return _fmt_const(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Neg):
        inner = to_source(e.arg)
        if e.arg.prec < 3 or (isinstance(e.arg, Const) and e.arg.value < 0):
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(e, Pow):
        base = to_source(e.base)
        if e.base.prec < 5:
            base = f"({base})"
        return f"{base}^{e.exponent}"
    if isinstance(e, BinOp):
        p = e.prec
        left = to_source(e.left)
        if e.left.prec < p:
            left = f"({left})"
        right = to_source(e.right)
        if e.right.prec <= p:
            right = f"({right})"
        return f"{left}{e.op}{right}"
    raise TypeError(f"not an expression node: {e!r}")


# --------------------------------------------------------------------------
# Constant-folding constructors
# --------------------------------------------------------------------------

def _is(e: Expr, v: float) -> bool:
    return isinstance(e, Const) and e.value == v


def _neg(a: Expr) -> Expr:
    if isinstance(a, Const):
        return Const(-a.value + 0.0)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def _add(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value + b.value)
    if _is(a, 0):
        return b
    if _is(b, 0):
        return a
    return BinOp("+", a, b)


def _sub(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value - b.value)
    if _is(b, 0):
        return a
    if _is(a, 0):
        return _neg(b)
    return BinOp("-", a, b)


def _mul(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value * b.value)
    if _is(a, 0) or _is(b, 0):
        return Const(0.0)
    if _is(a, 1):
        return b
    if _is(b, 1):
        return a
    return BinOp("*", a, b)


def _div(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const) and b.value != 0:
        return Const(a.value / b.value)
    if _is(b, 1):
        return a
    return BinOp("/", a, b)


def _pow(b: Expr, k: int) -> Expr:
    if k == 0:
        return Const(1.0)
    if k == 1:
        return b
    if isinstance(b, Const):
        return Const(b.value ** k)
    return Pow(b, k)


def differentiate(e: Expr, var: str) -> Expr:
    """Exact symbolic partial derivative of ``e`` with respect to ``var``."""
    if var not in ("x", "y"):
        raise ValueError(f"unknown variable {var!r}")
    if isinstance(e, Const):
        return Const(0.0)
    if isinstance(e, Var):
        return Const(1.0 if e.name == var else 0.0)
    if isinstance(e, Neg):
        return _neg(differentiate(e.arg, var))
    if isinstance(e, Pow):
        if e.exponent == 0:
            return Const(0.0)
        db = differentiate(e.base, var)
        return _mul(_mul(Const(float(e.exponent)), _pow(e.base, e.exponent - 1)), db)
    if isinstance(e, BinOp):
        a, b = e.left, e.right
        da, db = differentiate(a, var), differentiate(b, var)
        if e.op == "+":
            return _add(da, db)
        if e.op == "-":
            return _sub(da, db)
        if e.op == "*":
            return _add(_mul(da, b), _mul(a, db))
        if e.op == "/":
            return _div(_sub(_mul(da, b), _mul(a, db)), _pow(b, 2))
    raise TypeError(f"not an expression node: {e!r}")


# --------------------------------------------------------------------------
# Evaluation
# --------------------------------------------------------------------------

def _compile(e: Expr) -> Callable:
    if isinstance(e, Const):
        v = e.value
        return lambda x, y: v
    if isinstance(e, Var):
        return (lambda x, y: x) if e.name == "x" else (lambda x, y: y)
    if isinstance(e, Neg):
        f = _compile(e.arg)
        return lambda x, y: -f(x, y)
    if isinstance(e, Pow):
        f, k = _compile(e.base), e.exponent
        return lambda x, y: f(x, y) ** k
    if isinstance(e, BinOp):
        f, g = _compile(e.left), _compile(e.right)
        if e.op == "+":
            return lambda x, y: f(x, y) + g(x, y)
        if e.op == "-":
            return lambda x, y: f(x, y) - g(x, y)
        if e.op == "*":
            return lambda x, y: f(x, y) * g(x, y)
        at = e.right.span[0]

        def div(x, y):
            d = g(x, y)
            if np.any(np.asarray(d) == 0):
                raise EvalError(f"division by zero (denominator at offset {at})")
            return f(x, y) / d

        return div
    raise TypeError(f"not an expression node: {e!r}")


def _pysource(e: Expr) -> str:
    """Fully parenthesized Python source for scalar evaluation."""
    if isinstance(e, Const):
        return repr(float(e.value))
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Neg):
        return f"(-{_pysource(e.arg)})"
    if isinstance(e, Pow):
        return f"({_pysource(e.base)}**{e.exponent})"
    if isinstance(e, BinOp):
        return f"({_pysource(e.left)}{e.op}{_pysource(e.right)})"
    raise TypeError(f"not an expression node: {e!r}")


def compile_scalar(e: Expr) -> Callable[[float, float], float]:
    """Fast float-only evaluator; raises ZeroDivisionError on division by zero."""
    return eval(f"lambda x, y: {_pysource(e)}", {"__builtins__": {}})  # noqa: S307


def evaluate(e: Expr, x, y):
    """Evaluate ``e`` at scalar or array arguments (numpy broadcasting)."""
    try:
        with np.errstate(over="ignore", invalid="ignore"):
            out = _compile(e)(x, y)
    except OverflowError:
        raise EvalError(f"overflow evaluating {to_source(e)}") from None
    if not np.all(np.isfinite(out)):
        raise EvalError(f"non-finite value of {to_source(e)}")
    if np.ndim(out) == 0 and np.ndim(x) == 0 and np.ndim(y) == 0:
        return float(out)
    return np.broadcast_to(np.asarray(out, dtype=float), np.broadcast(x, y).shape)


# --------------------------------------------------------------------------
# Binding to a grid
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SelectionFn:
    """A selection function with its exact first and second partials.

    ``sup_m_on_grid`` is the grid-node maximum of ``|m|`` and stands in for
    the sup norm wherever the model needs it.
    """

    m: Expr
    dx_m: Expr
    dy_m: Expr
    dxx_m: Expr
    dyy_m: Expr
    sup_m_on_grid: float
    min_m_on_grid: float
    values: np.ndarray = field(repr=False, compare=False)
    source: str = ""

    def __post_init__(self):
        for name in ("m", "dx_m", "dy_m", "dxx_m", "dyy_m"):
            e = getattr(self, name)
            object.__setattr__(self, "_f_" + name, _compile(e))
            object.__setattr__(self, "_s_" + name, compile_scalar(e))

    def _call(self, name, x, y):
        if isinstance(x, float) and isinstance(y, float):
            try:
                v = getattr(self, "_s_" + name)(x, y)
            except ZeroDivisionError:
                raise EvalError(f"division by zero in {name} at ({x}, {y})") from None
            except OverflowError:
                v = math.inf
            if not math.isfinite(v):
                raise EvalError(f"non-finite {name} at ({x}, {y})")
            return v
        return evaluate(getattr(self, name), x, y)

    def __call__(self, x, y):
        return self._call("m", x, y)

    def grad(self, x: float, y: float) -> tuple[float, float]:
        return self._call("dx_m", x, y), self._call("dy_m", x, y)

    def dxx(self, x, y):
        return self._call("dxx_m", x, y)

    def dyy(self, x, y):
        return self._call("dyy_m", x, y)

    @property
    def dxx_depends_on_x(self) -> bool:
        return "x" in self.dxx_m.free_vars()

    @property
    def dyy_depends_on_y(self) -> bool:
        return "y" in self.dyy_m.free_vars()

    @property
    def is_symmetric(self) -> bool:
        """Whether m(x,y) == m(y,x) on the bound (square) grid."""
        v = self.values
        return v.shape[0] == v.shape[1] and bool(
            np.allclose(v, v.T, rtol=1e-12, atol=1e-12 * max(self.sup_m_on_grid, 1.0))
        )


def bind(e: Expr | str, grid: GridSpec) -> SelectionFn:
    """Materialize derivatives and the grid sup of ``|m|``."""
    source = e if isinstance(e, str) else to_source(e)
    if isinstance(e, str):
        e = parse_selection(e)
    X, Y = grid.mesh()
    vals = np.array(evaluate(e, X, Y), dtype=float)
    dx = differentiate(e, "x")
    dy = differentiate(e, "y")
    return SelectionFn(
        m=e,
        dx_m=dx,
        dy_m=dy,
        dxx_m=differentiate(dx, "x"),
        dyy_m=differentiate(dy, "y"),
        sup_m_on_grid=float(np.max(np.abs(vals))),
        min_m_on_grid=float(np.min(vals)),
        values=vals,
        source=source,
    )
