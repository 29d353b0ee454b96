"""Scalar expressions in the time variable t: parsing, evaluation, symbolic
differentiation, and a matrix-of-expressions container for time-varying
coefficient matrices.

The grammar is deliberately small (polynomials in t, the four arithmetic
operators, integer powers and sin/cos/exp/sqrt); no simplification is done
beyond constant folding, so derivative trees may grow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

__all__ = [
    "TimeExpr",
    "Const",
    "Var",
    "ParseError",
    "EvalDomainError",
    "parse",
    "evaluate",
    "differentiate",
    "render",
    "shift",
    "as_expr",
    "MatrixFunction",
]

FUNCTIONS = ("sin", "cos", "exp", "sqrt")


class ParseError(ValueError):
    """Malformed source text; carries the byte offset of the problem."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class EvalDomainError(ArithmeticError):
    """Division by zero, sqrt of a negative value, or a non-finite result."""


class TimeExpr:
    """Immutable expression tree over the single variable t.

    Instances evaluate with ``e(t)`` and differentiate with ``e.diff()``.
    Arithmetic operators build new trees (with constant folding), so matrix
    algebra over entries stays symbolic.
    """

    def __call__(self, t: float) -> float:
        return evaluate(self, t)

    def diff(self) -> "TimeExpr":
        return differentiate(self)

    def __str__(self) -> str:
        return render(self)

    def __repr__(self) -> str:
        return f"{type(self).__name__}<{render(self)}>"

    def __add__(self, other):
        return add(self, as_expr(other))

    def __radd__(self, other):
        return add(as_expr(other), self)

    def __sub__(self, other):
        return sub(self, as_expr(other))

    def __rsub__(self, other):
        return sub(as_expr(other), self)

    def __mul__(self, other):
        return mul(self, as_expr(other))

    def __rmul__(self, other):
        return mul(as_expr(other), self)

    def __truediv__(self, other):
        return div(self, as_expr(other))

    def __rtruediv__(self, other):
        return div(as_expr(other), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, k: int):
        return power(self, k)


@dataclass(frozen=True)
class Const(TimeExpr):
    value: float


@dataclass(frozen=True)
class Var(TimeExpr):
    pass


@dataclass(frozen=True)
class Add(TimeExpr):
    left: TimeExpr
    right: TimeExpr


@dataclass(frozen=True)
class Sub(TimeExpr):
    left: TimeExpr
    right: TimeExpr


@dataclass(frozen=True)
class Mul(TimeExpr):
    left: TimeExpr
    right: TimeExpr


@dataclass(frozen=True)
class Div(TimeExpr):
    left: TimeExpr
    right: TimeExpr


@dataclass(frozen=True)
class Neg(TimeExpr):
    arg: TimeExpr


@dataclass(frozen=True)
class Pow(TimeExpr):
    base: TimeExpr
    exponent: int


@dataclass(frozen=True)
class Call(TimeExpr):
    func: str
    arg: TimeExpr


T = Var()

ZERO = Const(0.0)
ONE = Const(1.0)


def as_expr(value) -> TimeExpr:
    if isinstance(value, TimeExpr):
        return value
    if isinstance(value, (int, float)):
        return Const(float(value))
    if isinstance(value, str):
        return parse(value)
    raise TypeError(f"cannot interpret {value!r} as a TimeExpr")


def _is_const(e: TimeExpr, v: float | None = None) -> bool:
    return isinstance(e, Const) and (v is None or e.value == v)


# Smart constructors.  They fold constants and drop additive/multiplicative
# identities; anything beyond that is out of scope by design.

def add(a: TimeExpr, b: TimeExpr) -> TimeExpr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value + b.value)
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    return Add(a, b)


def sub(a: TimeExpr, b: TimeExpr) -> TimeExpr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value - b.value)
    if _is_const(b, 0.0):
        return a
    if _is_const(a, 0.0):
        return neg(b)
    return Sub(a, b)


def mul(a: TimeExpr, b: TimeExpr) -> TimeExpr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value * b.value)
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return ZERO
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    if _is_const(a, -1.0):
        return neg(b)
    if _is_const(b, -1.0):
        return neg(a)
    return Mul(a, b)


def div(a: TimeExpr, b: TimeExpr) -> TimeExpr:
    if isinstance(a, Const) and isinstance(b, Const) and b.value != 0.0:
        return Const(a.value / b.value)
    if _is_const(a, 0.0) and not _is_const(b, 0.0):
        return ZERO
    if _is_const(b, 1.0):
        return a
    return Div(a, b)


def neg(a: TimeExpr) -> TimeExpr:
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def power(base: TimeExpr, k: int) -> TimeExpr:
    if not isinstance(k, int):
        raise TypeError("exponent must be an integer")
    if k == 0:
        return ONE
    if k == 1:
        return base
    if isinstance(base, Const):
        v = float(base.value) ** k
        if math.isfinite(v):
            return Const(v)
    return Pow(base, k)


def call(func: str, arg: TimeExpr) -> TimeExpr:
    if func not in FUNCTIONS:
        raise ValueError(f"unknown function {func!r}")
    if isinstance(arg, Const):
        try:
            v = _apply_func(func, arg.value)
        except EvalDomainError:
            return Call(func, arg)
        return Const(v)
    return Call(func, arg)


def _apply_func(func: str, x: float) -> float:
    if func == "sin":
        return math.sin(x)
    if func == "cos":
        return math.cos(x)
    if func == "exp":
        try:
            return math.exp(x)
        except OverflowError:
            raise EvalDomainError(f"exp overflow at argument {x!r}") from None
    if func == "sqrt":
        if x < 0.0:
            raise EvalDomainError(f"sqrt of negative value {x!r}")
        return math.sqrt(x)
    raise ValueError(func)


def evaluate(e: TimeExpr, t: float) -> float:
    """Evaluate the tree at time t.  Raises EvalDomainError on division by
    zero, sqrt of a negative value, or overflow."""
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        return float(t)
    if isinstance(e, Add):
        return evaluate(e.left, t) + evaluate(e.right, t)
    if isinstance(e, Sub):
        return evaluate(e.left, t) - evaluate(e.right, t)
    if isinstance(e, Mul):
        return evaluate(e.left, t) * evaluate(e.right, t)
    if isinstance(e, Div):
        den = evaluate(e.right, t)
        if den == 0.0:
            raise EvalDomainError(f"division by zero at t={t!r}")
        return evaluate(e.left, t) / den
    if isinstance(e, Neg):
        return -evaluate(e.arg, t)
    if isinstance(e, Pow):
        base = evaluate(e.base, t)
        if e.exponent < 0 and base == 0.0:
            raise EvalDomainError(f"zero raised to negative power at t={t!r}")
        try:
            v = base**e.exponent
        except OverflowError:
            raise EvalDomainError(f"overflow in power at t={t!r}") from None
        if not math.isfinite(v):
            raise EvalDomainError(f"non-finite power result at t={t!r}")
        return v
    if isinstance(e, Call):
        return _apply_func(e.func, evaluate(e.arg, t))
    raise TypeError(f"not a TimeExpr node: {e!r}")


def differentiate(e: TimeExpr) -> TimeExpr:
    """Symbolic derivative d/dt.  Total on the AST; repeated application
    yields higher derivatives."""
    if isinstance(e, Const):
        return ZERO
    if isinstance(e, Var):
        return ONE
    if isinstance(e, Add):
        return add(differentiate(e.left), differentiate(e.right))
    if isinstance(e, Sub):
        return sub(differentiate(e.left), differentiate(e.right))
    if isinstance(e, Mul):
        return add(
            mul(differentiate(e.left), e.right),
            mul(e.left, differentiate(e.right)),
        )
    if isinstance(e, Div):
        num = sub(
            mul(differentiate(e.left), e.right),
            mul(e.left, differentiate(e.right)),
        )
        return div(num, power(e.right, 2))
    if isinstance(e, Neg):
        return neg(differentiate(e.arg))
    if isinstance(e, Pow):
        inner = differentiate(e.base)
        return mul(mul(Const(float(e.exponent)), power(e.base, e.exponent - 1)), inner)
    if isinstance(e, Call):
        inner = differentiate(e.arg)
        if e.func == "sin":
            return mul(call("cos", e.arg), inner)
        if e.func == "cos":
            return neg(mul(call("sin", e.arg), inner))
        if e.func == "exp":
            return mul(call("exp", e.arg), inner)
        if e.func == "sqrt":
            return div(inner, mul(Const(2.0), call("sqrt", e.arg)))
    raise TypeError(f"not a TimeExpr node: {e!r}")


def shift(e: TimeExpr, delta: float) -> TimeExpr:
    """Substitute t -> t + delta, giving the time-translated expression."""
    if isinstance(e, Const):
        return e
    if isinstance(e, Var):
        return add(T, Const(float(delta)))
    if isinstance(e, Add):
        return add(shift(e.left, delta), shift(e.right, delta))
    if isinstance(e, Sub):
        return sub(shift(e.left, delta), shift(e.right, delta))
    if isinstance(e, Mul):
        return mul(shift(e.left, delta), shift(e.right, delta))
    if isinstance(e, Div):
        return div(shift(e.left, delta), shift(e.right, delta))
    if isinstance(e, Neg):
        return neg(shift(e.arg, delta))
    if isinstance(e, Pow):
        return power(shift(e.base, delta), e.exponent)
    if isinstance(e, Call):
        return call(e.func, shift(e.arg, delta))
    raise TypeError(f"not a TimeExpr node: {e!r}")


# Rendering.  Precedence mirrors the parser: ^ binds tightest, then unary
# minus, then * /, then + -.  Parenthesization is conservative so that
# parse(render(e)) always evaluates identically to e.

_PREC_ADD = 1
_PREC_MUL = 2
_PREC_NEG = 3
_PREC_POW = 4
_PREC_ATOM = 5


def _prec(e: TimeExpr) -> int:
    if isinstance(e, (Add, Sub)):
        return _PREC_ADD
    if isinstance(e, (Mul, Div)):
        return _PREC_MUL
    if isinstance(e, Neg):
        return _PREC_NEG
    if isinstance(e, Const) and e.value < 0:
        return _PREC_NEG  # renders with a leading minus
    if isinstance(e, Pow):
        return _PREC_POW
    return _PREC_ATOM


def _wrap(e: TimeExpr, parent_prec: int) -> str:
    s = render(e)
    if _prec(e) < parent_prec:
        return f"({s})"
    return s


def render(e: TimeExpr) -> str:
    """Canonical textual form, re-parseable by :func:`parse`."""
    if isinstance(e, Const):
        return repr(e.value)
    if isinstance(e, Var):
        return "t"
    if isinstance(e, Add):
        return f"{_wrap(e.left, _PREC_ADD)} + {_wrap(e.right, _PREC_ADD + 1)}"
    if isinstance(e, Sub):
        return f"{_wrap(e.left, _PREC_ADD)} - {_wrap(e.right, _PREC_ADD + 1)}"
    if isinstance(e, Mul):
        return f"{_wrap(e.left, _PREC_MUL)}*{_wrap(e.right, _PREC_MUL + 1)}"
    if isinstance(e, Div):
        return f"{_wrap(e.left, _PREC_MUL)}/{_wrap(e.right, _PREC_MUL + 1)}"
    if isinstance(e, Neg):
        return f"-{_wrap(e.arg, _PREC_NEG)}"
    if isinstance(e, Pow):
        return f"{_wrap(e.base, _PREC_ATOM)}^{e.exponent}"
    if isinstance(e, Call):
        return f"{e.func}({render(e.arg)})"
    raise TypeError(f"not a TimeExpr node: {e!r}")


# Parser: hand-rolled recursive descent over the grammar
#
#   expr   := term (('+'|'-') term)*
#   term   := factor (('*'|'/') factor)*
#   factor := ('-')? power
#   power  := atom ('^' integer)?
#   atom   := number | 't' | func '(' expr ')' | '(' expr ')'
#
# Numbers are decimal literals with optional fraction and exponent.  Only
# the variable t and the function names sin, cos, exp, sqrt are legal
# identifiers.


class _Token:
    __slots__ = ("kind", "text", "offset")

    def __init__(self, kind: str, text: str, offset: int):
        self.kind = kind
        self.text = text
        self.offset = offset


def _tokenize(source: str) -> list[_Token]:
    tokens: list[_Token] = []
    i, n = 0, len(source)
    while i < n:
        c = source[i]
        if c.isspace():
            i += 1
            continue
        if c in "+-*/^()":
            tokens.append(_Token("op", c, i))
            i += 1
            continue
        if c.isdigit() or (c == "." and i + 1 < n and source[i + 1].isdigit()):
            j = i
            while j < n and source[j].isdigit():
                j += 1
            if j < n and source[j] == ".":
                j += 1
                while j < n and source[j].isdigit():
                    j += 1
            if j < n and source[j] in "eE":
                k = j + 1
                if k < n and source[k] in "+-":
                    k += 1
                if k < n and source[k].isdigit():
                    j = k
                    while j < n and source[j].isdigit():
                        j += 1
            tokens.append(_Token("number", source[i:j], i))
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            tokens.append(_Token("ident", source[i:j], i))
            i = j
            continue
        raise ParseError(f"unexpected character {c!r}", i)
    tokens.append(_Token("end", "", n))
    return tokens


class _Parser:
    def __init__(self, source: str):
        self.source = source
        self.tokens = _tokenize(source)
        self.pos = 0

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def accept_op(self, *ops: str) -> _Token | None:
        tok = self.peek()
        if tok.kind == "op" and tok.text in ops:
            return self.advance()
        return None

    def expect_op(self, op: str) -> _Token:
        tok = self.peek()
        if tok.kind != "op" or tok.text != op:
            raise ParseError(f"expected {op!r}", tok.offset)
        return self.advance()

    def parse_expr(self) -> TimeExpr:
        node = self.parse_term()
        while True:
            tok = self.accept_op("+", "-")
            if tok is None:
                return node
            rhs = self.parse_term()
            node = add(node, rhs) if tok.text == "+" else sub(node, rhs)

    def parse_term(self) -> TimeExpr:
        node = self.parse_factor()
        while True:
            tok = self.accept_op("*", "/")
            if tok is None:
                return node
            rhs = self.parse_factor()
            node = mul(node, rhs) if tok.text == "*" else div(node, rhs)

    def parse_factor(self) -> TimeExpr:
        if self.accept_op("-"):
            return neg(self.parse_power())
        return self.parse_power()

    def parse_power(self) -> TimeExpr:
        base = self.parse_atom()
        if self.accept_op("^"):
            sign = -1 if self.accept_op("-") else 1
            tok = self.peek()
            if tok.kind != "number" or not tok.text.isdigit():
                raise ParseError("expected integer exponent", tok.offset)
            self.advance()
            return power(base, sign * int(tok.text))
        return base

    def parse_atom(self) -> TimeExpr:
        tok = self.peek()
        if tok.kind == "number":
            self.advance()
            return Const(float(tok.text))
        if tok.kind == "ident":
            self.advance()
            if tok.text == "t":
                return T
            if tok.text in FUNCTIONS:
                self.expect_op("(")
                arg = self.parse_expr()
                self.expect_op(")")
                return call(tok.text, arg)
            raise ParseError(f"unknown identifier {tok.text!r}", tok.offset)
        if tok.kind == "op" and tok.text == "(":
            self.advance()
            node = self.parse_expr()
            self.expect_op(")")
            return node
        raise ParseError("expected a number, 't', function call, or '('", tok.offset)


def parse(source: str) -> TimeExpr:
    """Parse expression text into a TimeExpr.

    Raises ParseError (with byte offset) on malformed input or unknown
    identifiers.
    """
    parser = _Parser(source)
    node = parser.parse_expr()
    tail = parser.peek()
    if tail.kind != "end":
        raise ParseError(f"unexpected trailing input {tail.text!r}", tail.offset)
    return node


EntryLike = Union[TimeExpr, str, int, float]


class MatrixFunction:
    """A matrix whose entries are TimeExpr values: t -> real matrix.

    Evaluation returns a float ndarray; differentiation, transposition and
    the algebraic operators act entrywise/symbolically so coefficient
    matrices stay exact functions of t.
    """

    __slots__ = ("entries", "shape")

    def __init__(self, rows: Sequence[Sequence[EntryLike]]):
        entries = tuple(tuple(as_expr(v) for v in row) for row in rows)
        if not entries or not entries[0]:
            raise ValueError("MatrixFunction needs at least one row and column")
        ncols = len(entries[0])
        if any(len(row) != ncols for row in entries):
            raise ValueError("ragged rows in MatrixFunction")
        self.entries = entries
        self.shape = (len(entries), ncols)

    @classmethod
    def constant(cls, array) -> "MatrixFunction":
        arr = np.atleast_2d(np.asarray(array, dtype=float))
        return cls([[Const(float(v)) for v in row] for row in arr])

    @classmethod
    def identity(cls, n: int) -> "MatrixFunction":
        return cls.constant(np.eye(n))

    @classmethod
    def zeros(cls, nrows: int, ncols: int | None = None) -> "MatrixFunction":
        return cls.constant(np.zeros((nrows, ncols if ncols is not None else nrows)))

    def __call__(self, t: float) -> np.ndarray:
        out = np.empty(self.shape, dtype=float)
        for i, row in enumerate(self.entries):
            for j, e in enumerate(row):
                out[i, j] = evaluate(e, t)
        return out

    def diff(self) -> "MatrixFunction":
        return MatrixFunction([[differentiate(e) for e in row] for row in self.entries])

    def transpose(self) -> "MatrixFunction":
        n, m = self.shape
        return MatrixFunction([[self.entries[i][j] for i in range(n)] for j in range(m)])

    @property
    def T(self) -> "MatrixFunction":
        return self.transpose()

    def scale(self, c: float) -> "MatrixFunction":
        factor = Const(float(c))
        return MatrixFunction([[mul(factor, e) for e in row] for row in self.entries])

    def __neg__(self) -> "MatrixFunction":
        return MatrixFunction([[neg(e) for e in row] for row in self.entries])

    def __add__(self, other: "MatrixFunction") -> "MatrixFunction":
        self._check_same_shape(other)
        return MatrixFunction(
            [
                [add(a, b) for a, b in zip(ra, rb)]
                for ra, rb in zip(self.entries, other.entries)
            ]
        )

    def __sub__(self, other: "MatrixFunction") -> "MatrixFunction":
        self._check_same_shape(other)
        return MatrixFunction(
            [
                [sub(a, b) for a, b in zip(ra, rb)]
                for ra, rb in zip(self.entries, other.entries)
            ]
        )

    def __matmul__(self, other: "MatrixFunction") -> "MatrixFunction":
        n, k = self.shape
        k2, m = other.shape
        if k != k2:
            raise ValueError(f"shape mismatch: {self.shape} @ {other.shape}")
        rows = []
        for i in range(n):
            row = []
            for j in range(m):
                acc: TimeExpr = ZERO
                for s in range(k):
                    acc = add(acc, mul(self.entries[i][s], other.entries[s][j]))
                row.append(acc)
            rows.append(row)
        return MatrixFunction(rows)

    def _check_same_shape(self, other: "MatrixFunction") -> None:
        if self.shape != other.shape:
            raise ValueError(f"shape mismatch: {self.shape} vs {other.shape}")

    def __repr__(self) -> str:
        body = "; ".join(
            ", ".join(render(e) for e in row) for row in self.entries
        )
        return f"MatrixFunction[{body}]"


def matrix_from_strings(rows: Iterable[Iterable[str]]) -> MatrixFunction:
    """Convenience wrapper used by problem-file loading."""
    return MatrixFunction([[parse(s) for s in row] for row in rows])
