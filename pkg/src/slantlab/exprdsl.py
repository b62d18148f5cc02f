"""Scalar coordinate expressions and their exact 2-jets.

Grammar (whitespace is insignificant)::

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := unary ('^' factor)?
    unary  := '-' unary | atom
    atom   := number | ident | ident '(' expr ')' | '(' expr ')'

Note that `unary` sits below `^`, so ``-x^2`` reads as ``(-x)^2``.  Write
``-(x^2)`` or ``0 - x^2`` for the other meaning.

Derivatives come from truncated second-order Taylor arithmetic: every node
carries (value, gradient, Hessian) and the chain rule is applied exactly.
Evaluation is vectorised over a batch of points; the single-point
`eval_jet2` is a thin wrapper.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .errors import DomainError, ParseError, UnknownIdentifier

FUNCTIONS = ("sin", "cos", "tan", "exp", "log", "sqrt")
CONSTANTS = {"pi": math.pi}


# -- AST -------------------------------------------------------------------

@dataclass(frozen=True)
class NumericLiteral:
    value: float


@dataclass(frozen=True)
class ParamRef:
    index: int


@dataclass(frozen=True)
class Unary:
    operand: "Expr"
    op: str = "neg"


@dataclass(frozen=True)
class Binary:
    op: str  # add | sub | mul | div | pow
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expr"


Expr = Union[NumericLiteral, ParamRef, Unary, Binary, Call]

_BINOPS = {"+": "add", "-": "sub", "*": "mul", "/": "div", "^": "pow"}
_SYMBOL = {v: k for k, v in _BINOPS.items()}


def constant_integer_exponent(node: Binary) -> int | None:
    """Integer value of a pow node's exponent when it is a literal (possibly negated)."""
    e = node.right
    sign = 1
    while isinstance(e, Unary):
        sign = -sign
        e = e.operand
    if isinstance(e, NumericLiteral) and float(e.value).is_integer() and abs(e.value) <= 1024:
        return sign * int(e.value)
    return None


def params_used(expr: Expr) -> set[int]:
    if isinstance(expr, ParamRef):
        return {expr.index}
    if isinstance(expr, NumericLiteral):
        return set()
    if isinstance(expr, Unary):
        return params_used(expr.operand)
    if isinstance(expr, Call):
        return params_used(expr.arg)
    return params_used(expr.left) | params_used(expr.right)


# -- tokenizer / parser ----------------------------------------------------

_TOKEN_RE = re.compile(
    r"\s*(?:"
    r"(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()])"
    r")"
)

_ATOM_START = {"number", "identifier", "(", "-"}


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    n = len(text)
    while pos < n:
        if text[pos:].strip() == "":
            break
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            start = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise ParseError(start, _ATOM_START | {"+", "*", "/", "^", ")"},
                             f"unexpected character {text[start]!r} at position {start}")
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, params: Sequence[str]):
        self.tokens = _tokenize(text)
        self.i = 0
        self.params = {name: k for k, name in enumerate(params)}

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, sym: str, expected):
        kind, text, pos = self.peek()
        if kind != "op" or text != sym:
            raise ParseError(pos, expected)
        self.take()

    def parse(self) -> Expr:
        node = self.expr()
        kind, _, pos = self.peek()
        if kind != "end":
            raise ParseError(pos, {"+", "-", "*", "/", "^", "end of input"})
        return node

    def expr(self) -> Expr:
        node = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = _BINOPS[self.take()[1]]
            node = Binary(op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.factor()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = _BINOPS[self.take()[1]]
            node = Binary(op, node, self.factor())
        return node

    def factor(self) -> Expr:
        base = self.unary()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            return Binary("pow", base, self.factor())
        return base

    def unary(self) -> Expr:
        if self.peek()[0] == "op" and self.peek()[1] == "-":
            self.take()
            return Unary(self.unary())
        return self.atom()

    def atom(self) -> Expr:
        kind, text, pos = self.take()
        if kind == "number":
            return NumericLiteral(float(text))
        if kind == "ident":
            nxt = self.peek()
            if nxt[0] == "op" and nxt[1] == "(":
                if text not in FUNCTIONS:
                    raise UnknownIdentifier(text, pos)
                self.take()
                arg = self.expr()
                self.expect_op(")", {")", "+", "-", "*", "/", "^"})
                return Call(text, arg)
            if text in self.params:
                return ParamRef(self.params[text])
            if text in FUNCTIONS:
                raise ParseError(nxt[2], {"("}, f"function {text!r} requires parentheses")
            if text in CONSTANTS:
                return NumericLiteral(CONSTANTS[text])
            raise UnknownIdentifier(text, pos)
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect_op(")", {")", "+", "-", "*", "/", "^"})
            return node
        raise ParseError(pos, _ATOM_START)


def parse(text: str, params: Sequence[str]) -> Expr:
    """Parse `text` into an expression tree over the ordered parameter names."""
    if not isinstance(text, str) or not text.strip():
        raise ParseError(0, _ATOM_START, "empty expression")
    return _Parser(text, params).parse()


# -- printing --------------------------------------------------------------

def _is_atomic(e: Expr) -> bool:
    return isinstance(e, (NumericLiteral, ParamRef, Call))


def _fmt_number(x: float) -> str:
    s = repr(float(x))
    return s


def to_string(expr: Expr, params: Sequence[str]) -> str:
    """Render `expr` so that `parse(to_string(e), params) == e`."""

    def go(e: Expr) -> str:
        if isinstance(e, NumericLiteral):
            return _fmt_number(e.value)
        if isinstance(e, ParamRef):
            return params[e.index]
        if isinstance(e, Call):
            return f"{e.func}({go(e.arg)})"
        if isinstance(e, Unary):
            inner = go(e.operand)
            if not (_is_atomic(e.operand) or isinstance(e.operand, Unary)):
                inner = f"({inner})"
            return "-" + inner
        left, right = go(e.left), go(e.right)
        if e.op == "pow":
            if not (_is_atomic(e.left) or isinstance(e.left, Unary)):
                left = f"({left})"
            if not (_is_atomic(e.right) or isinstance(e.right, Unary)
                    or (isinstance(e.right, Binary) and e.right.op == "pow")):
                right = f"({right})"
            return f"{left}^{right}"
        if e.op in ("mul", "div"):
            if isinstance(e.left, Binary) and e.left.op in ("add", "sub"):
                left = f"({left})"
            if isinstance(e.right, Binary) and e.right.op != "pow":
                right = f"({right})"
            return f"{left} {_SYMBOL[e.op]} {right}"
        if isinstance(e.right, Binary) and e.right.op in ("add", "sub"):
            right = f"({right})"
        return f"{left} {_SYMBOL[e.op]} {right}"

    return go(expr)


# -- 2-jets ----------------------------------------------------------------

@dataclass(frozen=True)
class Jet2:
    value: float
    gradient: np.ndarray
    hessian: np.ndarray


class _Batch:
    """Jets for P points at once: v (P,), g (P,k), H (P,k,k)."""

    __slots__ = ("v", "g", "H")

    def __init__(self, v, g, H):
        self.v, self.g, self.H = v, g, H


def _outer_sym(a, b):
    return a[:, :, None] * b[:, None, :] + b[:, :, None] * a[:, None, :]


def _chain(x: _Batch, f0, f1, f2) -> _Batch:
    g = f1[:, None] * x.g
    H = f1[:, None, None] * x.H + f2[:, None, None] * (x.g[:, :, None] * x.g[:, None, :])
    return _Batch(f0, g, H)


def _mul(a: _Batch, b: _Batch) -> _Batch:
    v = a.v * b.v
    g = a.v[:, None] * b.g + b.v[:, None] * a.g
    H = a.v[:, None, None] * b.H + b.v[:, None, None] * a.H + _outer_sym(a.g, b.g)
    return _Batch(v, g, H)


class _Evaluator:
    def __init__(self, points: np.ndarray):
        self.points = points
        self.P, self.k = points.shape

    def fail(self, node, mask, reason):
        idx = int(np.flatnonzero(mask)[0])
        raise DomainError(node, tuple(float(x) for x in self.points[idx]), reason)

    def const(self, c: float) -> _Batch:
        P, k = self.P, self.k
        return _Batch(np.full(P, float(c)), np.zeros((P, k)), np.zeros((P, k, k)))

    def recip(self, node, x: _Batch) -> _Batch:
        bad = x.v == 0.0
        if bad.any():
            self.fail(node, bad, "division by zero")
        inv = 1.0 / x.v
        return _chain(x, inv, -inv * inv, 2.0 * inv * inv * inv)

    def ipow(self, node, x: _Batch, n: int) -> _Batch:
        if n == 0:
            return self.const(1.0)
        if n < 0:
            return self.recip(node, self.ipow(node, x, -n))
        out = x
        for _ in range(n - 1):
            out = _mul(out, x)
        return out

    def log(self, node, x: _Batch) -> _Batch:
        bad = ~(x.v > 0.0)
        if bad.any():
            self.fail(node, bad, "log of non-positive argument")
        inv = 1.0 / x.v
        return _chain(x, np.log(x.v), inv, -inv * inv)

    def exp(self, x: _Batch) -> _Batch:
        e = np.exp(x.v)
        return _chain(x, e, e, e)

    def ev(self, node: Expr) -> _Batch:
        if isinstance(node, NumericLiteral):
            return self.const(node.value)
        if isinstance(node, ParamRef):
            P, k = self.P, self.k
            g = np.zeros((P, k))
            g[:, node.index] = 1.0
            return _Batch(self.points[:, node.index].copy(), g, np.zeros((P, k, k)))
        if isinstance(node, Unary):
            x = self.ev(node.operand)
            return _Batch(-x.v, -x.g, -x.H)
        if isinstance(node, Call):
            x = self.ev(node.arg)
            f = node.func
            if f == "sin":
                s, c = np.sin(x.v), np.cos(x.v)
                return _chain(x, s, c, -s)
            if f == "cos":
                s, c = np.sin(x.v), np.cos(x.v)
                return _chain(x, c, -s, -c)
            if f == "tan":
                c = np.cos(x.v)
                bad = np.abs(c) < 1e-12  # pi/2 is not representable; treat near-poles as poles
                if bad.any():
                    self.fail(node, bad, "tan at a pole")
                t = np.tan(x.v)
                d = 1.0 + t * t
                return _chain(x, t, d, 2.0 * t * d)
            if f == "exp":
                return self.exp(x)
            if f == "log":
                return self.log(node, x)
            if f == "sqrt":
                bad = ~(x.v > 0.0)
                if bad.any():
                    reason = "sqrt of negative argument" if (x.v < 0).any() else "sqrt is not differentiable at 0"
                    self.fail(node, bad, reason)
                r = np.sqrt(x.v)
                return _chain(x, r, 0.5 / r, -0.25 / (r * x.v))
            raise AssertionError(f)
        a = self.ev(node.left)
        op = node.op
        if op == "pow":
            n = constant_integer_exponent(node)
            if n is not None:
                return self.ipow(node, a, n)
            b = self.ev(node.right)
            return self.exp(_mul(b, self.log(node, a)))
        b = self.ev(node.right)
        if op == "add":
            return _Batch(a.v + b.v, a.g + b.g, a.H + b.H)
        if op == "sub":
            return _Batch(a.v - b.v, a.g - b.g, a.H - b.H)
        if op == "mul":
            return _mul(a, b)
        if op == "div":
            return _mul(a, self.recip(node, b))
        raise AssertionError(op)


def _mirror_upper(H: np.ndarray) -> np.ndarray:
    upper = np.triu(H)
    return upper + np.swapaxes(np.triu(H, 1), -1, -2)


def eval_jet2_batch(expr: Expr, points) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Value (P,), gradient (P,k) and Hessian (P,k,k) at each row of `points`."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    out = _Evaluator(pts).ev(expr)
    return out.v, out.g, _mirror_upper(out.H)


def eval_jet2(expr: Expr, point) -> Jet2:
    point = np.asarray(point, dtype=float).reshape(-1)
    v, g, H = eval_jet2_batch(expr, point[None, :])
    return Jet2(float(v[0]), g[0], H[0])


def evaluate(expr: Expr, point) -> float:
    return eval_jet2(expr, point).value
