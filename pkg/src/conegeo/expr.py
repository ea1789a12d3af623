"""Closed expression grammar for scalar fields over chart coordinates.

Potentials and conformal factors are written as short strings such as
``"-1/|x| - 20*exp(-(|x|-2)^2/0.25)"`` and compiled to vectorised numpy
callables together with their closed-form gradients.

Grammar
-------
::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := ('+' | '-') unary | power
    power  := atom (('^' | '**') unary)?
    atom   := NUMBER | 'pi' | 'x1' .. 'xn' | '|x|'
            | FUNC '(' expr ')' | 'pow' '(' expr ',' expr ')'
            | '(' expr ')' | '|' expr '|'
    FUNC   := 'exp' | 'log' | 'sqrt' | 'abs'

``|x|`` is the Euclidean norm of the coordinate vector; ``|expr|`` is the
absolute value of ``expr``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np
import sympy as sp

__all__ = ["ExpressionError", "ScalarField", "parse_field"]

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<norm>\|x\|)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>\*\*|[-+*/^(),|]))"
)

_FUNCS = {"exp": sp.exp, "log": sp.log, "sqrt": sp.sqrt, "abs": sp.Abs}


class ExpressionError(ValueError):
    """Raised for malformed expressions, with the offending column."""

    def __init__(self, message: str, text: str, pos: int):
        super().__init__(f"{message} at column {pos + 1} in {text!r}")
        self.text = text
        self.pos = pos


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            bad = pos + len(text[pos:]) - len(text[pos:].lstrip())
            raise ExpressionError("unexpected character", text, bad)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text, symbols):
        self.text = text
        self.symbols = symbols
        self.tokens = _tokenize(text)
        self.i = 0
        self.abs_depth = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self, value=None):
        tok = self.tokens[self.i]
        if value is not None and tok[1] != value:
            raise ExpressionError(f"expected {value!r}", self.text, tok[2])
        self.i += 1
        return tok

    def parse(self):
        node = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            raise ExpressionError(f"unexpected token {tok[1]!r}", self.text, tok[2])
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            rhs = self.term()
            node = node + rhs if op == "+" else node - rhs
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/"):
            op = self.take()[1]
            rhs = self.unary()
            node = node * rhs if op == "*" else node / rhs
        return node

    def unary(self):
        if self.peek()[1] == "-":
            self.take()
            return -self.unary()
        if self.peek()[1] == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[1] in ("^", "**"):
            self.take()
            return base ** self.unary()
        return base

    def atom(self):
        kind, value, pos = self.peek()
        if kind == "num":
            self.take()
            return sp.Float(value) if any(c in value for c in ".eE") else sp.Integer(value)
        if kind == "norm":
            self.take()
            return sp.sqrt(sum(s**2 for s in self.symbols))
        if kind == "name":
            self.take()
            if value == "pi":
                return sp.pi
            m = re.fullmatch(r"x(\d+)", value)
            if m:
                idx = int(m.group(1))
                if not 1 <= idx <= len(self.symbols):
                    raise ExpressionError(
                        f"coordinate {value} outside dimension {len(self.symbols)}",
                        self.text,
                        pos,
                    )
                return self.symbols[idx - 1]
            if value == "pow":
                self.take("(")
                a = self.expr()
                self.take(",")
                b = self.expr()
                self.take(")")
                return a**b
            if value in _FUNCS:
                self.take("(")
                arg = self.expr()
                self.take(")")
                return _FUNCS[value](arg)
            raise ExpressionError(f"unknown name {value!r}", self.text, pos)
        if value == "(":
            self.take()
            node = self.expr()
            self.take(")")
            return node
        if value == "|":
            self.take()
            node = self.expr()
            self.take("|")
            return sp.Abs(node)
        raise ExpressionError(f"unexpected token {value!r}", self.text, pos)


@dataclass(frozen=True)
class ScalarField:
    """A scalar field on an ``dim``-dimensional chart, compiled from text.

    Call with an array of points of shape ``(..., dim)``; the result has
    shape ``(...)``. :meth:`grad` returns the closed-form gradient with
    shape ``(..., dim)``.
    """

    text: str
    dim: int
    expression: sp.Expr = field(repr=False, compare=False)
    _value: object = field(repr=False, compare=False)
    _grad: tuple = field(repr=False, compare=False)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        cols = [x[..., k] for k in range(self.dim)]
        with np.errstate(all="ignore"):
            out = self._value(*cols)
        return np.broadcast_to(np.asarray(out, dtype=float), x.shape[:-1]).copy()

    def grad(self, x):
        x = np.asarray(x, dtype=float)
        cols = [x[..., k] for k in range(self.dim)]
        out = np.empty(x.shape, dtype=float)
        with np.errstate(all="ignore"):
            for k, fk in enumerate(self._grad):
                out[..., k] = fk(*cols)
        return out

    @property
    def is_constant(self):
        return not self.expression.free_symbols

    def scaled(self, factor: float) -> "ScalarField":
        return _compile(f"({self.text})*{factor!r}", self.dim, self.expression * factor)


def _compile(text, dim, expression):
    symbols = sp.symbols(f"x1:{dim + 1}", real=True)
    value = sp.lambdify(symbols, expression, "numpy")
    grad = tuple(sp.lambdify(symbols, sp.diff(expression, s), "numpy") for s in symbols)
    return ScalarField(text=text, dim=dim, expression=expression, _value=value, _grad=grad)


def parse_field(text: str, dim: int = 2) -> ScalarField:
    """Parse ``text`` into a :class:`ScalarField` over ``dim`` coordinates."""
    if dim < 1:
        raise ValueError("dimension must be positive")
    if not isinstance(text, str) or not text.strip():
        raise ExpressionError("empty expression", str(text), 0)
    symbols = sp.symbols(f"x1:{dim + 1}", real=True)
    expression = _Parser(text, symbols).parse()
    return _compile(text, dim, expression)
