"""Scalar expression language for frame coefficients, plus finite differences.

Expressions are parsed into a small AST over the chart coordinates, real
literals, ``+ - * /``, unary minus and the functions ``sin``, ``cos``,
``exp`` and ``sqrt``.  An AST can be evaluated at a single point or compiled
into a vectorised numpy function of an array of points.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence, Union

import numpy as np

FUNCTIONS = {
    "sin": (math.sin, np.sin),
    "cos": (math.cos, np.cos),
    "exp": (math.exp, np.exp),
    "sqrt": (math.sqrt, np.sqrt),
}


class ExprError(ValueError):
    """Base class for expression errors."""


class ParseError(ExprError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class ExprSyntaxError(ParseError):
    pass


class UnknownIdentifierError(ParseError):
    pass


class UnknownFunctionError(ParseError):
    pass


class EvaluationError(ExprError, ArithmeticError):
    pass


class DivisionByZeroError(EvaluationError, ZeroDivisionError):
    pass


# --- AST -------------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expr"


Expr = Union[Num, Var, Neg, BinOp, Call]


# --- parser ----------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/()]))"
)


def _tokenize(source: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(source):
        if source[pos:].strip() == "":
            break
        m = _TOKEN.match(source, pos)
        if m is None or m.end() == pos:
            bad = pos + (len(source[pos:]) - len(source[pos:].lstrip()))
            raise ExprSyntaxError(f"unexpected character {source[bad]!r}", bad)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(source)))
    return tokens


class _Parser:
    def __init__(self, source: str, coords: Sequence[str]):
        self.tokens = _tokenize(source)
        self.i = 0
        self.coords = set(coords)

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, text, pos = self.take()
        if text != value or kind == "end":
            found = "end of input" if kind == "end" else repr(text)
            raise ExprSyntaxError(f"expected {value!r}, found {found}", pos)

    def parse(self) -> Expr:
        node = self.sum()
        kind, text, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected token {text!r}", pos)
        return node

    def sum(self) -> Expr:
        node = self.product()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.product())
        return node

    def product(self) -> Expr:
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Expr:
        kind, text, _ = self.peek()
        if kind == "op" and text == "-":
            self.take()
            return Neg(self.unary())
        if kind == "op" and text == "+":
            self.take()
            return self.unary()
        return self.atom()

    def atom(self) -> Expr:
        kind, text, pos = self.take()
        if kind == "num":
            return Num(float(text))
        if kind == "name":
            if self.peek()[1] == "(":
                if text not in FUNCTIONS:
                    raise UnknownFunctionError(f"unknown function {text!r}", pos)
                self.take()
                arg = self.sum()
                self.expect(")")
                return Call(text, arg)
            if text not in self.coords:
                raise UnknownIdentifierError(f"unknown identifier {text!r}", pos)
            return Var(text)
        if kind == "op" and text == "(":
            node = self.sum()
            self.expect(")")
            return node
        found = "end of input" if kind == "end" else repr(text)
        raise ExprSyntaxError(f"unexpected {found}", pos)


def parse(source: str, coords: Sequence[str]) -> Expr:
    """Parse ``source`` into an AST; identifiers must be in ``coords``."""
    if not source or not source.strip():
        raise ExprSyntaxError("empty expression", 0)
    return _Parser(source, coords).parse()


# --- printing --------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def to_source(e: Expr) -> str:
    """Render an AST back to parseable infix text."""
    return _render(e, 0)


def _render(e: Expr, parent: int) -> str:
    if isinstance(e, Num):
        # a negative literal prints like a negation, which never needs parentheses
        return repr(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Call):
        return f"{e.func}({_render(e.arg, 0)})"
    if isinstance(e, Neg):
        return f"-{_render(e.operand, 3)}"
    prec = _PREC[e.op]
    # right operand binds one tighter so that a-(b-c) keeps its parentheses
    text = f"{_render(e.left, prec)} {e.op} {_render(e.right, prec + 1)}"
    return f"({text})" if prec < parent else text


# --- evaluation ------------------------------------------------------------

def variables(e: Expr) -> set[str]:
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, Num):
        return set()
    if isinstance(e, (Neg, Call)):
        return variables(e.operand if isinstance(e, Neg) else e.arg)
    return variables(e.left) | variables(e.right)


def eval_expr(e: Expr, point: Mapping[str, float]) -> float:
    """Evaluate at a single point given as a name -> value mapping."""
    value = _eval(e, point)
    if not math.isfinite(value):
        raise EvaluationError(f"non-finite result {value}")
    return value


def _eval(e: Expr, point: Mapping[str, float]) -> float:
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        try:
            return float(point[e.name])
        except KeyError:
            raise EvaluationError(f"no value supplied for {e.name!r}") from None
    if isinstance(e, Neg):
        return -_eval(e.operand, point)
    if isinstance(e, Call):
        arg = _eval(e.arg, point)
        try:
            return FUNCTIONS[e.func][0](arg)
        except (ValueError, OverflowError) as exc:
            raise EvaluationError(f"{e.func}({arg}) failed: {exc}") from None
    a = _eval(e.left, point)
    b = _eval(e.right, point)
    if e.op == "+":
        return a + b
    if e.op == "-":
        return a - b
    if e.op == "*":
        return a * b
    if b == 0.0:
        raise DivisionByZeroError("division by zero")
    return a / b


def _builder(coords: Sequence[str], exprs: Sequence[Expr]):
    index = {name: i for i, name in enumerate(coords)}
    for e in exprs:
        missing = variables(e) - set(index)
        if missing:
            raise UnknownIdentifierError(f"unknown identifier {sorted(missing)[0]!r}", 0)

    def build(node: Expr):
        if isinstance(node, Num):
            v = node.value
            return lambda x: np.full(x.shape[:-1], v)
        if isinstance(node, Var):
            k = index[node.name]
            return lambda x: x[..., k]
        if isinstance(node, Neg):
            f = build(node.operand)
            return lambda x: -f(x)
        if isinstance(node, Call):
            f, g = build(node.arg), FUNCTIONS[node.func][1]
            return lambda x: g(f(x))
        f, g = build(node.left), build(node.right)
        if node.op == "+":
            return lambda x: f(x) + g(x)
        if node.op == "-":
            return lambda x: f(x) - g(x)
        if node.op == "*":
            return lambda x: f(x) * g(x)

        def divide(x):
            den = g(x)
            if np.any(den == 0.0):
                raise DivisionByZeroError("division by zero")
            return f(x) / den
        return divide

    return build


def compile_expr(e: Expr, coords: Sequence[str]) -> Callable[[np.ndarray], np.ndarray]:
    """Compile to ``f(points) -> values`` where ``points`` has shape (..., n)."""
    inner = _builder(coords, [e])(e)

    def evaluate(points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        with np.errstate(all="ignore"):
            out = inner(points)
        if not np.all(np.isfinite(out)):
            raise EvaluationError("non-finite result")
        return out

    return evaluate


def compile_exprs(exprs: Sequence[Expr], coords: Sequence[str]) -> Callable[[np.ndarray], np.ndarray]:
    """Compile several expressions at once: ``f(points)`` has shape (..., len(exprs))."""
    build = _builder(coords, exprs)
    inner = [build(e) for e in exprs]

    def evaluate(points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        out = np.empty(points.shape[:-1] + (len(inner),))
        with np.errstate(all="ignore"):
            for i, f in enumerate(inner):
                out[..., i] = f(points)
        if not np.all(np.isfinite(out)):
            raise EvaluationError("non-finite result")
        return out

    return evaluate


# --- finite differences ----------------------------------------------------

@dataclass(frozen=True)
class FDConfig:
    """Finite-difference settings.

    ``h`` is the central-difference step for first derivatives of the frame
    coefficients.  ``nested_h`` is the step of the fourth-order stencil used
    when differentiating quantities that are themselves finite differences
    (Christoffel symbols, structure functions), where a step of ``h`` would
    amplify the inner rounding noise.
    """

    h: float = 1e-5
    order: int = 2
    nested_h: float = 2e-3

    def __post_init__(self):
        if not self.h > 0 or not self.nested_h > 0:
            raise ValueError("finite-difference steps must be positive")
        if self.order != 2:
            raise ValueError("only second-order central differences are supported")


DEFAULT_FD = FDConfig()


def directional_derivative(f, x, v, cfg: FDConfig = DEFAULT_FD):
    """Central difference ``(f(x+hv) - f(x-hv)) / 2h``; works on batches."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    h = cfg.h
    return (np.asarray(f(x + h * v)) - np.asarray(f(x - h * v))) / (2 * h)


def jacobian_fd(fmap, x, cfg: FDConfig = DEFAULT_FD) -> np.ndarray:
    """Jacobian of ``fmap: (..., n) -> (..., m)``; returns shape (..., m, n)."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    steps = (np.eye(n) * cfg.h).reshape((n,) + (1,) * (x.ndim - 1) + (n,))
    # one batched call: +h and -h shifts stacked on a new leading axis
    shifted = np.concatenate([x[None] + steps, x[None] - steps])
    values = np.asarray(fmap(shifted))
    plus, minus = values[:n], values[n:]
    cols = (plus - minus) / (2 * cfg.h)  # (n, ..., m)
    return np.moveaxis(cols, 0, -1)
