"""A small expression language for coefficient fields, with exact gradients.

Grammar (whitespace-insensitive)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := atom ('^' unary)?           # right-associative
    atom    := NUMBER | 'x' INDEX | FUNC '(' expr ')' | '(' expr ')'

Exponents must be free of variables.  Gradients are propagated with
forward-mode dual numbers, so they are exact up to rounding.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

import numpy as np

__all__ = [
    "Num",
    "Var",
    "Neg",
    "BinOp",
    "Call",
    "Expression",
    "ParseError",
    "EvalDomainError",
    "Dual",
    "parse",
    "to_string",
    "evaluate",
    "eval_with_gradient",
    "CoefficientField",
    "PositivityError",
]

FUNCTIONS = ("exp", "log", "sqrt", "sin", "cos", "tanh", "abs")


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    index: int  # 1-based, as written


@dataclass(frozen=True)
class Neg:
    arg: "Expression"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expression"
    right: "Expression"


@dataclass(frozen=True)
class Call:
    name: str
    arg: "Expression"


Expression = Union[Num, Var, Neg, BinOp, Call]


class ParseError(ValueError):
    """Syntax or semantic error; ``offset`` is the byte offset in the input."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.message = message
        self.offset = offset


class EvalDomainError(ArithmeticError):
    """Raised when a subexpression leaves its domain."""

    def __init__(self, message: str, subexpression: Expression):
        super().__init__(f"{message} in {to_string(subexpression)!r}")
        self.subexpression = subexpression


_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))"
)


def _tokenize(text: str):
    tokens = []
    pos = 0
    raw = text.encode()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            if text[pos:].strip() == "":
                break
            offset = len(text[:pos].encode())
            offset += len(text[pos:]) - len(text[pos:].lstrip())
            raise ParseError(f"unexpected character {text[pos:].lstrip()[:1]!r}", offset)
        kind = m.lastgroup
        start = len(text[: m.start(kind)].encode())
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(raw)))
    return tokens


class _Parser:
    def __init__(self, text: str, n: int):
        self.tokens = _tokenize(text)
        self.i = 0
        self.n = n

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, text, offset = self.take()
        if text != value or kind == "end":
            found = "end of input" if kind == "end" else repr(text)
            raise ParseError(f"expected {value!r}, found {found}", offset)

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.peek()[0] == "op" and self.peek()[1] == "-":
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            offset = self.take()[2]
            exponent = self.unary()
            if _has_variables(exponent):
                raise ParseError("exponent must be constant", offset)
            return BinOp("^", base, exponent)
        return base

    def atom(self):
        kind, text, offset = self.take()
        if kind == "num":
            return Num(float(text))
        if kind == "name":
            m = re.fullmatch(r"x(\d+)", text)
            if m:
                index = int(m.group(1))
                if index < 1 or index > self.n:
                    raise ParseError(
                        f"variable index {text} exceeds dimension n = {self.n}", offset
                    )
                return Var(index)
            if text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(text, arg)
            raise ParseError(f"unknown identifier {text!r}", offset)
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if kind == "end" else repr(text)
        raise ParseError(f"unexpected {found}", offset)


def _has_variables(e: Expression) -> bool:
    if isinstance(e, Var):
        return True
    if isinstance(e, Num):
        return False
    if isinstance(e, (Neg, Call)):
        return _has_variables(e.arg)
    return _has_variables(e.left) or _has_variables(e.right)


def parse(text: str, n: int) -> Expression:
    """Parse ``text`` into an expression over variables ``x1..xn``."""
    if not text or not text.strip():
        raise ParseError("empty expression", 0)
    parser = _Parser(text, n)
    node = parser.expr()
    kind, tok, offset = parser.peek()
    if kind != "end":
        raise ParseError(f"unexpected {tok!r}", offset)
    return node


_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}


def to_string(e: Expression) -> str:
    """Fully parenthesized rendering that re-parses to the same tree."""
    if isinstance(e, Num):
        return repr(e.value)
    if isinstance(e, Var):
        return f"x{e.index}"
    if isinstance(e, Neg):
        return f"(-{to_string(e.arg)})"
    if isinstance(e, Call):
        return f"{e.name}({to_string(e.arg)})"
    return f"({to_string(e.left)} {e.op} {to_string(e.right)})"


class Dual:
    """Value, gradient and a nonsmoothness flag."""

    __slots__ = ("value", "grad", "nonsmooth")

    def __init__(self, value: float, grad: np.ndarray, nonsmooth: bool = False):
        self.value = value
        self.grad = grad
        self.nonsmooth = nonsmooth

    def __repr__(self):
        return f"Dual({self.value!r}, {self.grad!r}, nonsmooth={self.nonsmooth})"


def _const_value(e: Expression) -> float:
    return evaluate(e, np.zeros(0)).value


def evaluate(e: Expression, z) -> Dual:
    """Evaluate ``e`` and its gradient at the point ``z``."""
    z = np.asarray(z, dtype=float)
    return _eval(e, z, z.shape[0])


def _eval(e, z, n) -> Dual:
    if isinstance(e, Num):
        return Dual(e.value, np.zeros(n))
    if isinstance(e, Var):
        if e.index > n:
            raise EvalDomainError(f"point has only {n} coordinates", e)
        g = np.zeros(n)
        g[e.index - 1] = 1.0
        return Dual(float(z[e.index - 1]), g)
    if isinstance(e, Neg):
        a = _eval(e.arg, z, n)
        return Dual(-a.value, -a.grad, a.nonsmooth)
    if isinstance(e, Call):
        return _call(e, _eval(e.arg, z, n))

    a = _eval(e.left, z, n)
    flag = a.nonsmooth
    if e.op == "^":
        c = _const_value(e.right)
        u = a.value
        if u < 0 and c != int(c):
            raise EvalDomainError("negative base with non-integer exponent", e)
        if u == 0 and c < 1 and c != 0:
            raise EvalDomainError("derivative undefined at zero base", e)
        dvalue = 0.0 if c == 0 else c * u ** (c - 1)
        return Dual(u**c, dvalue * a.grad, flag)

    b = _eval(e.right, z, n)
    flag = flag or b.nonsmooth
    if e.op == "+":
        return Dual(a.value + b.value, a.grad + b.grad, flag)
    if e.op == "-":
        return Dual(a.value - b.value, a.grad - b.grad, flag)
    if e.op == "*":
        return Dual(a.value * b.value, a.grad * b.value + a.value * b.grad, flag)
    if b.value == 0:
        raise EvalDomainError("division by zero", e)
    q = a.value / b.value
    return Dual(q, (a.grad - q * b.grad) / b.value, flag)


def _call(e: Call, a: Dual) -> Dual:
    u = a.value
    name = e.name
    if name == "exp":
        v = math.exp(u)
        return Dual(v, v * a.grad, a.nonsmooth)
    if name == "log":
        if u <= 0:
            raise EvalDomainError("log of nonpositive value", e)
        return Dual(math.log(u), a.grad / u, a.nonsmooth)
    if name == "sqrt":
        if u <= 0:
            raise EvalDomainError("sqrt needs a positive argument", e)
        v = math.sqrt(u)
        return Dual(v, a.grad / (2 * v), a.nonsmooth)
    if name == "sin":
        return Dual(math.sin(u), math.cos(u) * a.grad, a.nonsmooth)
    if name == "cos":
        return Dual(math.cos(u), -math.sin(u) * a.grad, a.nonsmooth)
    if name == "tanh":
        v = math.tanh(u)
        return Dual(v, (1 - v * v) * a.grad, a.nonsmooth)
    # abs: subgradient 0 at the kink
    if u == 0:
        return Dual(0.0, np.zeros_like(a.grad), True)
    return Dual(abs(u), math.copysign(1.0, u) * a.grad, a.nonsmooth)


def eval_with_gradient(e: Expression, z) -> tuple[float, np.ndarray]:
    d = evaluate(e, z)
    return d.value, d.grad


class PositivityError(ValueError):
    """A coefficient is not bounded below by the configured floor."""

    def __init__(self, name: str, value: float, point):
        super().__init__(
            f"coefficient {name} = {value:.6g} at {np.asarray(point).tolist()} "
            "is below the positivity floor"
        )
        self.name = name
        self.point = point


@dataclass(frozen=True)
class CoefficientField:
    """The three fields alpha, V, K on R^n."""

    alpha: Expression
    V: Expression
    K: Expression
    n: int

    @classmethod
    def from_strings(cls, alpha: str, V: str, K: str, n: int) -> "CoefficientField":
        return cls(parse(alpha, n), parse(V, n), parse(K, n), n)

    def items(self):
        return (("alpha", self.alpha), ("V", self.V), ("K", self.K))

    def values(self, z) -> tuple[float, float, float]:
        z = np.asarray(z, dtype=float)
        return tuple(evaluate(e, z).value for _, e in self.items())

    def gradients(self, z) -> np.ndarray:
        """Rows: grad alpha, grad V, grad K."""
        z = np.asarray(z, dtype=float)
        return np.array([evaluate(e, z).grad for _, e in self.items()])

    def evaluate_all(self, z) -> dict[str, Dual]:
        z = np.asarray(z, dtype=float)
        return {name: evaluate(e, z) for name, e in self.items()}

    def nonsmooth_at(self, z) -> bool:
        return any(d.nonsmooth for d in self.evaluate_all(z).values())

    def check_positive(self, z, floor: float = 0.0):
        for name, d in self.evaluate_all(z).items():
            if not d.value > floor:
                raise PositivityError(name, d.value, z)

    def certify_positive(self, box, floor: float = 1e-8, samples_per_axis: int = 9):
        """Sample the box densely; return the sampled minima per coefficient.

        Raises :class:`PositivityError` at the first sample below ``floor``.
        """
        axes = [np.linspace(lo, hi, samples_per_axis) for lo, hi in box]
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.n)
        lows = {"alpha": math.inf, "V": math.inf, "K": math.inf}
        for z in mesh:
            for name, value in zip(lows, self.values(z)):
                if not value > floor:
                    raise PositivityError(name, value, z)
                lows[name] = min(lows[name], value)
        return lows
