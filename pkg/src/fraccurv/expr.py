"""Coefficient-function expressions: parsing, printing and jet evaluation.

Grammar (``^`` is right-associative and binds looser than unary minus)::

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := unary ('^' factor)?
    unary  := '-' unary | atom
    atom   := NUMBER | IDENT | IDENT '(' expr ')' | '(' expr ')'

Identifiers are resolved at parse time into variables (``t`` by default, or
``x1..xn`` for general metrics), declared parameters (``a`` and ``b`` by
default, standing for alpha and beta) and the functions ``gamma``, ``exp``,
``ln``, ``sin`` and ``cos``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

from fraccurv.errors import (
    DomainError,
    ParseError,
    UnboundParameterError,
    UnknownIdentifierError,
)
from fraccurv.jets import Jet, Jet2

__all__ = [
    "Const",
    "Var",
    "Param",
    "Unary",
    "Binary",
    "Expr",
    "FUNCTIONS",
    "DEFAULT_PARAMS",
    "parse",
    "to_text",
    "evaluate",
    "eval_jet",
    "eval_jet2",
    "params_of",
    "variables_of",
    "substitute",
]

FUNCTIONS = ("gamma", "exp", "ln", "sin", "cos")
DEFAULT_PARAMS = ("a", "b")


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Param:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str  # "neg" or one of FUNCTIONS
    arg: "Expr"


@dataclass(frozen=True)
class Binary:
    op: str  # "add", "sub", "mul", "div", "pow"
    left: "Expr"
    right: "Expr"


Expr = Union[Const, Var, Param, Unary, Binary]

_BINARY_SYMBOLS = {"add": "+", "sub": "-", "mul": "*", "div": "/", "pow": "^"}
_SYMBOL_OPS = {v: k for k, v in _BINARY_SYMBOLS.items()}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
    |(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
    |(?P<ident>[A-Za-z][A-Za-z0-9_]*)
    |(?P<op>[-+*/^()])
    """,
    re.VERBOSE,
)


class _Parser:
    def __init__(self, text: str, variables: Sequence[str], params: Iterable[str]):
        self.text = text
        self.variables = set(variables)
        self.params = set(params)
        self.tokens: list[tuple[str, str, int]] = []
        self._tokenize()
        self.pos = 0

    def _offset(self, char_index: int) -> int:
        return len(self.text[:char_index].encode("utf-8"))

    def _error(self, message: str, char_index: int, cls=ParseError) -> ParseError:
        return cls(message, self._offset(char_index), self.text)

    def _tokenize(self):
        i = 0
        while i < len(self.text):
            m = _TOKEN_RE.match(self.text, i)
            if m is None:
                raise self._error(f"unexpected character {self.text[i]!r}", i)
            if m.lastgroup != "ws":
                self.tokens.append((m.lastgroup, m.group(), i))
            i = m.end()
        self.tokens.append(("end", "", len(self.text)))

    def peek(self) -> tuple[str, str, int]:
        return self.tokens[self.pos]

    def take(self) -> tuple[str, str, int]:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, symbol: str):
        kind, value, where = self.take()
        if value != symbol or kind != "op":
            found = "end of input" if kind == "end" else repr(value)
            raise self._error(f"expected {symbol!r}, found {found}", where)

    def parse(self) -> Expr:
        node = self.expr()
        kind, value, where = self.peek()
        if kind != "end":
            raise self._error(f"unexpected token {value!r}", where)
        return node

    def expr(self) -> Expr:
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = _SYMBOL_OPS[self.take()[1]]
            node = Binary(op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.factor()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = _SYMBOL_OPS[self.take()[1]]
            node = Binary(op, node, self.factor())
        return node

    def factor(self) -> Expr:
        base = self.unary()
        if self.peek()[:2] == ("op", "^"):
            self.take()
            return Binary("pow", base, self.factor())
        return base

    def unary(self) -> Expr:
        if self.peek()[:2] == ("op", "-"):
            self.take()
            return Unary("neg", self.unary())
        return self.atom()

    def atom(self) -> Expr:
        kind, value, where = self.take()
        if kind == "number":
            return Const(float(value))
        if kind == "ident":
            if value in FUNCTIONS:
                if self.peek()[:2] != ("op", "("):
                    raise self._error(f"function {value!r} requires an argument", self.peek()[2])
                self.take()
                arg = self.expr()
                self.expect(")")
                return Unary(value, arg)
            if self.peek()[:2] == ("op", "("):
                raise self._error(f"unknown function {value!r}", where, UnknownIdentifierError)
            if value in self.variables:
                return Var(value)
            if value in self.params:
                return Param(value)
            raise self._error(f"unknown identifier {value!r}", where, UnknownIdentifierError)
        if kind == "op" and value == "(":
            node = self.expr()
            self.expect(")")
            return node
        if kind == "end":
            raise self._error("unexpected end of input", where)
        raise self._error(f"unexpected token {value!r}", where)


def parse(
    text: str,
    params: Iterable[str] = DEFAULT_PARAMS,
    variables: Sequence[str] = ("t",),
) -> Expr:
    """Parse ``text`` into an expression tree.

    ``params`` lists the identifiers accepted as named parameters; anything
    else that is not a variable or a function name is rejected.
    """
    if not isinstance(text, str) or not text.strip():
        raise ParseError("empty expression", 0, text if isinstance(text, str) else "")
    clash = (set(params) | set(variables)) & set(FUNCTIONS)
    if clash:
        raise ValueError(f"names reserved for functions: {sorted(clash)}")
    return _Parser(text, variables, params).parse()


def to_text(node: Expr) -> str:
    """Print ``node`` so that ``parse(to_text(node))`` reproduces it exactly."""
    if isinstance(node, Const):
        if not math.isfinite(node.value) or node.value < 0:
            raise ValueError(f"constant {node.value!r} has no literal form")
        return repr(float(node.value))
    if isinstance(node, (Var, Param)):
        return node.name
    if isinstance(node, Unary):
        if node.op == "neg":
            return "-" + to_text(node.arg)
        return f"{node.op}({to_text(node.arg)})"
    if isinstance(node, Binary):
        return f"({to_text(node.left)} {_BINARY_SYMBOLS[node.op]} {to_text(node.right)})"
    raise TypeError(f"not an expression node: {node!r}")


def _walk(node: Expr):
    yield node
    if isinstance(node, Unary):
        yield from _walk(node.arg)
    elif isinstance(node, Binary):
        yield from _walk(node.left)
        yield from _walk(node.right)


def params_of(node: Expr) -> set[str]:
    return {n.name for n in _walk(node) if isinstance(n, Param)}


def variables_of(node: Expr) -> set[str]:
    return {n.name for n in _walk(node) if isinstance(n, Var)}


def substitute(node: Expr, name: str, replacement: Expr) -> Expr:
    """Replace every occurrence of variable ``name`` by ``replacement``."""
    if isinstance(node, Var):
        return replacement if node.name == name else node
    if isinstance(node, Unary):
        return Unary(node.op, substitute(node.arg, name, replacement))
    if isinstance(node, Binary):
        return Binary(
            node.op,
            substitute(node.left, name, replacement),
            substitute(node.right, name, replacement),
        )
    return node


def _lookup(name: str, table: Mapping[str, object], what: str):
    try:
        return table[name]
    except KeyError:
        if what == "parameter":
            raise UnboundParameterError(f"parameter {name!r} is not bound") from None
        raise DomainError(f"no value supplied for variable {name!r}") from None


def _float_gamma(x: float) -> float:
    if x <= 0.0 and float(x).is_integer():
        raise DomainError(f"gamma pole at {x!r}")
    if x <= 0.0:
        raise DomainError(f"gamma of non-positive value {x!r}")
    try:
        return math.gamma(x)
    except OverflowError:
        raise DomainError(f"gamma({x!r}) overflows") from None


def _float_pow(x: float, y: float) -> float:
    if x == 0.0 and y < 0.0:
        raise DomainError("division by zero (zero raised to a negative power)")
    if x < 0.0 and not float(y).is_integer():
        raise DomainError(f"non-integer power {y!r} of negative value {x!r}")
    try:
        return math.pow(x, y)
    except OverflowError:
        raise DomainError(f"{x!r}^{y!r} overflows") from None


def _eval_float(node: Expr, values: Mapping[str, float], bindings: Mapping[str, float]) -> float:
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Var):
        return float(_lookup(node.name, values, "variable"))
    if isinstance(node, Param):
        return float(_lookup(node.name, bindings, "parameter"))
    if isinstance(node, Unary):
        x = _eval_float(node.arg, values, bindings)
        op = node.op
        if op == "neg":
            return -x
        if op == "exp":
            try:
                return math.exp(x)
            except OverflowError:
                raise DomainError(f"exp({x!r}) overflows") from None
        if op == "ln":
            if x <= 0.0:
                raise DomainError(f"ln of non-positive value {x!r}")
            return math.log(x)
        if op == "sin":
            return math.sin(x)
        if op == "cos":
            return math.cos(x)
        if op == "gamma":
            return _float_gamma(x)
        raise ValueError(f"unknown unary op {op!r}")
    if isinstance(node, Binary):
        a = _eval_float(node.left, values, bindings)
        b = _eval_float(node.right, values, bindings)
        op = node.op
        if op == "add":
            return a + b
        if op == "sub":
            return a - b
        if op == "mul":
            return a * b
        if op == "div":
            if b == 0.0:
                raise DomainError("division by zero")
            return a / b
        if op == "pow":
            return _float_pow(a, b)
        raise ValueError(f"unknown binary op {op!r}")
    raise TypeError(f"not an expression node: {node!r}")


def evaluate(
    node: Expr,
    values: Mapping[str, float] | float,
    bindings: Mapping[str, float] | None = None,
) -> float:
    """Plain float evaluation. A bare number for ``values`` binds ``t``."""
    if not isinstance(values, Mapping):
        values = {"t": float(values)}
    result = _eval_float(node, values, bindings or {})
    if not math.isfinite(result):
        raise DomainError(f"expression evaluated to {result!r}")
    return result


def _eval_jet(node: Expr, env: Mapping[str, Jet], bindings: Mapping[str, float], nvars: int) -> Jet:
    if isinstance(node, Const):
        return Jet.constant(node.value, nvars)
    if isinstance(node, Var):
        return _lookup(node.name, env, "variable")
    if isinstance(node, Param):
        return Jet.constant(float(_lookup(node.name, bindings, "parameter")), nvars)
    if isinstance(node, Unary):
        x = _eval_jet(node.arg, env, bindings, nvars)
        op = node.op
        if op == "neg":
            return -x
        if op == "exp":
            return x.exp()
        if op == "ln":
            return x.log()
        if op == "sin":
            return x.sin()
        if op == "cos":
            return x.cos()
        if op == "gamma":
            if not x.is_constant():
                raise DomainError("gamma of an argument that varies with the variables is not supported")
            return Jet.constant(_float_gamma(x.v), nvars)
        raise ValueError(f"unknown unary op {op!r}")
    if isinstance(node, Binary):
        a = _eval_jet(node.left, env, bindings, nvars)
        b = _eval_jet(node.right, env, bindings, nvars)
        op = node.op
        if op == "add":
            return a + b
        if op == "sub":
            return a - b
        if op == "mul":
            return a * b
        if op == "div":
            return a / b
        if op == "pow":
            return a**b
        raise ValueError(f"unknown binary op {op!r}")
    raise TypeError(f"not an expression node: {node!r}")


def eval_jet(
    node: Expr,
    point: Mapping[str, float],
    wrt: Sequence[str],
    bindings: Mapping[str, float] | None = None,
) -> Jet:
    """Order-2 jet of ``node`` with respect to the variables named in ``wrt``.

    Variables present in ``point`` but not in ``wrt`` are held constant.
    """
    nvars = len(wrt)
    env = {name: Jet.constant(float(v), nvars) for name, v in point.items()}
    for i, name in enumerate(wrt):
        env[name] = Jet.variable(float(point[name]), i, nvars)
    jet = _eval_jet(node, env, bindings or {}, nvars)
    if not (math.isfinite(jet.v) and np.isfinite(jet.g).all() and np.isfinite(jet.h).all()):
        raise DomainError("expression jet is not finite at the evaluation point")
    return jet


def eval_jet2(
    node: Expr,
    t: float,
    bindings: Mapping[str, float] | None = None,
    var: str = "t",
) -> Jet2:
    """Value, first and second derivative of ``node`` with respect to ``var`` at ``t``."""
    return Jet2.from_jet(eval_jet(node, {var: t}, (var,), bindings))
