"""Scalar field expressions in the chart variables x and y.

Metric coefficients, conformal factors and custom bond laws are given in config files as small
arithmetic expressions. This module parses them into immutable trees, evaluates them on numpy
arrays and differentiates them symbolically (curvature needs exact second derivatives).

Grammar::

    expr  := term (("+" | "-") term)*
    term  := unary (("*" | "/") unary)*
    unary := "-" unary | power
    power := atom ("^" unary)?
    atom  := NUMBER | "pi" | "e" | "x" | "y" | FUNC "(" expr ")" | "(" expr ")"
"""

from __future__ import annotations

import dataclasses
import functools
import math
import re
from typing import Callable, ClassVar, Final

import numpy as np
import numpy.typing as npt

from libincompat.exceptions import FieldDomainError, FieldSyntaxError

VARIABLES: Final[tuple[str, ...]] = ("x", "y")
CONSTANTS: Final[dict[str, float]] = {"pi": math.pi, "e": math.e}

# Binding power used both by the parser and the pretty printer.
_PREC_ADD: Final[int] = 1
_PREC_MUL: Final[int] = 2
_PREC_NEG: Final[int] = 3
_PREC_POW: Final[int] = 4
_PREC_ATOM: Final[int] = 5

_TOKEN_PATTERN = re.compile(
    r"\s*(?:(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)

Value = float | npt.NDArray[np.float64]


class Node:
    """A node of an expression tree."""

    precedence: ClassVar[int] = _PREC_ATOM

    def evaluate(self, x: Value, y: Value) -> Value:
        """Evaluate the subtree at (x, y)."""
        raise NotImplementedError

    def derivative(self, variable: str) -> Node:
        """The symbolic partial derivative with respect to x or y."""
        raise NotImplementedError

    @property
    def is_constant(self) -> bool:
        """Whether the subtree is free of variables."""
        raise NotImplementedError


@dataclasses.dataclass(frozen=True)
class Number(Node):
    """A numeric literal."""

    value: float

    def evaluate(self, x: Value, y: Value) -> Value:
        return np.full(np.shape(x), self.value) if np.ndim(x) else self.value

    def derivative(self, variable: str) -> Node:
        return ZERO

    @property
    def is_constant(self) -> bool:
        return True

    def __str__(self) -> str:
        text = repr(float(self.value))
        return f"({text})" if self.value < 0 else text


@dataclasses.dataclass(frozen=True)
class Constant(Node):
    """A named mathematical constant (pi or e)."""

    name: str

    def evaluate(self, x: Value, y: Value) -> Value:
        return Number(CONSTANTS[self.name]).evaluate(x, y)

    def derivative(self, variable: str) -> Node:
        return ZERO

    @property
    def is_constant(self) -> bool:
        return True

    def __str__(self) -> str:
        return self.name


@dataclasses.dataclass(frozen=True)
class Variable(Node):
    """One of the chart coordinates x or y."""

    name: str

    def evaluate(self, x: Value, y: Value) -> Value:
        return x if self.name == "x" else y

    def derivative(self, variable: str) -> Node:
        return ONE if variable == self.name else ZERO

    @property
    def is_constant(self) -> bool:
        return False

    def __str__(self) -> str:
        return self.name


@dataclasses.dataclass(frozen=True)
class Negate(Node):
    """Unary minus."""

    operand: Node
    precedence: ClassVar[int] = _PREC_NEG

    def evaluate(self, x: Value, y: Value) -> Value:
        return -self.operand.evaluate(x, y)

    def derivative(self, variable: str) -> Node:
        return negate(self.operand.derivative(variable))

    @property
    def is_constant(self) -> bool:
        return self.operand.is_constant

    def __str__(self) -> str:
        inner = str(self.operand)
        if self.operand.precedence < _PREC_NEG:
            inner = f"({inner})"
        return f"-{inner}"


@dataclasses.dataclass(frozen=True)
class Binary(Node):
    """A binary operation: +, -, *, / or ^."""

    op: str
    left: Node
    right: Node

    @property
    def precedence(self) -> int:  # type: ignore[override]
        return {"+": _PREC_ADD, "-": _PREC_ADD, "*": _PREC_MUL, "/": _PREC_MUL}.get(
            self.op, _PREC_POW
        )

    def evaluate(self, x: Value, y: Value) -> Value:
        left = self.left.evaluate(x, y)
        right = self.right.evaluate(x, y)

        if self.op == "+":
            return left + right
        if self.op == "-":
            return left - right
        if self.op == "*":
            return left * right
        if self.op == "/":
            if np.any(np.asarray(right) == 0):
                raise FieldDomainError("Division by zero", str(self))
            return left / right

        if np.any((np.asarray(left) == 0) & (np.asarray(right) < 0)):
            raise FieldDomainError("Zero raised to a negative power", str(self))
        with np.errstate(invalid="ignore"):
            result = np.power(left, right)
        if np.any(np.isnan(result) & ~np.isnan(np.asarray(left) + np.asarray(right))):
            raise FieldDomainError("Negative base raised to a fractional power", str(self))
        return result

    def derivative(self, variable: str) -> Node:
        d_left = self.left.derivative(variable)
        d_right = self.right.derivative(variable)

        if self.op == "+":
            return add(d_left, d_right)
        if self.op == "-":
            return subtract(d_left, d_right)
        if self.op == "*":
            return add(multiply(d_left, self.right), multiply(self.left, d_right))
        if self.op == "/":
            numerator = subtract(multiply(d_left, self.right), multiply(self.left, d_right))
            return divide(numerator, power(self.right, Number(2.0)))

        if self.right.is_constant:
            return multiply(
                multiply(self.right, power(self.left, subtract(self.right, ONE))), d_left
            )

        # d(u^v) = u^v * (v' log u + v u' / u)
        return multiply(
            self,
            add(
                multiply(d_right, call("log", self.left)),
                divide(multiply(self.right, d_left), self.left),
            ),
        )

    @property
    def is_constant(self) -> bool:
        return self.left.is_constant and self.right.is_constant

    def __str__(self) -> str:
        own = self.precedence
        left = str(self.left)
        right = str(self.right)

        if self.left.precedence < own or (self.op == "^" and self.left.precedence <= own):
            left = f"({left})"

        if self.right.precedence < own or (self.op != "^" and self.right.precedence == own):
            right = f"({right})"

        if self.op == "^":
            return f"{left}^{right}"

        return f"{left} {self.op} {right}"


def _checked_log(node: Call, value: Value) -> Value:
    if np.any(np.asarray(value) <= 0):
        raise FieldDomainError("Logarithm of a nonpositive value", str(node))
    return np.log(value)


def _checked_sqrt(node: Call, value: Value) -> Value:
    if np.any(np.asarray(value) < 0):
        raise FieldDomainError("Square root of a negative value", str(node))
    return np.sqrt(value)


_FUNCTIONS: Final[dict[str, Callable[[Call, Value], Value]]] = {
    "sin": lambda _, v: np.sin(v),
    "cos": lambda _, v: np.cos(v),
    "exp": lambda _, v: np.exp(v),
    "log": _checked_log,
    "sqrt": _checked_sqrt,
}


@dataclasses.dataclass(frozen=True)
class Call(Node):
    """A call of one of the built-in functions sin, cos, exp, log, sqrt."""

    function: str
    argument: Node

    def evaluate(self, x: Value, y: Value) -> Value:
        return _FUNCTIONS[self.function](self, self.argument.evaluate(x, y))

    def derivative(self, variable: str) -> Node:
        inner = self.argument.derivative(variable)
        u = self.argument

        if self.function == "sin":
            outer: Node = call("cos", u)
        elif self.function == "cos":
            outer = negate(call("sin", u))
        elif self.function == "exp":
            outer = self
        elif self.function == "log":
            return divide(inner, u)
        else:
            return divide(inner, multiply(Number(2.0), self))

        return multiply(outer, inner)

    @property
    def is_constant(self) -> bool:
        return self.argument.is_constant

    def __str__(self) -> str:
        return f"{self.function}({self.argument})"


ZERO: Final[Number] = Number(0.0)
ONE: Final[Number] = Number(1.0)


def _is_number(node: Node, value: float) -> bool:
    return isinstance(node, Number) and node.value == value


def _fold(node: Node) -> Node:
    """Replace a variable-free subtree by its value, when that value is finite."""
    if isinstance(node, (Number, Constant)) or not node.is_constant:
        return node
    try:
        value = float(node.evaluate(0.0, 0.0))
    except (FieldDomainError, OverflowError, ValueError):
        return node
    return Number(value) if math.isfinite(value) and value >= 0 else node


def add(left: Node, right: Node) -> Node:
    """Build left + right with trivial simplifications."""
    if _is_number(left, 0.0):
        return right
    if _is_number(right, 0.0):
        return left
    return _fold(Binary("+", left, right))


def subtract(left: Node, right: Node) -> Node:
    """Build left - right with trivial simplifications."""
    if _is_number(right, 0.0):
        return left
    if _is_number(left, 0.0):
        return negate(right)
    return _fold(Binary("-", left, right))


def multiply(left: Node, right: Node) -> Node:
    """Build left * right with trivial simplifications."""
    if _is_number(left, 0.0) or _is_number(right, 0.0):
        return ZERO
    if _is_number(left, 1.0):
        return right
    if _is_number(right, 1.0):
        return left
    return _fold(Binary("*", left, right))


def divide(left: Node, right: Node) -> Node:
    """Build left / right with trivial simplifications."""
    if _is_number(left, 0.0):
        return ZERO
    if _is_number(right, 1.0):
        return left
    return _fold(Binary("/", left, right))


def power(base: Node, exponent: Node) -> Node:
    """Build base ^ exponent with trivial simplifications."""
    if _is_number(exponent, 0.0):
        return ONE
    if _is_number(exponent, 1.0):
        return base
    return _fold(Binary("^", base, exponent))


def negate(operand: Node) -> Node:
    """Build -operand with trivial simplifications."""
    if _is_number(operand, 0.0):
        return ZERO
    if isinstance(operand, Negate):
        return operand.operand
    return Negate(operand)


def call(function: str, argument: Node) -> Node:
    """Build function(argument)."""
    return _fold(Call(function, argument))


class _Token:
    """A lexical token with its byte offset into the source."""

    kind: str
    text: str
    offset: int

    def __init__(self, kind: str, text: str, offset: int) -> None:
        self.kind = kind
        self.text = text
        self.offset = offset

    def __repr__(self) -> str:
        return f"Token<{self.kind} {self.text!r} @ {self.offset}>"


def _tokenize(source: str) -> list[_Token]:
    tokens: list[_Token] = []
    position = 0
    encoded_length = len(source.encode("utf-8"))

    def byte_offset(index: int) -> int:
        return len(source[:index].encode("utf-8"))

    while position < len(source):
        if source[position:].strip() == "":
            break

        match = _TOKEN_PATTERN.match(source, position)

        if match is None or match.end() == position:
            start = position + len(source[position:]) - len(source[position:].lstrip())
            raise FieldSyntaxError(f"Unexpected character {source[start]!r}", byte_offset(start))

        kind = match.lastgroup
        assert kind is not None
        tokens.append(_Token(kind, match.group(kind), byte_offset(match.start(kind))))
        position = match.end()

    tokens.append(_Token("end", "", encoded_length))
    return tokens


class _Parser:
    """Recursive descent parser over the token list."""

    tokens: list[_Token]
    index: int

    def __init__(self, tokens: list[_Token]) -> None:
        self.tokens = tokens
        self.index = 0

    @property
    def current(self) -> _Token:
        return self.tokens[self.index]

    def advance(self) -> _Token:
        token = self.tokens[self.index]
        self.index += 1
        return token

    def expect(self, text: str) -> _Token:
        token = self.current
        if token.text != text:
            found = "end of input" if token.kind == "end" else repr(token.text)
            raise FieldSyntaxError(f"Expected {text!r} but found {found}", token.offset)
        return self.advance()

    def parse(self) -> Node:
        node = self.expression()
        if self.current.kind != "end":
            raise FieldSyntaxError(f"Unexpected token {self.current.text!r}", self.current.offset)
        return node

    def expression(self) -> Node:
        node = self.term()
        while self.current.text in ("+", "-"):
            op = self.advance().text
            node = Binary(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.current.text in ("*", "/"):
            op = self.advance().text
            node = Binary(op, node, self.unary())
        return node

    def unary(self) -> Node:
        if self.current.text == "-":
            self.advance()
            return Negate(self.unary())
        return self.power()

    def power(self) -> Node:
        node = self.atom()
        if self.current.text == "^":
            self.advance()
            node = Binary("^", node, self.unary())
        return node

    def atom(self) -> Node:
        token = self.advance()

        if token.kind == "number":
            value = float(token.text)
            if not math.isfinite(value):
                raise FieldSyntaxError(f"Number {token.text!r} is out of range", token.offset)
            return Number(value)

        if token.kind == "name":
            return self.named(token)

        if token.text == "(":
            node = self.expression()
            self.expect(")")
            return node

        found = "end of input" if token.kind == "end" else repr(token.text)
        raise FieldSyntaxError(f"Unexpected {found}", token.offset)

    def named(self, token: _Token) -> Node:
        name = token.text
        is_call = self.current.text == "("

        if name in _FUNCTIONS:
            if not is_call:
                raise FieldSyntaxError(f"Function {name!r} takes exactly 1 argument", token.offset)
            self.advance()
            arguments = [] if self.current.text == ")" else self.arguments()
            self.expect(")")
            if len(arguments) != 1:
                raise FieldSyntaxError(
                    f"Function {name!r} takes exactly 1 argument ({len(arguments)} given)",
                    token.offset,
                )
            return Call(name, arguments[0])

        if name in VARIABLES or name in CONSTANTS:
            if is_call:
                raise FieldSyntaxError(f"{name!r} is not a function", token.offset)
            return Variable(name) if name in VARIABLES else Constant(name)

        raise FieldSyntaxError(f"Unknown identifier {name!r}", token.offset)

    def arguments(self) -> list[Node]:
        arguments = [self.expression()]
        while self.current.text == ",":
            self.advance()
            arguments.append(self.expression())
        return arguments


class ScalarFieldExpr:
    """An immutable, parsed scalar field f(x, y).

    Instances are safe to evaluate concurrently; derivative trees are built lazily and cached.
    """

    source: str
    ast: Node

    def __init__(self, source: str, ast: Node) -> None:
        self.source = source
        self.ast = ast

    @staticmethod
    def from_ast(ast: Node) -> ScalarFieldExpr:
        """Wrap a tree, using its pretty-printed form as the source text."""
        return ScalarFieldExpr(str(ast), ast)

    @staticmethod
    def constant(value: float) -> ScalarFieldExpr:
        """A field that is the same number everywhere."""
        return ScalarFieldExpr.from_ast(_as_node(value))

    @functools.cached_property
    def gradient_ast(self) -> tuple[Node, Node]:
        """The symbolic partial derivatives (d/dx, d/dy)."""
        return self.ast.derivative("x"), self.ast.derivative("y")

    @functools.cached_property
    def hessian_ast(self) -> tuple[tuple[Node, Node], tuple[Node, Node]]:
        """The symbolic second derivatives, row-major; the mixed entries share one tree."""
        dx, dy = self.gradient_ast
        dxy = dx.derivative("y")
        return (dx.derivative("x"), dxy), (dxy, dy.derivative("y"))

    def evaluate(self, x: npt.ArrayLike, y: npt.ArrayLike) -> Value:
        """Evaluate at a point or on broadcastable coordinate arrays."""
        if np.ndim(x) == 0 and np.ndim(y) == 0:
            x_value: Value = float(x)  # type: ignore[arg-type]
            y_value: Value = float(y)  # type: ignore[arg-type]
        else:
            x_value, y_value = np.broadcast_arrays(
                np.asarray(x, dtype=float), np.asarray(y, dtype=float)
            )
        with np.errstate(over="ignore"):
            return self.ast.evaluate(x_value, y_value)

    def __add__(self, other: ScalarFieldExpr | float) -> ScalarFieldExpr:
        return ScalarFieldExpr.from_ast(add(self.ast, _as_node(other)))

    def __sub__(self, other: ScalarFieldExpr | float) -> ScalarFieldExpr:
        return ScalarFieldExpr.from_ast(subtract(self.ast, _as_node(other)))

    def __mul__(self, other: ScalarFieldExpr | float) -> ScalarFieldExpr:
        return ScalarFieldExpr.from_ast(multiply(self.ast, _as_node(other)))

    def __rmul__(self, other: float) -> ScalarFieldExpr:
        return ScalarFieldExpr.from_ast(multiply(_as_node(other), self.ast))

    def __truediv__(self, other: ScalarFieldExpr | float) -> ScalarFieldExpr:
        return ScalarFieldExpr.from_ast(divide(self.ast, _as_node(other)))

    def __pow__(self, exponent: float) -> ScalarFieldExpr:
        return ScalarFieldExpr.from_ast(power(self.ast, _as_node(exponent)))

    def __neg__(self) -> ScalarFieldExpr:
        return ScalarFieldExpr.from_ast(negate(self.ast))

    def sqrt(self) -> ScalarFieldExpr:
        """The field sqrt(self)."""
        return ScalarFieldExpr.from_ast(call("sqrt", self.ast))

    def __str__(self) -> str:
        return str(self.ast)

    def __repr__(self) -> str:
        return f"ScalarFieldExpr<{self.source}>"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ScalarFieldExpr):
            return NotImplemented
        return self.ast == other.ast

    def __hash__(self) -> int:
        return hash(self.ast)


def _as_node(value: ScalarFieldExpr | float) -> Node:
    if isinstance(value, ScalarFieldExpr):
        return value.ast
    return Number(float(value)) if value >= 0 else negate(Number(-float(value)))


def parse_field(source: str) -> ScalarFieldExpr:
    """Parse a scalar field expression.

    Args:
        source: Expression text, e.g. "exp(2*(x^2+y^2)/2)"

    Returns:
        The parsed expression

    Raises:
        FieldSyntaxError: On malformed input, unknown identifiers or wrong function arity
    """

    if not source or not source.strip():
        raise FieldSyntaxError("Empty expression", 0)

    return ScalarFieldExpr(source, _Parser(_tokenize(source)).parse())


def eval_field(expr: ScalarFieldExpr, x: npt.ArrayLike, y: npt.ArrayLike) -> Value:
    """Evaluate the expression at (x, y).

    Raises:
        FieldDomainError: When a log, sqrt, power or division leaves its domain
    """
    return expr.evaluate(x, y)


def eval_gradient(
    expr: ScalarFieldExpr, x: npt.ArrayLike, y: npt.ArrayLike
) -> tuple[Value, Value]:
    """Evaluate the exact gradient (df/dx, df/dy) at (x, y)."""
    dx, dy = expr.gradient_ast
    return (
        ScalarFieldExpr("d/dx", dx).evaluate(x, y),
        ScalarFieldExpr("d/dy", dy).evaluate(x, y),
    )


def eval_hessian(
    expr: ScalarFieldExpr, x: npt.ArrayLike, y: npt.ArrayLike
) -> npt.NDArray[np.float64]:
    """Evaluate the exact Hessian; shape (2, 2) or (2, 2, *broadcast shape)."""
    (dxx, dxy), (_, dyy) = expr.hessian_ast
    xx = ScalarFieldExpr("d2/dx2", dxx).evaluate(x, y)
    xy = ScalarFieldExpr("d2/dxdy", dxy).evaluate(x, y)
    yy = ScalarFieldExpr("d2/dy2", dyy).evaluate(x, y)
    xx, xy, yy = np.broadcast_arrays(xx, xy, yy)
    return np.array([[xx, xy], [xy, yy]], dtype=float)
