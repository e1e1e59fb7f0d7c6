"""Scalar expressions over named coordinates.

A small recursive-descent parser produces an immutable AST; the AST can be
evaluated (strictly, with domain checking), differentiated symbolically,
substituted into, printed back to text, and compiled to a plain Python
function for hot loops.

Grammar (lowest to highest precedence)::

    expr  := term (('+' | '-') term)*
    term  := unary (('*' | '/') unary)*
    unary := '-' unary | power
    power := atom ('^' unary)?          # right associative
    atom  := NUMBER | NAME | FUNC '(' expr ')' | '(' expr ')'

``FUNC`` is one of sin, cos, exp, log, sqrt.  Exponents must be constant.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .errors import BindingError, DomainError, ExprSyntaxError, UnknownFunctionError

FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt")
UNARY_OPS = ("neg",) + FUNCTIONS
BINARY_OPS = ("add", "sub", "mul", "div", "pow")


class Expr:
    """Base class of AST nodes. Nodes are immutable and hashable."""

    __slots__ = ()

    def __str__(self):
        return to_string(self)


@dataclass(frozen=True, slots=True)
class Const(Expr):
    value: float

    def __post_init__(self):
        object.__setattr__(self, "value", float(self.value))


@dataclass(frozen=True, slots=True)
class Var(Expr):
    name: str


@dataclass(frozen=True, slots=True)
class Unary(Expr):
    op: str
    arg: Expr


@dataclass(frozen=True, slots=True)
class Binary(Expr):
    op: str
    left: Expr
    right: Expr


ZERO = Const(0.0)
ONE = Const(1.0)


def children(node: Expr) -> tuple:
    if isinstance(node, Unary):
        return (node.arg,)
    if isinstance(node, Binary):
        return (node.left, node.right)
    return ()


# ---------------------------------------------------------------- parsing

_TOKEN = re.compile(
    r"\s*(?:"
    r"(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^()])"
    r")"
)


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = []  # (kind, value, byte_offset)
        pos = 0
        text_len = len(text)
        while pos < text_len:
            if text[pos:].strip() == "":
                break
            m = _TOKEN.match(text, pos)
            if m is None or m.lastgroup is None:
                start = pos + len(text[pos:]) - len(text[pos:].lstrip())
                raise ExprSyntaxError(f"unexpected character {text[start]!r}", self._offset(start))
            kind = m.lastgroup
            self.tokens.append((kind, m.group(kind), self._offset(m.start(kind))))
            pos = m.end()
        self.tokens.append(("end", "", self._offset(len(text))))
        self.i = 0

    def _offset(self, char_index):
        return len(self.text[:char_index].encode("utf-8"))

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, val, off = self.take()
        if val != value or kind != "op":
            found = "end of input" if kind == "end" else repr(val)
            raise ExprSyntaxError(f"expected {value!r}, found {found}", off)

    def parse(self):
        node = self.expr()
        kind, val, off = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected token {val!r}", off)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = "add" if self.take()[1] == "+" else "sub"
            node = Binary(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = "mul" if self.take()[1] == "*" else "div"
            node = Binary(op, node, self.unary())
        return node

    def unary(self):
        if self.peek()[0] == "op" and self.peek()[1] == "-":
            self.take()
            return Unary("neg", self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            off = self.take()[2]
            exponent = self.unary()
            if free_vars(exponent):
                raise ExprSyntaxError("exponent must be a constant expression", off)
            try:
                value = evaluate(exponent, {})
            except DomainError as exc:
                raise ExprSyntaxError(f"exponent cannot be evaluated ({exc})", off) from None
            return Binary("pow", base, Const(value))
        return base

    def atom(self):
        kind, val, off = self.take()
        if kind == "num":
            return Const(float(val))
        if kind == "name":
            if self.peek()[0] == "op" and self.peek()[1] == "(":
                if val not in FUNCTIONS:
                    raise UnknownFunctionError(val, off)
                self.take()
                arg = self.expr()
                self.expect(")")
                return Unary(val, arg)
            if val in FUNCTIONS:
                raise ExprSyntaxError(f"function {val!r} requires an argument", off)
            return Var(val)
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if kind == "end" else repr(val)
        raise ExprSyntaxError(f"unexpected {found}", off)


def parse(text: str) -> Expr:
    """Parse ``text`` into an AST. Raises ExprSyntaxError with a byte offset."""
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    return _Parser(text).parse()


def as_expr(value) -> Expr:
    if isinstance(value, Expr):
        return value
    if isinstance(value, (int, float, np.floating, np.integer)):
        return Const(float(value))
    if isinstance(value, str):
        return parse(value)
    raise TypeError(f"cannot interpret {value!r} as an expression")


# ---------------------------------------------------------------- printing

_PREC = {"add": 1, "sub": 1, "mul": 2, "div": 2, "neg": 3, "pow": 4}
_SYMBOL = {"add": " + ", "sub": " - ", "mul": "*", "div": "/", "pow": "^"}


def _prec(node):
    if isinstance(node, Binary):
        return _PREC[node.op]
    if isinstance(node, Unary) and node.op == "neg":
        return 3
    if isinstance(node, Const) and (node.value < 0 or math.copysign(1.0, node.value) < 0):
        return 3
    return 5


def _fmt_const(v):
    if math.isfinite(v):
        return repr(v)
    raise ValueError(f"cannot print non-finite constant {v}")


def to_string(node: Expr) -> str:
    """Render ``node`` so that ``parse(to_string(node))`` evaluates identically."""

    def wrap(child, min_prec):
        s = to_string(child)
        return f"({s})" if _prec(child) < min_prec else s

    if isinstance(node, Const):
        return _fmt_const(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Unary):
        if node.op == "neg":
            return "-" + wrap(node.arg, 3)
        return f"{node.op}({to_string(node.arg)})"
    p = _PREC[node.op]
    if node.op == "pow":
        return wrap(node.left, 5) + "^" + wrap(node.right, 3)
    return wrap(node.left, p) + _SYMBOL[node.op] + wrap(node.right, p + 1)


# ---------------------------------------------------------------- analysis

def free_vars(node: Expr) -> frozenset:
    out = set()
    stack = [node]
    while stack:
        n = stack.pop()
        if isinstance(n, Var):
            out.add(n.name)
        else:
            stack.extend(children(n))
    return frozenset(out)


def is_zero(node: Expr) -> bool:
    return isinstance(node, Const) and node.value == 0.0


def _pow_value(base, exponent, node):
    if base == 0.0 and exponent < 0:
        raise DomainError("zero raised to a negative power", to_string(node))
    if base < 0 and not float(exponent).is_integer():
        raise DomainError("negative base with non-integer exponent", to_string(node))
    if float(exponent).is_integer():
        exponent = int(exponent)
    try:
        return float(base**exponent)
    except OverflowError:
        raise DomainError("overflow", to_string(node)) from None


def evaluate(node: Expr, env: Mapping[str, float]) -> float:
    """Strict evaluation. Unbound names raise BindingError; domain violations
    raise DomainError naming the offending sub-expression."""
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Var):
        try:
            return float(env[node.name])
        except KeyError:
            raise BindingError([node.name]) from None
    if isinstance(node, Unary):
        a = evaluate(node.arg, env)
        op = node.op
        if op == "neg":
            return -a
        if op == "sin":
            return math.sin(a)
        if op == "cos":
            return math.cos(a)
        if op == "exp":
            try:
                return math.exp(a)
            except OverflowError:
                raise DomainError("overflow", to_string(node)) from None
        if op == "log":
            if not a > 0:
                raise DomainError("log of non-positive value", to_string(node))
            return math.log(a)
        if op == "sqrt":
            if a < 0:
                raise DomainError("sqrt of negative value", to_string(node))
            return math.sqrt(a)
        raise ValueError(f"unknown unary op {op}")
    a = evaluate(node.left, env)
    b = evaluate(node.right, env)
    op = node.op
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "div":
        if b == 0.0:
            raise DomainError("division by zero", to_string(node))
        return a / b
    return _pow_value(a, b, node)


# ------------------------------------------------- construction and calculus

def add(a: Expr, b: Expr) -> Expr:
    if is_zero(a):
        return b
    if is_zero(b):
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value + b.value)
    return Binary("add", a, b)


def sub(a: Expr, b: Expr) -> Expr:
    if is_zero(b):
        return a
    if is_zero(a):
        return neg(b)
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value - b.value)
    return Binary("sub", a, b)


def neg(a: Expr) -> Expr:
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Unary) and a.op == "neg":
        return a.arg
    return Unary("neg", a)


def mul(a: Expr, b: Expr) -> Expr:
    if is_zero(a) or is_zero(b):
        return ZERO
    if a == ONE:
        return b
    if b == ONE:
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value * b.value)
    if isinstance(a, Const) and a.value == -1.0:
        return neg(b)
    if isinstance(b, Const) and b.value == -1.0:
        return neg(a)
    return Binary("mul", a, b)


def div(a: Expr, b: Expr) -> Expr:
    if b == ONE:
        return a
    if is_zero(a) and not is_zero(b):
        return ZERO
    if isinstance(a, Const) and isinstance(b, Const) and b.value != 0.0:
        return Const(a.value / b.value)
    return Binary("div", a, b)


def power(a: Expr, exponent: float) -> Expr:
    exponent = float(exponent)
    if exponent == 0.0:
        return ONE
    if exponent == 1.0:
        return a
    return Binary("pow", a, Const(exponent))


def func(name: str, a: Expr) -> Expr:
    return Unary(name, a)


def sum_exprs(terms: Iterable[Expr]) -> Expr:
    out = ZERO
    for t in terms:
        out = add(out, t)
    return out


def differentiate(node: Expr, var: str) -> Expr:
    """Exact symbolic derivative of ``node`` with respect to ``var``."""
    if isinstance(node, Const):
        return ZERO
    if isinstance(node, Var):
        return ONE if node.name == var else ZERO
    if var not in free_vars(node):
        return ZERO
    if isinstance(node, Unary):
        a = node.arg
        da = differentiate(a, var)
        op = node.op
        if op == "neg":
            return neg(da)
        if op == "sin":
            return mul(func("cos", a), da)
        if op == "cos":
            return neg(mul(func("sin", a), da))
        if op == "exp":
            return mul(node, da)
        if op == "log":
            return div(da, a)
        if op == "sqrt":
            return div(da, mul(Const(2.0), node))
        raise ValueError(op)
    a, b = node.left, node.right
    op = node.op
    if op == "pow":
        c = b.value
        return mul(mul(Const(c), power(a, c - 1.0)), differentiate(a, var))
    da, db = differentiate(a, var), differentiate(b, var)
    if op == "add":
        return add(da, db)
    if op == "sub":
        return sub(da, db)
    if op == "mul":
        return add(mul(da, b), mul(a, db))
    # quotient rule
    if is_zero(db):
        return div(da, b)
    return div(sub(mul(da, b), mul(a, db)), power(b, 2.0))


def substitute(node: Expr, mapping: Mapping[str, Expr]) -> Expr:
    """Replace variables by expressions (simultaneously)."""
    if isinstance(node, Var):
        return mapping.get(node.name, node)
    if isinstance(node, Const):
        return node
    if isinstance(node, Unary):
        arg = substitute(node.arg, mapping)
        return neg(arg) if node.op == "neg" else Unary(node.op, arg)
    left = substitute(node.left, mapping)
    right = substitute(node.right, mapping)
    if node.op == "pow":
        return power(left, right.value)
    return {"add": add, "sub": sub, "mul": mul, "div": div}[node.op](left, right)


# ---------------------------------------------------------------- compilation

def _rpow(base, exponent):
    if base < 0:
        raise ValueError("negative base with non-integer exponent")
    return base**exponent


def _emit(node, index):
    if isinstance(node, Const):
        return repr(node.value)
    if isinstance(node, Var):
        return f"_x[{index[node.name]}]"
    if isinstance(node, Unary):
        a = _emit(node.arg, index)
        if node.op == "neg":
            return f"(-{a})"
        return f"_m.{node.op}({a})"
    a, b = _emit(node.left, index), _emit(node.right, index)
    if node.op == "pow":
        c = node.right.value
        if c.is_integer():
            if c == 2.0:
                return f"({a}*{a})" if isinstance(node.left, (Var, Const)) else f"(({a})**2)"
            return f"(({a})**{int(c)})"
        return f"_rpow({a}, {b})"
    return f"({a}{_SYMBOL[node.op].strip()}{b})"


def compile_exprs(nodes: Sequence[Expr], names: Sequence[str]) -> Callable[[Sequence[float]], list]:
    """Compile expressions to one function ``f(point) -> list[float]``.

    Evaluation errors are re-raised as DomainError, with the offending
    sub-expression located by the strict interpreter.
    """
    names = list(names)
    index = {n: i for i, n in enumerate(names)}
    missing = set().union(*(free_vars(n) for n in nodes)) - set(index) if nodes else set()
    if missing:
        raise BindingError(missing)
    body = ", ".join(_emit(n, index) for n in nodes)
    src = f"def _f(_x):\n    return [{body}]\n"
    scope = {"_m": math, "_rpow": _rpow}
    exec(compile(src, "<expr>", "exec"), scope)
    raw = scope["_f"]
    nodes = tuple(nodes)

    def fn(point):
        try:
            return raw(point)
        except (ValueError, ZeroDivisionError, OverflowError, TypeError):
            env = dict(zip(names, (float(v) for v in point)))
            for n in nodes:
                evaluate(n, env)
            raise DomainError("evaluation failed") from None

    return fn


# ---------------------------------------------------------------- fields

class CoordinateChart:
    """Ordered, unique coordinate names."""

    __slots__ = ("names", "_index")

    def __init__(self, names: Iterable[str]):
        names = tuple(names)
        if not names:
            raise ValueError("a chart needs at least one coordinate")
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate coordinate names in {names}")
        for n in names:
            if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", n) or n in FUNCTIONS:
                raise ValueError(f"invalid coordinate name {n!r}")
        self.names = names
        self._index = {n: i for i, n in enumerate(names)}

    @property
    def dim(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise BindingError([name]) from None

    def __contains__(self, name):
        return name in self._index

    def __eq__(self, other):
        return isinstance(other, CoordinateChart) and self.names == other.names

    def __hash__(self):
        return hash(self.names)

    def __repr__(self):
        return f"CoordinateChart({list(self.names)})"

    def check_point(self, point) -> np.ndarray:
        p = np.asarray(point, dtype=float).reshape(-1)
        if p.shape[0] != self.dim:
            raise ValueError(f"point has dimension {p.shape[0]}, chart has {self.dim}")
        if not np.all(np.isfinite(p)):
            raise ValueError("point has non-finite coordinates")
        return p


class ScalarField:
    """An expression bound to a chart."""

    __slots__ = ("chart", "expr", "_fn", "_grad")

    def __init__(self, chart: CoordinateChart, expr):
        expr = as_expr(expr)
        unbound = free_vars(expr) - set(chart.names)
        if unbound:
            raise BindingError(unbound)
        self.chart = chart
        self.expr = expr
        self._fn = None
        self._grad = None

    def __repr__(self):
        return f"ScalarField({to_string(self.expr)!r})"

    def __str__(self):
        return to_string(self.expr)

    def eval(self, point) -> float:
        p = self.chart.check_point(point)
        if self._fn is None:
            self._fn = compile_exprs([self.expr], self.chart.names)
        return self._fn(p)[0]

    def diff(self, var: str) -> "ScalarField":
        self.chart.index(var)
        return ScalarField(self.chart, differentiate(self.expr, var))

    def gradient(self, point) -> np.ndarray:
        p = self.chart.check_point(point)
        if self._grad is None:
            derivs = [differentiate(self.expr, v) for v in self.chart.names]
            self._grad = compile_exprs(derivs, self.chart.names)
        return np.array(self._grad(p))


def eval_field(field: ScalarField, point) -> float:
    return field.eval(point)


def differentiate_field(field: ScalarField, var: str) -> ScalarField:
    return field.diff(var)


def central_difference(field: ScalarField, var: str, point, h: float = 1e-6) -> float:
    """Central finite difference; used only as an independent check."""
    p = field.chart.check_point(point)
    i = field.chart.index(var)
    env_p = dict(zip(field.chart.names, p))
    env_m = dict(env_p)
    env_p[field.chart.names[i]] = p[i] + h
    env_m[field.chart.names[i]] = p[i] - h
    return (evaluate(field.expr, env_p) - evaluate(field.expr, env_m)) / (2 * h)
