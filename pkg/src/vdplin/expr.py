"""Tiny symbolic expression engine for real functions of one variable.

An ``Expr`` is an immutable tree built from real constants, the independent
variable ``x``, named parameters, arithmetic, powers and the elementary
functions exp/log/sin/cos/tan/sinh/cosh/sqrt.  It supports exact
differentiation, conservative simplification (constant folding and identity
removal, no canonical forms), a printer whose output re-parses to an
equivalent tree, and compilation to fast scalar or numpy-vectorized
callables.

Correctness downstream rests on evaluation at sample points, not on
syntactic normal forms, so ``simplify`` never changes the value of an
expression anywhere the original is defined.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

__all__ = [
    "Expr", "Const", "Var", "Param", "Neg", "Add", "Sub", "Mul", "Div",
    "Pow", "Fun", "X", "as_expr", "parse", "diff", "simplify", "subst",
    "free_params", "fractional_power_nodes", "lambdify", "to_str",
    "exp", "log", "sin", "cos", "tan", "sinh", "cosh", "sqrt",
    "ExprError", "ParseError", "EvalDomainError", "UnboundParameterError",
    "FUNCTIONS",
]

FUNCTIONS = ("exp", "log", "sin", "cos", "tan", "sinh", "cosh", "sqrt")

_IDENT_RE = re.compile(r"[a-zA-Z][a-zA-Z0-9_]*")


class ExprError(Exception):
    """Base class for expression errors."""


class ParseError(ExprError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


class EvalDomainError(ExprError):
    """Evaluation left the real domain (division by zero, log of a
    nonpositive value, overflow, ...).  Carries the offending sub-expression
    and the x at which it happened."""

    def __init__(self, message: str, node: "Expr", x):
        super().__init__(f"{message} in '{node}' at x={x!r}")
        self.node = node
        self.x = x


class UnboundParameterError(ExprError):
    def __init__(self, name: str):
        super().__init__(f"parameter '{name}' is not bound")
        self.name = name


class Expr:
    """Base node.  Instances are immutable and hashable; arithmetic
    operators build new trees (numbers are coerced to constants)."""

    __slots__ = ()

    def __add__(self, other):
        return Add(self, as_expr(other))

    def __radd__(self, other):
        return Add(as_expr(other), self)

    def __sub__(self, other):
        return Sub(self, as_expr(other))

    def __rsub__(self, other):
        return Sub(as_expr(other), self)

    def __mul__(self, other):
        return Mul(self, as_expr(other))

    def __rmul__(self, other):
        return Mul(as_expr(other), self)

    def __truediv__(self, other):
        return Div(self, as_expr(other))

    def __rtruediv__(self, other):
        return Div(as_expr(other), self)

    def __pow__(self, other):
        return Pow(self, as_expr(other))

    def __neg__(self):
        return Neg(self)

    def __str__(self) -> str:
        return to_str(self)

    def eval(self, x: float, env: Mapping[str, float] | None = None) -> float:
        """Evaluate at a single x with parameters bound by env."""
        return _eval(self, float(x), env or {}, {})

    def diff(self) -> "Expr":
        return diff(self)

    def simplify(self) -> "Expr":
        return simplify(self)


@dataclass(frozen=True, slots=True)
class Const(Expr):
    value: float

    def __post_init__(self):
        # keep builtin floats so repr stays grammar-compatible
        if type(self.value) is not float:
            object.__setattr__(self, "value", float(self.value))


@dataclass(frozen=True, slots=True)
class Var(Expr):
    pass


@dataclass(frozen=True, slots=True)
class Param(Expr):
    name: str

    def __post_init__(self):
        if not _IDENT_RE.fullmatch(self.name) or self.name == "x":
            raise ValueError(f"invalid parameter name {self.name!r}")


@dataclass(frozen=True, slots=True)
class Neg(Expr):
    arg: Expr


@dataclass(frozen=True, slots=True)
class Add(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True, slots=True)
class Sub(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True, slots=True)
class Mul(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True, slots=True)
class Div(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True, slots=True)
class Pow(Expr):
    base: Expr
    exponent: Expr


@dataclass(frozen=True, slots=True)
class Fun(Expr):
    name: str
    arg: Expr

    def __post_init__(self):
        if self.name not in FUNCTIONS:
            raise ValueError(f"unknown function {self.name!r}")


X = Var()

ZERO = Const(0.0)
ONE = Const(1.0)


def as_expr(v) -> Expr:
    if isinstance(v, Expr):
        return v
    if isinstance(v, (int, float)):
        return Const(float(v))
    raise TypeError(f"cannot interpret {v!r} as an expression")


def exp(e) -> Fun:
    return Fun("exp", as_expr(e))


def log(e) -> Fun:
    return Fun("log", as_expr(e))


def sin(e) -> Fun:
    return Fun("sin", as_expr(e))


def cos(e) -> Fun:
    return Fun("cos", as_expr(e))


def tan(e) -> Fun:
    return Fun("tan", as_expr(e))


def sinh(e) -> Fun:
    return Fun("sinh", as_expr(e))


def cosh(e) -> Fun:
    return Fun("cosh", as_expr(e))


def sqrt(e) -> Fun:
    return Fun("sqrt", as_expr(e))


# ---------------------------------------------------------------------------
# evaluation (reference interpreter; slow but with precise error reporting)

def _eval(node: Expr, x: float, env: Mapping[str, float], memo: dict) -> float:
    key = id(node)
    if key in memo:
        return memo[key]
    if isinstance(node, Const):
        val = node.value
    elif isinstance(node, Var):
        val = x
    elif isinstance(node, Param):
        if node.name not in env:
            raise UnboundParameterError(node.name)
        val = float(env[node.name])
    elif isinstance(node, Neg):
        val = -_eval(node.arg, x, env, memo)
    elif isinstance(node, Add):
        val = _eval(node.left, x, env, memo) + _eval(node.right, x, env, memo)
    elif isinstance(node, Sub):
        val = _eval(node.left, x, env, memo) - _eval(node.right, x, env, memo)
    elif isinstance(node, Mul):
        val = _eval(node.left, x, env, memo) * _eval(node.right, x, env, memo)
    elif isinstance(node, Div):
        den = _eval(node.right, x, env, memo)
        if den == 0.0:
            raise EvalDomainError("division by zero", node, x)
        val = _eval(node.left, x, env, memo) / den
    elif isinstance(node, Pow):
        val = _eval_pow(node, x, env, memo)
    elif isinstance(node, Fun):
        val = _eval_fun(node, x, env, memo)
    else:  # pragma: no cover
        raise TypeError(f"unknown node {node!r}")
    if isinstance(val, float) and math.isinf(val):
        raise EvalDomainError("overflow", node, x)
    memo[key] = val
    return val


def _eval_pow(node: Pow, x, env, memo) -> float:
    base = _eval(node.base, x, env, memo)
    expo = _eval(node.exponent, x, env, memo)
    if float(expo).is_integer():
        n = int(expo)
        if base == 0.0 and n < 0:
            raise EvalDomainError("zero raised to a negative power", node, x)
        try:
            return float(base ** n)
        except OverflowError:
            raise EvalDomainError("overflow", node, x) from None
    if base > 0.0:
        try:
            return math.exp(expo * math.log(base))
        except OverflowError:
            raise EvalDomainError("overflow", node, x) from None
    if base == 0.0 and expo > 0.0:
        return 0.0
    raise EvalDomainError("fractional power of a nonpositive base", node, x)


def _eval_fun(node: Fun, x, env, memo) -> float:
    a = _eval(node.arg, x, env, memo)
    try:
        if node.name == "exp":
            return math.exp(a)
        if node.name == "log":
            if a <= 0.0:
                raise EvalDomainError("log of a nonpositive value", node, x)
            return math.log(a)
        if node.name == "sqrt":
            if a < 0.0:
                raise EvalDomainError("sqrt of a negative value", node, x)
            return math.sqrt(a)
        return getattr(math, node.name)(a)
    except OverflowError:
        raise EvalDomainError("overflow", node, x) from None


# ---------------------------------------------------------------------------
# differentiation

def diff(e: Expr) -> Expr:
    """Exact derivative with respect to x; parameters are constants.

    The result is not simplified (run ``simplify`` afterwards if a tidy
    tree matters).  Shared subtrees stay shared in the output."""
    return _diff(e, {})


def _diff(node: Expr, memo: dict) -> Expr:
    key = id(node)
    if key in memo:
        return memo[key]
    if isinstance(node, (Const, Param)):
        d = ZERO
    elif isinstance(node, Var):
        d = ONE
    elif isinstance(node, Neg):
        d = Neg(_diff(node.arg, memo))
    elif isinstance(node, Add):
        d = Add(_diff(node.left, memo), _diff(node.right, memo))
    elif isinstance(node, Sub):
        d = Sub(_diff(node.left, memo), _diff(node.right, memo))
    elif isinstance(node, Mul):
        d = Add(Mul(_diff(node.left, memo), node.right),
                Mul(node.left, _diff(node.right, memo)))
    elif isinstance(node, Div):
        d = Div(Sub(Mul(_diff(node.left, memo), node.right),
                    Mul(node.left, _diff(node.right, memo))),
                Pow(node.right, Const(2.0)))
    elif isinstance(node, Pow):
        d = _diff_pow(node, memo)
    elif isinstance(node, Fun):
        d = _diff_fun(node, memo)
    else:  # pragma: no cover
        raise TypeError(f"unknown node {node!r}")
    memo[key] = d
    return d


def _diff_pow(node: Pow, memo: dict) -> Expr:
    base, expo = node.base, node.exponent
    db = _diff(base, memo)
    if isinstance(expo, Const) and float(expo.value).is_integer():
        n = expo.value
        if n == 0.0:
            return ZERO
        return Mul(Mul(Const(n), Pow(base, Const(n - 1.0))), db)
    # general case via b^e = exp(e log b); domain restricted to b > 0
    de = _diff(expo, memo)
    return Mul(node, Add(Mul(de, Fun("log", base)), Div(Mul(expo, db), base)))


def _diff_fun(node: Fun, memo: dict) -> Expr:
    a = node.arg
    da = _diff(a, memo)
    if node.name == "exp":
        return Mul(node, da)
    if node.name == "log":
        return Div(da, a)
    if node.name == "sin":
        return Mul(Fun("cos", a), da)
    if node.name == "cos":
        return Neg(Mul(Fun("sin", a), da))
    if node.name == "tan":
        return Mul(Add(ONE, Pow(node, Const(2.0))), da)
    if node.name == "sinh":
        return Mul(Fun("cosh", a), da)
    if node.name == "cosh":
        return Mul(Fun("sinh", a), da)
    if node.name == "sqrt":
        return Div(da, Mul(Const(2.0), node))
    raise TypeError(f"unknown function {node.name!r}")  # pragma: no cover


# ---------------------------------------------------------------------------
# simplification

def _is_const(e: Expr, v: float | None = None) -> bool:
    return isinstance(e, Const) and (v is None or e.value == v)


def simplify(e: Expr) -> Expr:
    """Constant folding plus 0/1 identities and double-negation removal.

    Pointwise equality with the input is preserved at every x where the
    input is defined.  Unchanged subtrees keep their identity, so sharing
    in the input survives."""
    return _simplify(e, {})


def _simplify(node: Expr, memo: dict) -> Expr:
    key = id(node)
    if key in memo:
        return memo[key]
    out = _simplify_node(node, memo)
    memo[key] = out
    return out


def _neg_of(e: Expr) -> Expr:
    if isinstance(e, Const):
        return Const(-e.value)
    if isinstance(e, Neg):
        return e.arg
    if isinstance(e, Mul) and isinstance(e.left, Const):
        return Mul(Const(-e.left.value), e.right)
    return Neg(e)


def _simplify_node(node: Expr, memo: dict) -> Expr:
    if isinstance(node, (Const, Var, Param)):
        return node

    if isinstance(node, Neg):
        a = _simplify(node.arg, memo)
        if isinstance(a, (Const, Neg)):
            return _neg_of(a)
        return node if a is node.arg else Neg(a)

    if isinstance(node, Fun):
        a = _simplify(node.arg, memo)
        if isinstance(a, Const):
            folded = _try_fold(Fun(node.name, a))
            if folded is not None:
                return folded
        return node if a is node.arg else Fun(node.name, a)

    if isinstance(node, Pow):
        b = _simplify(node.base, memo)
        ex = _simplify(node.exponent, memo)
        if _is_const(ex, 0.0):
            return ONE
        if _is_const(ex, 1.0):
            return b
        if _is_const(b, 1.0):
            return ONE
        if isinstance(b, Const) and isinstance(ex, Const):
            folded = _try_fold(Pow(b, ex))
            if folded is not None:
                return folded
        if b is node.base and ex is node.exponent:
            return node
        return Pow(b, ex)

    if isinstance(node, (Add, Sub, Mul, Div)):
        a = _simplify(node.left, memo)
        b = _simplify(node.right, memo)
        if isinstance(node, Add):
            if isinstance(a, Const) and isinstance(b, Const):
                return Const(a.value + b.value)
            if _is_const(a, 0.0):
                return b
            if _is_const(b, 0.0):
                return a
        elif isinstance(node, Sub):
            if isinstance(a, Const) and isinstance(b, Const):
                return Const(a.value - b.value)
            if _is_const(b, 0.0):
                return a
            if _is_const(a, 0.0):
                return _neg_of(b)
        elif isinstance(node, Mul):
            if isinstance(a, Const) and isinstance(b, Const):
                return Const(a.value * b.value)
            if _is_const(a, 0.0) or _is_const(b, 0.0):
                return ZERO
            if _is_const(a, 1.0):
                return b
            if _is_const(b, 1.0):
                return a
            if _is_const(a, -1.0):
                return _neg_of(b)
            if _is_const(b, -1.0):
                return _neg_of(a)
        else:  # Div
            if isinstance(a, Const) and isinstance(b, Const) and b.value != 0.0:
                return Const(a.value / b.value)
            if _is_const(a, 0.0):
                return ZERO
            if _is_const(b, 1.0):
                return a
            if _is_const(b, -1.0):
                return _neg_of(a)
        if a is node.left and b is node.right:
            return node
        return type(node)(a, b)

    return node  # pragma: no cover


def _try_fold(e: Expr) -> Const | None:
    try:
        v = e.eval(0.0, {})
    except ExprError:
        return None
    if not math.isfinite(v):
        return None
    return Const(v)


# ---------------------------------------------------------------------------
# substitution and queries

def subst(e: Expr, values: Mapping[str, float]) -> Expr:
    """Replace named parameters with numeric constants.  Parameters not in
    ``values`` are left alone; unchanged subtrees keep their identity."""
    return _subst(e, values, {})


def _subst(node: Expr, values: Mapping[str, float], memo: dict) -> Expr:
    key = id(node)
    if key in memo:
        return memo[key]
    if isinstance(node, Param) and node.name in values:
        out = Const(float(values[node.name]))
    elif isinstance(node, (Const, Var, Param)):
        out = node
    elif isinstance(node, Neg):
        a = _subst(node.arg, values, memo)
        out = node if a is node.arg else Neg(a)
    elif isinstance(node, Fun):
        a = _subst(node.arg, values, memo)
        out = node if a is node.arg else Fun(node.name, a)
    elif isinstance(node, Pow):
        b = _subst(node.base, values, memo)
        ex = _subst(node.exponent, values, memo)
        out = node if (b is node.base and ex is node.exponent) else Pow(b, ex)
    else:
        a = _subst(node.left, values, memo)
        b = _subst(node.right, values, memo)
        out = node if (a is node.left and b is node.right) else type(node)(a, b)
    memo[key] = out
    return out


def free_params(e: Expr) -> frozenset[str]:
    names: set[str] = set()
    _walk_params(e, names, set())
    return frozenset(names)


def _walk_params(node: Expr, names: set, seen: set) -> None:
    if id(node) in seen:
        return
    seen.add(id(node))
    if isinstance(node, Param):
        names.add(node.name)
    elif isinstance(node, Neg):
        _walk_params(node.arg, names, seen)
    elif isinstance(node, Fun):
        _walk_params(node.arg, names, seen)
    elif isinstance(node, Pow):
        _walk_params(node.base, names, seen)
        _walk_params(node.exponent, names, seen)
    elif isinstance(node, (Add, Sub, Mul, Div)):
        _walk_params(node.left, names, seen)
        _walk_params(node.right, names, seen)


def fractional_power_nodes(e: Expr) -> list[Pow]:
    """Power nodes whose exponent is not an integer constant.  Such powers
    are accepted by the parser but restrict the domain to positive bases."""
    out: list[Pow] = []
    stack = [e]
    seen: set[int] = set()
    while stack:
        node = stack.pop()
        if id(node) in seen:
            continue
        seen.add(id(node))
        if isinstance(node, Pow):
            ex = node.exponent
            if not (isinstance(ex, Const) and float(ex.value).is_integer()):
                out.append(node)
            stack.extend((node.base, node.exponent))
        elif isinstance(node, Neg):
            stack.append(node.arg)
        elif isinstance(node, Fun):
            stack.append(node.arg)
        elif isinstance(node, (Add, Sub, Mul, Div)):
            stack.extend((node.left, node.right))
    return out


# ---------------------------------------------------------------------------
# printing

_PREC_ADD, _PREC_MUL, _PREC_NEG, _PREC_POW, _PREC_ATOM = 10, 20, 30, 40, 50


def _prec(node: Expr) -> int:
    if isinstance(node, Const):
        return _PREC_ATOM if node.value >= 0 else _PREC_NEG
    if isinstance(node, (Var, Param, Fun)):
        return _PREC_ATOM
    if isinstance(node, Neg):
        return _PREC_NEG
    if isinstance(node, (Add, Sub)):
        return _PREC_ADD
    if isinstance(node, (Mul, Div)):
        return _PREC_MUL
    return _PREC_POW


def _fmt_number(v: float) -> str:
    if v == int(v) and abs(v) < 1e16:
        return str(int(v))
    return repr(v)


def to_str(e: Expr) -> str:
    """Print in the input grammar; the output re-parses to a tree that is
    pointwise equal (and structurally equal for parser-produced trees)."""
    return _print(e, 0)


def _print(node: Expr, ctx: int) -> str:
    if isinstance(node, Const):
        s = _fmt_number(node.value)
    elif isinstance(node, Var):
        s = "x"
    elif isinstance(node, Param):
        s = node.name
    elif isinstance(node, Fun):
        s = f"{node.name}({_print(node.arg, 0)})"
    elif isinstance(node, Neg):
        s = "-" + _print(node.arg, _PREC_NEG)
    elif isinstance(node, Add):
        s = _print(node.left, _PREC_ADD) + "+" + _print(node.right, _PREC_ADD + 1)
    elif isinstance(node, Sub):
        s = _print(node.left, _PREC_ADD) + "-" + _print(node.right, _PREC_ADD + 1)
    elif isinstance(node, Mul):
        s = _print(node.left, _PREC_MUL) + "*" + _print(node.right, _PREC_MUL + 1)
    elif isinstance(node, Div):
        s = _print(node.left, _PREC_MUL) + "/" + _print(node.right, _PREC_MUL + 1)
    elif isinstance(node, Pow):
        s = _print(node.base, _PREC_POW + 1) + "^" + _print(node.exponent, _PREC_NEG)
    else:  # pragma: no cover
        raise TypeError(f"unknown node {node!r}")
    if _prec(node) < ctx:
        return "(" + s + ")"
    return s


# ---------------------------------------------------------------------------
# parsing

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[a-zA-Z][a-zA-Z0-9_]*)"
    r"|(?P<op>[-+*/^()]))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            stripped = text[pos:].lstrip()
            if not stripped:
                break
            at = len(text) - len(stripped)
            raise ParseError(f"unexpected character {text[at]!r}", at)
        if m.group("num") is not None:
            tokens.append(("num", m.group("num"), m.start("num")))
        elif m.group("ident") is not None:
            tokens.append(("ident", m.group("ident"), m.start("ident")))
        else:
            tokens.append(("op", m.group("op"), m.start("op")))
        pos = m.end()
    tokens.append(("eof", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self) -> tuple[str, str, int]:
        return self.tokens[self.i]

    def advance(self) -> tuple[str, str, int]:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op: str) -> None:
        kind, val, pos = self.peek()
        if kind != "op" or val != op:
            raise ParseError(f"expected {op!r}", pos)
        self.advance()

    def parse_expr(self) -> Expr:
        node = self.parse_term()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "+-":
                self.advance()
                rhs = self.parse_term()
                node = Add(node, rhs) if val == "+" else Sub(node, rhs)
            else:
                return node

    def parse_term(self) -> Expr:
        node = self.parse_factor()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "*/":
                self.advance()
                rhs = self.parse_factor()
                node = Mul(node, rhs) if val == "*" else Div(node, rhs)
            else:
                return node

    def parse_factor(self) -> Expr:
        kind, val, _ = self.peek()
        if kind == "op" and val == "-":
            self.advance()
            return Neg(self.parse_factor())
        node = self.parse_atom()
        kind, val, _ = self.peek()
        if kind == "op" and val == "^":
            self.advance()
            return Pow(node, self.parse_factor())
        return node

    def parse_atom(self) -> Expr:
        kind, val, pos = self.advance()
        if kind == "num":
            return Const(float(val))
        if kind == "ident":
            nkind, nval, _ = self.peek()
            if nkind == "op" and nval == "(":
                if val not in FUNCTIONS:
                    raise ParseError(f"unknown function {val!r}", pos)
                self.advance()
                arg = self.parse_expr()
                self.expect_op(")")
                return Fun(val, arg)
            if val == "x":
                return X
            if val in FUNCTIONS:
                raise ParseError(f"function {val!r} used without arguments", pos)
            return Param(val)
        if kind == "op" and val == "(":
            node = self.parse_expr()
            self.expect_op(")")
            return node
        raise ParseError(f"unexpected token {val!r}" if val else "unexpected end of input", pos)


def parse(text: str) -> Expr:
    """Parse ``text`` to an Expr under the grammar

        expr   := term (("+"|"-") term)*
        term   := factor (("*"|"/") factor)*
        factor := "-" factor | atom ("^" factor)?
        atom   := number | ident | ident "(" expr ")" | "(" expr ")"

    ``x`` is the independent variable; any other identifier is a named
    parameter unless it is a function call."""
    p = _Parser(text)
    node = p.parse_expr()
    kind, val, pos = p.peek()
    if kind != "eof":
        raise ParseError(f"unexpected trailing input {val!r}", pos)
    return node


# ---------------------------------------------------------------------------
# compilation

def _pow_scalar(a: float, b: float) -> float:
    if float(b).is_integer():
        return a ** int(b)
    if a > 0.0:
        return math.exp(b * math.log(a))
    if a == 0.0 and b > 0.0:
        return 0.0
    raise ValueError("fractional power of a nonpositive base")


_SCALAR_NS = {
    "_exp": math.exp, "_log": math.log, "_sin": math.sin, "_cos": math.cos,
    "_tan": math.tan, "_sinh": math.sinh, "_cosh": math.cosh,
    "_sqrt": math.sqrt, "_pow": _pow_scalar,
}

_VECTOR_NS = {
    "_exp": np.exp, "_log": np.log, "_sin": np.sin, "_cos": np.cos,
    "_tan": np.tan, "_sinh": np.sinh, "_cosh": np.cosh, "_sqrt": np.sqrt,
    "_pow": np.power,
}


def lambdify(e: Expr, env: Mapping[str, float] | None = None, *,
             scalar: bool = False) -> Callable:
    """Compile to a callable f(x).

    The expression DAG is flattened with common subexpressions evaluated
    once.  With ``scalar=True`` the result works on floats via ``math``
    (domain violations raise); otherwise it accepts floats or numpy arrays
    and returns arrays, mapping domain violations to nan/inf silently so
    callers can mask them.
    """
    if env:
        e = subst(e, env)
    missing = free_params(e)
    if missing:
        raise UnboundParameterError(sorted(missing)[0])

    lines: list[str] = []
    tokens: dict[int, str] = {}
    counter = [0]

    def tok(node: Expr) -> str:
        key = id(node)
        if key in tokens:
            return tokens[key]
        if isinstance(node, Const):
            t = repr(node.value)
        elif isinstance(node, Var):
            t = "x"
        else:
            t = _emit(node)
        tokens[key] = t
        return t

    def _emit(node: Expr) -> str:
        if isinstance(node, Neg):
            rhs = f"-({tok(node.arg)})"
        elif isinstance(node, Add):
            rhs = f"({tok(node.left)}) + ({tok(node.right)})"
        elif isinstance(node, Sub):
            rhs = f"({tok(node.left)}) - ({tok(node.right)})"
        elif isinstance(node, Mul):
            rhs = f"({tok(node.left)}) * ({tok(node.right)})"
        elif isinstance(node, Div):
            rhs = f"({tok(node.left)}) / ({tok(node.right)})"
        elif isinstance(node, Pow):
            ex = node.exponent
            if isinstance(ex, Const) and float(ex.value).is_integer():
                rhs = f"({tok(node.base)}) ** ({int(ex.value)})"
            else:
                rhs = f"_pow({tok(node.base)}, {tok(ex)})"
        elif isinstance(node, Fun):
            rhs = f"_{node.name}({tok(node.arg)})"
        else:  # pragma: no cover
            raise TypeError(f"unknown node {node!r}")
        counter[0] += 1
        name = f"v{counter[0]}"
        lines.append(f"    {name} = {rhs}")
        return name

    # iterative post-order so deep trees cannot hit the recursion limit
    order: list[Expr] = []
    seen: set[int] = set()
    stack: list[tuple[Expr, bool]] = [(e, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        if isinstance(node, Neg):
            stack.append((node.arg, False))
        elif isinstance(node, Fun):
            stack.append((node.arg, False))
        elif isinstance(node, Pow):
            stack.append((node.exponent, False))
            stack.append((node.base, False))
        elif isinstance(node, (Add, Sub, Mul, Div)):
            stack.append((node.right, False))
            stack.append((node.left, False))
    for node in order:
        tok(node)

    code = "def _compiled(x):\n" + "\n".join(lines) + f"\n    return {tok(e)}\n"
    ns = dict(_SCALAR_NS if scalar else _VECTOR_NS)
    exec(compile(code, "<lambdify>", "exec"), ns)
    fn = ns["_compiled"]

    if scalar:
        return fn

    def vector_fn(xs):
        arr = np.asarray(xs, dtype=float)
        with np.errstate(all="ignore"):
            out = fn(arr)
        if np.ndim(out) == 0:
            out = np.full(arr.shape, float(out))
        return out

    return vector_fn
