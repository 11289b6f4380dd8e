"""Scalar expression trees: parsing, evaluation, forward-mode derivatives.

Grammar (standard precedence, loosest to tightest):

    expr   := term  (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?          # right-associative
    atom   := NUMBER | VARIABLE | FUNC '(' expr (',' expr)* ')' | '(' expr ')'

Variables are x1..xn.  Functions: sin cos exp log sqrt abs (one argument),
min max (two arguments).  '^' binds tighter than unary minus, so -x1^2
parses as -(x1^2) and 2^-3 is accepted.

Evaluation is generic over the scalar carrier: plain floats, Dual values
(value + gradient components) and Jet values (truncated univariate Taylor
series).  Trees are immutable; all operations are pure.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, EvalDomainError, NondifferentiableError, ParseError

__all__ = [
    "Expr", "Num", "Var", "Neg", "BinOp", "Call",
    "parse", "to_text", "eval_expr", "eval_batch", "grad",
    "Dual", "Jet", "substitute", "max_var_index",
]


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------

class Expr:
    """Base class for expression nodes; instances are immutable."""
    __slots__ = ()


@dataclass(frozen=True)
class Num(Expr):
    value: float


@dataclass(frozen=True)
class Var(Expr):
    index: int  # zero-based; printed as x{index+1}


@dataclass(frozen=True)
class Neg(Expr):
    arg: Expr


@dataclass(frozen=True)
class BinOp(Expr):
    op: str  # one of + - * / ^
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Call(Expr):
    func: str
    args: tuple


_FUNCS_1 = ("sin", "cos", "exp", "log", "sqrt", "abs")
_FUNCS_2 = ("min", "max")


# ---------------------------------------------------------------------------
# Tokenizer / parser
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)


def _tokenize(text: str):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            stripped = text[pos:].lstrip()
            if not stripped:
                break
            raise ParseError(f"unexpected character {stripped[0]!r}",
                             len(text) - len(stripped))
        if m.lastgroup == "num":
            tokens.append(("num", m.group("num"), m.start("num")))
        elif m.lastgroup == "ident":
            tokens.append(("ident", m.group("ident"), m.start("ident")))
        else:
            tokens.append(("op", m.group("op"), m.start("op")))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, tokens, dim: int, var_names):
        self.tokens = tokens
        self.i = 0
        self.dim = dim
        self.var_names = var_names

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op: str):
        kind, text, pos = self.peek()
        if kind != "op" or text != op:
            raise ParseError(f"expected {op!r}", pos)
        return self.advance()

    def parse_expr(self) -> Expr:
        node = self.parse_term()
        while True:
            kind, text, _ = self.peek()
            if kind == "op" and text in "+-":
                self.advance()
                node = BinOp(text, node, self.parse_term())
            else:
                return node

    def parse_term(self) -> Expr:
        node = self.parse_unary()
        while True:
            kind, text, _ = self.peek()
            if kind == "op" and text in "*/":
                self.advance()
                node = BinOp(text, node, self.parse_unary())
            else:
                return node

    def parse_unary(self) -> Expr:
        kind, text, _ = self.peek()
        if kind == "op" and text == "-":
            self.advance()
            return Neg(self.parse_unary())
        return self.parse_power()

    def parse_power(self) -> Expr:
        base = self.parse_atom()
        kind, text, _ = self.peek()
        if kind == "op" and text == "^":
            self.advance()
            return BinOp("^", base, self.parse_unary())
        return base

    def parse_atom(self) -> Expr:
        kind, text, pos = self.advance()
        if kind == "num":
            return Num(float(text))
        if kind == "ident":
            nk, nt, _ = self.peek()
            if nk == "op" and nt == "(":
                return self.parse_call(text, pos)
            return self.parse_variable(text, pos)
        if kind == "op" and text == "(":
            node = self.parse_expr()
            self.expect_op(")")
            return node
        raise ParseError(f"unexpected token {text!r}" if text else "unexpected end of input", pos)

    def parse_call(self, name: str, pos: int) -> Expr:
        if name not in _FUNCS_1 and name not in _FUNCS_2:
            raise ParseError(f"unknown function {name!r}", pos)
        self.expect_op("(")
        args = [self.parse_expr()]
        while True:
            kind, text, _ = self.peek()
            if kind == "op" and text == ",":
                self.advance()
                args.append(self.parse_expr())
            else:
                break
        self.expect_op(")")
        want = 1 if name in _FUNCS_1 else 2
        if len(args) != want:
            raise ParseError(f"{name} takes {want} argument(s), got {len(args)}", pos)
        return Call(name, tuple(args))

    def parse_variable(self, name: str, pos: int) -> Expr:
        if self.var_names is not None:
            if name in self.var_names:
                return Var(self.var_names.index(name))
            raise ParseError(f"unknown identifier {name!r}", pos)
        m = re.fullmatch(r"x([1-9][0-9]*)", name)
        if m is None:
            raise ParseError(f"unknown identifier {name!r}", pos)
        idx = int(m.group(1))
        if idx > self.dim:
            raise ParseError(f"variable x{idx} out of range for dimension {self.dim}", pos)
        return Var(idx - 1)


def parse(text: str, dim: int, var_names: tuple[str, ...] | None = None) -> Expr:
    """Parse an expression over x1..x{dim} (or over the given names)."""
    if not text or not text.strip():
        raise ParseError("empty expression", 0)
    if dim < 1:
        raise ValueError("dim must be a positive integer")
    p = _Parser(_tokenize(text), dim, var_names)
    node = p.parse_expr()
    kind, text_, pos = p.peek()
    if kind != "end":
        raise ParseError(f"trailing input {text_!r}", pos)
    return node


# ---------------------------------------------------------------------------
# Printing (canonical, fully parenthesized)
# ---------------------------------------------------------------------------

def to_text(e: Expr) -> str:
    if isinstance(e, Num):
        return repr(e.value)
    if isinstance(e, Var):
        return f"x{e.index + 1}"
    if isinstance(e, Neg):
        return f"(-{to_text(e.arg)})"
    if isinstance(e, BinOp):
        return f"({to_text(e.left)} {e.op} {to_text(e.right)})"
    if isinstance(e, Call):
        return f"{e.func}({', '.join(to_text(a) for a in e.args)})"
    raise TypeError(f"not an Expr: {e!r}")


def max_var_index(e: Expr) -> int:
    """Largest zero-based variable index used, or -1 for constant trees."""
    if isinstance(e, Var):
        return e.index
    if isinstance(e, Neg):
        return max_var_index(e.arg)
    if isinstance(e, BinOp):
        return max(max_var_index(e.left), max_var_index(e.right))
    if isinstance(e, Call):
        return max((max_var_index(a) for a in e.args), default=-1)
    return -1


def substitute(e: Expr, mapping: dict[int, Expr]) -> Expr:
    """Replace Var(i) with mapping[i] wherever present."""
    if isinstance(e, Var):
        return mapping.get(e.index, e)
    if isinstance(e, Neg):
        return Neg(substitute(e.arg, mapping))
    if isinstance(e, BinOp):
        return BinOp(e.op, substitute(e.left, mapping), substitute(e.right, mapping))
    if isinstance(e, Call):
        return Call(e.func, tuple(substitute(a, mapping) for a in e.args))
    return e


# ---------------------------------------------------------------------------
# Dual numbers (value + partial derivatives)
# ---------------------------------------------------------------------------

class Dual:
    """Forward-mode carrier: a value and its n partial derivatives."""

    __slots__ = ("value", "partials")

    def __init__(self, value: float, partials):
        self.value = float(value)
        self.partials = np.asarray(partials, dtype=float)

    @staticmethod
    def variable(value: float, index: int, dim: int) -> "Dual":
        p = np.zeros(dim)
        p[index] = 1.0
        return Dual(value, p)

    @staticmethod
    def constant(value: float, dim: int) -> "Dual":
        return Dual(value, np.zeros(dim))

    def __add__(self, o):
        return Dual(self.value + o.value, self.partials + o.partials)

    def __sub__(self, o):
        return Dual(self.value - o.value, self.partials - o.partials)

    def __neg__(self):
        return Dual(-self.value, -self.partials)

    def __mul__(self, o):
        return Dual(self.value * o.value,
                    self.partials * o.value + self.value * o.partials)

    def __truediv__(self, o):
        if o.value == 0.0:
            raise EvalDomainError("division by zero", "dual quotient")
        inv = 1.0 / o.value
        return Dual(self.value * inv,
                    (self.partials - self.value * inv * o.partials) * inv)

    def __repr__(self):
        return f"Dual({self.value}, {list(self.partials)})"


# ---------------------------------------------------------------------------
# Jets (truncated univariate Taylor series; coeffs[k] = f^(k)(t0)/k!)
# ---------------------------------------------------------------------------

class Jet:
    """Taylor-series carrier for higher univariate derivatives."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs):
        self.coeffs = np.asarray(coeffs, dtype=float)

    @staticmethod
    def variable(t0: float, order: int) -> "Jet":
        c = np.zeros(order + 1)
        c[0] = t0
        if order >= 1:
            c[1] = 1.0
        return Jet(c)

    @staticmethod
    def constant(value: float, order: int) -> "Jet":
        c = np.zeros(order + 1)
        c[0] = value
        return Jet(c)

    @property
    def order(self) -> int:
        return self.coeffs.shape[0] - 1

    @property
    def value(self) -> float:
        return float(self.coeffs[0])

    def derivative(self, k: int) -> float:
        """k-th derivative at the expansion point."""
        return float(self.coeffs[k]) * math.factorial(k)

    def __add__(self, o):
        return Jet(self.coeffs + o.coeffs)

    def __sub__(self, o):
        return Jet(self.coeffs - o.coeffs)

    def __neg__(self):
        return Jet(-self.coeffs)

    def __mul__(self, o):
        n = self.order
        return Jet(np.convolve(self.coeffs, o.coeffs)[: n + 1])

    def __truediv__(self, o):
        if o.coeffs[0] == 0.0:
            raise EvalDomainError("division by zero", "jet quotient")
        n = self.order
        c = np.zeros(n + 1)
        b0 = o.coeffs[0]
        for k in range(n + 1):
            s = self.coeffs[k] - np.dot(c[:k], o.coeffs[k:0:-1])
            c[k] = s / b0
        return Jet(c)

    def __repr__(self):
        return f"Jet({list(self.coeffs)})"


def _jet_exp(a: Jet) -> Jet:
    n = a.order
    e = np.zeros(n + 1)
    e[0] = math.exp(a.coeffs[0])
    for k in range(1, n + 1):
        e[k] = sum(j * a.coeffs[j] * e[k - j] for j in range(1, k + 1)) / k
    return Jet(e)


def _jet_log(a: Jet) -> Jet:
    if a.coeffs[0] <= 0.0:
        raise EvalDomainError("log of nonpositive value", "jet argument")
    n = a.order
    l = np.zeros(n + 1)
    l[0] = math.log(a.coeffs[0])
    for k in range(1, n + 1):
        s = a.coeffs[k] - sum(j * l[j] * a.coeffs[k - j] for j in range(1, k)) / k
        l[k] = s / a.coeffs[0]
    return Jet(l)


def _jet_sincos(a: Jet):
    n = a.order
    s = np.zeros(n + 1)
    c = np.zeros(n + 1)
    s[0] = math.sin(a.coeffs[0])
    c[0] = math.cos(a.coeffs[0])
    for k in range(1, n + 1):
        s[k] = sum(j * a.coeffs[j] * c[k - j] for j in range(1, k + 1)) / k
        c[k] = -sum(j * a.coeffs[j] * s[k - j] for j in range(1, k + 1)) / k
    return Jet(s), Jet(c)


def _jet_sqrt(a: Jet) -> Jet:
    if a.coeffs[0] < 0.0:
        raise EvalDomainError("sqrt of negative value", "jet argument")
    if a.coeffs[0] == 0.0:
        raise NondifferentiableError("sqrt has unbounded derivative at 0")
    n = a.order
    s = np.zeros(n + 1)
    s[0] = math.sqrt(a.coeffs[0])
    for k in range(1, n + 1):
        conv = sum(s[j] * s[k - j] for j in range(1, k))
        s[k] = (a.coeffs[k] - conv) / (2.0 * s[0])
    return Jet(s)


def _jet_pow_const(a: Jet, r: float) -> Jet:
    if float(r).is_integer() and 0 <= r <= 16:
        out = Jet.constant(1.0, a.order)
        for _ in range(int(r)):
            out = out * a
        return out
    if float(r).is_integer() and r < 0:
        return Jet.constant(1.0, a.order) / _jet_pow_const(a, -r)
    if a.coeffs[0] <= 0.0:
        raise EvalDomainError("fractional power of nonpositive base", "jet power")
    n = a.order
    p = np.zeros(n + 1)
    p[0] = a.coeffs[0] ** r
    for k in range(1, n + 1):
        s = sum(((r + 1) * j - k) * a.coeffs[j] * p[k - j] for j in range(1, k + 1))
        p[k] = s / (k * a.coeffs[0])
    return Jet(p)


# ---------------------------------------------------------------------------
# Generic evaluation
# ---------------------------------------------------------------------------

def _is_scalar(v) -> bool:
    return isinstance(v, (int, float))


def _constant_like(value: float, template):
    if isinstance(template, Dual):
        return Dual.constant(value, template.partials.shape[0])
    if isinstance(template, Jet):
        return Jet.constant(value, template.order)
    return float(value)


def _pow(a, b, node_text: str):
    # Constant integer exponents keep negative bases legal.
    if _is_scalar(a) and _is_scalar(b):
        a, b = float(a), float(b)
        if a == 0.0 and b < 0.0:
            raise EvalDomainError("zero raised to a negative power", node_text)
        if a < 0.0 and not b.is_integer():
            raise EvalDomainError("negative base with fractional exponent", node_text)
        return math.pow(a, b)
    if isinstance(a, Dual):
        if isinstance(b, Dual) and np.any(b.partials != 0.0):
            if a.value <= 0.0:
                raise EvalDomainError("power with varying exponent needs positive base", node_text)
            lv = math.log(a.value)
            val = math.pow(a.value, b.value)
            dp = val * (b.partials * lv + b.value / a.value * a.partials)
            return Dual(val, dp)
        r = b.value if isinstance(b, Dual) else float(b)
        if a.value == 0.0:
            if r > 1.0:
                return Dual(0.0, np.zeros_like(a.partials))
            if r == 1.0:
                return Dual(0.0, a.partials.copy())
            if 0.0 < r < 1.0:
                raise NondifferentiableError("power has unbounded derivative at 0")
            raise EvalDomainError("zero raised to a nonpositive power", node_text)
        if a.value < 0.0 and not float(r).is_integer():
            raise EvalDomainError("negative base with fractional exponent", node_text)
        val = math.pow(a.value, r)
        return Dual(val, r * math.pow(a.value, r - 1.0) * a.partials)
    if isinstance(a, Jet):
        if isinstance(b, Jet) and np.any(b.coeffs[1:] != 0.0):
            return _jet_exp(b * _jet_log(a))
        r = b.value if isinstance(b, Jet) else float(b)
        return _jet_pow_const(a, r)
    raise TypeError(f"unsupported power operands: {type(a)}, {type(b)}")


def _func(name: str, args, node_text: str):
    a = args[0]
    if _is_scalar(a) and (len(args) == 1 or _is_scalar(args[1])):
        x = float(a)
        if name == "sin":
            return math.sin(x)
        if name == "cos":
            return math.cos(x)
        if name == "exp":
            return math.exp(x)
        if name == "log":
            if x <= 0.0:
                raise EvalDomainError("log of nonpositive value", node_text)
            return math.log(x)
        if name == "sqrt":
            if x < 0.0:
                raise EvalDomainError("sqrt of negative value", node_text)
            return math.sqrt(x)
        if name == "abs":
            return abs(x)
        y = float(args[1])
        return min(x, y) if name == "min" else max(x, y)
    if isinstance(a, Dual):
        if name == "sin":
            return Dual(math.sin(a.value), math.cos(a.value) * a.partials)
        if name == "cos":
            return Dual(math.cos(a.value), -math.sin(a.value) * a.partials)
        if name == "exp":
            v = math.exp(a.value)
            return Dual(v, v * a.partials)
        if name == "log":
            if a.value <= 0.0:
                raise EvalDomainError("log of nonpositive value", node_text)
            return Dual(math.log(a.value), a.partials / a.value)
        if name == "sqrt":
            if a.value < 0.0:
                raise EvalDomainError("sqrt of negative value", node_text)
            if a.value == 0.0:
                raise NondifferentiableError(f"sqrt not differentiable at 0 in {node_text}")
            v = math.sqrt(a.value)
            return Dual(v, a.partials / (2.0 * v))
        if name == "abs":
            if a.value == 0.0:
                raise NondifferentiableError(f"abs not differentiable at 0 in {node_text}")
            return a if a.value > 0.0 else -a
        b = args[1]
        if a.value == b.value:
            raise NondifferentiableError(f"{name} not differentiable at a tie in {node_text}")
        if name == "min":
            return a if a.value < b.value else b
        return a if a.value > b.value else b
    if isinstance(a, Jet):
        if name == "sin":
            return _jet_sincos(a)[0]
        if name == "cos":
            return _jet_sincos(a)[1]
        if name == "exp":
            return _jet_exp(a)
        if name == "log":
            return _jet_log(a)
        if name == "sqrt":
            return _jet_sqrt(a)
        if name == "abs":
            if a.value == 0.0:
                raise NondifferentiableError(f"abs not differentiable at 0 in {node_text}")
            return a if a.value > 0.0 else -a
        b = args[1]
        if a.value == b.value:
            raise NondifferentiableError(f"{name} not differentiable at a tie in {node_text}")
        if name == "min":
            return a if a.value < b.value else b
        return a if a.value > b.value else b
    raise TypeError(f"unsupported operand type for {name}: {type(a)}")


def _eval(e: Expr, env):
    if isinstance(e, Num):
        return _constant_like(e.value, env[0])
    if isinstance(e, Var):
        return env[e.index]
    if isinstance(e, Neg):
        v = _eval(e.arg, env)
        return -v
    if isinstance(e, BinOp):
        a = _eval(e.left, env)
        b = _eval(e.right, env)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        if e.op == "/":
            if _is_scalar(b) and float(b) == 0.0:
                raise EvalDomainError("division by zero", to_text(e))
            try:
                return a / b
            except EvalDomainError:
                raise EvalDomainError("division by zero", to_text(e)) from None
        return _pow(a, b, to_text(e))
    if isinstance(e, Call):
        args = [_eval(a, env) for a in e.args]
        return _func(e.func, args, to_text(e))
    raise TypeError(f"not an Expr: {e!r}")


def eval_expr(e: Expr, x) -> float:
    """Evaluate at a point (sequence of floats).  Raises EvalDomainError
    with the offending subexpression when the point leaves the domain."""
    xs = [float(v) for v in np.asarray(x, dtype=float).ravel()]
    top = max_var_index(e)
    if top >= len(xs):
        raise DimensionMismatch(
            f"expression uses x{top + 1} but point has dimension {len(xs)}")
    return float(_eval(e, xs))


def grad(e: Expr, x) -> np.ndarray:
    """Gradient at x via dual arithmetic; exact up to floating rounding.

    Raises NondifferentiableError when a kink (abs/min/max, sqrt at 0) is
    hit; callers then fall back to finite differences.
    """
    xv = np.asarray(x, dtype=float).ravel()
    n = xv.shape[0]
    top = max_var_index(e)
    if top >= n:
        raise DimensionMismatch(
            f"expression uses x{top + 1} but point has dimension {n}")
    env = [Dual.variable(v, i, n) for i, v in enumerate(xv)]
    out = _eval(e, env)
    if isinstance(out, Dual):
        return out.partials.copy()
    return np.zeros(n)


def eval_jet(e: Expr, t0: float, order: int) -> Jet:
    """Evaluate a univariate expression as a Taylor jet around t0."""
    env = [Jet.variable(float(t0), order)]
    top = max_var_index(e)
    if top >= 1:
        raise DimensionMismatch(f"expression uses x{top + 1} but is univariate")
    out = _eval(e, env)
    if isinstance(out, Jet):
        return out
    return Jet.constant(float(out), order)


# ---------------------------------------------------------------------------
# Vectorized evaluation (IEEE semantics; invalid points yield nan)
# ---------------------------------------------------------------------------

def eval_batch(e: Expr, X: np.ndarray) -> np.ndarray:
    """Evaluate on an (N, dim) array of points.

    No domain errors are raised; out-of-domain entries propagate nan/inf
    per IEEE rules.  Intended for dense sampling and brute-force search.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    with np.errstate(all="ignore"):
        return _eval_batch(e, X)


def _eval_batch(e: Expr, X: np.ndarray) -> np.ndarray:
    if isinstance(e, Num):
        return np.full(X.shape[0], e.value)
    if isinstance(e, Var):
        return X[:, e.index].copy()
    if isinstance(e, Neg):
        return -_eval_batch(e.arg, X)
    if isinstance(e, BinOp):
        a = _eval_batch(e.left, X)
        b = _eval_batch(e.right, X)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        if e.op == "/":
            return a / b
        if isinstance(e.right, Num) and float(e.right.value).is_integer():
            return np.power(a, int(e.right.value)).astype(float)
        return np.power(a, b)
    if isinstance(e, Call):
        args = [_eval_batch(a, X) for a in e.args]
        fn = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "log": np.log,
              "sqrt": np.sqrt, "abs": np.abs,
              "min": np.minimum, "max": np.maximum}[e.func]
        return fn(*args)
    raise TypeError(f"not an Expr: {e!r}")
