"""Closed-form expressions: parsing, printing, symbolic differentiation, evaluation.

The grammar is small and fixed::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?
    atom   := NUMBER | VAR | FUNC '(' expr ')' | '(' expr ')'

so ``^`` binds tighter than unary minus and is right-associative
(``-x^2`` is ``-(x^2)``, ``2^3^2`` is ``2^(3^2)``). There is no implicit
multiplication. Trees are immutable and evaluate on floats or numpy arrays.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import DomainError, ParseError, UnknownIdentifier

DEFAULT_VARIABLES = ("x", "y", "u")
FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt", "cosh", "sinh", "tanh", "atan")

# binding strength used by the printer
_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4, "atom": 5}


class Expr:
    """Base class of the expression tree."""

    def __str__(self):
        return to_source(self)

    def evaluate(self, **env):
        return evaluate(self, env)

    def variables(self):
        return _free_vars(self)

    def __post_init__(self):
        # cache the structural hash per node so hashing deep trees stays O(1)
        object.__setattr__(self, "_hash", hash((type(self).__name__,) + self._key()))


def _hashed(cls):
    cls.__hash__ = lambda self: self._hash
    return cls


@_hashed
@dataclass(frozen=True, eq=True)
class Num(Expr):
    value: float
    _hash: int = field(default=0, init=False, repr=False, compare=False)

    def _key(self):
        return (self.value,)


@_hashed
@dataclass(frozen=True, eq=True)
class Var(Expr):
    name: str
    _hash: int = field(default=0, init=False, repr=False, compare=False)

    def _key(self):
        return (self.name,)


@_hashed
@dataclass(frozen=True, eq=True)
class Neg(Expr):
    arg: Expr
    _hash: int = field(default=0, init=False, repr=False, compare=False)

    def _key(self):
        return (self.arg._hash,)


@_hashed
@dataclass(frozen=True, eq=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr
    _hash: int = field(default=0, init=False, repr=False, compare=False)

    def _key(self):
        return (self.op, self.left._hash, self.right._hash)


@_hashed
@dataclass(frozen=True, eq=True)
class Call(Expr):
    fn: str
    arg: Expr
    _hash: int = field(default=0, init=False, repr=False, compare=False)

    def _key(self):
        return (self.fn, self.arg._hash)


def _free_vars(e):
    if isinstance(e, Var):
        return frozenset([e.name])
    if isinstance(e, Num):
        return frozenset()
    if isinstance(e, (Neg, Call)):
        return _free_vars(e.arg)
    return _free_vars(e.left) | _free_vars(e.right)


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()])
""", re.VERBOSE)


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    offset: int


def _tokenize(source):
    tokens = []
    pos = 0
    while pos < len(source):
        m = _TOKEN.match(source, pos)
        if m is None:
            raise ParseError(
                f"syntax error at offset {pos}: unexpected character {source[pos]!r}",
                pos, "token")
        if m.lastgroup != "ws":
            tokens.append(_Token(m.lastgroup, m.group(), pos))
        pos = m.end()
    tokens.append(_Token("end", "", len(source)))
    return tokens


class _Parser:
    def __init__(self, source, variables):
        self.tokens = _tokenize(source)
        self.variables = variables
        self.i = 0

    @property
    def tok(self):
        return self.tokens[self.i]

    def fail(self, expected):
        tok = self.tok
        found = "end of input" if tok.kind == "end" else repr(tok.text)
        raise ParseError(
            f"syntax error at offset {tok.offset}: expected {expected}, found {found}",
            tok.offset, expected)

    def accept(self, text):
        if self.tok.kind == "op" and self.tok.text == text:
            self.i += 1
            return True
        return False

    def parse(self):
        e = self.expr()
        if self.tok.kind != "end":
            self.fail("operator or end of input")
        return e

    def expr(self):
        e = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.tok.text
            self.i += 1
            e = BinOp(op, e, self.term())
        return e

    def term(self):
        e = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.tok.text
            self.i += 1
            e = BinOp(op, e, self.unary())
        return e

    def unary(self):
        if self.accept("-"):
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.accept("^"):
            return BinOp("^", base, self.unary())
        return base

    def atom(self):
        tok = self.tok
        if tok.kind == "num":
            self.i += 1
            return Num(float(tok.text))
        if tok.kind == "ident":
            self.i += 1
            if tok.text in FUNCTIONS:
                if not self.accept("("):
                    self.fail(f"'(' after {tok.text}")
                arg = self.expr()
                if not self.accept(")"):
                    self.fail("')'")
                return Call(tok.text, arg)
            if tok.text in self.variables:
                return Var(tok.text)
            raise UnknownIdentifier(
                f"unknown identifier {tok.text!r} at offset {tok.offset}",
                tok.offset, "variable or function")
        if self.accept("("):
            e = self.expr()
            if not self.accept(")"):
                self.fail("')'")
            return e
        self.fail("expression")


def parse(source: str, variables=DEFAULT_VARIABLES) -> Expr:
    """Parse `source` into an expression tree.

    Raises ParseError (with a 0-based character offset) on malformed input and
    UnknownIdentifier for names that are neither variables nor functions.
    """
    return _Parser(source, tuple(variables)).parse()


# ---------------------------------------------------------------------------
# printing
# ---------------------------------------------------------------------------

def _fmt_number(v):
    if math.isfinite(v) and v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def _prec(e):
    if isinstance(e, BinOp):
        return _PREC[e.op]
    if isinstance(e, Neg) or (isinstance(e, Num) and e.value < 0):
        return _PREC["neg"]
    return _PREC["atom"]


def to_source(e: Expr) -> str:
    """Render with the minimal parentheses that reparse to the same tree."""
    if isinstance(e, Num):
        return _fmt_number(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Call):
        return f"{e.fn}({to_source(e.arg)})"
    if isinstance(e, Neg):
        inner = to_source(e.arg)
        if _prec(e.arg) < _PREC["neg"]:
            inner = f"({inner})"
        return f"-{inner}"
    p = _PREC[e.op]
    left, right = to_source(e.left), to_source(e.right)
    if e.op == "^":
        if _prec(e.left) <= p:
            left = f"({left})"
        if _prec(e.right) < _PREC["neg"]:
            right = f"({right})"
        return f"{left}^{right}"
    if _prec(e.left) < p:
        left = f"({left})"
    if _prec(e.right) <= p:
        right = f"({right})"
    return f"{left} {e.op} {right}"


# ---------------------------------------------------------------------------
# constant-folding constructors
# ---------------------------------------------------------------------------

ZERO = Num(0.0)
ONE = Num(1.0)


def _is(e, value):
    return isinstance(e, Num) and e.value == value


def add(a, b):
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value + b.value)
    if _is(a, 0):
        return b
    if _is(b, 0):
        return a
    return BinOp("+", a, b)


def sub(a, b):
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value - b.value)
    if _is(b, 0):
        return a
    if _is(a, 0):
        return neg(b)
    return BinOp("-", a, b)


def mul(a, b):
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value * b.value)
    if _is(a, 0) or _is(b, 0):
        return ZERO
    if _is(a, 1):
        return b
    if _is(b, 1):
        return a
    if _is(a, -1):
        return neg(b)
    if _is(b, -1):
        return neg(a)
    return BinOp("*", a, b)


def div(a, b):
    if isinstance(a, Num) and isinstance(b, Num) and b.value != 0:
        return Num(a.value / b.value)
    if _is(a, 0):
        return ZERO
    if _is(b, 1):
        return a
    return BinOp("/", a, b)


def power(a, b):
    if isinstance(a, Num) and isinstance(b, Num):
        if a.value > 0 or (b.value == int(b.value) and (a.value != 0 or b.value >= 0)):
            return Num(float(a.value) ** b.value)
    if _is(b, 0):
        return ONE
    if _is(b, 1):
        return a
    return BinOp("^", a, b)


def neg(a):
    if isinstance(a, Num):
        return Num(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def call(fn, a):
    if isinstance(a, Num):
        try:
            return Num(float(_apply(fn, np.float64(a.value), a, {})))
        except DomainError:
            pass
    return Call(fn, a)


# ---------------------------------------------------------------------------
# differentiation
# ---------------------------------------------------------------------------

def differentiate(e: Expr, var: str) -> Expr:
    """Exact derivative of `e` with respect to `var`, constant-folded."""
    return _diff(e, var)


@lru_cache(maxsize=4096)
def _diff(e, var):
    if isinstance(e, Num):
        return ZERO
    if isinstance(e, Var):
        return ONE if e.name == var else ZERO
    if isinstance(e, Neg):
        return neg(_diff(e.arg, var))
    if isinstance(e, Call):
        a = e.arg
        da = _diff(a, var)
        if _is(da, 0):
            return ZERO
        fn = e.fn
        if fn == "sin":
            outer = call("cos", a)
        elif fn == "cos":
            outer = neg(call("sin", a))
        elif fn == "exp":
            outer = e
        elif fn == "log":
            return div(da, a)
        elif fn == "sqrt":
            return div(da, mul(Num(2.0), e))
        elif fn == "cosh":
            outer = call("sinh", a)
        elif fn == "sinh":
            outer = call("cosh", a)
        elif fn == "tanh":
            outer = sub(ONE, power(e, Num(2.0)))
        elif fn == "atan":
            return div(da, add(ONE, power(a, Num(2.0))))
        else:  # pragma: no cover - grammar forbids it
            raise ValueError(fn)
        return mul(outer, da)
    a, b = e.left, e.right
    da, db = _diff(a, var), _diff(b, var)
    if e.op == "+":
        return add(da, db)
    if e.op == "-":
        return sub(da, db)
    if e.op == "*":
        return add(mul(da, b), mul(a, db))
    if e.op == "/":
        return sub(div(da, b), div(mul(a, db), power(b, Num(2.0))))
    # e.op == "^"
    if var not in _free_vars(b):
        return mul(mul(b, power(a, sub(b, ONE))), da)
    return mul(e, add(mul(db, call("log", a)), div(mul(b, da), a)))


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def _where(mask, env):
    """Coordinates of the first offending sample, for error messages."""
    idx = np.argwhere(np.atleast_1d(mask))[0]
    point = {}
    for k, v in env.items():
        arr = np.atleast_1d(np.asarray(v, dtype=float))
        point[k] = float(arr[tuple(idx)] if arr.size > 1 else arr.flat[0])
    return point


def _apply(fn, a, node, env):
    if fn == "log":
        bad = a <= 0
        if np.any(bad):
            raise DomainError(f"log of non-positive argument in '{to_source(node)}'",
                              to_source(node), _where(bad, env))
        return np.log(a)
    if fn == "sqrt":
        bad = a < 0
        if np.any(bad):
            raise DomainError(f"sqrt of negative argument in '{to_source(node)}'",
                              to_source(node), _where(bad, env))
        return np.sqrt(a)
    return getattr(np, "arctan" if fn == "atan" else fn)(a)


def _eval(e, env):
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        return env[e.name]
    if isinstance(e, Neg):
        return -_eval(e.arg, env)
    if isinstance(e, Call):
        return _apply(e.fn, _eval(e.arg, env), e.arg, env)
    a = _eval(e.left, env)
    b = _eval(e.right, env)
    if e.op == "+":
        return a + b
    if e.op == "-":
        return a - b
    if e.op == "*":
        return a * b
    if e.op == "/":
        bad = np.asarray(b) == 0
        if np.any(bad):
            raise DomainError(f"division by zero in '{to_source(e)}'",
                              to_source(e), _where(bad, env))
        return a / b
    # power
    b_arr = np.asarray(b, dtype=float)
    integral = b_arr == np.round(b_arr)
    a_arr = np.asarray(a, dtype=float)
    bad = (~integral & (a_arr <= 0)) | (integral & (b_arr < 0) & (a_arr == 0))
    if np.any(bad):
        raise DomainError(f"power with invalid base in '{to_source(e)}'",
                          to_source(e), _where(bad, env))
    return np.power(a_arr, b_arr) if a_arr.ndim or b_arr.ndim else float(a) ** float(b)


def evaluate(e: Expr, env: dict):
    """Evaluate on scalars or broadcastable numpy arrays.

    Raises DomainError naming the offending subexpression and point.
    """
    with np.errstate(all="ignore"):
        out = _eval(e, env)
    if not isinstance(out, np.ndarray):
        shape = np.broadcast(*[np.asarray(v) for v in env.values()]).shape if env else ()
        if shape:
            out = np.full(shape, out, dtype=float)
    return out


# ---------------------------------------------------------------------------
# derivative bundles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DiffBundle:
    """A potential and all of its partial derivatives through order three."""
    f: object
    fx: object
    fy: object
    fxx: object
    fxy: object
    fyy: object
    fxxx: object
    fxxy: object
    fxyy: object
    fyyy: object

    @property
    def hessian(self):
        return self.fxx, self.fxy, self.fyy


_BUNDLE_PATHS = {
    "f": "", "fx": "x", "fy": "y", "fxx": "xx", "fxy": "xy", "fyy": "yy",
    "fxxx": "xxx", "fxxy": "xxy", "fxyy": "xyy", "fyyy": "yyy",
}


class BundleTrees:
    """The ten derivative trees of a potential, built once."""

    def __init__(self, e: Expr):
        self.expr = e
        trees = {"": e}
        for path in ("x", "y", "xx", "xy", "yy", "xxx", "xxy", "xyy", "yyy"):
            trees[path] = differentiate(trees[path[:-1]], path[-1])
        self.trees = {name: trees[path] for name, path in _BUNDLE_PATHS.items()}

    def __call__(self, x, y):
        env = {"x": x, "y": y}
        return DiffBundle(**{k: evaluate(t, env) for k, t in self.trees.items()})


@lru_cache(maxsize=64)
def _bundle_trees(e):
    return BundleTrees(e)


def eval_bundle(e: Expr, point) -> DiffBundle:
    """All partials of `e` through order 3 at `point` = (x, y)."""
    x, y = point
    return _bundle_trees(e)(x, y)
