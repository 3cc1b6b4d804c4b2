"""Scalar fields as expression trees.

Fields are built from a closed set of primitives (+, -, *, /, power, exp,
log, sin, cos, sqrt, constants) so they can be differentiated symbolically
(any order) and evaluated to exact second-order jets. No simplification is
attempted beyond folding of zeros, ones and constant subtrees.
"""

from __future__ import annotations

import ast
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import jets
from .jets import DomainError, Jet2, SingularPointError

UNARY = ("neg", "exp", "log", "sin", "cos", "sqrt")


class Expr:
    __slots__ = ("op", "args", "data", "_diff", "__weakref__")

    def __init__(self, op: str, args: tuple = (), data=None):
        self.op = op
        self.args = args
        self.data = data
        self._diff = {}

    # -- construction helpers -------------------------------------------------
    @staticmethod
    def wrap(x) -> "Expr":
        if isinstance(x, Expr):
            return x
        if isinstance(x, ScalarField):
            return x.expr
        return const(float(x))

    def is_const(self, c=None) -> bool:
        return self.op == "const" and (c is None or self.data == c)

    def __add__(self, o):
        return add(self, Expr.wrap(o))

    def __radd__(self, o):
        return add(Expr.wrap(o), self)

    def __sub__(self, o):
        return add(self, neg(Expr.wrap(o)))

    def __rsub__(self, o):
        return add(Expr.wrap(o), neg(self))

    def __mul__(self, o):
        return mul(self, Expr.wrap(o))

    def __rmul__(self, o):
        return mul(Expr.wrap(o), self)

    def __truediv__(self, o):
        return div(self, Expr.wrap(o))

    def __rtruediv__(self, o):
        return div(Expr.wrap(o), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, o):
        return power(self, Expr.wrap(o))

    def __rpow__(self, o):
        return power(Expr.wrap(o), self)

    def diff(self, i: int) -> "Expr":
        d = self._diff.get(i)
        if d is None:
            d = _diff(self, i)
            self._diff[i] = d
        return d

    def __repr__(self):
        return to_string(self)


def const(c: float) -> Expr:
    return Expr("const", (), float(c))


def var(i: int) -> Expr:
    return Expr("var", (), i)


ZERO = const(0.0)
ONE = const(1.0)


def add(a: Expr, b: Expr) -> Expr:
    if a.is_const(0.0):
        return b
    if b.is_const(0.0):
        return a
    if a.is_const() and b.is_const():
        return const(a.data + b.data)
    return Expr("add", (a, b))


def neg(a: Expr) -> Expr:
    if a.is_const():
        return const(-a.data)
    if a.op == "neg":
        return a.args[0]
    return Expr("neg", (a,))


def mul(a: Expr, b: Expr) -> Expr:
    if a.is_const(0.0) or b.is_const(0.0):
        return ZERO
    if a.is_const(1.0):
        return b
    if b.is_const(1.0):
        return a
    if a.is_const() and b.is_const():
        return const(a.data * b.data)
    return Expr("mul", (a, b))


def div(a: Expr, b: Expr) -> Expr:
    if b.is_const(1.0):
        return a
    if a.is_const(0.0):
        return ZERO
    if a.is_const() and b.is_const() and b.data != 0.0:
        return const(a.data / b.data)
    return Expr("div", (a, b))


def power(a: Expr, b: Expr) -> Expr:
    if b.is_const():
        k = b.data
        if k == 0.0:
            return ONE
        if k == 1.0:
            return a
        if a.is_const() and (a.data > 0 or k == int(k)):
            return const(a.data**k)
        return Expr("pow", (a,), k)
    return exp_(mul(b, log_(a)))


def _unary(op: str, fn: Callable[[float], float]):
    def build(a):
        if isinstance(a, ScalarField):
            return ScalarField(build(a.expr), a.names, a.box)
        a = Expr.wrap(a)
        if a.is_const():
            try:
                return const(fn(a.data))
            except (ValueError, OverflowError):
                pass
        return Expr(op, (a,))

    build.__name__ = op
    return build


exp_ = _unary("exp", math.exp)
log_ = _unary("log", math.log)
sin_ = _unary("sin", math.sin)
cos_ = _unary("cos", math.cos)
sqrt_ = _unary("sqrt", math.sqrt)


def _diff(e: Expr, i: int) -> Expr:
    op = e.op
    if op == "const":
        return ZERO
    if op == "var":
        return ONE if e.data == i else ZERO
    if op == "add":
        return add(e.args[0].diff(i), e.args[1].diff(i))
    if op == "neg":
        return neg(e.args[0].diff(i))
    if op == "mul":
        a, b = e.args
        return add(mul(a.diff(i), b), mul(a, b.diff(i)))
    if op == "div":
        a, b = e.args
        num = add(mul(a.diff(i), b), neg(mul(a, b.diff(i))))
        return div(num, power(b, const(2.0)))
    a = e.args[0]
    da = a.diff(i)
    if da.is_const(0.0):
        return ZERO
    if op == "pow":
        k = e.data
        return mul(mul(const(k), power(a, const(k - 1.0))), da)
    if op == "exp":
        return mul(e, da)
    if op == "log":
        return div(da, a)
    if op == "sin":
        return mul(cos_(a), da)
    if op == "cos":
        return neg(mul(sin_(a), da))
    if op == "sqrt":
        return div(da, mul(const(2.0), e))
    raise ValueError(f"unknown op {op}")


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


def _check_den(v):
    if np.any(np.abs(v) < jets.SINGULAR_TOL):
        raise SingularPointError("denominator below singular tolerance")


def _np_log(v):
    if np.any(np.asarray(v) <= jets.SINGULAR_TOL):
        raise SingularPointError("log of non-positive value")
    return np.log(v)


def _np_sqrt(v):
    if np.any(np.asarray(v) <= jets.SINGULAR_TOL):
        raise SingularPointError("sqrt of non-positive value")
    return np.sqrt(v)


def _np_pow(v, k):
    if k != int(k) and np.any(np.asarray(v) <= 0.0):
        raise SingularPointError("non-integer power of non-positive base")
    if k < 0:
        _check_den(v)
    return np.power(v, k)


_NP = {"exp": np.exp, "log": _np_log, "sin": np.sin, "cos": np.cos, "sqrt": _np_sqrt}
_JET = {"exp": jets.exp, "log": jets.log, "sin": jets.sin, "cos": jets.cos, "sqrt": jets.sqrt}


def evaluate(e: Expr, env: Sequence, memo: Optional[dict] = None):
    """Evaluate ``e`` with variables bound to ``env`` (Jet2s, floats or arrays)."""
    if memo is None:
        memo = {}
    jet_mode = isinstance(env[0], Jet2) if len(env) else False
    table = _JET if jet_mode else _NP

    def ev(x: Expr):
        key = id(x)
        hit = memo.get(key)
        if hit is not None:
            return hit[1]
        op = x.op
        if op == "const":
            r = x.data
        elif op == "var":
            r = env[x.data]
        elif op == "add":
            r = ev(x.args[0]) + ev(x.args[1])
        elif op == "mul":
            r = ev(x.args[0]) * ev(x.args[1])
        elif op == "neg":
            r = -ev(x.args[0])
        elif op == "div":
            b = ev(x.args[1])
            if not jet_mode:
                _check_den(b)
            r = ev(x.args[0]) / b
        elif op == "pow":
            a = ev(x.args[0])
            r = a ** x.data if jet_mode else _np_pow(a, x.data)
        else:
            r = table[op](ev(x.args[0]))
        memo[key] = (x, r)  # keep x alive so id() stays unique
        return r

    return ev(e)


# ---------------------------------------------------------------------------
# ScalarField
# ---------------------------------------------------------------------------


def _as_expr(x) -> Expr:
    return Expr.wrap(x)


@dataclass(frozen=True, eq=False)
class ScalarField:
    """A scalar field on a chart of ``arity`` coordinates named ``names``."""

    expr: Expr
    names: tuple
    box: Optional[tuple] = None
    label: str = ""
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def arity(self) -> int:
        return len(self.names)

    @classmethod
    def from_callable(cls, fn: Callable, names: Sequence[str], box=None, label="") -> "ScalarField":
        names = tuple(names)
        out = fn(*[var(i) for i in range(len(names))])
        return cls(Expr.wrap(out), names, box, label)

    @classmethod
    def parse(cls, text: str, names: Sequence[str], box=None) -> "ScalarField":
        return cls(parse_expr(text, names), tuple(names), box, text)

    @classmethod
    def constant(cls, c: float, names: Sequence[str]) -> "ScalarField":
        return cls(const(c), tuple(names))

    def _index(self, v) -> int:
        return self.names.index(v) if isinstance(v, str) else int(v)

    def d(self, *vs) -> "ScalarField":
        e = self.expr
        for v in vs:
            e = e.diff(self._index(v))
        return ScalarField(e, self.names, self.box)

    def _bin(self, other, fn):
        o = other.expr if isinstance(other, ScalarField) else Expr.wrap(other)
        return ScalarField(fn(self.expr, o), self.names, self.box)

    def __add__(self, o):
        return self._bin(o, add)

    __radd__ = __add__

    def __sub__(self, o):
        return self._bin(o, lambda a, b: add(a, neg(b)))

    def __rsub__(self, o):
        return self._bin(o, lambda a, b: add(b, neg(a)))

    def __mul__(self, o):
        return self._bin(o, mul)

    __rmul__ = __mul__

    def __truediv__(self, o):
        return self._bin(o, div)

    def __rtruediv__(self, o):
        return self._bin(o, lambda a, b: div(b, a))

    def __neg__(self):
        return ScalarField(neg(self.expr), self.names, self.box)

    def __pow__(self, k):
        return self._bin(k, power)

    def check_point(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        if p.shape != (self.arity,):
            raise DomainError(f"expected a point with {self.arity} coordinates, got {p.shape}")
        if self.box is not None:
            lo, hi = np.asarray(self.box, dtype=float).T
            if np.any(p < lo) or np.any(p > hi):
                raise DomainError(f"point {p} outside box {self.box}")
        return p

    def jet(self, p) -> Jet2:
        return jet_eval(self, p)

    def __call__(self, *p) -> float:
        if len(p) == 1 and np.ndim(p[0]) == 1:
            p = tuple(p[0])
        pt = self.check_point(p)
        v = evaluate(self.expr, [float(c) for c in pt])
        if not np.isfinite(v):
            raise SingularPointError(f"non-finite value at {pt}")
        return float(v)

    def values(self, coords: Sequence[np.ndarray]) -> np.ndarray:
        """Vectorised evaluation over broadcastable coordinate arrays."""
        arrs = [np.asarray(c, dtype=float) for c in coords]
        shape = np.broadcast_shapes(*[a.shape for a in arrs])
        v = evaluate(self.expr, arrs)
        return np.broadcast_to(np.asarray(v, dtype=float), shape)

    def restrict(self, names: Sequence[str], fixed: dict) -> "ScalarField":
        """Substitute constants for some variables and re-index onto ``names``."""
        mapping = {}
        for i, nm in enumerate(self.names):
            mapping[i] = const(fixed[nm]) if nm in fixed else var(list(names).index(nm))
        return ScalarField(substitute(self.expr, mapping), tuple(names))

    def __repr__(self):
        return f"ScalarField({to_string(self.expr, self.names)})"


def jet_eval(f: ScalarField, p, memo: Optional[dict] = None) -> Jet2:
    """Exact value, gradient and Hessian of ``f`` at ``p``."""
    pt = f.check_point(p)
    n = f.arity
    env = [Jet2.variable(pt[i], i, n) for i in range(n)]
    r = evaluate(f.expr, env, memo)
    if not isinstance(r, Jet2):
        r = Jet2.constant(r, n)
    if not (np.isfinite(r.value) and np.all(np.isfinite(r.grad)) and np.all(np.isfinite(r.hess))):
        raise SingularPointError(f"non-finite jet at {pt}")
    return r


def eval_jets(exprs: Sequence[Expr], p: np.ndarray) -> list:
    """Evaluate several expressions over one shared memo (common subtrees once)."""
    n = len(p)
    env = [Jet2.variable(float(p[i]), i, n) for i in range(n)]
    memo: dict = {}
    out = []
    for e in exprs:
        r = evaluate(e, env, memo)
        if not isinstance(r, Jet2):
            r = Jet2.constant(r, n)
        if not np.isfinite(r.value) or not np.all(np.isfinite(r.hess)):
            raise SingularPointError(f"non-finite jet at {p}")
        out.append(r)
    return out


def substitute(e: Expr, mapping: dict) -> Expr:
    """Replace ``var(i)`` by ``mapping[i]`` throughout ``e``."""
    memo: dict = {}

    def sub(x: Expr) -> Expr:
        key = id(x)
        if key in memo:
            return memo[key]
        if x.op == "var":
            r = mapping.get(x.data, x)
        elif x.op == "const":
            r = x
        elif x.op == "add":
            r = add(sub(x.args[0]), sub(x.args[1]))
        elif x.op == "mul":
            r = mul(sub(x.args[0]), sub(x.args[1]))
        elif x.op == "div":
            r = div(sub(x.args[0]), sub(x.args[1]))
        elif x.op == "neg":
            r = neg(sub(x.args[0]))
        elif x.op == "pow":
            r = power(sub(x.args[0]), const(x.data))
        else:
            r = {"exp": exp_, "log": log_, "sin": sin_, "cos": cos_, "sqrt": sqrt_}[x.op](sub(x.args[0]))
        memo[key] = r
        return r

    return sub(e)


def compose(f: ScalarField, args: Sequence, names: Sequence[str]) -> ScalarField:
    """``f(args...)`` where each arg is a ScalarField/Expr over ``names``."""
    mapping = {i: Expr.wrap(a) for i, a in enumerate(args)}
    return ScalarField(substitute(f.expr, mapping), tuple(names))


def partial(e, *idx: int) -> Expr:
    """Repeated symbolic partial derivative of an expression."""
    e = Expr.wrap(e)
    for i in idx:
        e = e.diff(i)
    return e


def det_expr(M) -> Expr:
    """Determinant of a small square matrix of expressions (Laplace expansion)."""
    M = [[Expr.wrap(c) for c in row] for row in M]
    n = len(M)
    if n == 1:
        return M[0][0]
    if n == 2:
        return M[0][0] * M[1][1] - M[0][1] * M[1][0]
    out = ZERO
    for j in range(n):
        if M[0][j].is_const(0.0):
            continue
        minor = [row[:j] + row[j + 1 :] for row in M[1:]]
        term = M[0][j] * det_expr(minor)
        out = out + term if j % 2 == 0 else out - term
    return out


def inverse_expr(M) -> list:
    """Symbolic inverse by cofactors; fine for the 2x2..4x4 matrices used here."""
    M = [[Expr.wrap(c) for c in row] for row in M]
    n = len(M)
    d = det_expr(M)
    inv = [[ZERO] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            minor = [row[:j] + row[j + 1 :] for k, row in enumerate(M) if k != i]
            c = det_expr(minor) if n > 1 else ONE
            if (i + j) % 2:
                c = neg(c)
            inv[j][i] = div(c, d)
    return inv


# ---------------------------------------------------------------------------
# Finite-difference cross-check
# ---------------------------------------------------------------------------


@dataclass
class FDReport:
    grad_error: float
    hess_error: float

    @property
    def discrepancy(self) -> float:
        return max(self.grad_error, self.hess_error)


def _fd(f: Callable, p: np.ndarray, h: float):
    n = len(p)
    eye = np.eye(n) * h
    f0 = f(p)
    g = np.array([(f(p + eye[i]) - f(p - eye[i])) / (2 * h) for i in range(n)])
    H = np.empty((n, n))
    for i in range(n):
        H[i, i] = (f(p + eye[i]) - 2 * f0 + f(p - eye[i])) / h**2
        for j in range(i + 1, n):
            H[i, j] = H[j, i] = (
                f(p + eye[i] + eye[j]) - f(p + eye[i] - eye[j]) - f(p - eye[i] + eye[j]) + f(p - eye[i] - eye[j])
            ) / (4 * h * h)
    return g, H


def fd_crosscheck(f: ScalarField, p, h: float = 1e-3) -> FDReport:
    """Richardson-extrapolated central differences of ``f`` against its jet."""
    if h <= 0:
        raise ValueError("step must be positive")
    p = np.asarray(p, dtype=float)
    j = jet_eval(f, p)
    fn = lambda q: float(evaluate(f.expr, [float(c) for c in q]))
    g1, H1 = _fd(fn, p, h)
    g2, H2 = _fd(fn, p, h / 2)
    g = (4 * g2 - g1) / 3
    H = (4 * H2 - H1) / 3
    return FDReport(float(np.max(np.abs(g - j.grad))), float(np.max(np.abs(H - j.hess))))


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_FUNCS = {"exp": exp_, "log": log_, "ln": log_, "sin": sin_, "cos": cos_, "sqrt": sqrt_}
_CONSTS = {"pi": math.pi, "e": math.e}


class ExpressionError(ValueError):
    pass


def parse_expr(text: str, names: Sequence[str]) -> Expr:
    """Parse an arithmetic expression over ``names``; ``^`` means power."""
    src = text.replace("^", "**")
    try:
        tree = ast.parse(src.strip(), mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse {text!r}: {exc.msg}") from None
    names = list(names)

    def walk(node) -> Expr:
        if isinstance(node, ast.Expression):
            return walk(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return const(node.value)
        if isinstance(node, ast.Name):
            if node.id in names:
                return var(names.index(node.id))
            if node.id in _CONSTS:
                return const(_CONSTS[node.id])
            raise ExpressionError(f"unknown symbol {node.id!r} (variables: {', '.join(names)})")
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            a = walk(node.operand)
            return neg(a) if isinstance(node.op, ast.USub) else a
        if isinstance(node, ast.BinOp):
            a, b = walk(node.left), walk(node.right)
            ops = {ast.Add: add, ast.Mult: mul, ast.Div: div, ast.Pow: power}
            if isinstance(node.op, ast.Sub):
                return add(a, neg(b))
            for k, fn in ops.items():
                if isinstance(node.op, k):
                    return fn(a, b)
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCS:
            if len(node.args) != 1 or node.keywords:
                raise ExpressionError(f"{node.func.id} takes one argument")
            return _FUNCS[node.func.id](walk(node.args[0]))
        raise ExpressionError(f"unsupported syntax in {text!r}")

    return walk(tree)


def to_string(e: Expr, names: Optional[Sequence[str]] = None) -> str:
    if e.op == "const":
        return repr(e.data)
    if e.op == "var":
        return names[e.data] if names else f"x{e.data}"
    s = [to_string(a, names) for a in e.args]
    if e.op == "add":
        return f"({s[0]} + {s[1]})"
    if e.op == "mul":
        return f"{s[0]}*{s[1]}"
    if e.op == "div":
        return f"{s[0]}/({s[1]})"
    if e.op == "neg":
        return f"-({s[0]})"
    if e.op == "pow":
        return f"({s[0]})^{e.data!r}"
    return f"{e.op}({s[0]})"


# math-style aliases for building fields in Python
exp = exp_
log = log_
sin = sin_
cos = cos_
sqrt = sqrt_
