"""Radial function expressions, second-order forward differentiation and quadrature.

Expressions are parsed once into a small tree and evaluated as 2-jets
(value, first and second derivative).  Evaluation accepts floats or numpy
arrays; arrays are evaluated elementwise in one pass.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

FUNCTIONS = ("sin", "cos", "tan", "sinh", "cosh", "tanh", "exp", "log", "sqrt", "atan", "abs")
CONSTANTS = {"pi": math.pi, "e": math.e}


class ParseError(ValueError):
    """Syntax error with a 1-based character offset and the set of expected tokens."""

    def __init__(self, message: str, offset: int, expected: Sequence[str], source: str):
        self.offset = offset
        self.expected = tuple(expected)
        self.source = source
        exp = ", ".join(repr(e) for e in self.expected)
        super().__init__(f"{message} at offset {offset} in {source!r} (expected {exp})")


class DomainError(ArithmeticError):
    """Evaluation outside the domain of a sub-expression."""

    def __init__(self, message: str, subexpr: str, point):
        self.subexpr = subexpr
        self.point = point
        super().__init__(f"{message} in '{subexpr}' at {point}")


class QuadratureError(ArithmeticError):
    """Adaptive quadrature did not reach the requested tolerance."""

    def __init__(self, message: str, estimate: float, error: float):
        self.estimate = estimate
        self.error = error
        super().__init__(f"{message}: estimate {estimate!r}, error bound {error!r}")


class BracketError(ValueError):
    """Target value is not bracketed by the interval endpoints."""


# --------------------------------------------------------------------------- parsing

@dataclass(frozen=True)
class Node:
    kind: str  # num, var, neg, bin, call
    start: int
    end: int
    value: float = 0.0
    op: str = ""
    args: tuple = ()


@dataclass(frozen=True)
class Token:
    kind: str  # num, ident, op, lparen, rparen, eof
    text: str
    pos: int  # 0-based


def _tokenize(text: str) -> list[Token]:
    tokens = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
        elif ch.isdigit() or (ch == "." and i + 1 < n and text[i + 1].isdigit()):
            j = i
            while j < n and text[j].isdigit():
                j += 1
            if j < n and text[j] == ".":
                j += 1
                while j < n and text[j].isdigit():
                    j += 1
            # optional exponent, only when followed by digits
            if j < n and text[j] in "eE":
                k = j + 1
                if k < n and text[k] in "+-":
                    k += 1
                if k < n and text[k].isdigit():
                    while k < n and text[k].isdigit():
                        k += 1
                    j = k
            tokens.append(Token("num", text[i:j], i))
            i = j
        elif ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(Token("ident", text[i:j], i))
            i = j
        elif ch in "+-*/^":
            tokens.append(Token("op", ch, i))
            i += 1
        elif ch == "(":
            tokens.append(Token("lparen", ch, i))
            i += 1
        elif ch == ")":
            tokens.append(Token("rparen", ch, i))
            i += 1
        else:
            raise ParseError(f"unexpected character {ch!r}", i + 1, ["number", "identifier", "operator"], text)
    tokens.append(Token("eof", "", n))
    return tokens


_ATOM_START = ("number", "variable", "function", "constant", "(", "-")


class _Parser:
    def __init__(self, text: str, variable: str):
        self.text = text
        self.variable = variable
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self) -> Token:
        return self.tokens[self.i]

    def advance(self) -> Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def fail(self, message: str, tok: Token, expected: Sequence[str]):
        raise ParseError(message, tok.pos + 1, expected, self.text)

    def parse(self) -> Node:
        node = self.expr()
        tok = self.peek()
        if tok.kind != "eof":
            if tok.kind == "lparen":
                self.fail("arity mismatch: only functions take arguments", tok, ["operator", "end of input"])
            self.fail(f"unexpected token {tok.text!r}", tok, ["operator", "end of input"])
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek().kind == "op" and self.peek().text in "+-":
            op = self.advance().text
            rhs = self.term()
            node = Node("bin", node.start, rhs.end, op=op, args=(node, rhs))
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.peek().kind == "op" and self.peek().text in "*/":
            op = self.advance().text
            rhs = self.unary()
            node = Node("bin", node.start, rhs.end, op=op, args=(node, rhs))
        return node

    def unary(self) -> Node:
        tok = self.peek()
        if tok.kind == "op" and tok.text == "-":
            self.advance()
            arg = self.unary()
            return Node("neg", tok.pos, arg.end, args=(arg,))
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self.peek().kind == "op" and self.peek().text == "^":
            self.advance()
            exponent = self.unary()  # right associative
            return Node("bin", base.start, exponent.end, op="^", args=(base, exponent))
        return base

    def atom(self) -> Node:
        tok = self.advance()
        if tok.kind == "num":
            return Node("num", tok.pos, tok.pos + len(tok.text), value=float(tok.text))
        if tok.kind == "lparen":
            inner = self.expr()
            close = self.advance()
            if close.kind != "rparen":
                self.fail("missing closing parenthesis", close, [")"])
            return Node(inner.kind, tok.pos, close.pos + 1, inner.value, inner.op, inner.args)
        if tok.kind == "ident":
            name = tok.text
            end = tok.pos + len(name)
            if name in FUNCTIONS:
                nxt = self.advance()
                if nxt.kind != "lparen":
                    self.fail(f"arity mismatch: function {name!r} needs one argument", nxt, ["("])
                if self.peek().kind == "rparen":
                    self.fail(f"arity mismatch: function {name!r} needs one argument", self.peek(), _ATOM_START)
                arg = self.expr()
                close = self.advance()
                if close.kind != "rparen":
                    self.fail("missing closing parenthesis", close, [")"])
                return Node("call", tok.pos, close.pos + 1, op=name, args=(arg,))
            if name == self.variable:
                return Node("var", tok.pos, end)
            if name in CONSTANTS:
                return Node("num", tok.pos, end, value=CONSTANTS[name])
            expected = [self.variable, *CONSTANTS, *FUNCTIONS]
            self.fail(f"unknown identifier {name!r}", tok, expected)
        if tok.kind == "eof":
            self.fail("unexpected end of input", tok, _ATOM_START)
        self.fail(f"unexpected token {tok.text!r}", tok, _ATOM_START)


def _is_constant(node: Node) -> bool:
    if node.kind == "var":
        return False
    return all(_is_constant(a) for a in node.args)


# --------------------------------------------------------------------------- jets

@dataclass(frozen=True)
class Jet2:
    """Value with first and second derivative."""

    value: float
    d1: float
    d2: float


_Jet = tuple  # (value, d1, d2) with float or ndarray entries


def _bad(mask) -> bool:
    return bool(np.any(mask))


def _first_bad(point, mask) -> float:
    point = np.asarray(point, dtype=float)
    if point.ndim == 0:
        return float(point)
    return float(point[np.broadcast_to(mask, point.shape)].flat[0])


@dataclass(frozen=True)
class RadialExpr:
    """A parsed closed-form function of one variable."""

    ast: Node = field(repr=False)
    source: str
    variable: str = "r"

    def _sub(self, node: Node) -> str:
        return self.source[node.start:node.end]

    def jet(self, x, order: int = 2) -> _Jet:
        """Evaluate (value, d1, d2) at x (float or array); order 0 skips derivatives."""
        x = np.asarray(x, dtype=float)
        with np.errstate(all="ignore"):
            v, d1, d2 = self._eval(self.ast, x, order)
        return v, d1, d2

    def __call__(self, x):
        v = self.jet(x, order=0)[0]
        return float(v) if np.ndim(v) == 0 else v

    def derivative(self, x):
        d1 = self.jet(x, order=1)[1]
        return float(d1) if np.ndim(d1) == 0 else d1

    @property
    def is_constant(self) -> bool:
        return _is_constant(self.ast)

    def _check(self, node: Node, x, mask, message: str):
        if _bad(mask):
            raise DomainError(message, self._sub(node), _first_bad(x, mask))

    def _finite(self, node: Node, x, jet: _Jet, order: int) -> _Jet:
        v, d1, d2 = jet
        bad = ~np.isfinite(v)
        if order >= 1:
            bad = bad | ~np.isfinite(d1)
        if order >= 2:
            bad = bad | ~np.isfinite(d2)
        self._check(node, x, bad, "non-finite result")
        return jet

    def _eval(self, node: Node, x, order: int) -> _Jet:
        kind = node.kind
        if kind == "num":
            return node.value + 0.0 * x, 0.0 * x, 0.0 * x
        if kind == "var":
            return x, 1.0 + 0.0 * x, 0.0 * x
        if kind == "neg":
            v, d1, d2 = self._eval(node.args[0], x, order)
            return -v, -d1, -d2
        if kind == "bin":
            return self._finite(node, x, self._binary(node, x, order), order)
        return self._finite(node, x, self._call(node, x, order), order)

    def _binary(self, node: Node, x, order: int) -> _Jet:
        lhs, rhs = node.args
        op = node.op
        if op == "^" and _is_constant(rhs):
            a = self._eval(lhs, x, order)
            n = float(self._eval(rhs, np.asarray(0.0), 0)[0])
            return self._power_const(node, x, a, n, order)
        a = self._eval(lhs, x, order)
        b = self._eval(rhs, x, order)
        av, a1, a2 = a
        bv, b1, b2 = b
        if op == "+":
            return av + bv, a1 + b1, a2 + b2
        if op == "-":
            return av - bv, a1 - b1, a2 - b2
        if op == "*":
            return av * bv, a1 * bv + av * b1, a2 * bv + 2.0 * a1 * b1 + av * b2
        if op == "/":
            self._check(node, x, bv == 0.0, "division by zero")
            v = av / bv
            v1 = (a1 - v * b1) / bv
            v2 = (a2 - 2.0 * v1 * b1 - v * b2) / bv
            return v, v1, v2
        # variable exponent: a^b = exp(b log a)
        self._check(node, x, av <= 0.0, "power with variable exponent needs a positive base")
        la = np.log(av)
        l1 = a1 / av
        l2 = a2 / av - l1 * l1
        e = bv * la
        e1 = b1 * la + bv * l1
        e2 = b2 * la + 2.0 * b1 * l1 + bv * l2
        v = np.exp(e)
        return v, v * e1, v * (e2 + e1 * e1)

    def _power_const(self, node: Node, x, a: _Jet, n: float, order: int) -> _Jet:
        av, a1, a2 = a
        if n == 0.0:
            return 1.0 + 0.0 * av, 0.0 * av, 0.0 * av
        if n == 1.0:
            return a
        integer = n == round(n)
        if integer:
            if n < 0:
                self._check(node, x, av == 0.0, "division by zero")
        else:
            self._check(node, x, av < 0.0, "fractional power of a negative number")
            if order >= 1 and n < 1.0:
                self._check(node, x, av == 0.0, "unbounded derivative of fractional power at 0")
            if order >= 2 and n < 2.0:
                self._check(node, x, (av == 0.0) & (a1 != 0.0), "unbounded second derivative of fractional power at 0")
        v = av ** n
        p1 = n * av ** (n - 1.0)
        p2 = n * (n - 1.0) * av ** (n - 2.0) if n != 1.0 else 0.0 * av
        if order < 2:
            p2 = 0.0 * av
        return v, p1 * a1, p2 * a1 * a1 + p1 * a2

    def _call(self, node: Node, x, order: int) -> _Jet:
        name = node.op
        u, u1, u2 = self._eval(node.args[0], x, order)
        if name == "sin":
            f, f1, f2 = np.sin(u), np.cos(u), -np.sin(u)
        elif name == "cos":
            f, f1, f2 = np.cos(u), -np.sin(u), -np.cos(u)
        elif name == "tan":
            self._check(node, x, np.cos(u) == 0.0, "tan pole")
            f = np.tan(u)
            f1 = 1.0 + f * f
            f2 = 2.0 * f * f1
        elif name == "sinh":
            f, f1, f2 = np.sinh(u), np.cosh(u), np.sinh(u)
        elif name == "cosh":
            f, f1, f2 = np.cosh(u), np.sinh(u), np.cosh(u)
        elif name == "tanh":
            f = np.tanh(u)
            f1 = 1.0 - f * f
            f2 = -2.0 * f * f1
        elif name == "exp":
            f = np.exp(u)
            f1 = f2 = f
        elif name == "log":
            self._check(node, x, u <= 0.0, "log of a non-positive number")
            f = np.log(u)
            f1 = 1.0 / u
            f2 = -f1 * f1
        elif name == "sqrt":
            self._check(node, x, u < 0.0, "sqrt of a negative number")
            if order >= 1:
                self._check(node, x, (u == 0.0) & ((u1 != 0.0) | (u2 != 0.0)), "unbounded derivative of sqrt at 0")
            f = np.sqrt(u)
            safe = np.where(u == 0.0, 1.0, u)
            f1 = np.where(u == 0.0, 0.0, 0.5 / np.sqrt(safe))
            f2 = np.where(u == 0.0, 0.0, -0.25 / (safe * np.sqrt(safe)))
        elif name == "atan":
            f = np.arctan(u)
            f1 = 1.0 / (1.0 + u * u)
            f2 = -2.0 * u * f1 * f1
        elif name == "abs":
            if order >= 1:
                self._check(node, x, (u == 0.0) & (u1 != 0.0), "abs is not differentiable at 0")
            f = np.abs(u)
            f1 = np.sign(u)
            f2 = 0.0 * u
        else:  # pragma: no cover - parser only admits known names
            raise DomainError("unknown function", self._sub(node), x)
        if order == 0:
            return f, 0.0 * u, 0.0 * u
        return f, f1 * u1, f2 * u1 * u1 + f1 * u2


def parse_radial(text: str, variable: str = "r") -> RadialExpr:
    """Parse an expression in the free variable (``r`` by default)."""
    return RadialExpr(_Parser(text, variable).parse(), text, variable)


def as_expr(f, variable: str = "r") -> RadialExpr:
    """Accept either an already parsed expression or its text."""
    if isinstance(f, RadialExpr):
        return f
    if isinstance(f, (int, float)):
        return parse_radial(repr(float(f)), variable)
    return parse_radial(str(f), variable)


def eval2(f: RadialExpr, r) -> Jet2:
    """Value, first and second derivative of f at r."""
    v, d1, d2 = f.jet(r, order=2)
    if np.ndim(v) == 0:
        return Jet2(float(v), float(d1), float(d2))
    return Jet2(v, d1, d2)


# --------------------------------------------------------------------------- quadrature

_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

# 15 nodes on [-1, 1] with Kronrod and embedded Gauss weights
GK_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
GK_WEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
_G_FULL = np.zeros(8)
_G_FULL[1::2] = _WG
G_WEIGHTS = np.concatenate([_G_FULL[:-1], _G_FULL[::-1]])


def gk15_panels(f: Callable, left, right):
    """Apply the 15-point rule on many panels at once (f must accept arrays).

    Returns (kronrod estimates, |kronrod - gauss| error estimates).
    """
    left = np.asarray(left, dtype=float)
    right = np.asarray(right, dtype=float)
    half = 0.5 * (right - left)
    mid = 0.5 * (right + left)
    pts = mid[..., None] + half[..., None] * GK_NODES
    vals = np.asarray(f(pts), dtype=float)
    k = half * (vals @ GK_WEIGHTS)
    g = half * (vals @ G_WEIGHTS)
    return k, np.abs(k - g)


def _panel(f: Callable, a: float, b: float, vectorized: bool):
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    pts = mid + half * GK_NODES
    if vectorized:
        vals = np.asarray(f(pts), dtype=float)
    else:
        vals = np.array([f(float(p)) for p in pts])
    if not np.all(np.isfinite(vals)):
        raise QuadratureError(f"integrand not finite on [{a}, {b}]", math.nan, math.inf)
    k = half * float(vals @ GK_WEIGHTS)
    g = half * float(vals @ G_WEIGHTS)
    return k, abs(k - g)


def integrate(f: Callable, a: float, b: float, abs_tol: float = 1e-10, rel_tol: float = 1e-10,
              *, vectorized: bool = False, max_depth: int = 50, max_panels: int = 20000) -> float:
    """Globally adaptive Gauss-Kronrod (7/15) quadrature of f over [a, b].

    The panel with the largest error estimate is bisected until the total
    estimate is below max(abs_tol, rel_tol*|result|).  Panels deeper than
    ``max_depth`` are no longer split.
    """
    if not (math.isfinite(a) and math.isfinite(b)):
        raise ValueError("integration limits must be finite")
    if b < a:
        raise ValueError(f"integrate needs a <= b, got [{a}, {b}]")
    if a == b:
        return 0.0
    k, e = _panel(f, a, b, vectorized)
    heap = [(-e, a, b, k, e, 0)]
    frozen = []  # panels at the depth cap
    total = k
    err = e
    panels = 1
    while err > max(abs_tol, rel_tol * abs(total)):
        if not heap:
            raise QuadratureError("recursion depth cap reached", total, err)
        if panels >= max_panels:
            raise QuadratureError("maximum number of panels reached", total, err)
        _, lo, hi, pk, pe, depth = heapq.heappop(heap)
        if depth >= max_depth:
            frozen.append((lo, hi, pk, pe))
            continue
        mid = 0.5 * (lo + hi)
        k1, e1 = _panel(f, lo, mid, vectorized)
        k2, e2 = _panel(f, mid, hi, vectorized)
        panels += 1
        heapq.heappush(heap, (-e1, lo, mid, k1, e1, depth + 1))
        heapq.heappush(heap, (-e2, mid, hi, k2, e2, depth + 1))
        total += k1 + k2 - pk
        err += e1 + e2 - pe
        if err <= max(abs_tol, rel_tol * abs(total)) or panels % 64 == 0:
            # resum exactly so running updates cannot drift
            total = math.fsum([p[3] for p in heap] + [p[2] for p in frozen])
            err = math.fsum([p[4] for p in heap] + [p[3] for p in frozen])
    return total


# --------------------------------------------------------------------------- inversion

def invert_monotone(f: Callable[[float], float], target: float, lo: float, hi: float, tol: float = 1e-12,
                    *, df: Callable[[float], float] | None = None, max_iter: int = 200) -> float:
    """Solve f(x) = target for strictly monotone f on [lo, hi].

    Newton steps (when df is given) or secant steps are taken while they stay
    inside the current bracket; otherwise the bracket is bisected.
    """
    flo = f(lo) - target
    fhi = f(hi) - target
    if abs(flo) <= tol:
        return lo
    if abs(fhi) <= tol:
        return hi
    if flo * fhi > 0.0:
        raise BracketError(f"target {target} not bracketed by f({lo})={flo + target}, f({hi})={fhi + target}")
    a, fa, b, fb = lo, flo, hi, fhi
    x, fx = (a, fa) if abs(fa) < abs(fb) else (b, fb)
    for it in range(max_iter):
        if df is not None:
            d = df(x)
            step = x - fx / d if d != 0.0 else math.nan
        else:
            step = b - fb * (b - a) / (fb - fa) if fb != fa else math.nan
        if not (min(a, b) < step < max(a, b)) or not math.isfinite(step):
            step = 0.5 * (a + b)
        # guard against stagnating secant steps
        if df is None and abs(step - x) < 0.25 * abs(b - a) and it % 3 == 2:
            step = 0.5 * (a + b)
        x = step
        fx = f(x) - target
        if abs(fx) <= tol:
            return x
        if fa * fx < 0.0:
            b, fb = x, fx
        else:
            a, fa = x, fx
        if abs(b - a) <= 4.0 * np.finfo(float).eps * max(1.0, abs(x)):
            break
    return x if abs(fx) <= min(abs(fa), abs(fb)) else (a if abs(fa) < abs(fb) else b)


# --------------------------------------------------------------------------- improper integrals

@dataclass(frozen=True)
class ImproperPolicy:
    initial_horizon: float = 16.0
    doublings: int = 14
    decay_ratio: float = 0.5


@dataclass(frozen=True)
class ConvergenceVerdict:
    kind: str  # Divergent, Convergent, Inconclusive
    partial_values: tuple  # ((horizon, partial integral), ...)
    rationale: str

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "partial_values": [[h, v] for h, v in self.partial_values],
            "rationale": self.rationale,
        }


DIVERGENCE_RATIO = 0.9
_RATIO_SLACK = 1e-6  # absorbs quadrature noise when a ratio sits exactly on the threshold


def horizons(a: float, policy: ImproperPolicy) -> list[float]:
    return [a * policy.initial_horizon * 2.0 ** k for k in range(policy.doublings + 1)]


def classify_increments(hs: Sequence[float], increments: Sequence[float], policy: ImproperPolicy) -> ConvergenceVerdict:
    """Decide convergence from the panel integrals over [h_{k-1}, h_k]."""
    partial = np.cumsum(increments)
    trace = tuple((float(h), float(p)) for h, p in zip(hs, partial))
    ratios = []
    for k in range(1, len(increments)):
        prev, cur = increments[k - 1], increments[k]
        if prev == 0.0:
            ratios.append(0.0 if cur == 0.0 else math.inf)
        else:
            ratios.append(cur / prev)
    last = ratios[-3:]
    shown = ", ".join(f"{q:.4g}" for q in last)
    if len(last) < 3:
        return ConvergenceVerdict("Inconclusive", trace, "too few doublings to judge")
    if all(q <= policy.decay_ratio * (1.0 + _RATIO_SLACK) for q in last):
        return ConvergenceVerdict(
            "Convergent", trace,
            f"increment ratios of the final doublings ({shown}) stay at or below {policy.decay_ratio}: geometric decay")
    if all(q >= 1.0 for q in last):
        return ConvergenceVerdict(
            "Divergent", trace, f"increments are non-decreasing over the final doublings (ratios {shown})")
    if all(q >= DIVERGENCE_RATIO for q in last):
        return ConvergenceVerdict(
            "Divergent", trace,
            f"increments shrink too slowly (ratios {shown} >= {DIVERGENCE_RATIO}): partial integrals keep growing, "
            "consistent with logarithmic-type divergence")
    return ConvergenceVerdict("Inconclusive", trace, f"final increment ratios ({shown}) fit neither pattern")


def classify_improper(f: Callable, a: float, policy: ImproperPolicy | None = None, *,
                      abs_tol: float = 1e-10, rel_tol: float = 1e-10, vectorized: bool = False) -> ConvergenceVerdict:
    """Classify the improper integral of a nonnegative f over [a, inf) by doubling horizons."""
    policy = policy or ImproperPolicy()
    if policy.doublings < 4:
        raise ValueError("policy.doublings must be at least 4")
    if a <= 0.0:
        raise ValueError("classify_improper needs a > 0 so that horizons a*2^k grow")
    hs = horizons(a, policy)
    edges = [a, *hs]
    increments = [integrate(f, lo, hi, abs_tol, rel_tol, vectorized=vectorized) for lo, hi in zip(edges[:-1], edges[1:])]
    return classify_increments(hs, increments, policy)
