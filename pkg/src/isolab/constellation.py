"""Isoperimetric comparison spaces C^m_{w,g,h} built from radial bounding functions.

Given an ambient warping w, a tangency bound g and a convexity bound h, the
comparison space has warping W(s) = Lambda(r(s))^(1/(m-1)) where

    Lambda(r) w(r) g(r) = T exp(-int_r^anchor m/g^2 (eta_w - h) dt)

and s(r) = int_0^r dt/g is the stretched radius.  The integrand has a
simple pole m/t at 0 which is split off analytically; the remainder

    zeta(t) = m/g(t)^2 (eta_w(t) - h(t)) - m/t

is bounded, so Lambda(r) = T (r/anchor)^m / (w g) exp(-int_r^anchor zeta).
T is fixed by requiring Lambda(r) ~ r^(m-1) at the pole.

Everything is tabulated once on Chebyshev-spaced nodes.  Between nodes,
Lambda uses cubic Hermite interpolation of log G, G(r) = Lambda(r)/r^(m-1), while
s(r) and int_0^r Lambda/g are completed with one 15-point panel from the
nearest node.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .model_space import check_warping
from .radial_fn import RadialExpr, as_expr, gk15_panels, integrate, invert_monotone

ZETA_SWITCH = 1e-4  # below this radius zeta is extrapolated instead of evaluated
G_TOL = 1e-8


class ConstellationError(ValueError):
    """Invalid bounding functions for a comparison constellation."""


class NumericalError(ArithmeticError):
    """A numerical step of the construction failed or lost accuracy."""


class ConsistencyError(NumericalError):
    """Strong balance held on the grid but the weak condition failed."""


GEOMETRIC_FROM = 16.0


def chebyshev_nodes(R: float, n: int) -> np.ndarray:
    j = np.arange(n)
    r = 0.5 * R * (1.0 - np.cos(math.pi * j / (n - 1)))
    r[0], r[-1] = 0.0, R
    if R > GEOMETRIC_FROM:
        # long intervals: Chebyshev spacing is too coarse at moderate radii
        r = np.union1d(r, np.geomspace(1e-2, R, n))
        r = r[np.concatenate([[True], np.diff(r) > 1e-12 * R])]
        r[-1] = R
    return r


def _quadratic_extrapolate(f, t: np.ndarray, base: float) -> np.ndarray:
    """Evaluate the quadratic through f(base), f(2 base), f(4 base) at t."""
    x = np.array([base, 2.0 * base, 4.0 * base])
    y = np.asarray(f(x), dtype=float)
    t = np.asarray(t, dtype=float)
    l0 = (t - x[1]) * (t - x[2]) / ((x[0] - x[1]) * (x[0] - x[2]))
    l1 = (t - x[0]) * (t - x[2]) / ((x[1] - x[0]) * (x[1] - x[2]))
    l2 = (t - x[0]) * (t - x[1]) / ((x[2] - x[0]) * (x[2] - x[1]))
    return y[0] * l0 + y[1] * l1 + y[2] * l2


def _regularized(f):
    """Wrap f so that points below ZETA_SWITCH use quadratic extrapolation."""

    def wrapped(t):
        t = np.asarray(t, dtype=float)
        small = t < ZETA_SWITCH
        if not np.any(small):
            return f(t)
        out = np.empty_like(t)
        if np.any(~small):
            out[~small] = f(t[~small])
        out[small] = _quadratic_extrapolate(f, t[small], ZETA_SWITCH)
        return out

    return wrapped


@dataclass(frozen=True)
class Constellation:
    """A comparison constellation (w, g, h, m) on [0, R] with its derived tables."""

    w: RadialExpr
    g: RadialExpr
    h: RadialExpr
    m: int
    R: float
    T: float
    anchor: float
    tol: float
    nodes: np.ndarray = field(repr=False)
    zeta_tab: np.ndarray = field(repr=False)
    lambda_tab: np.ndarray = field(repr=False)
    s_tab: np.ndarray = field(repr=False)
    volume_tab: np.ndarray = field(repr=False)  # int_0^r Lambda/g
    interp_error: float = 0.0
    _G: CubicHermiteSpline = field(repr=False, default=None)
    _r_of_s: CubicHermiteSpline = field(repr=False, default=None)

    # -- vectorized internals -------------------------------------------------

    def _inv_g(self, t):
        return 1.0 / self.g.jet(t, order=0)[0]

    def lam(self, r):
        """Lambda at r (array friendly)."""
        r = np.asarray(r, dtype=float)
        G = np.exp(self._G(r))
        return np.where(r > 0.0, np.abs(r) ** (self.m - 1) * G, 0.0)

    def _lam_over_g(self, t):
        return self.lam(t) * self._inv_g(t)

    def _cumulative(self, table: np.ndarray, f, r):
        """table[j] + int_{nodes[j]}^r f with j the node left of r."""
        r = np.asarray(r, dtype=float)
        flat = np.atleast_1d(r).ravel()
        idx = np.clip(np.searchsorted(self.nodes, flat, side="right") - 1, 0, len(self.nodes) - 2)
        left = self.nodes[idx]
        k, _ = gk15_panels(f, left, flat)
        out = table[idx] + k
        return out.reshape(np.shape(r)) if np.ndim(r) else float(out[0])

    def s(self, r):
        return self._cumulative(self.s_tab, self._inv_g, r)

    def volume(self, r):
        """int_0^r Lambda/g, the V0-free volume of the comparison ball of radius s(r)."""
        return self._cumulative(self.volume_tab, self._lam_over_g, r)

    def q(self, r):
        """q_W(s(r)) = volume / Lambda in r coordinates (0 at the pole)."""
        r = np.asarray(r, dtype=float)
        lam = self.lam(r)
        vol = self.volume(r)
        safe = np.where(lam > 0.0, lam, 1.0)
        out = np.where(r > 0.0, vol / safe, 0.0)
        return float(out) if np.ndim(out) == 0 else out

    def r_of_s(self, s):
        """Inverse stretching, spline start refined by Newton steps."""
        s = np.asarray(s, dtype=float)
        r = np.clip(self._r_of_s(s), 0.0, self.R)
        for _ in range(3):
            r = np.clip(r - (np.asarray(self.s(r)) - s) * self.g.jet(r, order=0)[0], 0.0, self.R)
        return float(r) if np.ndim(r) == 0 else r

    @property
    def s_R(self) -> float:
        return float(self.s_tab[-1])

    def summary(self) -> dict:
        return {
            "w": self.w.source, "g": self.g.source, "h": self.h.source, "m": self.m, "R": self.R,
            "T": self.T, "anchor": self.anchor, "s_R": self.s_R,
            "lambda_R": float(self.lambda_tab[-1]), "interp_error": self.interp_error,
        }


# --------------------------------------------------------------------------- construction

def _validate(w: RadialExpr, g: RadialExpr, h: RadialExpr, m: int, R: float, nodes: np.ndarray,
              allow_g_above_one: bool) -> None:
    if m < 2:
        raise ConstellationError(f"dimension must be at least 2, got {m}")
    if not (R > 0.0 and math.isfinite(R)):
        raise ConstellationError(f"radius must be positive and finite, got {R}")
    check_warping(w, R)
    if not w(R) > 0.0:
        raise ConstellationError(f"warping {w.source!r} is not positive at R={R}")
    g0 = g(0.0)
    if abs(g0 - 1.0) > G_TOL:
        raise ConstellationError(f"tangency bound needs g(0)=1, got g(0)={g0!r}")
    gv = np.asarray(g(nodes))
    if np.any(gv <= 0.0):
        bad = float(nodes[np.argmax(gv <= 0.0)])
        raise ConstellationError(f"tangency bound g must be positive, g({bad})={g(bad)!r}")
    if not allow_g_above_one and np.any(gv > 1.0 + 1e-12):
        bad = float(nodes[np.argmax(gv > 1.0 + 1e-12)])
        raise ConstellationError(
            f"tangency bound exceeds 1 at r={bad} (g={g(bad)!r}); pass allow_g_above_one to override")
    hv = np.asarray(h(nodes))
    if not np.all(np.isfinite(hv)):
        raise ConstellationError("convexity bound h must be finite on [0, R]")


LOG_MAX = 700.0  # Lambda and its volumes must stay well inside double range


def _segment_integrals(f, nodes: np.ndarray, tol: float) -> np.ndarray:
    """Integrals of f over consecutive node segments, refined where one panel is not enough."""
    k, err = gk15_panels(f, nodes[:-1], nodes[1:])
    if not np.all(np.isfinite(k)):
        raise NumericalError("integrand is not finite on the tabulation grid")
    seg_tol = max(tol, 1e-15 * float(np.sum(np.abs(k)))) / len(k)
    for j in np.nonzero(err > seg_tol)[0]:
        k[j] = integrate(f, nodes[j], nodes[j + 1], seg_tol, 1e-13, vectorized=True)
    return k


def build(w, g, h, m: int, R: float, tol: float = 1e-10, *, anchor: float | None = None, n_nodes: int = 2048,
          allow_g_above_one: bool = False) -> Constellation:
    """Construct the comparison space of (w, g, h) in dimension m on [0, R]."""
    w, g, h = as_expr(w), as_expr(g), as_expr(h)
    m = int(m)
    R = float(R)
    nodes = chebyshev_nodes(R, n_nodes)
    _validate(w, g, h, m, R, nodes, allow_g_above_one)
    A = float(anchor) if anchor is not None else min(1.0, R / 2.0)
    if not 0.0 < A <= R:
        raise ConstellationError(f"anchor must lie in (0, R], got {A}")

    def zeta_direct(t):
        wv, w1, _ = w.jet(t, order=1)
        gv = g.jet(t, order=0)[0]
        hv = h.jet(t, order=0)[0]
        return m / (gv * gv) * (w1 / wv - hv) - m / t

    def phi_direct(t):
        # d/dr log(r / (w g)) + zeta: logarithmic derivative of G = Lambda / r^(m-1)
        wv, w1, _ = w.jet(t, order=1)
        gv, g1, _ = g.jet(t, order=1)
        return 1.0 / t - w1 / wv - g1 / gv + zeta_direct(t)

    zeta = _regularized(zeta_direct)
    phi = _regularized(phi_direct)
    try:
        zeta_nodes = zeta(nodes)
        if not np.all(np.isfinite(zeta_nodes)):
            raise NumericalError("zeta is not finite on the grid (h or g pathological near 0)")
        Z = np.concatenate([[0.0], np.cumsum(_segment_integrals(zeta, nodes, tol))])
        ZA = integrate(zeta, 0.0, A, tol * 1e-2, 1e-14, vectorized=True)
    except ArithmeticError as exc:
        if isinstance(exc, NumericalError):
            raise
        raise NumericalError(f"construction of Lambda failed: {exc}") from exc

    def G_hat(t):
        t = np.asarray(t, dtype=float)
        Zt = np.array([integrate(zeta, 0.0, float(x), 1e-13, 1e-13, vectorized=True) for x in np.atleast_1d(t)])
        return (t / w(t)) / g(t) * np.exp(Zt)

    # T through G(0), Richardson-extrapolated from three small radii
    h0 = min(1e-3, R / 8.0)
    Gh = G_hat(np.array([h0, h0 / 2.0, h0 / 4.0]))
    G0 = (8.0 * Gh[2] - 6.0 * Gh[1] + Gh[0]) / 3.0
    log_T = m * math.log(A) + ZA - math.log(G0)
    T = math.exp(log_T)

    # everything in logs: exp(Z) alone overflows long before Lambda does
    r = nodes[1:]
    wv, gv = w(r), g(r)
    log_G = np.empty_like(nodes)
    log_G[1:] = log_T + m * np.log(r / A) - np.log(wv) - np.log(gv) - (ZA - Z[1:]) - (m - 1) * np.log(r)
    log_G[0] = log_T - m * math.log(A) - ZA + math.log(G0)
    if not np.all(np.isfinite(log_G)):
        raise NumericalError("log Lambda is not finite on the grid")
    log_lam = log_G[1:] + (m - 1) * np.log(r)
    if np.max(log_lam) > LOG_MAX or np.max(log_lam - np.log(gv)) > LOG_MAX:
        bad = float(r[np.argmax(log_lam - np.log(gv) > LOG_MAX)])
        raise NumericalError(f"Lambda exceeds the floating point range beyond r={bad:.6g}; reduce R")
    lam = np.concatenate([[0.0], np.exp(log_lam)])
    # log G is far smoother than G when Lambda oscillates in magnitude
    G_spline = CubicHermiteSpline(nodes, log_G, phi(nodes))

    inv_g = lambda t: 1.0 / g.jet(t, order=0)[0]  # noqa: E731
    s_tab = np.concatenate([[0.0], np.cumsum(_segment_integrals(inv_g, nodes, tol))])
    if np.any(np.diff(s_tab) <= 0.0):
        raise NumericalError("stretching function is not strictly increasing")
    r_of_s = CubicHermiteSpline(s_tab, nodes, g(nodes))

    def lam_over_g(t):
        t = np.asarray(t, dtype=float)
        return t ** (m - 1) * np.exp(G_spline(t)) / g.jet(t, order=0)[0]

    vol_tab = np.concatenate([[0.0], np.cumsum(_segment_integrals(lam_over_g, nodes, tol))])

    # interpolation check: exact Lambda at segment midpoints against the spline
    mid = 0.5 * (nodes[1:] + nodes[:-1])
    zmid = Z[:-1] + gk15_panels(zeta, nodes[:-1], mid)[0]
    exact = log_T + m * np.log(mid / A) - np.log(w(mid)) - np.log(g(mid)) - (ZA - zmid) - (m - 1) * np.log(mid)
    interp_error = float(np.max(np.abs(np.expm1(G_spline(mid) - exact))))

    for arr in (nodes, zeta_nodes, lam, s_tab, vol_tab):
        arr.setflags(write=False)
    return Constellation(w, g, h, m, R, float(T), A, tol, nodes, zeta_nodes, lam, s_tab, vol_tab,
                         interp_error, G_spline, r_of_s)


# --------------------------------------------------------------------------- operations

def _check_r(c: Constellation, r: float, closed: bool = True) -> None:
    ok = 0.0 <= r <= c.R if closed else 0.0 < r < c.R
    if not ok:
        raise ValueError(f"r={r} outside {'[0, R]' if closed else '(0, R)'} with R={c.R}")


def _check_s(c: Constellation, s: float) -> None:
    if not 0.0 <= s <= c.s_R * (1.0 + 1e-14):
        raise ValueError(f"s={s} outside [0, s(R)] with s(R)={c.s_R}")


def lambda_at(c: Constellation, r: float) -> float:
    """Lambda(r), exactly 0 at the pole."""
    _check_r(c, r)
    return 0.0 if r == 0.0 else float(c.lam(r))


def lambda_ode_residual(c: Constellation, r: float, perturbation: float = 0.0) -> float:
    """Residual of d/dr(Lambda w g) = m Lambda/g (w' - h w), relative to max(1, |rhs|).

    The derivative is a five-point finite difference of the tabulated product.
    ``perturbation`` adds a constant to Lambda (a sensitivity self-test).
    """
    _check_r(c, r, closed=False)
    d = min(1e-3 * c.R, r / 2.5, (c.R - r) / 2.5)

    def product(t):
        return (c.lam(t) + perturbation) * c.w(t) * c.g(t)

    pts = r + d * np.array([-2.0, -1.0, 1.0, 2.0])
    p = product(pts)
    deriv = (p[0] - 8.0 * p[1] + 8.0 * p[2] - p[3]) / (12.0 * d)
    wj = c.w.jet(r, order=1)
    rhs = c.m * (float(c.lam(r)) + perturbation) / c.g(r) * (float(wj[1]) - c.h(r) * float(wj[0]))
    return float((deriv - rhs) / max(1.0, abs(rhs)))


def stretch(c: Constellation, r: float) -> float:
    """s(r) = int_0^r dt/g."""
    _check_r(c, r)
    return float(c.s(r))


def unstretch(c: Constellation, s: float) -> float:
    """Inverse of stretch, by safeguarded Newton iteration inside the bracketing node interval."""
    _check_s(c, s)
    s = min(s, c.s_R)
    j = int(np.clip(np.searchsorted(c.s_tab, s, side="right") - 1, 0, len(c.nodes) - 2))
    return invert_monotone(lambda x: float(c.s(x)), s, float(c.nodes[j]), float(c.nodes[j + 1]), tol=1e-14,
                           df=lambda x: 1.0 / c.g(x))


def warp_W(c: Constellation, s: float) -> float:
    """Warping of the comparison space, W(s) = Lambda(r(s))^(1/(m-1))."""
    _check_s(c, s)
    if s == 0.0:
        return 0.0
    return float(c.lam(unstretch(c, s))) ** (1.0 / (c.m - 1))


def quotient_forms(c: Constellation, s: float) -> tuple[float, float]:
    """q_W(s) from the r-integral of Lambda/g and from the s-integral of W^(m-1)."""
    _check_s(c, s)
    if s <= 0.0:
        raise ValueError("q_W needs s > 0")
    r = unstretch(c, s)
    lam = float(c.lam(r))
    by_r = float(c.volume(r)) / lam
    by_s = integrate(lambda t: c.lam(c.r_of_s(t)), 0.0, min(s, c.s_R), 1e-300, 1e-13, vectorized=True) / lam
    return by_r, by_s


def quotient_qW(c: Constellation, s: float) -> float:
    """Isoperimetric quotient int_0^s W^(m-1) / W^(m-1)(s); both forms must agree to 1e-8."""
    by_r, by_s = quotient_forms(c, s)
    if abs(by_r - by_s) > 1e-8 * max(1.0, abs(by_r)):
        raise NumericalError(f"q_W forms disagree: {by_r!r} vs {by_s!r}")
    return by_r


@dataclass(frozen=True)
class BalanceReport:
    grid: tuple
    margin_weak: tuple
    margin_strong: tuple
    is_balanced: bool
    is_equality: bool
    strong_holds: bool
    tol: float

    def to_dict(self) -> dict:
        return {
            "is_balanced": self.is_balanced, "is_equality": self.is_equality, "strong_holds": self.strong_holds,
            "tol": self.tol, "min_margin_weak": min(self.margin_weak), "min_margin_strong": min(self.margin_strong),
        }


def balance_margins(c: Constellation, r):
    """(weak, strong) margins at radii r > 0."""
    r = np.asarray(r, dtype=float)
    wv, w1, w2 = c.w.jet(r)
    hv, h1, _ = c.h.jet(r, order=1)
    gv = c.g.jet(r, order=0)[0]
    weak = c.m * np.asarray(c.q(r)) * (w1 / wv - hv) - gv
    strong = w2 - w1 * hv - wv * h1
    return weak, strong


def check_balance(c: Constellation, grid_size: int = 64, tol: float = 1e-8) -> BalanceReport:
    """Weak (defining) and strong (sufficient) balance margins on a geometric grid of [1e-3 R, R]."""
    if grid_size < 16:
        raise ValueError("grid_size must be at least 16")
    grid = np.geomspace(1e-3 * c.R, c.R, grid_size)
    try:
        weak, strong = balance_margins(c, grid)
    except ArithmeticError as exc:
        raise NumericalError(f"balance evaluation failed: {exc}") from exc
    is_balanced = bool(np.min(weak) >= -tol)
    strong_holds = bool(np.min(strong) >= -tol)
    if strong_holds and not is_balanced:
        # strong => weak up to the accumulated grid tolerance
        slack = tol * (1.0 + c.R ** 2)
        if np.min(weak) < -slack:
            raise ConsistencyError(
                f"strong balance holds but weak margin reaches {np.min(weak):.3e} at r={grid[np.argmin(weak)]:.6g}")
    return BalanceReport(tuple(map(float, grid)), tuple(map(float, weak)), tuple(map(float, strong)),
                         is_balanced, bool(np.max(np.abs(weak)) <= tol), strong_holds, tol)
