"""Parabolicity and stochastic completeness tests.

All tests here are sufficient conditions.  A criterion that is not met yields
Inconclusive or CriterionFails, never a claim of the opposite property.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .constellation import Constellation, NumericalError, build, check_balance
from .model_space import space_form_warp, unit_sphere_volume
from .radial_fn import (ConvergenceVerdict, ImproperPolicy, RadialExpr, as_expr, classify_increments,
                        gk15_panels, horizons, integrate, invert_monotone)
from .surfaces import RevolutionSurface, arclength, closes, extrinsic_radius, gauss_curvature, speed, tangency

SPHERE = "SphereCondition"
BALL = "BallCondition"
LOG_BALL = "LogBallCondition"
MILNOR = "MilnorCriterion"
ICHIHARA = "IchiharaCriterion"
TANGENCY = "TangencyThreshold"

PARABOLIC = "Parabolic"
STOCHASTICALLY_COMPLETE = "StochasticallyComplete"
INCONCLUSIVE = "Inconclusive"
CRITERION_FAILS = "CriterionFails"

TRACE_POINTS = 101
SUFFICIENT_ONLY = "sufficient condition only: a failed test does not establish the opposite property"
SURFACE_NOTE = ("criterion applied to a truncated-and-completed surface of revolution; it is formulated for "
                "rotationally symmetric model surfaces")
OVERLAP_TOL = 1e-7


class AdmissibilityError(ValueError):
    """(m, b, C) outside 0 <= m (sqrt(-b) - C) <= sqrt(-b)."""


@dataclass(frozen=True)
class ParabolicityVerdict:
    test: str
    verdict: str
    evidence: object  # ConvergenceVerdict or dict of grid margins
    notes: str = SUFFICIENT_ONLY

    def to_dict(self) -> dict:
        ev = self.evidence.to_dict() if isinstance(self.evidence, ConvergenceVerdict) else self.evidence
        return {"test": self.test, "verdict": self.verdict, "evidence": ev, "notes": self.notes}


# --------------------------------------------------------------------------- closed-form thresholds

def tangency_threshold_euclidean(r: float) -> float:
    """sqrt(2 log r / (1 + 2 log r)) for r > 1."""
    if r <= 1.0:
        raise ValueError(f"threshold needs r > 1 (log r > 0), got r={r}")
    L = math.log(r)
    return math.sqrt(2.0 * L / (1.0 + 2.0 * L))


def check_admissible(m: int, b: float, C: float) -> None:
    """Raise unless b < 0 and 0 <= m (sqrt(-b) - C) <= sqrt(-b)."""
    if b >= 0.0:
        raise AdmissibilityError(f"hyperbolic threshold needs b < 0, got b={b}")
    k = math.sqrt(-b)
    val = m * (k - C)
    if not (0.0 <= val <= k):
        raise AdmissibilityError(
            f"(m, b, C) = ({m}, {b}, {C}) is not admissible: need 0 <= m (sqrt(-b) - C) <= sqrt(-b), "
            f"i.e. {k - k / m:.6g} <= C <= {k:.6g}; got m (sqrt(-b) - C) = {val:.6g}")


def tangency_threshold_hyperbolic(m: int, b: float, C: float, r: float) -> float:
    """Threshold g~(r) for radially mean C-convex submanifolds of the space form of curvature b < 0.

    The defining quotient is divided through by cosh(tau) (tau = r sqrt(-b)) so
    that large radii do not overflow; the value is unchanged.
    """
    check_admissible(m, b, C)
    if r <= 1.0:
        raise ValueError(f"threshold needs r > 1 (log r > 0), got r={r}")
    k = math.sqrt(-b)
    tau = r * k
    L = math.log(r)
    t = math.tanh(tau)
    arg = m * r * L * (k - C * t) / (t * L + tau * L + t)
    if not 0.0 <= arg <= 1.0:
        raise ValueError(f"threshold undefined at r={r}: square-root argument {arg:.6g} outside [0, 1]")
    return math.sqrt(arg)


def hyperbolic_threshold_text(m: int, b: float, C: float) -> str:
    """The threshold as a grammar expression in r (same cosh-normalized form)."""
    check_admissible(m, b, C)
    k = repr(math.sqrt(-b))
    tau = f"({k}*r)"
    return (f"sqrt({m}*r*log(r)*({k}-{repr(float(C))}*tanh({tau}))"
            f"/(tanh({tau})*log(r)+{tau}*log(r)+tanh({tau})))")


EUCLIDEAN_THRESHOLD_TEXT = "sqrt(2*log(r)/(1+2*log(r)))"


# --------------------------------------------------------------------------- integral tests

@dataclass
class UnboundedConstellation:
    """Bounding functions on [0, inf), realized by builds on doubling radii.

    With ``tail_start`` set the functions are only used on [tail_start, inf)
    (for thresholds that are undefined near the pole); Lambda is then known up
    to a constant factor, which does not affect divergence.
    """

    w: RadialExpr
    g: RadialExpr
    h: RadialExpr
    m: int
    tail_start: float | None = None
    n_nodes: int = 2048
    tol: float = 1e-10
    log_w: object = None  # optional overflow-free log w and w'/w for the tail integrand
    eta: object = None
    _builds: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.w, self.g, self.h = as_expr(self.w), as_expr(self.g), as_expr(self.h)
        self.m = int(self.m)

    def at(self, R: float) -> Constellation:
        if R not in self._builds:
            self._builds[R] = build(self.w, self.g, self.h, self.m, R, self.tol, n_nodes=self.n_nodes)
        return self._builds[R]


def _builds_for(data: UnboundedConstellation, hs) -> tuple[list, float | None, dict]:
    """Builds on each horizon, overlap consistency, and the first radius where balance fails."""
    builds = [data.at(H) for H in hs]
    worst_overlap = 0.0
    for prev, cur in zip(builds[:-1], builds[1:]):
        probe = np.geomspace(prev.R * 1e-2, prev.R, 16)
        a, b = prev.lam(probe), cur.lam(probe)
        worst_overlap = max(worst_overlap, float(np.max(np.abs(a - b) / np.abs(b))))
    if worst_overlap > OVERLAP_TOL:
        raise NumericalError(f"Lambda differs by {worst_overlap:.3e} between consecutive horizons")
    for c in builds:
        report = check_balance(c, 32)
        if not report.is_balanced:
            j = int(np.argmin(report.margin_weak))
            return builds, report.grid[j], {"overlap_consistency": worst_overlap}
    return builds, None, {"overlap_consistency": worst_overlap}


def _panel_integrals(builds, edges, integrand) -> list[float]:
    out = []
    for c, lo, hi in zip(builds, edges[:-1], edges[1:]):
        out.append(integrate(lambda t, c=c: integrand(c, t), lo, hi, 1e-300, 1e-10, vectorized=True))
    return out


def _integral_test(data: UnboundedConstellation, name: str, integrand, start: float, policy: ImproperPolicy,
                   success: str) -> ParabolicityVerdict:
    hs = horizons(start, policy)
    builds, failing, info = _builds_for(data, hs)
    if failing is not None:
        ev = {"balance_failure_radius": failing, **info}
        return ParabolicityVerdict(name, INCONCLUSIVE, ev, "balance condition fails; no verdict. " + SUFFICIENT_ONLY)
    increments = _panel_integrals(builds, [start, *hs], integrand)
    cv = classify_increments(hs, increments, policy)
    verdict = success if cv.kind == "Divergent" else INCONCLUSIVE
    return ParabolicityVerdict(name, verdict, cv)


def _tail_sphere_increments(data: UnboundedConstellation, edges, sub: int = 128) -> list[float]:
    """Panel integrals of w exp(-int_a^r m/g^2 (eta_w - h)) without a pole-anchored Lambda."""
    m = data.m

    def eta(t):
        wv, w1, _ = data.w.jet(t, order=1)
        return w1 / wv

    eta = data.eta or eta
    log_w = data.log_w or (lambda t: np.log(data.w.jet(t, order=0)[0]))

    def F(t):
        gv = data.g.jet(t, order=0)[0]
        if np.any(gv <= 0.0):
            tt, gg = np.broadcast_arrays(np.asarray(t, dtype=float), gv)
            bad = float(tt.ravel()[np.argmax(gg.ravel() <= 0.0)])
            raise NumericalError(f"tangency bound vanishes at r={bad:.6g}; the integrand is undefined")
        return m / (gv * gv) * (eta(t) - data.h.jet(t, order=0)[0])

    phi0 = 0.0
    out = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        pts = np.geomspace(lo, hi, sub + 1)
        seg, _ = gk15_panels(F, pts[:-1], pts[1:])
        phi_nodes = phi0 + np.concatenate([[0.0], np.cumsum(seg)])

        def f(t, pts=pts, phi_nodes=phi_nodes):
            idx = np.clip(np.searchsorted(pts, t, side="right") - 1, 0, len(pts) - 2)
            inner, _ = gk15_panels(F, pts[idx], t)
            return np.exp(log_w(t) - (phi_nodes[idx] + inner))

        vals, _ = gk15_panels(f, pts[:-1], pts[1:])
        out.append(float(np.sum(vals)))
        phi0 = float(phi_nodes[-1])
    return out


def test_sphere_condition(data: UnboundedConstellation, policy: ImproperPolicy | None = None,
                          start: float = 1.0) -> ParabolicityVerdict:
    """Divergence of int^inf dr / (g Lambda) implies parabolicity."""
    policy = policy or ImproperPolicy()
    if data.tail_start is not None:
        a = max(start, data.tail_start)
        hs = horizons(a, policy)
        try:
            increments = _tail_sphere_increments(data, [a, *hs])
        except ArithmeticError as exc:
            raise NumericalError(f"sphere condition integrand failed: {exc}") from exc
        cv = classify_increments(hs, increments, policy)
        verdict = PARABOLIC if cv.kind == "Divergent" else INCONCLUSIVE
        note = (f"bounding functions used on [{a}, inf) only; balance near the pole is not checked. "
                + SUFFICIENT_ONLY)
        return ParabolicityVerdict(SPHERE, verdict, cv, note)

    def integrand(c, t):
        return 1.0 / (c.g.jet(t, order=0)[0] * c.lam(t))

    return _integral_test(data, SPHERE, integrand, start, policy, PARABOLIC)


def test_ball_condition(data: UnboundedConstellation, policy: ImproperPolicy | None = None,
                        start: float = 1.0) -> ParabolicityVerdict:
    """Divergence of int^inf r(s) g(r(s)) / Vol(B^W_s) ds implies parabolicity.

    With ds = dr/g the integrand becomes r / (V0 int_0^r Lambda/g) in r.
    """
    policy = policy or ImproperPolicy()
    v0 = unit_sphere_volume(data.m)

    def integrand(c, t):
        return t / (v0 * np.asarray(c.volume(t)))

    return _integral_test(data, BALL, integrand, start, policy, PARABOLIC)


def test_log_ball_condition(data: UnboundedConstellation, policy: ImproperPolicy | None = None,
                            start: float = 1.0) -> ParabolicityVerdict:
    """Divergence of int^inf r(s) g(r(s)) / log Vol(B^W_s) ds implies stochastic completeness.

    The integral starts where Vol(B^W_s) exceeds e so that the logarithm exceeds 1.
    """
    policy = policy or ImproperPolicy()
    v0 = unit_sphere_volume(data.m)
    a = start
    R = start
    for _ in range(60):
        c = data.at(R)
        if v0 * c.volume(R) > math.e:
            if v0 * c.volume(start) <= math.e:
                a = invert_monotone(lambda x: v0 * float(c.volume(x)), math.e, start, R, tol=1e-12)
            break
        R *= 2.0
    else:
        raise NumericalError("comparison volume never exceeds e")

    def integrand(c, t):
        return t / np.log(v0 * np.asarray(c.volume(t)))

    verdict = _integral_test(data, LOG_BALL, integrand, a, policy, STOCHASTICALLY_COMPLETE)
    if a != start and isinstance(verdict.evidence, ConvergenceVerdict):
        ev = verdict.evidence
        verdict = ParabolicityVerdict(LOG_BALL, verdict.verdict, ConvergenceVerdict(
            ev.kind, ev.partial_values, ev.rationale + f"; integral started at r={a:.12g} where the volume is e"))
    return verdict


def space_form_threshold_data(m: int, b: float, C: float, tail_start: float = 2.0) -> UnboundedConstellation:
    """Q_b, h = C and g the hyperbolic tangency threshold, used on [tail_start, inf).

    log Q_b and its log-derivative are supplied in closed form so that the
    tail integrand stays finite far beyond the overflow radius of sinh.
    """
    check_admissible(m, b, C)
    k = math.sqrt(-b)

    def log_w(t):
        t = np.asarray(t, dtype=float)
        return k * t + np.log1p(-np.exp(-2.0 * k * t)) - math.log(2.0 * k)

    def eta(t):
        return k / np.tanh(k * np.asarray(t, dtype=float))

    return UnboundedConstellation(space_form_warp(b), as_expr(hyperbolic_threshold_text(m, b, C)),
                                  as_expr(repr(float(C))), m, tail_start=tail_start, log_w=log_w, eta=eta)


# --------------------------------------------------------------------------- surface criteria

def _trace(x, margin) -> list:
    """At most TRACE_POINTS (position, margin) pairs, always keeping the worst one."""
    x, margin = np.asarray(x, dtype=float), np.asarray(margin, dtype=float)
    idx = set(np.linspace(0, len(x) - 1, min(TRACE_POINTS, len(x))).astype(int).tolist())
    idx.add(int(np.argmin(margin)))
    return [(float(x[j]), float(margin[j])) for j in sorted(idx)]


def milnor_test(K_of_s, s_values) -> ParabolicityVerdict:
    """Check K(s) >= -1/(s^2 log s) on the given distances (all > 1)."""
    s = np.asarray(s_values, dtype=float)
    if np.any(s <= 1.0):
        raise ValueError("distances must exceed 1 so that s^2 log s > 0")
    K = np.array([K_of_s(x) for x in s], dtype=float)
    bound = -1.0 / (s * s * np.log(s))
    margin = K - bound
    ev = {"n_points": int(len(s)), "s_min": float(s[0]), "s_max": float(s[-1]), "min_margin": float(np.min(margin)),
          "trace": _trace(s, margin)}
    if np.all(margin >= 0.0):
        return ParabolicityVerdict(MILNOR, PARABOLIC, ev)
    j = int(np.argmin(margin >= 0.0))
    ev["witness_s"] = float(s[j])
    return ParabolicityVerdict(MILNOR, CRITERION_FAILS, ev)


def milnor_test_surface(surface: RevolutionSurface, n: int = 2000) -> ParabolicityVerdict:
    """Milnor's inequality checked parametrically in u, with s(u) the arclength of the profile."""
    u = np.linspace(0.0, surface.u_max, n + 1)[1:]
    if closes(surface):
        u = u[:-1]  # the closing point on the axis is a coordinate singularity only
    seg = [arclength(surface, float(u[0]))]
    seg += [integrate(lambda t: speed(surface, t), float(lo), float(hi), 1e-300, 1e-13, vectorized=True)
            for lo, hi in zip(u[:-1], u[1:])]
    s = np.cumsum(seg)
    keep = s > 1.0
    u, s = u[keep], s[keep]
    if len(u) == 0:
        return ParabolicityVerdict(MILNOR, INCONCLUSIVE, {"reason": "profile too short: s(u) never exceeds 1"})
    K = np.asarray(gauss_curvature(surface, u))
    margin = K + 1.0 / (s * s * np.log(s))
    ev = {"n_points": int(len(u)), "u_min": float(u[0]), "u_max": float(u[-1]), "min_margin": float(np.min(margin)),
          "trace": _trace(u, margin)}
    note = SURFACE_NOTE + ". " + SUFFICIENT_ONLY
    if np.all(margin >= 0.0):
        return ParabolicityVerdict(MILNOR, PARABOLIC, ev, note)
    ev["witness_u"] = float(u[int(np.argmin(margin))])
    return ParabolicityVerdict(MILNOR, CRITERION_FAILS, ev, note)


def total_curvature_density(surface: RevolutionSurface):
    """|K| x sqrt(x'^2 + z'^2), the curvature density per unit u (before the factor 2 pi)."""
    return lambda u: np.abs(gauss_curvature(surface, u)) * surface.x.jet(u, order=0)[0] * speed(surface, u)


def ichihara_test(surface: RevolutionSurface, tol: float = 1e-9, max_doublings: int = 24) -> ParabolicityVerdict:
    """Finite total absolute curvature int |K| dmu implies parabolicity.

    The integral runs over the smooth profile (both halves for two-sided
    surfaces).  Beyond u_max the tail is followed over doubling intervals; when
    the increments decay geometrically their remaining sum is added.
    """
    f = total_curvature_density(surface)
    sides = (lambda u: f(u) + f(-u)) if surface.two_sided else f
    core = integrate(sides, 0.0, surface.u_max, 1e-14, 1e-13, vectorized=True)
    edges = [surface.u_max]
    increments = []
    tail = 0.0
    kind, rationale = "Inconclusive", "tail did not settle"
    if closes(surface):
        kind, rationale = "Convergent", "profile closes on the axis: compact surface, no tail"
    for _ in range(0 if closes(surface) else max_doublings):
        lo = edges[-1]
        hi = 2.0 * lo
        try:
            inc = integrate(sides, lo, hi, tol * 1e-3, 1e-9, vectorized=True)
        except ArithmeticError:
            break
        increments.append(inc)
        edges.append(hi)
        if inc == 0.0 or (len(increments) >= 2 and inc < tol * 1e-3):
            kind, rationale = "Convergent", "tail increments vanish"
            break
        if len(increments) >= 3:
            ratios = [increments[-k] / increments[-k - 1] for k in (1, 2)]
            if all(q < 0.9 for q in ratios):
                rho = ratios[0]
                tail = inc * rho / (1.0 - rho)
                if tail < tol:
                    kind, rationale = "Convergent", f"geometric tail with ratio {rho:.4g}, remainder {tail:.3e}"
                    break
            elif all(q >= 0.9 for q in ratios) and len(increments) >= 6:
                kind, rationale = "Divergent", "tail increments do not decay"
                break
    total = 2.0 * math.pi * (core + math.fsum(increments) + tail)
    partial = [(surface.u_max, 2.0 * math.pi * core)]
    acc = core
    for e, inc in zip(edges[1:], increments):
        acc += inc
        partial.append((e, 2.0 * math.pi * acc))
    cv = ConvergenceVerdict(kind, tuple(partial), rationale)
    ev = {"total_curvature": total, "trace": cv.to_dict(), "two_sided": surface.two_sided}
    verdict = PARABOLIC if kind == "Convergent" else INCONCLUSIVE
    return ParabolicityVerdict(ICHIHARA, verdict, ev, SURFACE_NOTE + ". " + SUFFICIENT_ONLY)


def tangency_route(surface: RevolutionSurface, n: int = 2000, u_end: float | None = None) -> ParabolicityVerdict:
    """T(u) >= g~(r(u)) for every grid point beyond some u0, with g~ the Euclidean tangency threshold."""
    u_end = surface.u_max if u_end is None else u_end
    u = np.linspace(0.0, u_end, n + 1)[1:]
    r = np.array([extrinsic_radius(surface, float(x)) for x in u])
    ok = np.zeros(len(u), dtype=bool)
    margins = np.full(len(u), -np.inf)
    for j, (x, rr) in enumerate(zip(u, r)):
        if rr > 1.0:
            margins[j] = tangency(surface, float(x)) - tangency_threshold_euclidean(float(rr))
            ok[j] = margins[j] >= 0.0
    # u0: first grid point from which the inequality holds up to the end
    bad = np.nonzero(~ok)[0]
    first = 0 if len(bad) == 0 else int(bad[-1]) + 1
    note = SURFACE_NOTE + "; radial mean 0-convexity is assumed. " + SUFFICIENT_ONLY
    if first >= len(u) or first > len(u) // 2:
        reason = "inequality does not hold on the second half of the grid"
        if closes(surface):
            reason = "profile closes on the axis: the extrinsic radius stays bounded, so the threshold never applies"
        ev = {"u0": None, "reason": reason}
        return ParabolicityVerdict(TANGENCY, CRITERION_FAILS, ev, note)
    ev = {"u0": float(u[first]), "u_end": float(u_end), "n_points": int(len(u) - first),
          "min_margin_beyond_u0": float(np.min(margins[first:])), "trace": _trace(u[first:], margins[first:])}
    return ParabolicityVerdict(TANGENCY, PARABOLIC, ev, note)
