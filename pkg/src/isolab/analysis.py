"""Bounds derived from a comparison constellation.

Isoperimetric quotients, volume and boundary-gradient bounds, the mean exit
time profile psi, annulus capacities, and the intrinsic and two-sided
specializations.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .constellation import Constellation, NumericalError, build, check_balance
from .model_space import make_model, quotient_qw, ball_volume, sphere_volume, unit_sphere_volume, eta
from .radial_fn import as_expr, gk15_panels, integrate

NOT_COMPUTABLE = "not computable from given data"
CHAIN_SLACK = 1e-9


class NotBalancedError(ValueError):
    """The constellation fails the weak balance condition."""

    def __init__(self, message: str, report):
        self.report = report
        super().__init__(message)


class OrderingError(ValueError):
    """Curvature ordering required by the two-sided bound is violated."""


@dataclass(frozen=True)
class BoundReport:
    quantity: str
    model_value: float
    closed_form_value: float | None
    inputs_echo: dict
    chain: tuple  # ((name, value or None), ...)
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "quantity": self.quantity,
            "model_value": self.model_value,
            "closed_form_value": self.closed_form_value,
            "inputs": self.inputs_echo,
            "chain": [{"name": n, "value": v} for n, v in self.chain],
            "details": self.details,
        }


def _echo(c: Constellation) -> dict:
    return {"w": c.w.source, "g": c.g.source, "h": c.h.source, "m": c.m, "R": c.R}


def _verify_chain(chain) -> None:
    values = [v for _, v in chain if v is not None]
    for lo, hi in zip(values[:-1], values[1:]):
        if lo > hi + CHAIN_SLACK * max(1.0, abs(hi)):
            raise NumericalError(f"inequality chain violated: {chain}")


def isoperimetric_bound(c: Constellation, grid_size: int = 64, tol: float = 1e-8) -> BoundReport:
    """Model quotient 1/q_W(s(R)) and the closed form m/g(R) (eta_w(R) - h(R))."""
    report = check_balance(c, grid_size, tol)
    if not report.is_balanced:
        worst = int(np.argmin(report.margin_weak))
        raise NotBalancedError(
            f"constellation is not balanced: weak margin {report.margin_weak[worst]:.3e} "
            f"at r={report.grid[worst]:.6g}; see the balance report", report)
    R, m = c.R, c.m
    model = 1.0 / c.q(R)
    wj = c.w.jet(R, order=1)
    gR, hR = c.g(R), c.h(R)
    closed = m / gR * (float(wj[1]) / float(wj[0]) - hR)
    chain = [("boundary/volume of the extrinsic ball", None), ("comparison quotient 1/q_W(s(R))", model),
             ("m/g(R) (eta_w(R) - h(R))", closed)]
    details = {"balance": report.to_dict(), "chain_note": f"first entry is {NOT_COMPUTABLE}"}
    if report.is_equality:
        details["equality_value"] = m / (float(wj[0]) * gR)
    _verify_chain(chain)
    return BoundReport("isoperimetric_quotient", model, closed, _echo(c), tuple(chain), details)


def volume_upper_bound(c: Constellation, r: float, include_unit_sphere_factor: bool = False) -> float:
    """Volume of the comparison ball of radius s(r): V0 int_0^{s(r)} W^(m-1)."""
    if not 0.0 <= r <= c.R:
        raise ValueError(f"r={r} outside [0, {c.R}]")
    v = float(c.volume(r)) if r > 0.0 else 0.0
    return v * unit_sphere_volume(c.m) if include_unit_sphere_factor else v


def boundary_gradient_bound(c: Constellation, r: float, include_unit_sphere_factor: bool = False) -> float:
    """g(r) Lambda(r), the bound on the boundary integral of the gradient of the distance."""
    if not 0.0 < r <= c.R:
        raise ValueError(f"r={r} outside (0, {c.R}]")
    v = c.g(r) * float(c.lam(r))
    return v * unit_sphere_volume(c.m) if include_unit_sphere_factor else v


@dataclass(frozen=True)
class ExitTimeProfile:
    R: float
    samples: tuple  # ((r, psi), ...)
    psi0: float
    ode_residual: float
    balanced: bool

    def to_dict(self) -> dict:
        return {"R": self.R, "psi0": self.psi0, "ode_residual": self.ode_residual, "balanced": self.balanced,
                "n_samples": len(self.samples)}


def _psi_table(c: Constellation) -> np.ndarray:
    """psi at the tabulation nodes: int_r^R q_W(s(u))/g(u) du."""
    f = lambda t: np.asarray(c.q(t)) / c.g.jet(t, order=0)[0]  # noqa: E731
    seg, _ = gk15_panels(f, c.nodes[:-1], c.nodes[1:])
    tail = np.concatenate([np.cumsum(seg[::-1])[::-1], [0.0]])
    return tail


def psi(c: Constellation, r, table: np.ndarray | None = None):
    """Mean exit time bound psi(r) = int_{s(r)}^{s(R)} q_W(t) dt, evaluated in r coordinates."""
    table = _psi_table(c) if table is None else table
    r = np.asarray(r, dtype=float)
    flat = np.atleast_1d(r).ravel()
    idx = np.clip(np.searchsorted(c.nodes, flat, side="right") - 1, 0, len(c.nodes) - 2)
    f = lambda t: np.asarray(c.q(t)) / c.g.jet(t, order=0)[0]  # noqa: E731
    k, _ = gk15_panels(f, c.nodes[idx], flat)
    out = table[idx] - k
    out = np.where(flat >= c.R, 0.0, out)
    return out.reshape(np.shape(r)) if np.ndim(r) else float(out[0])


def exit_time_residual(c: Constellation, r, table: np.ndarray | None = None) -> np.ndarray:
    """|L psi + 1| with L f = g^2 f'' + ((m - g^2) eta_w - m h) f', by finite differences.

    The step is fixed at R/1000, with one-sided stencils within two steps of
    the pole or of R.
    """
    table = _psi_table(c) if table is None else table
    r = np.atleast_1d(np.asarray(r, dtype=float))
    d = 1e-3 * c.R
    # side: 0 central, +1 forward, -1 backward
    side = np.where(r - 2.0 * d < 0.0, 1.0, np.where(r + 2.0 * d > c.R, -1.0, 0.0))
    central = side == 0.0
    offs = np.where(central[:, None], np.array([-2.0, -1.0, 0.0, 1.0, 2.0, 0.0]),
                    side[:, None] * np.arange(6.0))
    p = psi(c, np.clip(r[:, None] + d * offs, 0.0, c.R), table)
    one_d1 = side * (-25.0 * p[:, 0] + 48.0 * p[:, 1] - 36.0 * p[:, 2] + 16.0 * p[:, 3] - 3.0 * p[:, 4]) / (12.0 * d)
    one_d2 = (45.0 * p[:, 0] - 154.0 * p[:, 1] + 214.0 * p[:, 2] - 156.0 * p[:, 3] + 61.0 * p[:, 4]
              - 10.0 * p[:, 5]) / (12.0 * d * d)
    d1 = np.where(central, (p[:, 0] - 8.0 * p[:, 1] + 8.0 * p[:, 3] - p[:, 4]) / (12.0 * d), one_d1)
    d2 = np.where(central, (-p[:, 0] + 16.0 * p[:, 1] - 30.0 * p[:, 2] + 16.0 * p[:, 3] - p[:, 4]) / (12.0 * d * d),
                  one_d2)
    wv, w1, _ = c.w.jet(r, order=1)
    g2 = c.g.jet(r, order=0)[0] ** 2
    hv = c.h.jet(r, order=0)[0]
    L = g2 * d2 + ((c.m - g2) * w1 / wv - c.m * hv) * d1
    return np.abs(L + 1.0)


def exit_time_profile(c: Constellation, samples: int = 65) -> ExitTimeProfile:
    """psi on a uniform grid of [0, R], with the residual of L psi = -1 at interior samples."""
    if samples < 3:
        raise ValueError("need at least 3 samples")
    table = _psi_table(c)
    grid = np.linspace(0.0, c.R, samples)
    values = psi(c, grid, table)
    values[-1] = 0.0
    values[0] = table[0]
    residual = float(np.max(exit_time_residual(c, grid[1:-1], table)))
    balanced = check_balance(c).is_balanced
    return ExitTimeProfile(c.R, tuple(zip(map(float, grid), map(float, values))), float(table[0]), residual, balanced)


def gray_pinsky_expansion(m: int, tau: float, r: float) -> float:
    """Small-radius expansion r^2/(2m) + tau r^4 / (12 m^2 (m+2)) of the mean exit time."""
    return r * r / (2.0 * m) + tau * r ** 4 / (12.0 * m * m * (m + 2))


def capacity_forms(c: Constellation, rho: float) -> tuple[float, float]:
    """int_rho^R dt/(g Lambda) and int_{s(rho)}^{s(R)} W^(1-m) ds."""
    if not 0.0 < rho < c.R:
        raise ValueError(f"rho={rho} outside (0, {c.R})")
    by_r = integrate(lambda t: 1.0 / (c.g.jet(t, order=0)[0] * c.lam(t)), rho, c.R, 1e-300, 1e-13, vectorized=True)
    by_s = integrate(lambda s: 1.0 / c.lam(c.r_of_s(s)), float(c.s(rho)), c.s_R, 1e-300, 1e-13, vectorized=True)
    return by_r, by_s


def capacity_upper_bound(c: Constellation, rho: float, include_unit_sphere_factor: bool = False) -> float:
    """Capacity bound (int_{s(rho)}^{s(R)} W^(1-m))^(-1) of the annulus between rho and R."""
    by_r, by_s = capacity_forms(c, rho)
    if abs(by_r - by_s) > 1e-8 * abs(by_r):
        raise NumericalError(f"capacity forms disagree: {by_r!r} vs {by_s!r}")
    if by_r < 1e-12:
        warnings.warn(f"annulus [{rho}, {c.R}] nearly degenerate; capacity bound is huge", RuntimeWarning)
        by_r = max(by_r, 1e-300)
    v = 1.0 / by_r
    return v * unit_sphere_volume(c.m) if include_unit_sphere_factor else v


def _curvature(w, r: np.ndarray) -> np.ndarray:
    wv, _, w2 = w.jet(r)
    return -w2 / wv


def two_sided_bounds(w1, w2, g, m: int, R: float, grid: int = 256) -> BoundReport:
    """Lower bound 1/q_{w1}(R) and upper bound 1/q_{W2}(s(R)) for minimal submanifolds (h = 0)."""
    w1, w2, g = as_expr(w1), as_expr(w2), as_expr(g)
    r = np.linspace(R / grid, R, grid)
    k1, k2 = _curvature(w1, r), _curvature(w2, r)
    tol = 1e-12
    if np.any(k2 > k1 + tol) or np.any(k1 > tol):
        j = int(np.argmax((k2 > k1 + tol) | (k1 > tol)))
        raise OrderingError(
            f"need -w2''/w2 <= -w1''/w1 <= 0; at r={r[j]:.6g}: {k2[j]:.6g}, {k1[j]:.6g}")
    lower = 1.0 / quotient_qw(make_model(w1, m), R)
    c2 = build(w2, g, "0", m, R)
    upper = isoperimetric_bound(c2).model_value
    chain = (("1/q_w1(R)", lower), ("boundary/volume of the extrinsic ball", None), ("1/q_W2(s(R))", upper))
    _verify_chain(chain)
    echo = {"w1": w1.source, "w2": w2.source, "g": g.source, "m": m, "R": R}
    details = {"lower": lower, "upper": upper,
               "ordering_certificate": f"curvature ordering checked on {grid} grid points only"}
    return BoundReport("two_sided_quotient", upper, None, echo, chain, details)


def intrinsic_bounds(w, n: int, R: float) -> BoundReport:
    """Intrinsic case: 1/q_w(R) <= n eta_w(R), with ball and sphere volume bounds."""
    model = make_model(w, n)
    quotient = 1.0 / quotient_qw(model, R)
    closed = n * eta(model, R)
    chain = (("boundary/volume of the geodesic ball", None), ("1/q_w(R)", quotient), ("n eta_w(R)", closed))
    _verify_chain(chain)
    details = {"ball_volume": ball_volume(model, R), "sphere_volume": sphere_volume(model, R)}
    echo = {"w": model.w.source, "n": n, "R": R}
    return BoundReport("intrinsic_quotient", quotient, closed, echo, chain, details)


def isoperimetric_profile(c: Constellation, radii) -> list[tuple[float, float, float]]:
    """(r, 1/q_W(s(r)), m/g(r)(eta_w(r) - h(r))) for each radius."""
    radii = np.asarray(radii, dtype=float)
    q = np.asarray(c.q(radii))
    wv, w1, _ = c.w.jet(radii, order=1)
    closed = c.m / c.g(radii) * (w1 / wv - c.h(radii))
    return [(float(r), float(1.0 / a), float(b)) for r, a, b in zip(radii, q, closed)]
