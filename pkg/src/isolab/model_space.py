"""Rotationally symmetric model spaces M^m_w with metric dr^2 + w(r)^2 dtheta^2."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .radial_fn import RadialExpr, as_expr, eval2, integrate

NORMALIZATION_TOL = 1e-8


class ModelError(ValueError):
    """Warping function violates w(0)=0, w'(0)=1 or positivity."""


def unit_sphere_volume(m: int) -> float:
    """Volume V0 of the unit (m-1)-sphere, 2 pi^(m/2) / Gamma(m/2)."""
    return 2.0 * math.pi ** (m / 2.0) / math.gamma(m / 2.0)


def extrapolate_at_zero(f, h: float = 1e-4) -> float:
    """Quadratic extrapolation of f to 0 from samples at h, h/2 and h/4."""
    return (8.0 * f(h / 4.0) - 6.0 * f(h / 2.0) + f(h)) / 3.0


def check_warping(w: RadialExpr, r_max: float = math.inf, samples: int = 64) -> None:
    """Raise ModelError unless w(0)=0, w'(0)=1 and w > 0 on sampled points of (0, r_max)."""
    w0 = extrapolate_at_zero(lambda r: eval2(w, r).value)
    w1 = extrapolate_at_zero(lambda r: eval2(w, r).d1)
    if abs(w0) > NORMALIZATION_TOL or abs(w1 - 1.0) > NORMALIZATION_TOL:
        raise ModelError(f"warping {w.source!r} needs w(0)=0 and w'(0)=1, found w(0)~{w0:.3g}, w'(0)~{w1:.3g}")
    top = r_max if math.isfinite(r_max) else 10.0
    grid = np.linspace(top / samples, top, samples)
    if math.isfinite(r_max):
        grid = grid[:-1]
    values = np.asarray(w(grid))
    if np.any(values <= 0.0):
        bad = float(grid[np.argmax(values <= 0.0)])
        raise ModelError(f"warping {w.source!r} is not positive at r={bad}")


@dataclass(frozen=True)
class WModel:
    """Warping function w with dimension m on [0, r_max)."""

    w: RadialExpr
    m: int
    r_max: float = math.inf

    def __post_init__(self):
        if self.m < 2:
            raise ModelError(f"dimension must be at least 2, got {self.m}")
        check_warping(self.w, self.r_max)


def make_model(w, m: int, r_max: float = math.inf) -> WModel:
    return WModel(as_expr(w), int(m), r_max)


def _num(x: float) -> str:
    return repr(float(x))


def space_form_warp(b: float) -> RadialExpr:
    """Warping Q_b of the space form of constant curvature b, as grammar text."""
    if b == 0.0:
        return as_expr("r")
    if b == -1.0:
        return as_expr("sinh(r)")
    if b == 1.0:
        return as_expr("sin(r)")
    k = math.sqrt(abs(b))
    fn = "sinh" if b < 0.0 else "sin"
    return as_expr(f"{fn}({_num(k)}*r)/{_num(k)}")


def space_form_radius(b: float) -> float:
    """Largest admissible radius: conjugate radius pi/sqrt(b) less a margin for b > 0."""
    return math.pi / math.sqrt(b) - 1e-9 if b > 0.0 else math.inf


def space_form_model(b: float, m: int) -> WModel:
    return WModel(space_form_warp(b), int(m), space_form_radius(b))


def space_form_eta(b: float, r: float) -> float:
    """Closed form of w'/w for Q_b."""
    if b == 0.0:
        return 1.0 / r
    k = math.sqrt(abs(b))
    return k / math.tanh(k * r) if b < 0.0 else k / math.tan(k * r)


def _interior(model: WModel, r: float) -> None:
    if not 0.0 < r < model.r_max:
        raise ValueError(f"r={r} outside (0, {model.r_max})")


def eta(model: WModel, r: float) -> float:
    """Mean curvature w'/w of the distance sphere of radius r."""
    _interior(model, r)
    j = eval2(model.w, r)
    return j.d1 / j.value


def radial_curvature(model: WModel, r: float) -> float:
    """Sectional curvature -w''/w of radial planes."""
    _interior(model, r)
    j = eval2(model.w, r)
    return -j.d2 / j.value


def _range(model: WModel, r: float) -> None:
    if not 0.0 <= r < model.r_max:
        raise ValueError(f"r={r} outside [0, {model.r_max})")


def sphere_volume(model: WModel, r: float, include_unit_sphere_factor: bool = False) -> float:
    """w(r)^(m-1), times V0 when the flag is set."""
    _range(model, r)
    a = model.w(r) ** (model.m - 1) if r > 0.0 else 0.0
    return a * unit_sphere_volume(model.m) if include_unit_sphere_factor else a


def ball_volume(model: WModel, r: float, include_unit_sphere_factor: bool = False,
                abs_tol: float = 1e-13, rel_tol: float = 1e-12) -> float:
    """Integral of w^(m-1) over [0, r], times V0 when the flag is set."""
    _range(model, r)
    m = model.m
    v = integrate(lambda t: model.w(t) ** (m - 1), 0.0, r, abs_tol, rel_tol, vectorized=True)
    return v * unit_sphere_volume(m) if include_unit_sphere_factor else v


def quotient_qw(model: WModel, r: float) -> float:
    """Ball volume over sphere volume, the intrinsic isoperimetric quotient function."""
    _interior(model, r)
    return ball_volume(model, r) / sphere_volume(model, r)
