"""Surfaces of revolution in R^3 given by a profile (x(u), z(u)) and a flat bottom disc.

The surface is the disc of radius a = x(0) in the plane z = z(0), completed by
rotating the profile about the z-axis.  Extrinsic discs are the pieces with
u <= c; the pole is the centre of the bottom disc (the origin).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .radial_fn import RadialExpr, as_expr, integrate

HOLD_SLACK = 1e-9


class SurfaceError(ValueError):
    """Invalid or degenerate profile curve."""


@dataclass(frozen=True)
class RevolutionSurface:
    x: RadialExpr
    z: RadialExpr
    a: float
    u_max: float = 30.0
    name: str = ""
    two_sided: bool = False  # the complete surface also has the mirror half u < 0

    def __post_init__(self):
        if self.a < 0.0:
            raise SurfaceError("bottom disc radius must be non-negative")
        if abs(self.x(0.0) - self.a) > 1e-12 * max(1.0, self.a):
            raise SurfaceError(f"profile must start on the disc rim: x(0)={self.x(0.0)!r}, a={self.a!r}")
        grid = np.linspace(0.0, self.u_max, 257)[1:-1]
        if np.any(np.asarray(self.x(grid)) <= 0.0):
            raise SurfaceError(f"profile x(u) must be positive on (0, {self.u_max})")
        if np.any(speed(self, grid) <= 0.0):
            raise SurfaceError("profile is not regular")


def closes(s: RevolutionSurface) -> bool:
    """True when the profile returns to the axis at u_max, so the surface is compact."""
    return abs(float(s.x(s.u_max))) <= 1e-12 * max(1.0, s.a)


def make_surface(x, z, a: float, u_max: float = 30.0, name: str = "", two_sided: bool = False) -> RevolutionSurface:
    return RevolutionSurface(as_expr(x, "u"), as_expr(z, "u"), float(a), float(u_max), name, two_sided)


def _num(v: float) -> str:
    return repr(float(v))


def catalog(theta: float = math.pi / 4, alpha: float = 1.0) -> list[RevolutionSurface]:
    """Catenoid, hyperboloid of one sheet, cone, paraboloid and sphere, each truncated and completed."""
    return [
        make_surface("cosh(u)", "u", 1.0, name="catenoid", two_sided=True),
        make_surface("sqrt(1+u^2)", "u", 1.0, name="hyperboloid", two_sided=True),
        make_surface(f"1+u*cos({_num(theta)})", f"u*sin({_num(theta)})", 1.0, name="cone"),
        make_surface("u", f"{_num(alpha)}*u^2", 0.0, name="paraboloid"),
        make_surface("-sin(u-pi)", "1+cos(u-pi)", 0.0, u_max=math.pi, name="sphere"),
    ]


def by_name(name: str, theta: float = math.pi / 4, alpha: float = 1.0) -> RevolutionSurface:
    for s in catalog(theta, alpha):
        if s.name == name:
            return s
    raise SurfaceError(f"unknown catalog surface {name!r}")


def speed(s: RevolutionSurface, u):
    """sqrt(x'^2 + z'^2)."""
    x1 = s.x.jet(u, order=1)[1]
    z1 = s.z.jet(u, order=1)[1]
    return np.sqrt(x1 * x1 + z1 * z1)


def _area_density(s: RevolutionSurface):
    return lambda u: s.x.jet(u, order=1)[0] * speed(s, u)


def area(s: RevolutionSurface, c: float) -> float:
    """A(a, c) = pi a^2 + 2 pi int_0^c x sqrt(x'^2 + z'^2) du."""
    if not 0.0 <= c <= s.u_max:
        raise ValueError(f"c={c} outside [0, {s.u_max}]")
    return math.pi * s.a ** 2 + 2.0 * math.pi * integrate(_area_density(s), 0.0, c, 1e-300, 1e-13, vectorized=True)


def boundary_length(s: RevolutionSurface, c: float) -> float:
    """L(a, c) = 2 pi x(c)."""
    return 2.0 * math.pi * s.x(c)


def extrinsic_radius(s: RevolutionSurface, u: float) -> float:
    """Distance from the pole, sqrt(x^2 + z^2)."""
    return math.hypot(s.x(u), s.z(u))


def _tangency_parts(s: RevolutionSurface, u: float):
    xv, x1, _ = (float(t) for t in s.x.jet(u, order=1))
    zv, z1, _ = (float(t) for t in s.z.jet(u, order=1))
    return xv * x1 + zv * z1, math.hypot(x1, z1), math.hypot(xv, zv)


def tangency(s: RevolutionSurface, u: float) -> float:
    """(x x' + z z') / (sqrt(x'^2 + z'^2) sqrt(x^2 + z^2)): norm of the tangential part of grad r."""
    num, v, rad = _tangency_parts(s, u)
    if v == 0.0 or rad == 0.0:
        raise SurfaceError(f"degenerate profile point at u={u}")
    return num / (v * rad)


def gauss_curvature(s: RevolutionSurface, u):
    """K = z'(x' z'' - x'' z') / (x (x'^2 + z'^2)^2)."""
    xv, x1, x2 = s.x.jet(u)
    _, z1, z2 = s.z.jet(u)
    v2 = x1 * x1 + z1 * z1
    if np.any(xv == 0.0) or np.any(v2 == 0.0):
        raise SurfaceError(f"degenerate profile point at u={u}")
    k = z1 * (x1 * z2 - x2 * z1) / (xv * v2 * v2)
    return float(k) if np.ndim(k) == 0 else k


def radial_convexity(s: RevolutionSurface, u: float) -> float:
    """-<H, grad r> with H the (averaged) mean curvature vector and r the distance to the pole."""
    xv, x1, x2 = (float(t) for t in s.x.jet(u))
    zv, z1, z2 = (float(t) for t in s.z.jet(u))
    v = math.hypot(x1, z1)
    if xv == 0.0 or v == 0.0:
        raise SurfaceError(f"degenerate profile point at u={u}")
    k_meridian = (x1 * z2 - z1 * x2) / v ** 3
    k_parallel = z1 / (xv * v)
    normal_dot_position = (x1 * zv - z1 * xv) / v
    return -0.5 * (k_meridian + k_parallel) * normal_dot_position / math.hypot(xv, zv)


def _is_unit_height(s: RevolutionSurface) -> bool:
    grid = np.linspace(0.0, s.u_max, 17)
    zv, z1, z2 = s.z.jet(grid)
    return bool(np.allclose(zv, grid, atol=1e-14) and np.allclose(z1, 1.0) and np.allclose(z2, 0.0))


def convexity_residual(s: RevolutionSurface, u: float) -> float:
    """(1 + x'^2 - x x'')(x - u x') for profiles with z(u) = u; >= 0 iff radially mean 0-convex.

    For other profiles the radial mean convexity itself is returned, which
    carries the same sign information.
    """
    if not _is_unit_height(s):
        return radial_convexity(s, u)
    xv, x1, x2 = (float(t) for t in s.x.jet(u))
    return (1.0 + x1 * x1 - xv * x2) * (xv - u * x1)


def arclength(s: RevolutionSurface, u: float) -> float:
    """int_0^u sqrt(x'^2 + z'^2)."""
    if u < 0.0:
        raise ValueError("arclength needs u >= 0")
    return integrate(lambda t: speed(s, t), 0.0, u, 1e-300, 1e-13, vectorized=True)


@dataclass(frozen=True)
class SurfaceReport:
    c: float
    area: float
    length: float
    quotient: float
    upper_bound: float
    tangency_at_c: float
    r_at_c: float
    inequality_holds: bool
    note: str = ""

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        if math.isinf(self.upper_bound):
            d["upper_bound"] = None
        return d


def default_grid(s: RevolutionSurface, n: int = 64) -> np.ndarray:
    return np.geomspace(1e-2 * s.u_max, s.u_max, n)


def isoperimetric_check(s: RevolutionSurface, c_grid=None) -> list[SurfaceReport]:
    """Compare Q(a, c) = L/A with the bound 2 sqrt(x'^2+z'^2)/(x x' + z z') at each c."""
    grid = default_grid(s) if c_grid is None else np.asarray(c_grid, dtype=float)
    if np.any(grid <= 0.0) or np.any(grid > s.u_max):
        raise ValueError(f"grid must lie in (0, {s.u_max}]")
    order = np.argsort(grid)
    density = _area_density(s)
    partial = {}
    acc, last = 0.0, 0.0
    for c in grid[order]:
        acc += integrate(density, last, float(c), 1e-300, 1e-13, vectorized=True)
        partial[float(c)] = acc
        last = float(c)
    reports = []
    for c in map(float, grid):
        A = math.pi * s.a ** 2 + 2.0 * math.pi * partial[c]
        L = boundary_length(s, c)
        num, v, rad = _tangency_parts(s, c)
        note = ""
        if L <= 1e-12 * math.sqrt(A):
            quotient, bound, holds = 0.0, math.inf, True
            note = "boundary length vanishes: inequality is vacuous"
        else:
            quotient = L / A
            if num <= 0.0:
                bound, holds = math.inf, False
                note = "tangency is not positive: inequality inapplicable"
            else:
                bound = 2.0 * v / num
                holds = quotient <= bound + HOLD_SLACK
        tan_c = num / (v * rad) if rad > 0.0 else 0.0
        reports.append(SurfaceReport(c, A, L, quotient, bound, tan_c, rad, holds, note))
    return reports
