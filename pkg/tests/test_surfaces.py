import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from isolab import surfaces as sf

# pi + 2 pi int_0^2 cosh(u)^2 du, mpmath
CATENOID_AREA_2 = 52.29167965255453
# int_0^3 sqrt(1 + u^2/(1+u^2)) du, mpmath
HYPERBOLOID_ARCLENGTH_3 = 3.757814612992730


def test_catalog_names():
    assert [s.name for s in sf.catalog()] == ["catenoid", "hyperboloid", "cone", "paraboloid", "sphere"]
    with pytest.raises(sf.SurfaceError):
        sf.by_name("torus")


def test_areas_and_lengths():
    cat = sf.by_name("catenoid")
    assert sf.area(cat, 2.0) == pytest.approx(CATENOID_AREA_2, rel=1e-12)
    assert sf.boundary_length(cat, 2.0) == pytest.approx(2 * math.pi * math.cosh(2.0))
    assert sf.arclength(sf.by_name("hyperboloid"), 3.0) == pytest.approx(HYPERBOLOID_ARCLENGTH_3, abs=1e-12)
    sphere = sf.by_name("sphere")
    assert sf.area(sphere, math.pi) == pytest.approx(4 * math.pi, rel=1e-12)
    assert sf.extrinsic_radius(sphere, math.pi) == pytest.approx(2.0)


def test_gauss_curvature_closed_forms():
    u = np.linspace(-2.0, 2.0, 9)
    assert np.allclose(sf.gauss_curvature(sf.by_name("catenoid"), u), -1.0 / np.cosh(u) ** 4)
    assert np.allclose(sf.gauss_curvature(sf.by_name("hyperboloid"), u), -1.0 / (1.0 + 2.0 * u * u) ** 2)
    assert np.allclose(sf.gauss_curvature(sf.by_name("cone"), np.linspace(0.1, 3, 5)), 0.0, atol=1e-15)
    assert np.allclose(sf.gauss_curvature(sf.by_name("sphere"), np.linspace(0.1, 3, 5)), 1.0)
    # paraboloid z = r^2: K = 4 / (1 + 4 r^2)^2
    assert sf.gauss_curvature(sf.by_name("paraboloid"), 0.5) == pytest.approx(4.0 / 4.0, rel=1e-12)


def test_tangency_of_cone_is_radial():
    # the flat cone meets spheres about the pole at an angle that tends to 1
    cone = sf.by_name("cone")
    assert sf.tangency(cone, 1e4) == pytest.approx(1.0, abs=1e-4)
    assert 0.0 < sf.tangency(cone, 1.0) < 1.0


@pytest.mark.parametrize("theta", [math.pi / 6, math.pi / 4, math.pi / 3])
@pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0])
def test_isoperimetric_sweep(theta, alpha):
    for s in sf.catalog(theta, alpha):
        reports = sf.isoperimetric_check(s)
        assert len(reports) == 64
        assert all(r.inequality_holds for r in reports), s.name


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, math.pi - 0.05))
def test_sphere_reduction(c):
    rep = sf.isoperimetric_check(sf.by_name("sphere"), [c])[0]
    assert rep.quotient == pytest.approx(math.sin(c) / (1 - math.cos(c)), abs=1e-10)
    assert rep.upper_bound == pytest.approx(2 / math.sin(c), abs=1e-10)


@pytest.mark.parametrize("name", ["catenoid", "hyperboloid", "cone", "paraboloid", "sphere"])
def test_radially_mean_convex(name):
    s = sf.by_name(name)
    for u in np.linspace(0.05, min(s.u_max, 10.0) - 0.05, 20):
        x = float(s.x(float(u)))
        assert sf.convexity_residual(s, float(u)) >= -1e-13 * (1.0 + x * x) * (1.0 + abs(u) * x)


def test_catenoid_is_minimal():
    cat = sf.by_name("catenoid")
    assert abs(sf.radial_convexity(cat, 0.7)) < 1e-14


def test_report_dict():
    rep = sf.isoperimetric_check(sf.by_name("paraboloid"), [1.0])[0]
    d = rep.to_dict()
    assert d["inequality_holds"] is True and d["c"] == 1.0


def test_invalid_profiles():
    with pytest.raises(sf.SurfaceError):
        sf.make_surface("1+u", "u", 2.0)
    with pytest.raises(sf.SurfaceError):
        sf.make_surface("1-u", "u", 1.0, u_max=3.0)
    with pytest.raises(ValueError):
        sf.isoperimetric_check(sf.by_name("catenoid"), [0.0])
    assert sf.closes(sf.by_name("sphere")) and not sf.closes(sf.by_name("cone"))


@pytest.mark.parametrize("u", [0.5, 1.0, 2.0, 4.0])
def test_hyperboloid_convexity_closed_forms(u):
    h = sf.by_name("hyperboloid")
    assert sf.convexity_residual(h, u) == pytest.approx(2 * u * u / (1 + u * u) ** 1.5, rel=1e-12)
    assert sf.radial_convexity(h, u) == pytest.approx(u * u / (2 * u * u + 1) ** 2.5, rel=1e-12)


def test_arclength_closed_forms():
    for u in (0.3, 1.0, 2.5):
        assert sf.arclength(sf.by_name("catenoid"), u) == pytest.approx(math.sinh(u), abs=1e-9)
        assert sf.arclength(sf.by_name("cone"), u) == pytest.approx(u, abs=1e-12)
