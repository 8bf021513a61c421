"""Acceptance suite: one test per criterion, summarized as PASS/FAIL lines after the run."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from isolab import analysis as an
from isolab import parabolicity as pb
from isolab import surfaces as sf
from isolab.constellation import build, check_balance, quotient_qW, stretch, unstretch, warp_W
from isolab.model_space import make_model, quotient_qw
from isolab.radial_fn import classify_improper, eval2, integrate, parse_radial

# 1/(coth 1 - coth 2), mpmath
HYP_CAPACITY_1_2 = 3.6268604078470188
# 2 pi sqrt(2), total absolute curvature of the hyperboloid of one sheet
HYPERBOLOID_TOTAL_CURVATURE = 8.885765876316732

RNG_SEED = 20240611


def _random_triples(n, seed):
    """Admissible (w, g, h, m, R): w'(0) = 1, 0 < g <= 1 with g(0) = 1, h finite."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        k = rng.uniform(0.2, 1.5)
        w = rng.choice([f"sinh({k:.4f}*r)/{k:.4f}", f"r+{k / 3:.4f}*r^3", "r", f"r*exp({k / 4:.4f}*r^2)"])
        a = rng.uniform(0.0, 0.8)
        g = rng.choice([f"1/(1+{a:.4f}*r^2/(1+r^2))", f"exp(-{a / 4:.4f}*r^2)", "1"])
        c = rng.uniform(-0.3, 0.3)
        h = rng.choice([f"{c:.4f}*r", f"{c:.4f}", "0", f"{c:.4f}*tanh(r)"])
        out.append((str(w), str(g), str(h), int(rng.integers(2, 5)), float(rng.uniform(0.5, 2.5))))
    return out


# ---------------------------------------------------------------- 1

@pytest.mark.criterion(1, "total absolute curvature: catenoid 4 pi, hyperboloid 2 pi sqrt 2 (1e-6)")
def test_total_absolute_curvature():
    cat = pb.ichihara_test(sf.by_name("catenoid")).evidence["total_curvature"]
    hyp = pb.ichihara_test(sf.by_name("hyperboloid")).evidence["total_curvature"]
    assert abs(cat - 4 * math.pi) < 1e-6
    assert abs(hyp - HYPERBOLOID_TOTAL_CURVATURE) < 1e-6


# ---------------------------------------------------------------- 2

@pytest.mark.criterion(2, "surface isoperimetric inequality on 64 points, theta/alpha sweeps, sphere reduction (1e-10)")
def test_surface_isoperimetry():
    for theta in (math.pi / 6, math.pi / 4, math.pi / 3):
        for alpha in (0.5, 1.0, 2.0):
            for s in sf.catalog(theta, alpha):
                reports = sf.isoperimetric_check(s)
                assert len(reports) == 64
                assert all(r.inequality_holds for r in reports), (s.name, theta, alpha)
    sphere = sf.by_name("sphere")
    for r in sf.isoperimetric_check(sphere):
        c = r.c
        if c >= math.pi - 1e-12:
            continue  # both sides are infinite at the closing point
        assert abs(r.quotient - math.sin(c) / (1 - math.cos(c))) < 1e-10
        assert abs(r.upper_bound - 2 / math.sin(c)) < 1e-10


# ---------------------------------------------------------------- 3

@pytest.mark.criterion(3, "reduction to the model space for g = 1, h = 0 (1e-7 warp, 1e-8 quotient)")
def test_reduction_invariant():
    r = np.linspace(0.01, 5.0, 200)
    for w in ("r", "sinh(r)"):
        for m in (2, 3):
            c = build(w, "1", "0", m, 5.0)
            W = np.array([warp_W(c, float(stretch(c, x))) for x in r])
            assert np.max(np.abs(W - np.asarray(c.w(r)))) < 1e-7
            assert abs(an.isoperimetric_bound(c).model_value - 1 / quotient_qw(make_model(w, m), 5.0)) < 1e-8


# ---------------------------------------------------------------- 4

@pytest.mark.criterion(4, "flat exit time (1e-9) and |L psi + 1| < 1e-4 on 10 random balanced constellations")
def test_exit_time():
    for m in (2, 3):
        for R in (1.0, 2.0):
            c = build("r", "1", "0", m, R)
            r = np.linspace(0.0, R, 101)
            assert np.max(np.abs(an.psi(c, r) - (R * R - r * r) / (2 * m))) < 1e-9
    found = 0
    for triple in _random_triples(40, RNG_SEED):
        c = build(*triple)
        if not check_balance(c).is_balanced:
            continue
        assert np.max(an.exit_time_residual(c, c.nodes[1:-1])) < 1e-4, triple
        found += 1
        if found == 10:
            break
    assert found == 10


# ---------------------------------------------------------------- 5

@pytest.mark.criterion(5, "small-radius exit time expansion: remainder K R^6 with K stable within a factor 2")
def test_gray_pinsky():
    for b, w in ((-1.0, "sinh(r)"), (1.0, "sin(r)")):
        for m in (2, 3):
            tau = m * (m - 1) * b
            ks = [abs(an.psi(build(w, "1", "0", m, R), 0.0) - an.gray_pinsky_expansion(m, tau, R)) / R ** 6
                  for R in (0.2, 0.1, 0.05)]
            assert max(ks) <= 2 * min(ks), (b, m, ks)


# ---------------------------------------------------------------- 6

@pytest.mark.criterion(6, "annulus capacity: flat 1/log(R/rho) (1e-8), hyperbolic m=3 (1e-7), forms agree (1e-8 rel)")
def test_capacity():
    flat = build("r", "1", "0", 2, 3.0)
    for rho in (0.1, 0.5, 2.0):
        assert abs(an.capacity_upper_bound(flat, rho) - 1 / math.log(3.0 / rho)) < 1e-8
    hyp = build("sinh(r)", "1", "0", 3, 2.0)
    assert abs(an.capacity_upper_bound(hyp, 1.0) - HYP_CAPACITY_1_2) < 1e-7
    for c in (flat, hyp, build("sinh(r)", "1/(1+r^2/(1+r^2))", "0.1*r", 3, 2.0)):
        for frac in (0.1, 0.5, 0.9):
            by_r, by_s = an.capacity_forms(c, frac * c.R)
            assert abs(by_r - by_s) <= 1e-8 * abs(by_r)


# ---------------------------------------------------------------- 7

@pytest.mark.criterion(7, "parabolicity verdicts: flat m=2 and m=3, four surfaces agree on three routes")
def test_parabolicity_verdicts():
    flat2 = pb.UnboundedConstellation("r", "1", "0", 2)
    assert pb.test_sphere_condition(flat2).verdict == pb.PARABOLIC
    assert pb.test_ball_condition(flat2).verdict == pb.PARABOLIC
    assert pb.test_log_ball_condition(flat2).verdict == pb.STOCHASTICALLY_COMPLETE
    flat3 = pb.UnboundedConstellation("r", "1", "0", 3)
    assert pb.test_sphere_condition(flat3).verdict == pb.INCONCLUSIVE
    assert pb.test_ball_condition(flat3).verdict == pb.INCONCLUSIVE
    assert pb.test_log_ball_condition(flat3).verdict == pb.STOCHASTICALLY_COMPLETE
    for name in ("catenoid", "hyperboloid", "cone", "paraboloid"):
        s = sf.by_name(name)
        routes = [pb.milnor_test_surface(s), pb.ichihara_test(s), pb.tangency_route(s)]
        assert [v.verdict for v in routes] == [pb.PARABOLIC] * 3, name


# ---------------------------------------------------------------- 8

@pytest.mark.criterion(8, "strong balance implies weak on 20 random triples; equality case w = r (1e-7)")
def test_balance_machinery():
    strong = 0
    for triple in _random_triples(20, RNG_SEED + 1):
        rep = check_balance(build(*triple))
        if rep.strong_holds:
            strong += 1
            assert rep.is_balanced, triple
    assert strong >= 5  # the implication is exercised, not vacuous
    for g in ("1", "1/(1+r^2)", "exp(-r^2)"):
        for m in (2, 3):
            c = build("r", g, "0", m, 2.0)
            for s in np.linspace(0.05, c.s_R, 25):
                r = unstretch(c, s)
                assert abs(quotient_qW(c, s) - r * c.g(r) / m) < 1e-7
            rep = an.isoperimetric_bound(c)
            assert abs(rep.model_value - m / (2.0 * c.g(2.0))) < 1e-7 * rep.model_value
            assert abs(rep.model_value - rep.closed_form_value) < 1e-7 * rep.model_value


# ---------------------------------------------------------------- 9

_leaf = st.one_of(st.just("r"), st.floats(0.5, 2.0).map(lambda c: f"{c:.3f}"))
_expr = st.recursive(_leaf, lambda ch: st.one_of(
    st.tuples(st.sampled_from(["sin({})", "exp(tanh({}))", "sqrt(1+({})^2)", "log(2+sin({}))", "({})^2"]), ch)
    .map(lambda t: t[0].format(t[1])),
    st.tuples(st.sampled_from(["({})+({})", "({})*({})", "({})/(1+({})^2)"]), ch, ch)
    .map(lambda t: t[0].format(t[1], t[2]))), max_leaves=5)


@settings(max_examples=100, deadline=None)
@given(_expr, st.floats(0.1, 2.0), st.floats(0.0, 1.0))
def _substrate_ad_and_quadrature(text, r, frac):
    f = parse_radial(text)
    h = 1e-5
    j = eval2(f, r)
    fp, fm, f0 = f(r + h), f(r - h), f(r)
    assert abs(j.d1 - (fp - fm) / (2 * h)) <= 1e-6 * (1 + abs(j.d1))
    assert abs(j.d2 - (fp - 2 * f0 + fm) / (h * h)) <= 1e-4 * (1 + abs(j.d2))
    b = 0.1 + 1.5 * frac
    whole = integrate(f, 0.1, 1.6, 1e-13, 1e-12, vectorized=True)
    parts = integrate(f, 0.1, b, 1e-13, 1e-12, vectorized=True) + integrate(f, b, 1.6, 1e-13, 1e-12, vectorized=True)
    assert abs(whole - parts) <= 1e-10 * (1 + abs(whole))


@pytest.mark.criterion(9, "substrate: AD vs FD, additivity, stretch round trip (1e-8), anchor invariance (1e-7), "
                          "improper classification")
def test_numerical_substrate():
    _substrate_ad_and_quadrature()
    c = build("r+r^3", "(1+r)/(1+r+r^2/2)", "0.2*r", 4, 1.0)
    for r in np.linspace(0.0, 1.0, 101):
        assert abs(unstretch(c, stretch(c, r)) - r) < 1e-8
    for R in (0.6, 2.0, 3.0):
        base = build("sinh(r)", "1/(1+r^2)", "0.1", 3, R)
        r = np.linspace(0.01 * R, R, 50)
        for anchor in (R / 4, R / 2, R):
            other = build("sinh(r)", "1/(1+r^2)", "0.1", 3, R, anchor=anchor)
            assert np.max(np.abs(other.lam(r) / base.lam(r) - 1.0)) < 1e-7
    kinds = [classify_improper(parse_radial(t), a, vectorized=True).kind
             for t, a in (("1/r^2", 1.0), ("1/r", 1.0), ("1/(r*log(r))", 2.0))]
    assert kinds == ["Convergent", "Divergent", "Divergent"]
