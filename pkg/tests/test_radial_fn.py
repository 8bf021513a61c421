import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from isolab.radial_fn import (BracketError, DomainError, ImproperPolicy, ParseError, QuadratureError, as_expr,
                              classify_improper, eval2, integrate, invert_monotone, parse_radial)

# erf-type integral, value from a 30-digit mpmath quadrature
GAUSS_0_1 = 0.746824132812427025


@pytest.mark.parametrize("text,r,expected", [
    ("2+3*r^2", 2.0, 14.0),
    ("-r^2", 3.0, -9.0),
    ("2^3^2", 0.0, 512.0),
    ("2^-1", 0.0, 0.5),
    ("r^-2", 2.0, 0.25),
    ("1e-3*r", 5.0, 5e-3),
    ("2.5E2", 0.0, 250.0),
    ("pi*e", 0.0, math.pi * math.e),
    ("(1+r)*(1-r)", 0.5, 0.75),
    ("8/2/2", 0.0, 2.0),
    ("--r", 1.5, 1.5),
    ("abs(-r)", 1.5, 1.5),
])
def test_precedence_and_literals(text, r, expected):
    assert parse_radial(text)(r) == pytest.approx(expected, rel=1e-15)


@pytest.mark.parametrize("name,fn", [
    ("sin", math.sin), ("cos", math.cos), ("tan", math.tan), ("sinh", math.sinh), ("cosh", math.cosh),
    ("tanh", math.tanh), ("exp", math.exp), ("log", math.log), ("sqrt", math.sqrt), ("atan", math.atan),
    ("abs", abs),
])
def test_functions_match_math(name, fn):
    f = parse_radial(f"{name}(r)")
    for r in (0.3, 0.9, 1.7):
        assert f(r) == pytest.approx(fn(r), rel=1e-14)


def test_parse_error_offset_is_one_based():
    with pytest.raises(ParseError) as info:
        parse_radial("log(r")
    assert info.value.offset == 6
    assert ")" in info.value.expected


@pytest.mark.parametrize("text", ["", "r+", "foo(r)", "r $ 2", "u", "(r", "r)", "sin r", "2..3"])
def test_parse_errors(text):
    with pytest.raises(ParseError):
        parse_radial(text)


def test_other_variable():
    f = parse_radial("cosh(u)", "u")
    assert f(0.0) == 1.0
    with pytest.raises(ParseError):
        parse_radial("cosh(r)", "u")


@pytest.mark.parametrize("text,r", [("log(-r)", 1.0), ("sqrt(r-2)", 1.0), ("1/r", 0.0), ("sinh(r)/r", 0.0)])
def test_domain_errors(text, r):
    with pytest.raises(DomainError):
        parse_radial(text)(r)


def test_removable_singularity_near_zero():
    # series: sinh(t)/t = 1 + t^2/6 + ...
    j = eval2(parse_radial("sinh(r)/r"), 1e-8)
    assert j.value == pytest.approx(1.0, abs=1e-15)


def test_known_jets():
    assert tuple(map(float, parse_radial("cosh(r)").jet(0.0))) == (1.0, 0.0, 1.0)
    assert tuple(map(float, parse_radial("r^3").jet(2.0))) == (8.0, 12.0, 12.0)
    v, d1, d2 = parse_radial("r^r").jet(2.0)
    assert float(d1) == pytest.approx(4.0 * (math.log(2.0) + 1.0), rel=1e-14)


def test_vectorized_jets():
    r = np.linspace(0.1, 2.0, 7)
    v, d1, d2 = parse_radial("sin(r)*exp(r)").jet(r)
    assert np.allclose(v, np.sin(r) * np.exp(r))
    assert np.allclose(d1, (np.cos(r) + np.sin(r)) * np.exp(r))
    assert np.allclose(d2, 2.0 * np.cos(r) * np.exp(r))


def test_as_expr_accepts_numbers():
    assert as_expr(2.5)(7.0) == 2.5
    assert as_expr("r").is_constant is False
    assert as_expr("2*pi").is_constant


# ---------------------------------------------------------------- AD against finite differences

_leaf = st.one_of(st.just("r"), st.floats(0.5, 2.0).map(lambda c: f"{c:.3f}"))


def _extend(children):
    unary = st.sampled_from(["sin({})", "cos({})", "atan({})", "tanh({})", "exp(tanh({}))",
                             "sqrt(1+({})^2)", "log(2+sin({}))", "({})^2", "({})^3", "cosh(tanh({}))"])
    binary = st.sampled_from(["({})+({})", "({})-({})", "({})*({})", "({})/(1+({})^2)"])
    return st.one_of(st.tuples(unary, children).map(lambda t: t[0].format(t[1])),
                     st.tuples(binary, children, children).map(lambda t: t[0].format(t[1], t[2])))


expressions = st.recursive(_leaf, _extend, max_leaves=6)


@settings(max_examples=150, deadline=None)
@given(expressions, st.floats(0.1, 2.0))
def test_ad_matches_finite_differences(text, r):
    f = parse_radial(text)
    h = 1e-5
    fp, fm, f0 = f(r + h), f(r - h), f(r)
    j = eval2(f, r)
    fd1 = (fp - fm) / (2 * h)
    fd2 = (fp - 2 * f0 + fm) / (h * h)
    assert abs(j.d1 - fd1) <= 1e-6 * (1 + abs(j.d1))
    assert abs(j.d2 - fd2) <= 1e-4 * (1 + abs(j.d2))


# ---------------------------------------------------------------- quadrature

def test_integrate_reference_values():
    assert integrate(lambda t: t, 0.0, 1.0) == pytest.approx(0.5, abs=1e-12)
    assert integrate(lambda t: math.sin(t) ** 2, 0.0, 2 * math.pi) == pytest.approx(math.pi, abs=1e-10)
    assert integrate(lambda t: math.exp(-t * t), 0.0, 1.0) == pytest.approx(GAUSS_0_1, abs=1e-12)


def test_integrate_vectorized_matches_scalar():
    f = parse_radial("cosh(r)^2")
    a = integrate(f, -3.0, 2.0, vectorized=True)
    b = integrate(lambda t: math.cosh(t) ** 2, -3.0, 2.0)
    assert a == pytest.approx(b, rel=1e-12)


@settings(max_examples=60, deadline=None)
@given(expressions, st.floats(0.1, 1.0), st.floats(0.0, 1.0), st.floats(0.1, 1.5))
def test_integrate_additivity(text, a, frac, width):
    f = parse_radial(text)
    c = a + width
    b = a + frac * width
    whole = integrate(f, a, c, 1e-13, 1e-12, vectorized=True)
    parts = integrate(f, a, b, 1e-13, 1e-12, vectorized=True) + integrate(f, b, c, 1e-13, 1e-12, vectorized=True)
    assert whole == pytest.approx(parts, abs=1e-10 * (1 + abs(whole)))


def test_quadrature_failure_reports_estimate():
    with pytest.raises(QuadratureError) as info:
        integrate(lambda t: math.sin(1.0 / t), 1e-6, 1.0, 1e-15, 1e-15, max_panels=20)
    assert math.isfinite(info.value.estimate)


def test_invert_monotone():
    x = invert_monotone(math.tanh, 0.5, 0.0, 3.0)
    assert x == pytest.approx(math.atanh(0.5), abs=1e-12)
    with pytest.raises(BracketError):
        invert_monotone(math.tanh, 2.0, 0.0, 3.0)


# ---------------------------------------------------------------- improper integrals

@pytest.mark.parametrize("text,a,kind", [
    ("1/r^2", 1.0, "Convergent"),
    ("1/r", 1.0, "Divergent"),
    ("1/(r*log(r))", 2.0, "Divergent"),
    ("exp(-r)", 1.0, "Convergent"),
    ("1", 1.0, "Divergent"),
])
def test_classify_improper_canonical(text, a, kind):
    v = classify_improper(parse_radial(text), a, vectorized=True)
    assert v.kind == kind
    assert len(v.partial_values) == ImproperPolicy().doublings + 1
    assert v.rationale


def test_classify_improper_policy_checks():
    with pytest.raises(ValueError):
        classify_improper(lambda t: 1.0 / t, 1.0, ImproperPolicy(doublings=3))
    with pytest.raises(ValueError):
        classify_improper(lambda t: 1.0 / t, 0.0)


def test_partial_values_increase_for_positive_integrand():
    v = classify_improper(parse_radial("1/r^2"), 1.0, vectorized=True)
    values = [p for _, p in v.partial_values]
    assert all(b > a for a, b in zip(values, values[1:]))
    assert values[-1] == pytest.approx(1.0, abs=1e-5)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.2, 3.0), st.floats(0.0, 2.0), st.floats(0.01, 0.99))
def test_invert_monotone_round_trip(k, c, frac):
    f = lambda t: math.sinh(k * t) + c * t  # noqa: E731
    x = frac * 2.0
    assert invert_monotone(f, f(x), 0.0, 2.0) == pytest.approx(x, abs=1e-10)


@pytest.mark.parametrize("small,large", [("1/(r*log(r))", "1/r"), ("1/r", "1"), ("1/(r*log(r))", "2/(r*log(r))")])
def test_classification_monotone_consistent(small, large):
    a = classify_improper(parse_radial(small), 2.0, vectorized=True)
    b = classify_improper(parse_radial(large), 2.0, vectorized=True)
    assert a.kind == "Divergent"
    assert b.kind != "Convergent"
