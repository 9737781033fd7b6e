from __future__ import annotations

import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from jigsaw.theory import (ConvergenceError, MonteCarlo, PhiSpec, QuadratureSpec, g_sigma, gamma,
                           grow_lower_bound_theta2, lambda_sigma, lb2d_infimum, lb2d_objective, nu_sigma,
                           nu_sigma_quadrature, phi, ub2d_bound, zeta)
from jigsaw.theory.crossing import UsageError as PhiUsageError
from jigsaw.theory.crossing import bernstein_coefficients
from jigsaw.theory.quadrature import adaptive_simpson, integrate

# lambda_8 by mpmath quadrature at 30 digits of -log P(Gamma(8) <= x) over [0, inf)
LAMBDA_8 = 44.3449802930156677621476963853


# ------------------------------------------------------------ special functions
@given(x=st.floats(-8.5, 40.0).filter(lambda x: abs(x - round(x)) > 1e-6 or x > 0))
@settings(max_examples=200, deadline=None)
def test_gamma_against_mpmath(x):
    # near a pole the condition number grows like 1/distance
    dist = abs(x - round(x)) if x < 0.5 else 1.0
    assert gamma(x) == pytest.approx(float(mpmath.gamma(x)), rel=1e-13 * (1 + 1 / dist))


@given(s=st.floats(1.01, 20.0))
@settings(max_examples=200, deadline=None)
def test_zeta_against_mpmath(s):
    assert zeta(s) == pytest.approx(float(mpmath.zeta(s)), rel=1e-13)


def test_special_function_domains():
    with pytest.raises(ValueError):
        gamma(-2.0)
    with pytest.raises(ValueError):
        zeta(1.0)
    assert zeta(2.0) == pytest.approx(math.pi ** 2 / 6, rel=1e-15)
    assert gamma(0.5) == pytest.approx(math.sqrt(math.pi), rel=1e-15)


# ------------------------------------------------------------ quadrature
def test_simpson_on_polynomial_and_log_singularity():
    r = adaptive_simpson(lambda x: x ** 3, 0.0, 2.0, 1e-12)
    assert r.value == pytest.approx(4.0, abs=1e-12)
    spec = QuadratureSpec(abs_tol=1e-10, rel_tol=1e-10)
    r = integrate(lambda x: -math.log(x), 0.0, 1.0, spec, singular_left=True)
    assert r.value == pytest.approx(1.0, abs=1e-9)
    assert r.error <= 1e-10


def test_quadrature_budget_raises_with_best_estimate():
    spec = QuadratureSpec(abs_tol=1e-14, rel_tol=1e-14, max_intervals=5)
    with pytest.raises(ConvergenceError) as info:
        integrate(lambda x: math.sin(30 * x), 0.0, 3.0, spec)
    assert math.isfinite(info.value.best.value)


def test_quadrature_spec_validation():
    with pytest.raises(ValueError):
        QuadratureSpec(singularity="magic")


# ------------------------------------------------------------ g_sigma and lambda_sigma
def test_g_examples():
    assert g_sigma(1, math.log(2)) == pytest.approx(math.log(2), rel=1e-15)
    assert g_sigma(2, 1.0) == pytest.approx(1.33089, abs=1e-5)
    assert g_sigma(2, 1.0) == pytest.approx(-math.log(1 - 2 / math.e), rel=1e-14)
    with pytest.raises(ValueError):
        g_sigma(1, 0.0)


@pytest.mark.parametrize("sigma", [1, 2, 3, 5, 8])
def test_g_positive_decreasing_convex(sigma):
    xs = np.logspace(-6, 2, 400)
    g = np.array([g_sigma(sigma, x) for x in xs])
    assert np.all(g > 0)
    assert np.all(np.diff(g) < 0)
    # second divided differences on the nonuniform grid
    d1 = np.diff(g) / np.diff(xs)
    assert np.all(np.diff(d1) >= -1e-9)


@given(sigma=st.integers(1, 8), x=st.floats(1e-8, 60.0))
@settings(max_examples=200, deadline=None)
def test_g_against_mpmath(sigma, x):
    want = -mpmath.log(mpmath.gammainc(sigma, 0, x, regularized=True))
    assert g_sigma(sigma, x) == pytest.approx(float(want), rel=1e-10, abs=1e-14)


def test_lambda_values():
    l1 = lambda_sigma(1)
    assert l1.value == pytest.approx(sum(1 / k ** 2 for k in range(1, 200_000)) + 1 / 200_000, abs=1e-6)
    assert abs(l1.value - math.pi ** 2 / 6) < 1e-9
    vals = [lambda_sigma(s).value for s in range(1, 9)]
    assert all(b > a for a, b in zip(vals, vals[1:]))
    assert vals[7] == pytest.approx(LAMBDA_8, rel=1e-9)
    # lambda_sigma / sigma^2 decreases toward its limit 1/2
    ratios = [v / s ** 2 for s, v in zip(range(1, 9), vals)]
    assert all(b < a for a, b in zip(ratios, ratios[1:]))
    assert ratios[-1] > 0.5


# ------------------------------------------------------------ nu_sigma
def test_nu_examples():
    assert nu_sigma(1) == pytest.approx(3.216, abs=1e-3)
    assert nu_sigma(1) ** 3 == pytest.approx(33.25, abs=0.01)
    assert nu_sigma(1) == pytest.approx(float(mpmath.gamma(mpmath.mpf(1) / 3) * mpmath.zeta(mpmath.mpf(4) / 3) / 3),
                                        rel=1e-13)


@pytest.mark.parametrize("sigma", [1, 2, 3])
def test_nu_two_paths_agree(sigma):
    assert abs(nu_sigma(sigma) - nu_sigma_quadrature(sigma).value) < 1e-6


# ------------------------------------------------------------ 2D lower bound
def test_lb2d_example_and_grid_oracle():
    v, a = lb2d_infimum(1.5116, 0.0388)
    assert v == pytest.approx(2.008, abs=1e-3)
    assert 1.0 <= a <= 2.0
    grid = min(lb2d_objective(1 + i / 10_000, 1.5116, 0.0388) for i in range(10_001))
    assert abs(v - grid) < 1e-6


@given(c=st.floats(0.2, 5.0), lam=st.floats(1e-3, 2.0))
@settings(max_examples=100, deadline=None)
def test_lb2d_never_above_grid(c, lam):
    v, a = lb2d_infimum(c, lam)
    grid = min(lb2d_objective(1 + i / 2000, c, lam) for i in range(2001))
    assert v <= grid + 1e-9
    assert lb2d_objective(a, c, lam) == pytest.approx(v)


def test_lb2d_diverges_as_lambda_vanishes():
    lams = (1e-2, 1e-4, 1e-8, 1e-12)
    vals = [lb2d_infimum(1.5, lam)[0] for lam in lams]
    assert all(b > a for a, b in zip(vals, vals[1:]))
    # for small lam the minimum sits at alpha = 1 and grows like c log(1/lam)
    for lam, v in zip(lams[1:], vals[1:]):
        want = -1.5 * math.log(-math.expm1(-1.5 * lam)) - 1.5 * math.log(4.65)
        assert v == pytest.approx(want, rel=1e-12)


# ------------------------------------------------------------ phi
def test_phi_1_0_polynomial():
    for r in np.linspace(0, 1, 11):
        assert phi(PhiSpec(1, 0), r) == pytest.approx(2 * r - r * r, abs=1e-12)


@pytest.mark.parametrize("k,ell", [(1, 0), (2, 0), (2, 3), (3, 1), (4, 2)])
def test_phi_endpoints(k, ell):
    spec = PhiSpec(k, ell)
    assert phi(spec, 0.0) == 0.0
    if k + 1 + ell <= spec.sites:
        assert phi(spec, 1.0) == 1.0


def _phi_brute(k, ell, r):
    sites = [(x, y) for y in range(k + 1) for x in range(k + 1 - y)]
    others = sites[1:]
    total = 0.0
    for mask in range(1 << len(others)):
        open_ = {(0, 0)} | {s for i, s in enumerate(others) if mask >> i & 1}
        seen, stack = {(0, 0)}, [(0, 0)]
        while stack:
            x, y = stack.pop()
            for nb in ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)):
                if nb in open_ and nb not in seen:
                    seen.add(nb)
                    stack.append(nb)
        if any(x + y == k for x, y in seen) and len(seen) >= k + 1 + ell:
            j = len(open_) - 1
            total += r ** j * (1 - r) ** (len(others) - j)
    return total


@pytest.mark.parametrize("k,ell", [(2, 0), (2, 2), (3, 0), (3, 2)])
def test_phi_exact_matches_brute_force(k, ell):
    for r in (0.1, 0.45, 0.8):
        assert phi(PhiSpec(k, ell), r) == pytest.approx(_phi_brute(k, ell, r), abs=1e-13)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_phi_is_a_polynomial_of_the_stated_degree(k):
    spec = PhiSpec(k, 1)
    deg = k * (k + 3) // 2
    assert spec.degree == deg
    nodes = np.linspace(0.05, 0.95, deg + 1)
    coef = np.polyfit(nodes, [phi(spec, r) for r in nodes], deg)
    for r in (0.13, 0.5, 0.77):
        assert np.polyval(coef, r) == pytest.approx(phi(spec, r), abs=1e-10)


@pytest.mark.parametrize("mode", ["exact", MonteCarlo(20_000, 3)])
def test_phi_nondecreasing(mode):
    spec = PhiSpec(4, 2, mode)
    vals = [phi(spec, r) for r in np.linspace(0, 1, 41)]
    assert all(b >= a - 1e-15 for a, b in zip(vals, vals[1:]))


def test_phi_monte_carlo_tracks_exact():
    exact = PhiSpec(4, 3)
    mc = PhiSpec(4, 3, MonteCarlo(50_000, 9))
    for r in (0.3, 0.5, 0.7):
        assert phi(mc, r) == pytest.approx(phi(exact, r), abs=0.01)


def test_phi_spec_validation():
    with pytest.raises(PhiUsageError):
        PhiSpec(7, 0)
    PhiSpec(7, 0, MonteCarlo(10, 0))
    with pytest.raises(PhiUsageError):
        PhiSpec(0, 0)
    with pytest.raises(PhiUsageError):
        PhiSpec(2, 0, "fuzzy")


def test_bernstein_coefficients_are_cached():
    spec = PhiSpec(3, 1)
    assert bernstein_coefficients(spec) is bernstein_coefficients(spec)


# ------------------------------------------------------------ 2D upper bound
def test_ub2d_k1_matches_riemann_sum():
    p_site = 0.6795
    r_max = -math.log1p(-p_site)
    m = 2_000_000
    r = (np.arange(m) + 0.5) * r_max / m
    q = -np.expm1(-r)
    oracle = 0.5 * np.sum(-np.log(2 * q - q * q)) * r_max / m
    assert ub2d_bound(1, 0, p_site).value == pytest.approx(oracle, abs=1e-4)


def test_ub2d_nondecreasing_in_p_site():
    vals = [ub2d_bound(2, 1, p).value for p in (0.2, 0.4, 0.6, 0.8)]
    assert all(b > a for a, b in zip(vals, vals[1:]))


def test_ub2d_exact_k6_near_reference_value():
    assert ub2d_bound(6, 4, 0.6795).value == pytest.approx(0.303, rel=0.1)


def test_ub2d_domain_errors():
    with pytest.raises(ValueError):
        ub2d_bound(2, 1, 1.0)
    # the event needs more sites than Q_1 has, so phi vanishes everywhere
    with pytest.raises(ValueError):
        ub2d_bound(1, 5, 0.5)


# ------------------------------------------------------------ Grow product bound
def test_grow_bound_range_and_monotonicity():
    ps = np.linspace(0.01, 0.49, 25)
    vals = [grow_lower_bound_theta2(1, p, 200) for p in ps]
    assert all(0 < v <= 1 for v in vals)
    assert all(b >= a for a, b in zip(vals, vals[1:]))


def test_grow_bound_first_factor():
    # with K = sigma + 2 only the k = sigma+1, sigma+2 factors enter
    p = 0.2
    want = p ** 4
    for k in (2, 3):
        want *= (1 - (1 - p) ** (k * k * k)) ** 2
    assert grow_lower_bound_theta2(1, p, 3) == pytest.approx(want, rel=1e-12)
    with pytest.raises(ValueError):
        grow_lower_bound_theta2(1, p, 2)
