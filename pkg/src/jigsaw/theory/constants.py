"""Threshold constants and bound functions of the jigsaw model."""
from __future__ import annotations

import math

from .quadrature import QuadResult, QuadratureSpec, integrate_to_infinity
from .special import gamma, zeta

DEFAULT_QUAD = QuadratureSpec()
CONNECTED_SET_GROWTH = 4.65  # lattice animals containing a fixed site grow at most like 4.65^k


def _check_sigma(sigma: int) -> int:
    if int(sigma) != sigma or sigma < 1:
        raise ValueError("sigma must be a positive integer")
    return int(sigma)


def g_sigma(sigma: int, x: float) -> float:
    """``-log P(Poisson(x) >= sigma)``.

    For small ``x`` the upper tail is summed directly in log form, which keeps
    the ``-sigma log x`` blow-up exact; for large ``x`` the lower tail is small
    and ``log1p`` avoids cancellation.
    """
    sigma = _check_sigma(sigma)
    if not x > 0:
        raise ValueError("g_sigma needs x > 0")
    # lower tail P(Poisson(x) < sigma)
    term = 1.0
    low = 1.0
    for i in range(1, sigma):
        term *= x / i
        low += term
    lower = math.exp(-x) * low if x < 700 else 0.0
    if lower < 0.5:
        return -math.log1p(-lower)
    # upper tail: x^sigma / sigma! * sum_j x^j sigma! / (sigma+j)!
    s = 0.0
    t = 1.0
    j = 0
    while True:
        s += t
        j += 1
        t *= x / (sigma + j)
        if t < 1e-17 * s:
            break
    return x - sigma * math.log(x) + math.lgamma(sigma + 1) - math.log(s)


def _tail_split(sigma: int) -> float:
    return float(max(1, sigma))


def lambda_sigma(sigma: int, quad: QuadratureSpec = DEFAULT_QUAD) -> QuadResult:
    """``int_0^inf g_sigma(x) dx``; the integrand has a log singularity at 0."""
    sigma = _check_sigma(sigma)
    return integrate_to_infinity(lambda x: g_sigma(sigma, x), quad, singular_left=True,
                                 split=_tail_split(sigma))


def nu_sigma(sigma: int) -> float:
    """Closed form ``(sigma!)^(1/m) Gamma(1/m) zeta(1 + 1/m) / m`` with ``m = 2 sigma + 1``."""
    sigma = _check_sigma(sigma)
    m = 2 * sigma + 1
    return math.factorial(sigma) ** (1.0 / m) * gamma(1.0 / m) * zeta(1.0 + 1.0 / m) / m


def nu_sigma_quadrature(sigma: int, quad: QuadratureSpec = DEFAULT_QUAD) -> QuadResult:
    """``int_0^inf g_1(x^m / sigma!) dx`` by quadrature, ``m = 2 sigma + 1``."""
    sigma = _check_sigma(sigma)
    m = 2 * sigma + 1
    f = math.factorial(sigma)
    return integrate_to_infinity(lambda x: g_sigma(1, x ** m / f), quad, singular_left=True,
                                 split=f ** (1.0 / m))


# ---------------------------------------------------------------- 2D lower bound
def lb2d_objective(alpha: float, c: float, lam: float) -> float:
    a = alpha * c
    return -a * math.log(-math.expm1(-lam * a)) - a * math.log(CONNECTED_SET_GROWTH)


def lb2d_infimum(c: float, lam: float, grid: int = 64) -> tuple[float, float]:
    """Minimum over ``alpha in [1, 2]`` of the lower-bound objective; returns ``(value, alpha)``.

    A coarse grid locates the best bracket, golden-section refines it, and
    both endpoints are compared explicitly.
    """
    if c <= 0 or lam <= 0:
        raise ValueError("c and lam must be positive")
    f = lambda a: lb2d_objective(a, c, lam)  # noqa: E731
    xs = [1.0 + i / grid for i in range(grid + 1)]
    vals = [f(x) for x in xs]
    i = min(range(len(xs)), key=vals.__getitem__)
    a, b = xs[max(0, i - 1)], xs[min(grid, i + 1)]
    invphi = (math.sqrt(5) - 1) / 2
    x1, x2 = b - invphi * (b - a), a + invphi * (b - a)
    f1, f2 = f(x1), f(x2)
    while b - a > 1e-12:
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - invphi * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + invphi * (b - a)
            f2 = f(x2)
    cands = [(f1, x1), (f2, x2), (f(1.0), 1.0), (f(2.0), 2.0)]
    v, x = min(cands)
    return v, x


# ---------------------------------------------------------------- Grow, theta = 2
def _log_binom_cdf_below(n: int, p: float, s: int) -> float:
    """``log P(Binomial(n, p) < s)`` by exact summation in log space."""
    if s <= 0:
        return -math.inf
    lp, lq = math.log(p), math.log1p(-p)
    terms = [math.lgamma(n + 1) - math.lgamma(i + 1) - math.lgamma(n - i + 1) + i * lp + (n - i) * lq
             for i in range(min(s, n + 1))]
    m = max(terms)
    return m + math.log(math.fsum(math.exp(t - m) for t in terms))


def grow_lower_bound_theta2(sigma: int, p: float, K: int) -> float:
    """Product lower bound on growing from a corner with ``theta = 2``, truncated at ``K``.

    ``p^(2(sigma+1)) * prod_{k=sigma+1}^{K} (1 - P(Bin(k^2, p) < sigma)^k)^2``;
    the omitted factors tend to 1 geometrically fast.
    """
    sigma = _check_sigma(sigma)
    if not 0 < p < 1:
        raise ValueError("p must lie in (0, 1)")
    if K <= sigma + 1:
        raise ValueError("K must exceed sigma + 1")
    logv = 2 * (sigma + 1) * math.log(p)
    for k in range(sigma + 1, K + 1):
        lc = k * _log_binom_cdf_below(k * k, p, sigma)
        logv += 2 * math.log(-math.expm1(lc))
    return math.exp(logv)
