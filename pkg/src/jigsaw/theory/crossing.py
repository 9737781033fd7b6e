"""Crossing probability of the triangle ``Q_k`` and the 2D upper-bound integral.

``Q_k = {(x, y) in Z_+^2 : x + y <= k}``.  ``phi_{k,l}(r)`` is the
probability that, with the origin open and every other site of ``Q_k`` open
independently with probability ``r``, the open cluster of the origin reaches
the diagonal ``x + y = k`` and has at least ``k + 1 + l`` sites.

Both modes reduce ``phi`` to a polynomial in Bernstein form,
``phi(r) = sum_j F[j] C(M, j) r^j (1-r)^(M-j)`` with ``M = |Q_k| - 1``, where
``F[j]`` is the fraction of ``j``-subsets of the other sites on which the
event holds.  Exact mode counts every configuration; Monte Carlo mode
estimates ``F`` from random orderings of the sites (adding sites one at a
time and recording the first size at which the event holds), so a single
set of samples serves every ``r`` and the estimate is nondecreasing in ``r``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numba import njit

from .quadrature import QuadResult, QuadratureSpec, integrate

EXACT_MAX_K = 6


class UsageError(ValueError):
    pass


@dataclass(frozen=True)
class MonteCarlo:
    trials: int = 100_000
    seed: int = 0


@dataclass(frozen=True)
class PhiSpec:
    """``mode`` is ``"exact"`` or a :class:`MonteCarlo` instance."""

    k: int
    ell: int = 0
    mode: object = "exact"

    def __post_init__(self):
        if self.k < 1 or self.ell < 0:
            raise UsageError("need k >= 1 and ell >= 0")
        if self.mode == "exact":
            if self.k > EXACT_MAX_K:
                raise UsageError(f"exact enumeration supports k <= {EXACT_MAX_K}")
        elif not isinstance(self.mode, MonteCarlo):
            raise UsageError(f"unknown phi mode {self.mode!r}")

    @property
    def sites(self) -> int:
        return (self.k + 1) * (self.k + 2) // 2

    @property
    def degree(self) -> int:
        return self.sites - 1


def _layout(k: int):
    """Bit position of each site on a grid with row stride ``k + 2``; origin first."""
    stride = k + 2
    sites = [(x, y) for y in range(k + 1) for x in range(k + 1 - y)]
    bit = np.array([x + stride * y for x, y in sites], dtype=np.int64)
    valid = 0
    line = 0
    for (x, y), b in zip(sites, bit):
        valid |= 1 << int(b)
        if x + y == k:
            line |= 1 << int(b)
    return bit, np.uint64(valid), np.uint64(line), stride


@njit(cache=True)
def _cluster(open_, stride):
    """Open cluster of bit 0 by repeated dilation (``open_`` contains only valid sites)."""
    c = np.uint64(1)
    s = np.uint64(stride)
    one = np.uint64(1)
    while True:
        nxt = (c | (c << one) | (c >> one) | (c << s) | (c >> s)) & open_
        if nxt == c:
            return c
        c = nxt


@njit(cache=True)
def _popcount(v):
    c = 0
    while v:
        v &= v - np.uint64(1)
        c += 1
    return c


@njit(cache=True)
def _exact_counts(lo_tab, hi_tab, lo_bits, M, stride, line, need):
    counts = np.zeros(M + 1, dtype=np.int64)
    lo_mask = (1 << lo_bits) - 1
    for j in range(1 << M):
        open_ = np.uint64(1) | lo_tab[j & lo_mask] | hi_tab[j >> lo_bits]
        c = _cluster(open_, stride)
        if (c & line) != 0 and _popcount(c) >= need:
            counts[_popcount(np.uint64(j))] += 1
    return counts


@njit(cache=True)
def _first_hits(bits, M, stride, line, need, trials, seed):
    np.random.seed(seed)
    first = np.zeros(M + 2, dtype=np.int64)
    order = np.arange(M)
    for _ in range(trials):
        np.random.shuffle(order)
        open_ = np.uint64(1)
        hit = M + 1
        for m in range(M):
            open_ |= np.uint64(1) << np.uint64(bits[order[m]])
            if m + 2 >= need:
                c = _cluster(open_, stride)
                if (c & line) != 0 and _popcount(c) >= need:
                    hit = m + 1
                    break
        first[hit] += 1
    return first


def _tables(bits: np.ndarray, M: int):
    lo_bits = min(M, 14)
    hi_bits = M - lo_bits

    def table(offset, width):
        t = np.zeros(1 << width, dtype=np.uint64)
        for i in range(width):
            b = np.uint64(1) << np.uint64(bits[offset + i])
            idx = np.arange(1 << width)
            t[(idx >> i) & 1 == 1] |= b
        return t

    return table(1, lo_bits), table(1 + lo_bits, hi_bits), lo_bits


@lru_cache(maxsize=None)
def bernstein_coefficients(spec: PhiSpec) -> tuple[float, ...]:
    """``F[j]`` for ``j = 0..M``: event probability given exactly ``j`` other open sites."""
    bit, _, line, stride = _layout(spec.k)
    M = spec.degree
    need = spec.k + 1 + spec.ell
    if spec.mode == "exact":
        lo, hi, lo_bits = _tables(bit, M)
        counts = _exact_counts(lo, hi, lo_bits, M, stride, line, need)
        return tuple(float(counts[j]) / math.comb(M, j) for j in range(M + 1))
    mc = spec.mode
    first = _first_hits(bit[1:].copy(), M, stride, line, need, mc.trials, mc.seed & 0x7FFFFFFF)
    cum = np.cumsum(first[: M + 1]) / mc.trials
    return tuple(float(v) for v in cum)


def phi(spec: PhiSpec, r: float) -> float:
    if not 0.0 <= r <= 1.0:
        raise ValueError("r must lie in [0, 1]")
    F = bernstein_coefficients(spec)
    M = spec.degree
    if r == 0.0:
        return F[0]
    if r == 1.0:
        return F[M]
    lr, lq = math.log(r), math.log1p(-r)
    return math.fsum(F[j] * math.exp(math.log(math.comb(M, j)) + j * lr + (M - j) * lq)
                     for j in range(M + 1) if F[j] > 0)


def log_phi(spec: PhiSpec, r: float) -> float:
    """``log phi`` evaluated in log space, accurate as ``r -> 0``."""
    if not 0.0 < r <= 1.0:
        raise ValueError("r must lie in (0, 1]")
    F = bernstein_coefficients(spec)
    M = spec.degree
    if r == 1.0:
        return math.log(F[M]) if F[M] > 0 else -math.inf
    lr, lq = math.log(r), math.log1p(-r)
    terms = [math.log(F[j]) + math.log(math.comb(M, j)) + j * lr + (M - j) * lq
             for j in range(M + 1) if F[j] > 0]
    if not terms:
        return -math.inf
    m = max(terms)
    return m + math.log(math.fsum(math.exp(t - m) for t in terms))


def ub2d_bound(k: int, ell: int, p_site: float, phi_mode: object = "exact",
               quad: QuadratureSpec | None = None) -> QuadResult:
    """``1/2 int_0^{r_max} -log phi_{k,l}(1 - exp(-(k+l) r)) dr``, ``r_max = -log(1-p_site)/(k+l)``."""
    if not 0.0 < p_site < 1.0:
        raise ValueError("p_site must lie in (0, 1)")
    if k + ell < 1:
        raise ValueError("k + ell must be positive")
    quad = quad or QuadratureSpec(abs_tol=1e-9, rel_tol=1e-9)
    spec = PhiSpec(k, ell, phi_mode)
    s = k + ell
    r_max = -math.log1p(-p_site) / s

    def f(r):
        lp = log_phi(spec, -math.expm1(-s * r))
        if lp == -math.inf:
            raise ValueError(f"phi vanishes at r={r}; bound undefined")
        return -lp

    res = integrate(f, 0.0, r_max, quad, singular_left=True)
    return QuadResult(0.5 * res.value, 0.5 * res.error, res.intervals, res.method)
