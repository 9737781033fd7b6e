"""Adaptive Simpson quadrature for integrands with a logarithmic endpoint singularity."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable


class ConvergenceError(RuntimeError):
    """Tolerance not met within the subdivision budget; ``best`` holds the estimate."""

    def __init__(self, msg: str, best: "QuadResult"):
        super().__init__(msg)
        self.best = best


@dataclass(frozen=True)
class QuadratureSpec:
    """Tolerances and singularity handling.

    ``tail_cutoff``: semi-infinite ranges are truncated at the first point
    where the (decreasing) integrand falls below this value.
    ``singularity``: ``"power"`` substitutes ``x = a + (b-a) t^3`` near the
    left endpoint, which turns a ``log`` blow-up into a bounded integrand;
    ``"none"`` integrates directly.
    """

    abs_tol: float = 1e-11
    rel_tol: float = 1e-11
    tail_cutoff: float = 1e-12
    singularity: str = "power"
    max_intervals: int = 200_000

    def __post_init__(self):
        if self.singularity not in ("power", "none"):
            raise ValueError(f"unknown singularity mode {self.singularity!r}")
        if self.abs_tol <= 0 and self.rel_tol <= 0:
            raise ValueError("need a positive tolerance")


@dataclass(frozen=True)
class QuadResult:
    value: float
    error: float
    intervals: int
    method: str = "adaptive-simpson"


def _simpson(f, a, fa, b, fb):
    m = 0.5 * (a + b)
    fm = f(m)
    return m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb)


def adaptive_simpson(f: Callable[[float], float], a: float, b: float, tol: float,
                     max_intervals: int = 200_000) -> QuadResult:
    """Integrate ``f`` on ``[a, b]`` to absolute tolerance ``tol``.

    Panels are accepted when the Richardson difference is below their share
    of the tolerance; the reported error sums the accepted differences.
    """
    fa, fb = f(a), f(b)
    m, fm, whole = _simpson(f, a, fa, b, fb)
    stack = [(a, fa, m, fm, b, fb, whole, tol)]
    total = 0.0
    err = 0.0
    used = 1
    comp = []
    while stack:
        a0, fa0, m0, fm0, b0, fb0, S, t = stack.pop()
        lm, flm, left = _simpson(f, a0, fa0, m0, fm0)
        rm, frm, right = _simpson(f, m0, fm0, b0, fb0)
        delta = left + right - S
        if abs(delta) <= 15.0 * t or (b0 - a0) < 1e-15 * max(1.0, abs(a0)):
            comp.append(left + right + delta / 15.0)
            err += abs(delta) / 15.0
            continue
        used += 1
        if used > max_intervals:
            total = math.fsum(comp) + left + right
            raise ConvergenceError("subdivision budget exhausted",
                                   QuadResult(total, err + abs(delta), used))
        stack.append((a0, fa0, lm, flm, m0, fm0, left, t / 2))
        stack.append((m0, fm0, rm, frm, b0, fb0, right, t / 2))
    total = math.fsum(comp)
    return QuadResult(total, err, used)


def integrate(f: Callable[[float], float], a: float, b: float, spec: QuadratureSpec,
              singular_left: bool = False) -> QuadResult:
    """Definite integral on a finite interval with an optional left-end log singularity."""
    if b <= a:
        return QuadResult(0.0, 0.0, 0)
    tol = spec.abs_tol
    if singular_left and spec.singularity == "power":
        w = b - a

        def g(t):
            if t <= 0.0:
                return 0.0  # t^2 log t -> 0
            return 3.0 * w * t * t * f(a + w * t ** 3)

        res = adaptive_simpson(g, 0.0, 1.0, tol, spec.max_intervals)
    else:
        eps = 0.0
        if singular_left:
            # avoid evaluating at the singular point itself
            eps = 1e-300
        res = adaptive_simpson(f, a + eps, b, tol, spec.max_intervals)
    if spec.rel_tol > 0 and res.error > max(spec.abs_tol, spec.rel_tol * abs(res.value)):
        raise ConvergenceError("requested tolerance not reached", res)
    return res


def tail_point(f: Callable[[float], float], start: float, cutoff: float, limit: float = 1e6) -> float:
    """First ``x >= start`` on a doubling grid with ``f(x) < cutoff`` (``f`` decreasing)."""
    x = max(start, 1.0)
    while f(x) >= cutoff:
        x *= 1.25
        if x > limit:
            raise ConvergenceError("integrand does not decay", QuadResult(float("nan"), float("inf"), 0))
    return x


def integrate_to_infinity(f: Callable[[float], float], spec: QuadratureSpec,
                          singular_left: bool = True, split: float = 1.0) -> QuadResult:
    """``int_0^inf f`` for a positive decreasing ``f`` with a log singularity at 0.

    Splits at ``split``; the right part is truncated where ``f < tail_cutoff``.
    """
    X = tail_point(f, split, spec.tail_cutoff)
    left = integrate(f, 0.0, split, spec, singular_left=singular_left)
    right = integrate(f, split, X, spec)
    return QuadResult(left.value + right.value, left.error + right.error + spec.tail_cutoff,
                      left.intervals + right.intervals)
