"""Scalar bracketing solvers shared by the analysis modules."""

from __future__ import annotations

import math
from typing import Callable

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def _sign(x: float) -> int:
    if x < 0:
        return -1
    elif x > 0:
        return 1
    return 0


def bisect(
    fn: Callable[[float], float],
    lo: float,
    hi: float,
    xtol: float = 1e-12,
    max_iter: int = 300,
) -> float:
    """Root of ``fn`` inside ``[lo, hi]``; the endpoint values must differ in sign.

    Stops when the bracket is narrower than ``xtol`` or can no longer shrink in
    floating point, and returns the bracket midpoint.
    """
    s_lo = _sign(fn(lo))
    if s_lo == 0:
        return lo
    s_hi = _sign(fn(hi))
    if s_hi == 0:
        return hi
    if s_lo == s_hi:
        raise ValueError(f"no sign change on [{lo}, {hi}]")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if hi - lo <= xtol or mid <= lo or mid >= hi:
            break
        s_mid = _sign(fn(mid))
        if s_mid == 0:
            return mid
        if s_mid == s_lo:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def golden_minimize(
    fn: Callable[[float], float],
    lo: float,
    hi: float,
    xtol: float = 1e-12,
    max_iter: int = 300,
) -> tuple[float, float]:
    """Golden-section search for a minimum of a unimodal ``fn`` on ``[lo, hi]``.

    Returns ``(x, fn(x))``.
    """
    a, b = lo, hi
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = fn(c), fn(d)
    for _ in range(max_iter):
        if b - a <= xtol:
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = fn(d)
    x = 0.5 * (a + b)
    candidates = [(fn(x), x), (fc, c), (fd, d)]
    fx, x = min(candidates)
    return x, fx
