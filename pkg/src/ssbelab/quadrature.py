"""Adaptive Simpson quadrature with interval bisection."""

from __future__ import annotations

from typing import Callable


class QuadratureError(RuntimeError):
    """Raised when the requested tolerance cannot be met."""


def _simpson(f: Callable[[float], float], a: float, fa: float, b: float, fb: float):
    m = 0.5 * (a + b)
    fm = f(m)
    return m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb)


def adaptive_simpson(
    f: Callable[[float], float],
    a: float,
    b: float,
    rel_tol: float = 1e-10,
    abs_floor: float = 1e-300,
    max_depth: int = 48,
) -> float:
    """Integrate f over [a, b] to the requested relative tolerance.

    Bisects any subinterval whose Richardson estimate disagrees with the
    coarse Simpson value; the accepted value carries the (S2 - S1)/15
    correction.  ``abs_floor`` keeps identically-zero integrands from
    recursing forever.
    """
    if not b >= a:
        raise ValueError("integration bounds must satisfy a <= b")
    if b == a:
        return 0.0
    fa, fb = f(a), f(b)
    m, fm, whole = _simpson(f, a, fa, b, fb)

    def recurse(a, fa, m, fm, b, fb, whole, tol, depth):
        lm, flm, left = _simpson(f, a, fa, m, fm)
        rm, frm, right = _simpson(f, m, fm, b, fb)
        delta = left + right - whole
        if abs(delta) <= 15.0 * tol or abs(left + right) < abs_floor:
            return left + right + delta / 15.0
        if depth >= max_depth:
            raise QuadratureError(
                f"adaptive Simpson failed to converge on [{a:g}, {b:g}]"
            )
        return recurse(a, fa, lm, flm, m, fm, left, tol / 2.0, depth + 1) + recurse(
            m, fm, rm, frm, b, fb, right, tol / 2.0, depth + 1
        )

    scale = max(abs(whole), abs_floor)
    return recurse(a, fa, m, fm, b, fb, whole, rel_tol * scale, 0)
