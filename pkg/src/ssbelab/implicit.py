"""Solvers for the implicit relation x* = x - h f(x*).

For scalar dissipative drifts the root is bracketed between 0 and x (the
residual G_x(y) = y - x + h f(y) changes sign across that interval), so a
safeguarded bisection/Newton hybrid is guaranteed to converge; the solver
deterministically selects the root inside that bracket.  In higher
dimension the solver dispatches on drift structure: componentwise drifts
decompose into scalar problems, rotationally symmetric drifts reduce to a
radius equation on the ray through x, and general drifts get damped Newton
(analytic Jacobian, else damped fixed point, else finite differences).

Multiple solutions are tolerated; the chosen root is deterministic
(bracket toward the origin for scalars, Newton basin of y0 = x otherwise)
and recorded in path metadata.  Every solution of the relation satisfies
0 < ||x*|| < ||x|| for x != 0 when the drift is dissipative; with asserts
enabled that contraction is checked after each solve.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_TOL = 1e-12
MAX_BISECT = 200
MAX_NEWTON = 50


class SolverError(RuntimeError):
    """Implicit solve did not reach tolerance; carries the best iterate.

    Divergence here is the operational signal that the step size h is too
    large for this drift.
    """

    def __init__(self, message, best=None, residual=None):
        super().__init__(message)
        self.best = best
        self.residual = residual


@dataclass(frozen=True, eq=False)
class ImplicitSolution:
    x_star: object  # float for scalar solves, (d,) ndarray for vector solves
    iterations: int
    residual: float
    method: str


def _scalar_f(drift):
    if drift.scalar_eval is not None:
        return drift.scalar_eval
    return lambda y: float(drift(np.array([y]))[0])


def _check_contract(drift, x_norm: float, y_norm: float) -> None:
    # Non-strict at this level: residual-based termination may stop exactly
    # at y = x when |h f(x)| is already below tolerance.  Strictness over
    # representative domains is asserted by the property tests.
    if drift.dissipative and x_norm > 0.0:
        assert 0.0 < y_norm <= x_norm, (
            f"contraction violated: ||x*||={y_norm!r} vs ||x||={x_norm!r}"
        )


def solve_scalar(drift, h: float, x: float, tol: float = DEFAULT_TOL) -> ImplicitSolution:
    """Root of y - x + h f(y) in the closed interval between 0 and x.

    x = 0 returns exactly 0.  The sign change over [0, x] is guaranteed for
    dissipative f; its absence is reported as SolverError.
    """
    if h <= 0:
        raise ValueError("step size h must be positive")
    x = float(x)
    if x == 0.0:
        return ImplicitSolution(0.0, 0, 0.0, "bisection")
    f = _scalar_f(drift)
    df = drift.scalar_deriv

    def g(y):
        return y - x + h * float(f(y))

    lo, hi = (x, 0.0) if x < 0 else (0.0, x)
    glo, ghi = g(lo), g(hi)
    if glo == 0.0:
        return ImplicitSolution(lo, 0, 0.0, "bisection")
    if ghi == 0.0:
        return ImplicitSolution(hi, 0, 0.0, "bisection")
    if glo * ghi > 0.0:
        raise SolverError(
            "no sign change between 0 and x; drift is not dissipative there",
            best=x,
            residual=abs(g(x)),
        )

    y = 0.5 * (lo + hi)
    gy = g(y)
    best_y, best_g = y, abs(gy)
    method = "bisection"
    newton_used = 0
    for it in range(1, MAX_BISECT + 1):
        if abs(gy) <= tol:
            _check_contract(drift, abs(x), abs(y))
            return ImplicitSolution(y, it, abs(gy), method)
        # Try a Newton step from the current point; keep it only if it
        # stays inside the bracket, otherwise bisect.
        stepped = False
        if df is not None and newton_used < MAX_NEWTON:
            slope = 1.0 + h * float(df(y))
            if slope != 0.0:
                cand = y - gy / slope
                if lo < cand < hi:
                    newton_used += 1
                    y_new, g_new = cand, g(cand)
                    if abs(g_new) < abs(gy):
                        if g_new * glo < 0.0:
                            hi = y_new
                        else:
                            lo, glo = y_new, g_new
                        y, gy = y_new, g_new
                        method = "newton"
                        stepped = True
        if not stepped:
            if gy * glo < 0.0:
                hi = y
            else:
                lo, glo = y, gy
            y = 0.5 * (lo + hi)
            gy = g(y)
            method = "bisection"
        if abs(gy) < best_g:
            best_y, best_g = y, abs(gy)
        if lo == hi:
            break
    if best_g <= tol:
        _check_contract(drift, abs(x), abs(best_y))
        return ImplicitSolution(best_y, MAX_BISECT, best_g, method)
    raise SolverError(
        f"scalar implicit solve stalled at residual {best_g:.3e}",
        best=best_y,
        residual=best_g,
    )


def solve_componentwise(drift, h: float, x: np.ndarray, tol: float = DEFAULT_TOL):
    """Vectorised elementwise solve for componentwise drifts.

    Operates on an array of any shape (each entry is an independent scalar
    problem).  Returns (y, iterations, max_residual).
    """
    if h <= 0:
        raise ValueError("step size h must be positive")
    f = drift.scalar_eval
    df = drift.scalar_deriv
    x = np.asarray(x, dtype=np.float64)
    lo = np.minimum(x, 0.0)
    hi = np.maximum(x, 0.0)
    y = x.copy()
    g = y - x + h * f(y)
    glo = lo - x + h * f(lo)
    iters = 0
    for iters in range(1, MAX_BISECT + 1):
        active = np.abs(g) > tol
        if not active.any():
            break
        if df is not None:
            slope = 1.0 + h * df(y)
            with np.errstate(divide="ignore", invalid="ignore"):
                cand = y - g / slope
            good = active & (cand > lo) & (cand < hi) & np.isfinite(cand)
        else:
            good = np.zeros_like(active)
        mid = 0.5 * (lo + hi)
        y_new = np.where(good, cand, mid)
        y_new = np.where(active, y_new, y)
        g_new = y_new - x + h * f(y_new)
        # Newton candidates that fail to improve fall back to the midpoint.
        worse = good & (np.abs(g_new) >= np.abs(g))
        if worse.any():
            y_new = np.where(worse, mid, y_new)
            g_new = np.where(worse, mid - x + h * f(mid), g_new)
        shrink_hi = active & (g_new * glo < 0.0)
        shrink_lo = active & ~shrink_hi
        hi = np.where(shrink_hi, y_new, hi)
        lo = np.where(shrink_lo, y_new, lo)
        glo = np.where(shrink_lo, g_new, glo)
        y = np.where(active, y_new, y)
        g = np.where(active, g_new, g)
    max_resid = float(np.abs(g).max()) if g.size else 0.0
    if max_resid > tol:
        raise SolverError(
            f"componentwise solve stalled at residual {max_resid:.3e}",
            best=y,
            residual=max_resid,
        )
    y = np.where(x == 0.0, 0.0, y)
    return y, iters, max_resid


def _solve_radial(drift, h, x, tol):
    rho = float(np.linalg.norm(x))
    if rho == 0.0:
        return np.zeros_like(x), 0, 0.0
    gain = drift.radial_gain

    class _Ray:
        # Scalar view of the radius equation t + h g(t) = rho.
        d = 1
        dissipative = True
        scalar_eval = staticmethod(lambda t: gain(t))
        scalar_deriv = None

    sol = solve_scalar(_Ray, h, rho, tol)
    y = (sol.x_star / rho) * np.asarray(x, dtype=np.float64)
    return y, sol.iterations, sol.residual


def _fd_jac(drift, y, f0, eps=1e-7):
    d = y.size
    J = np.empty((d, d))
    for j in range(d):
        step = eps * max(1.0, abs(y[j]))
        yp = y.copy()
        yp[j] += step
        J[:, j] = (drift(yp) - f0) / step
    return J


def _newton_vector(drift, h, x, tol, jac):
    d = x.size
    y = x.copy()
    F = y - x + h * drift(y)
    nF = float(np.linalg.norm(F))
    eye = np.eye(d)
    for it in range(1, MAX_NEWTON + 1):
        if nF <= tol:
            return y, it - 1, nF
        J = eye + h * (jac(y) if jac is not None else _fd_jac(drift, y, drift(y)))
        try:
            step = np.linalg.solve(J, F)
        except np.linalg.LinAlgError:
            break
        t = 1.0
        while t >= 2.0**-30:
            y_try = y - t * step
            F_try = y_try - x + h * drift(y_try)
            n_try = float(np.linalg.norm(F_try))
            if n_try < nF:
                y, F, nF = y_try, F_try, n_try
                break
            t *= 0.5
        else:
            break
    return y, MAX_NEWTON, nF


def _fixed_point_vector(drift, h, x, tol):
    y = x.copy()
    F = y - x + h * drift(y)
    nF = float(np.linalg.norm(F))
    theta = 1.0
    for it in range(1, 4 * MAX_NEWTON + 1):
        if nF <= tol:
            return y, it - 1, nF
        y_try = (1.0 - theta) * y + theta * (x - h * drift(y))
        F_try = y_try - x + h * drift(y_try)
        n_try = float(np.linalg.norm(F_try))
        if n_try < nF:
            y, F, nF = y_try, F_try, n_try
            theta = min(1.0, 2.0 * theta)
        else:
            theta *= 0.5
            if theta < 2.0**-30:
                break
    return y, 4 * MAX_NEWTON, nF


def solve_vector(drift, h: float, x: np.ndarray, tol: float = DEFAULT_TOL) -> ImplicitSolution:
    """Solve x* = x - h f(x*) for a d-dimensional drift.

    Dispatches on drift structure; the generic route is Newton from
    y0 = x with step halving, then damped fixed point, then Newton on a
    finite-difference Jacobian.
    """
    if h <= 0:
        raise ValueError("step size h must be positive")
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (drift.d,):
        raise ValueError(f"state must have shape ({drift.d},)")
    if not x.any():
        return ImplicitSolution(np.zeros_like(x), 0, 0.0, "newton")

    if drift.componentwise:
        y, iters, resid = solve_componentwise(drift, h, x, tol)
        sol = ImplicitSolution(y, iters, resid, "newton")
    elif drift.radial:
        y, iters, resid = _solve_radial(drift, h, x, tol)
        sol = ImplicitSolution(y, iters, resid, "bisection")
    else:
        if drift.jac is not None:
            y, iters, resid = _newton_vector(drift, h, x, tol, drift.jac)
            method = "newton"
        else:
            y, iters, resid = _fixed_point_vector(drift, h, x, tol)
            method = "damped_fixed_point"
        if resid > tol:
            # Rescue with the other route; finite differences are the
            # last resort when no Jacobian is declared.
            if drift.jac is not None:
                y2, it2, r2 = _fixed_point_vector(drift, h, x, tol)
                alt = "damped_fixed_point"
            else:
                y2, it2, r2 = _newton_vector(drift, h, x, tol, None)
                alt = "newton"
            if r2 < resid:
                y, iters, resid, method = y2, it2, r2, alt
        if resid > tol:
            raise SolverError(
                f"vector implicit solve stalled at residual {resid:.3e} "
                "(h may be too large for this drift)",
                best=y,
                residual=resid,
            )
        sol = ImplicitSolution(y, iters, resid, method)
    _check_contract(drift, float(np.linalg.norm(x)), float(np.linalg.norm(sol.x_star)))
    return sol
