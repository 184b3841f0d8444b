"""Streaming path statistics that operationalise the long-run claims.

Almost-sure limits are unobservable, so limsup/liminf are proxied by
trailing-window extremes over the final stretch of the path (window size is
a recorded configuration value, default the last 1% of steps with a floor
of 1000).  Alongside the extremes the state tracks:

* the time average of ||X(n)||^2 (the Cesaro statistic of the bounded
  regime),
* the cross-term martingale M(n), accumulated per step as
  2 <x*(n-1), U(n)>, which equals 2 sqrt(h) <x*(n-1), sigma(n-1) xi(n)>,
* the predictable bound 4 h sum ||x*(j)||^2 ||sigma(j)||_F^2 on the
  quadratic variation of M,
* the average squared shock (1/n) sum ||sigma(j-1) xi(j)||^2, which tends
  to zero exactly when the schedule vanishes.

Snapshots are taken at logarithmically spaced checkpoints so trend
evidence survives without storing whole paths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
import numpy as np

CHECKPOINTS = (10**3, 10**4, 10**5)

_SQRT_HALF_PI_INV = math.sqrt(2.0 / math.pi)  # E|Z| for standard normal Z


@dataclass
class Checkpoint:
    n: int
    time_avg_sq: float
    m_over_n: float
    m_abs_over_qv: float
    shock_sq_avg: float
    sup_norm: float


@dataclass
class DiagnosticState:
    """Single-path accumulator; feed steps strictly in order."""

    d: int
    h: float
    window: int
    n: int = 0
    running_sup_norm: float = 0.0
    running_inf_norm: float = math.inf
    sum_sq: float = 0.0
    M_n: float = 0.0
    QV_bound: float = 0.0
    shock_sq_sum: float = 0.0
    checkpoints: list = field(default_factory=list)
    _ring: np.ndarray = field(init=False, repr=False)
    _ring_len: int = field(default=0, repr=False)

    def __post_init__(self) -> None:
        if self.window < 1:
            raise ValueError("window must be at least 1")
        self._ring = np.empty(self.window)

    def start(self, x0: np.ndarray) -> None:
        norm0 = float(np.linalg.norm(x0))
        self.running_sup_norm = norm0
        self._push_window(norm0)

    def _push_window(self, norm: float) -> None:
        self._ring[self._ring_len % self.window] = norm
        self._ring_len += 1

    def update(self, x_new, x_star_prev, u_new, sigma_prev, step=None) -> None:
        """Advance past one step: state n-1 -> n with shock u_new = U(n).

        ``sigma_prev`` may be the (d, r) matrix or its precomputed
        Frobenius norm; only the norm enters the accumulators.  Passing the
        1-based ``step`` index catches out-of-order feeding.
        """
        if step is not None and step != self.n + 1:
            raise ValueError(f"out-of-order update: expected step {self.n + 1}, got {step}")
        x_new = np.asarray(x_new, dtype=np.float64)
        x_star_prev = np.asarray(x_star_prev, dtype=np.float64)
        u_new = np.asarray(u_new, dtype=np.float64)
        self.n += 1
        sq = float(x_new @ x_new)
        norm = math.sqrt(sq)
        self.running_sup_norm = max(self.running_sup_norm, norm)
        self.running_inf_norm = min(self.running_inf_norm, norm)
        self._push_window(norm)
        self.sum_sq += sq
        # 2 sqrt(h) <x*, sigma xi> recovered from the stored shock.
        self.M_n += 2.0 * float(x_star_prev @ u_new)
        if np.ndim(sigma_prev) == 0:
            fro = float(sigma_prev)
        else:
            fro = float(np.linalg.norm(np.asarray(sigma_prev, dtype=np.float64)))
        xs_sq = float(x_star_prev @ x_star_prev)
        self.QV_bound += 4.0 * self.h * xs_sq * fro * fro
        self.shock_sq_sum += float(u_new @ u_new) / self.h
        if self.n in CHECKPOINTS:
            self._snapshot()

    def _snapshot(self) -> None:
        n = self.n
        self.checkpoints.append(
            Checkpoint(
                n=n,
                time_avg_sq=self.sum_sq / n,
                m_over_n=self.M_n / n,
                m_abs_over_qv=abs(self.M_n) / max(1.0, self.QV_bound),
                shock_sq_avg=self.shock_sq_sum / n,
                sup_norm=self.running_sup_norm,
            )
        )

    @property
    def time_avg_sq(self) -> float:
        return self.sum_sq / self.n if self.n else 0.0

    @property
    def shock_sq_avg(self) -> float:
        return self.shock_sq_sum / self.n if self.n else 0.0

    def window_extremes(self) -> tuple[float, float]:
        filled = min(self._ring_len, self.window)
        if filled == 0:
            return math.inf, 0.0
        vals = self._ring[:filled]
        return float(vals.min()), float(vals.max())


@dataclass(frozen=True)
class PathSummary:
    path_index: int
    final_norm: float
    sup_norm: float
    window_min: float
    window_max: float
    time_avg_sq: float
    m_over_n: float
    m_abs_over_qv: float
    shock_sq_avg: float
    checkpoints: tuple[Checkpoint, ...] = ()

    def checkpoint_time_avgs(self) -> dict[int, float]:
        return {c.n: c.time_avg_sq for c in self.checkpoints}


def summarize(state: DiagnosticState, path_index: int, final_norm: float) -> PathSummary:
    wmin, wmax = state.window_extremes()
    n = max(state.n, 1)
    return PathSummary(
        path_index=path_index,
        final_norm=final_norm,
        sup_norm=state.running_sup_norm,
        window_min=wmin,
        window_max=wmax,
        time_avg_sq=state.sum_sq / n,
        m_over_n=state.M_n / n,
        m_abs_over_qv=abs(state.M_n) / max(1.0, state.QV_bound),
        shock_sq_avg=state.shock_sq_sum / n,
        checkpoints=tuple(state.checkpoints),
    )


class BatchDiagnostics:
    """Vectorised twin of DiagnosticState for lockstep path blocks."""

    def __init__(self, m: int, d: int, h: float, window: int):
        self.m, self.d, self.h = m, d, float(h)
        self.window = int(window)
        self.n = 0
        self.sup = np.zeros(m)
        self.sum_sq = np.zeros(m)
        self.M = np.zeros(m)
        self.QV = np.zeros(m)
        self.shock_sq = np.zeros(m)
        self.ring = np.empty((self.window, m))
        self.ring_len = 0
        self.snapshots: list[tuple[int, dict[str, np.ndarray]]] = []

    def start(self, x0: np.ndarray) -> None:
        norms = np.linalg.norm(x0, axis=1)
        self.sup = norms.copy()
        self.ring[self.ring_len % self.window] = norms
        self.ring_len += 1

    def update(self, x_new: np.ndarray, x_star_prev: np.ndarray, u_new: np.ndarray, fro_prev: float) -> None:
        self.n += 1
        norms = np.linalg.norm(x_new, axis=1)
        np.maximum(self.sup, norms, out=self.sup)
        self.ring[self.ring_len % self.window] = norms
        self.ring_len += 1
        self.sum_sq += norms * norms
        self.M += 2.0 * np.einsum("ij,ij->i", x_star_prev, u_new)
        xs_sq = np.einsum("ij,ij->i", x_star_prev, x_star_prev)
        self.QV += 4.0 * self.h * xs_sq * fro_prev * fro_prev
        self.shock_sq += np.einsum("ij,ij->i", u_new, u_new) / self.h
        if self.n in CHECKPOINTS:
            self.snapshots.append(
                (
                    self.n,
                    {
                        "time_avg_sq": self.sum_sq / self.n,
                        "m_over_n": self.M / self.n,
                        "m_abs_over_qv": np.abs(self.M) / np.maximum(1.0, self.QV),
                        "shock_sq_avg": self.shock_sq / self.n,
                        "sup_norm": self.sup.copy(),
                    },
                )
            )

    def summaries(self, path_indices, final_norms: np.ndarray) -> list[PathSummary]:
        filled = min(self.ring_len, self.window)
        wmin = self.ring[:filled].min(axis=0)
        wmax = self.ring[:filled].max(axis=0)
        n = max(self.n, 1)
        out = []
        for i, p in enumerate(path_indices):
            cps = tuple(
                Checkpoint(
                    n=cn,
                    time_avg_sq=float(snap["time_avg_sq"][i]),
                    m_over_n=float(snap["m_over_n"][i]),
                    m_abs_over_qv=float(snap["m_abs_over_qv"][i]),
                    shock_sq_avg=float(snap["shock_sq_avg"][i]),
                    sup_norm=float(snap["sup_norm"][i]),
                )
                for cn, snap in self.snapshots
            )
            out.append(
                PathSummary(
                    path_index=int(p),
                    final_norm=float(final_norms[i]),
                    sup_norm=float(self.sup[i]),
                    window_min=float(wmin[i]),
                    window_max=float(wmax[i]),
                    time_avg_sq=float(self.sum_sq[i] / n),
                    m_over_n=float(self.M[i] / n),
                    m_abs_over_qv=float(abs(self.M[i]) / max(1.0, self.QV[i])),
                    shock_sq_avg=float(self.shock_sq[i] / n),
                    checkpoints=cps,
                )
            )
        return out


def r_function(drift, h: float, x: np.ndarray) -> float:
    """R(x) = 2 <x, f(x)> + h ||f(x)||^2; positive away from 0, zero at 0.

    Along a path that settles, R evaluated at the implicit stage tends to
    zero, which is the residual evidence used by the convergence checks.
    """
    x = np.asarray(x, dtype=np.float64)
    fx = drift(x)
    return float(2.0 * np.dot(x, fx) + h * np.dot(fx, fx))


def gaussian_abs_moment_check(scale: float, resamples: int, seed: int = 0) -> tuple[float, float]:
    """Resample E|Y| for Y ~ N(0, scale^2) and compare with scale*sqrt(2/pi).

    Returns (sample mean, relative deviation).  The relative deviation is
    scale-invariant, so one batch of standard draws settles every step of a
    path at once.
    """
    if scale < 0:
        raise ValueError("scale must be non-negative")
    if scale == 0.0:
        return 0.0, 0.0
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(int(resamples))
    mean_abs = float(np.mean(np.abs(scale * z)))
    target = scale * _SQRT_HALF_PI_INV
    return mean_abs, abs(mean_abs - target) / target


def conditional_abs_moment_statistic(record, schedule, resamples: int = 200_000, seed: int = 0) -> float:
    """Max deviation of the conditional absolute-moment identity along a path.

    For each step the martingale increment is conditionally normal with
    variance s^2(n) = || 2 sqrt(h) sigma(n)^T x*(n) ||^2, so E|Y|^2 must be
    (2/pi) s^2.  The deviation of the resampled mean from s sqrt(2/pi) is
    scale-invariant; steps with s = 0 contribute zero deviation.
    """
    if record.X_star is None:
        raise ValueError("moment-identity statistic needs a full path record")
    sqrt_h = math.sqrt(record.h)
    any_positive = False
    for n in range(record.X_star.shape[0]):
        sig = schedule.sigma(n)
        y_vec = 2.0 * sqrt_h * sig.T @ record.X_star[n]
        if float(np.dot(y_vec, y_vec)) > 0.0:
            any_positive = True
            break
    if not any_positive:
        return 0.0
    _, deviation = gaussian_abs_moment_check(1.0, resamples, seed)
    return deviation
