import numpy as np
import pytest

from ssbelab.drifts import builtin_drift, make_drift
from ssbelab.gaussian import derive_substream
from ssbelab.integrator import (
    dump_path_csv,
    energy_identity_residuals,
    integrate,
    integrate_affine,
    integrate_paths_lockstep,
    step_identity_residuals,
)
from ssbelab.schedules import schedule_family


def test_zero_noise_halving():
    lin = builtin_drift("linear", lam=1.0)
    rec = integrate(lin, schedule_family("zero", h=1.0), [1.0], 12, derive_substream(0, 0, 1))
    assert np.allclose(rec.X[:, 0], 0.5 ** np.arange(13), atol=1e-15)
    assert rec.summary.sup_norm == 1.0
    assert rec.summary.final_norm == pytest.approx(2.0**-12)


def test_near_identity_drift_is_random_walk():
    eps = 1e-15
    tiny = make_drift(lambda x: eps * np.asarray(x, float), 1, name="tiny",
                      scalar_eval=lambda y: eps * y, scalar_deriv=lambda y: np.full_like(np.asarray(y, float), eps))
    sched = schedule_family("constant", h=1.0, c=1.0)
    stream = derive_substream(21, 0, 1)
    rec = integrate(tiny, sched, [0.0], 1000, stream)
    walk = np.concatenate([[0.0], np.cumsum(rec.U[:, 0])])
    assert np.abs(rec.X[:, 0] - walk).max() < 1e-10


def test_recurrence_is_bitwise():
    drift = builtin_drift("cubic")
    sched = schedule_family("power", h=0.25, c=1.0, p=0.7)
    rec = integrate(drift, sched, [2.0], 500, derive_substream(5, 2, 1))
    lhs = rec.X[1:]
    rhs = rec.X_star + rec.U
    assert (lhs == rhs).all()


def test_implicit_relation_holds_at_tolerance():
    drift = builtin_drift("cubic")
    sched = schedule_family("inverse_log", h=0.5, a=1.0, b=2.0)
    rec = integrate(drift, sched, [1.5], 400, derive_substream(5, 0, 1), tol=1e-12)
    resid = rec.X_star - rec.X[:-1] + rec.h * drift(rec.X_star)
    assert np.abs(resid).max() <= 1e-12


def test_contraction_along_path():
    drift = builtin_drift("arctan")
    sched = schedule_family("constant", h=0.2, c=0.5)
    rec = integrate(drift, sched, [3.0], 300, derive_substream(6, 1, 1))
    ns = np.linalg.norm(rec.X[:-1], axis=1)
    nstar = np.linalg.norm(rec.X_star, axis=1)
    nonzero = ns > 0
    assert (nstar[nonzero] < ns[nonzero]).all()


def test_step_and_energy_identities_short():
    drift = builtin_drift("cubic")
    sched = schedule_family("inverse_log", h=0.1, a=2.0, b=2.0)
    rec = integrate(drift, sched, [1.0], 3000, derive_substream(42, 0, 1))
    assert float(step_identity_residuals(rec, drift).max()) <= 1e-10
    assert float(energy_identity_residuals(rec, drift).max()) <= 1e-8


def test_determinism():
    drift = builtin_drift("cubic")
    sched = schedule_family("power", h=0.1, c=1.0, p=1.0)
    a = integrate(drift, sched, [1.0], 200, derive_substream(9, 4, 1))
    b = integrate(drift, sched, [1.0], 200, derive_substream(9, 4, 1))
    assert (a.X == b.X).all() and (a.U == b.U).all()


def test_dimension_validation():
    drift = builtin_drift("cubic", d=2)
    sched = schedule_family("zero", h=1.0, d=2, r=3)
    with pytest.raises(ValueError):
        integrate(drift, sched, [1.0], 10, derive_substream(0, 0, 3))
    with pytest.raises(ValueError):
        integrate(drift, sched, [1.0, 1.0], 10, derive_substream(0, 0, 2))  # r mismatch
    with pytest.raises(ValueError):
        integrate(drift, sched, [1.0, 1.0], 0, derive_substream(0, 0, 3))


def test_affine_scalar_map():
    sched = schedule_family("zero", h=0.1)
    rec = integrate_affine(np.array([[-1.0]]), sched, [1.0], 3, derive_substream(0, 0, 1))
    assert rec.X[1, 0] == pytest.approx(1.0 / 1.1, rel=1e-15)


def test_affine_zero_noise_identity_matrix():
    sched = schedule_family("zero", h=1.0, d=2, r=2)
    rec = integrate_affine(-np.eye(2), sched, [1.0, 1.0], 8, derive_substream(0, 0, 2))
    assert np.allclose(rec.X, 0.5 ** np.arange(9)[:, None] * np.ones(2), atol=1e-15)


def test_affine_requires_stability():
    sched = schedule_family("zero", h=1.0)
    with pytest.raises(ValueError):
        integrate_affine(np.array([[0.5]]), sched, [1.0], 3, derive_substream(0, 0, 1))


def test_affine_cross_check_same_seed():
    A = np.array([[-1.0, 0.5], [-0.5, -2.0]])
    drift = builtin_drift("linear", A=A)
    sched = schedule_family("power", h=0.1, c=1.0, p=1.0, d=2, r=2)
    r1 = integrate(drift, sched, [1.0, -1.0], 1000, derive_substream(3, 7, 2))
    r2 = integrate_affine(A, sched, [1.0, -1.0], 1000, derive_substream(3, 7, 2))
    assert np.abs(r1.X - r2.X).max() <= 1e-9


def test_lockstep_matches_per_path():
    drift = builtin_drift("cubic")
    sched = schedule_family("inverse_log", h=0.1, a=2.0, b=2.0)
    sums = integrate_paths_lockstep(drift, sched, [1.0], 1500, 1, 77, range(4))
    for s in sums:
        rec = integrate(drift, sched, [1.0], 1500, derive_substream(77, s.path_index, 1), "summary")
        t = rec.summary
        assert s.final_norm == pytest.approx(t.final_norm, abs=1e-9)
        assert s.sup_norm == pytest.approx(t.sup_norm, abs=1e-9)
        assert s.window_min == pytest.approx(t.window_min, abs=1e-9)
        assert s.time_avg_sq == pytest.approx(t.time_avg_sq, abs=1e-9)
        assert s.m_over_n == pytest.approx(t.m_over_n, abs=1e-9)
        assert s.shock_sq_avg == pytest.approx(t.shock_sq_avg, abs=1e-9)


def test_lockstep_affine_and_fallback_routes():
    A = np.array([[-2.0]])
    drift = builtin_drift("linear", A=A)
    sched = schedule_family("power", h=0.2, c=0.5, p=1.0)
    sums = integrate_paths_lockstep(drift, sched, [1.0], 800, 1, 5, range(3))
    rec = integrate_affine(A, sched, [1.0], 800, derive_substream(5, 1, 1), "summary")
    match = [s for s in sums if s.path_index == 1][0]
    assert match.final_norm == pytest.approx(rec.summary.final_norm, abs=1e-10)

    gen = make_drift(lambda x: np.tanh(np.asarray(x, float)) + 0.2 * np.asarray(x, float),
                     1, name="opaque")
    sums2 = integrate_paths_lockstep(gen, sched, [1.0], 100, 1, 5, range(2))
    rec2 = integrate(gen, sched, [1.0], 100, derive_substream(5, 0, 1), "summary")
    assert sums2[0].final_norm == pytest.approx(rec2.summary.final_norm, abs=1e-9)


def test_record_modes(tmp_path):
    drift = builtin_drift("cubic")
    sched = schedule_family("power", h=0.5, c=1.0, p=1.0)
    full = integrate(drift, sched, [1.0], 20, derive_substream(1, 0, 1), "full")
    thin = integrate(drift, sched, [1.0], 20, derive_substream(1, 0, 1), "thin:7")
    summ = integrate(drift, sched, [1.0], 20, derive_substream(1, 0, 1), "summary")
    assert full.X.shape == (21, 1)
    assert list(thin.stored_steps) == [0, 7, 14, 20]
    assert np.allclose(thin.X[:, 0], full.X[[0, 7, 14, 20], 0])
    assert summ.X is None and summ.summary.final_norm == pytest.approx(full.summary.final_norm)
    with pytest.raises(ValueError):
        integrate(drift, sched, [1.0], 20, derive_substream(1, 0, 1), "thin:0")

    out = tmp_path / "path.csv"
    dump_path_csv(full, out)
    lines = out.read_text().splitlines()
    header = [l for l in lines if l.startswith("#")]
    assert any("master_seed: 1" in l for l in header)
    assert any(f"h: {0.5!r}" in l for l in header)
    cols = [l for l in lines if not l.startswith("#")][0].split(",")
    assert cols == ["n", "X_1", "Xstar_1", "U_1"]
    body = [l.split(",") for l in lines if not l.startswith("#")][1:]
    assert len(body) == 21
    # Recurrence is recoverable from the file.
    for n in range(1, 21):
        x_prev_star = float(body[n - 1][2])
        u = float(body[n][3])
        assert float(body[n][1]) == x_prev_star + u
    assert body[0][3] == "nan" and body[20][2] == "nan"


def test_path_failure_carries_partial_record():
    from ssbelab.implicit import SolverError

    anti = make_drift(lambda x: -np.asarray(x, float), 1, name="anti",
                      scalar_eval=lambda y: -y)
    sched = schedule_family("constant", h=2.0, c=0.1)
    with pytest.raises(SolverError) as excinfo:
        integrate(anti, sched, [1.0], 50, derive_substream(0, 0, 1))
    exc = excinfo.value
    assert exc.step_index == 0
    assert exc.partial_states.shape == (1, 1)
    assert exc.partial_summary.sup_norm == 1.0


def test_ensemble_failure_identifies_path():
    from ssbelab.integrator import EnsemblePathError

    anti = make_drift(lambda x: -np.asarray(x, float), 1, name="anti",
                      scalar_eval=lambda y: -y, scalar_deriv=lambda y: np.full_like(np.asarray(y, float), -1.0))
    sched = schedule_family("constant", h=2.0, c=0.1)
    with pytest.raises(EnsemblePathError) as excinfo:
        integrate_paths_lockstep(anti, sched, [1.0], 20, 1, 99, range(3))
    exc = excinfo.value
    assert exc.step_index == 0
    assert exc.path_index in (0, 1, 2)
    assert "master_seed 99" in str(exc)
    assert len(exc.partial_summaries) == 3


def test_diagnostics_out_of_order_rejected():
    from ssbelab.diagnostics import DiagnosticState

    s = DiagnosticState(d=1, h=1.0, window=4)
    s.start(np.zeros(1))
    s.update(np.ones(1), np.ones(1), np.zeros(1), 0.0, step=1)
    with pytest.raises(ValueError, match="out-of-order"):
        s.update(np.ones(1), np.ones(1), np.zeros(1), 0.0, step=3)


def test_pilot_decay_bound():
    # Long-run pilot: cubic drift with a square-summable schedule parks the
    # path near the origin well inside the 0.05 acceptance threshold.
    drift = builtin_drift("cubic")
    sched = schedule_family("power", h=0.1, c=1.0, p=1.0)
    rec = integrate(drift, sched, [1.0], 20_000, derive_substream(7, 0, 1), "summary")
    assert rec.summary.final_norm < 0.05
    assert rec.summary.window_max < 0.05
