import math

import pytest
from hypothesis import given, settings, strategies as st

from dcf_analyzer import NetworkConfig, derive_slot_durations, solver
from dcf_analyzer.solver import SolverError
from dcf_analyzer.validation import saturation_tau_bisection


@pytest.mark.parametrize("N", [2, 5, 10, 20, 50])
def test_saturation_matches_bisection_oracle(N):
    cfg = NetworkConfig(n_stations_N=N, capture_mode="off")
    op = solver.solve_operating_point(cfg, math.inf, p_e=0.0)
    assert op.q == 1.0
    assert op.tau == pytest.approx(saturation_tau_bisection(N, 32, 5), rel=1e-8)


def test_residual_and_consistency():
    cfg = NetworkConfig(capture_mode="power-control")
    op = solver.solve_operating_point(cfg, 10.0, 45.0)
    assert op.residual < solver.RESIDUAL_TOL
    assert op.p_eq == pytest.approx(op.p_col + op.p_e - op.p_e * op.p_col)
    assert op.p_t == pytest.approx(1 - (1 - op.tau) ** 10)
    assert op.q == pytest.approx(-math.expm1(-10e-6 * op.e_sts))


@settings(max_examples=30, deadline=None)
@given(N=st.integers(1, 30), lam=st.floats(0.1, 500), p_e=st.floats(0, 0.9),
       capture=st.booleans())
def test_throughput_routes_agree(N, lam, p_e, capture):
    cfg = NetworkConfig(n_stations_N=N)
    op = solver.solve_operating_point(cfg, lam, p_e=p_e, capture=capture)
    d = derive_slot_durations(cfg)
    s = solver.throughput_from_point(op, d)
    assert 0 <= s <= 1
    assert solver.throughput_rewritten(op, d) == pytest.approx(s, rel=1e-10)


def test_zero_load():
    r = solver.throughput(NetworkConfig(), 0.0, 45.0)
    assert r.s_normalized == 0.0 and r.operating_point is None
    with pytest.raises(ValueError):
        solver.throughput(NetworkConfig(), -1.0, 45.0)


def test_light_load_is_offered_load():
    cfg = NetworkConfig(capture_mode="off")
    d = derive_slot_durations(cfg)
    S = solver.throughput(cfg, 0.5, 45.0).s_normalized
    assert S == pytest.approx(10 * 0.5 * d.E_PL_time / 1e6, rel=2e-3)


def test_single_station_never_collides():
    cfg = NetworkConfig(n_stations_N=1)
    op = solver.solve_operating_point(cfg, 1e5, p_e=0.0)
    assert op.p_col == 0.0 and op.p_cap == 0.0
    assert op.tau == pytest.approx(2 / 33, rel=1e-6)


def test_capture_raises_saturation_throughput():
    on = solver.throughput(NetworkConfig(capture_mode="power-control"), 1e4, 45.0).s_normalized
    off = solver.throughput(NetworkConfig(capture_mode="off"), 1e4, 45.0).s_normalized
    assert on > off


def test_q_from_lambda():
    assert solver.q_from_lambda(0.0, 100.0) == 0.0
    assert solver.q_from_lambda(math.inf, 100.0) == 1.0
    assert solver.q_from_lambda(1e6, 1.0) == pytest.approx(1 - math.exp(-1))
    with pytest.raises(ValueError):
        solver.q_from_lambda(-1, 1.0)


def test_unconverged_raises(monkeypatch):
    monkeypatch.setattr(solver, "RESIDUAL_TOL", 0.0)
    with pytest.raises(SolverError) as exc:
        solver.solve_operating_point(NetworkConfig(), 10.0, 45.0)
    assert exc.value.last is not None and exc.value.residual >= 0


def test_bisection_fallback(monkeypatch):
    cfg = NetworkConfig(capture_mode="off")
    ref = solver.solve_operating_point(cfg, 1e4, 45.0)
    # over-relaxation (alpha = 1.9) oscillates and must hand over to bisection
    monkeypatch.setattr(solver, "DAMPING", 1.9)
    op = solver.solve_operating_point(cfg, 1e4, 45.0)
    assert op.method == "bisection" and ref.method == "damped"
    assert op.tau == pytest.approx(ref.tau, rel=1e-8)
    assert op.residual < solver.RESIDUAL_TOL


def test_bisect_helper():
    root, _ = solver._bisect(lambda x: x * x - 2, 0.0, 2.0, 1e-14, 200)
    assert root == pytest.approx(math.sqrt(2), abs=1e-13)
