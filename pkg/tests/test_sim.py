import math
import os
import subprocess
import sys

import numpy as np
import pytest
from scipy import stats

from dcf_analyzer import NetworkConfig, derive_slot_durations, sim, solver
from dcf_analyzer.sim import RngSeed, Station, place_stations, resolve_collision, run_sim

needs_cython = pytest.mark.skipif("cython" not in sim.kernels(), reason="compiled kernel not built")


def test_backend_selected_at_import():
    assert sim.BACKEND in sim.kernels()
    out = subprocess.run([sys.executable, "-c", "import dcf_analyzer.sim as s; print(s.BACKEND)"],
                         env={**os.environ, "DCF_ANALYZER_BACKEND": "python"},
                         capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


@needs_cython
@pytest.mark.parametrize("kw", [
    dict(capture_mode="off", lam=50.0),
    dict(capture_mode="power-control", lam=8.0),
    dict(capture_mode="path-loss", lam=1e4),
    dict(capture_mode="path-loss", lam=20.0, post_backoff=True, queue_capacity=3),
    dict(capture_mode="power-control", lam=30.0, busy_decrement=False),
])
def test_backends_bit_identical(quiet, kw):
    kw = dict(kw)
    cfg = NetworkConfig(n_stations_N=6, capture_mode=kw.pop("capture_mode"))
    lam = kw.pop("lam")
    a = run_sim(cfg, lam, 45.0, slots=40_000, seed=11, backend="cython", **kw)
    b = run_sim(cfg, lam, 45.0, slots=40_000, seed=11, backend="python", **kw)
    assert a.backend == "cython" and b.backend == "python"
    assert a.identical_to(b)


def test_deterministic(quiet):
    cfg = NetworkConfig(n_stations_N=5)
    a = run_sim(cfg, 20.0, 45.0, slots=50_000, seed=3)
    assert a.identical_to(run_sim(cfg, 20.0, 45.0, slots=50_000, seed=3))
    assert not a.identical_to(run_sim(cfg, 20.0, 45.0, slots=50_000, seed=4))


@pytest.mark.parametrize("mode,lam", [("off", 15.0), ("power-control", 1e4), ("path-loss", 5.0)])
def test_conservation_and_accounting(quiet, mode, lam):
    cfg = NetworkConfig(capture_mode=mode)
    d = derive_slot_durations(cfg)
    s = run_sim(cfg, lam, 45.0, slots=300_000, seed=2)
    assert s.slots_idle * d.sigma + s.busy_time == pytest.approx(s.total_time, rel=1e-12)
    busy = s.successes * d.T_s + s.channel_error_losses * d.T_e + s.collision_slots * d.T_c
    assert busy == pytest.approx(s.busy_time, rel=1e-12)
    assert s.successes + s.collisions + s.channel_error_losses == s.tx_attempts
    n = np.arange(cfg.n_stations_N + 1)
    assert (n * s.busy_slots_by_multiplicity).sum() == s.tx_attempts
    assert s.busy_slots_by_multiplicity.sum() == s.slots_total - s.slots_idle
    assert s.busy_slots_by_multiplicity[2:].sum() == s.captures + s.collision_slots
    assert s.successes_per_station.sum() == s.successes
    assert 0.0 <= s.s_empirical <= 1.0


def test_zero_load(quiet):
    s = run_sim(NetworkConfig(), 0.0, 45.0, slots=10_000, seed=1)
    assert s.tx_attempts == 0 and s.s_empirical == 0.0 and s.arrivals == 0
    assert s.slots_idle == s.slots_total == 10_000


def test_lone_station_matches_solver():
    cfg = NetworkConfig(n_stations_N=1)
    d = derive_slot_durations(cfg)
    s = run_sim(cfg, 1e5, p_e=0.0, slots=2_000_000, seed=9)
    # one frame per T_s plus a mean backoff of (W-1)/2 idle slots
    want = d.E_PL_time / (d.T_s + 15.5 * d.sigma)
    assert solver.throughput(cfg, 1e5, p_e=0.0).s_normalized == pytest.approx(want, rel=1e-5)
    assert s.s_empirical == pytest.approx(want, rel=5e-3)
    assert s.collisions == 0


@pytest.mark.parametrize("N", [5, 10, 20])
@pytest.mark.parametrize("lam", [2.0, 1e4])
def test_attempt_rate_matches_solver(N, lam):
    cfg = NetworkConfig(n_stations_N=N, capture_mode="off")
    op = solver.solve_operating_point(cfg, lam, 45.0)
    s = run_sim(cfg, lam, 45.0, slots=10**6, duration_us=2e4 / (N * lam) * 1e6, seed=5)
    assert s.tau_empirical == pytest.approx(op.tau, rel=0.05)


def test_capture_frequency_by_multiplicity():
    cfg = NetworkConfig(n_stations_N=20, capture_mode="power-control")
    s = run_sim(cfg, 1e4, 45.0, slots=500_000, seed=8)
    zg = cfg.capture_threshold
    checked = 0
    for n in range(2, 21):
        trials = int(s.busy_slots_by_multiplicity[n])
        if trials < 200:
            continue
        p = (1 + zg) ** -(n - 1)
        freq = s.captures_by_multiplicity[n] / trials
        assert abs(freq - p) < 3 * math.sqrt(p * (1 - p) / trials), n
        checked += 1
    assert checked >= 3


def test_backoff_counters_uniform():
    cfg = NetworkConfig(n_stations_N=20, capture_mode="off", max_backoff_stage_m=3, cw_min_W=16)
    s = run_sim(cfg, 1e4, 45.0, slots=400_000, seed=4)
    for i in range(cfg.max_backoff_stage_m + 1):
        counts = s.backoff_draws[i, : cfg.cw_min_W << i]
        assert counts.sum() > 50 * len(counts)
        assert stats.chisquare(counts).pvalue > 0.01, i
        assert s.backoff_draws[i, cfg.cw_min_W << i:].sum() == 0


def test_short_run_warns():
    with pytest.warns(UserWarning, match="noisy"):
        s = run_sim(NetworkConfig(), 10.0, 45.0, slots=1000, seed=1)
    assert s.short_run


def test_queue_overflow_is_counted(quiet):
    cfg = NetworkConfig(n_stations_N=10)
    s = run_sim(cfg, 1e3, 45.0, slots=200_000, seed=1)
    assert s.dropped > 0
    assert s.arrivals >= s.dropped + s.successes
    light = run_sim(cfg, 0.5, 45.0, slots=200_000, seed=1)
    assert light.dropped <= light.arrivals * 0.01


def test_post_backoff_changes_little():
    cfg = NetworkConfig(capture_mode="off")
    kw = dict(slots=10**6, duration_us=2e4 / (10 * 5.0) * 1e6)
    a = np.mean([run_sim(cfg, 5.0, 45.0, seed=r, **kw).s_empirical for r in range(3)])
    b = np.mean([run_sim(cfg, 5.0, 45.0, seed=r, post_backoff=True, **kw).s_empirical for r in range(3)])
    assert b == pytest.approx(a, rel=0.02)


def test_bad_arguments():
    with pytest.raises(ValueError):
        run_sim(NetworkConfig(), -1.0, 45.0, slots=10)
    with pytest.raises(ValueError):
        run_sim(NetworkConfig(), 1.0, 45.0)
    with pytest.raises(ValueError):
        run_sim(NetworkConfig(), 1.0, slots=10)


def test_placement():
    pts = place_stations(100_000, 10.0, 7)
    r = np.array([p.distance for p in pts])
    assert r.max() <= 10.0
    assert np.mean(r ** 2) == pytest.approx(50.0, rel=0.01)
    assert [p.position for p in place_stations(5, 10.0, 7)] == [p.position for p in place_stations(5, 10.0, 7)]
    one = place_stations(1, 10.0, 3)
    assert len(one) == 1 and one[0].distance <= 10.0
    with pytest.raises(ValueError):
        place_stations(0, 10.0, 1)


def test_mean_power_modes():
    stations = [Station(0, (0.0, 0.0)), Station(1, (2.0, 0.0))]
    pl = sim.mean_powers(stations, NetworkConfig(capture_mode="path-loss"))
    assert pl[0] == pytest.approx(sim.MIN_DISTANCE ** -3.5)
    assert pl[1] == pytest.approx(2.0 ** -3.5)
    assert list(sim.mean_powers(stations, NetworkConfig(capture_mode="power-control"))) == [1.0, 1.0]


class _Fixed:
    """Stand-in generator whose uniform draw picks a given reference frame."""

    def __init__(self, u):
        self.u = u

    def random(self):
        return self.u


def test_strong_frame_captures():
    cfg = NetworkConfig(capture_mode="power-control")
    ts = [Station(0, (1.0, 0.0)), Station(1, (2.0, 0.0))]
    assert resolve_collision(ts, cfg, _Fixed(0.0), powers=[100.0, 1.0]) == 0
    # the weak frame is never decoded
    assert resolve_collision(ts, cfg, _Fixed(0.9), powers=[100.0, 1.0]) is None
    assert sim.sir([100.0, 1.0], 0) == 100.0


def test_equal_powers_above_unit_threshold_collide():
    cfg = NetworkConfig(capture_mode="power-control", capture_ratio_z0=20.0)
    assert cfg.capture_threshold > 1
    ts = [Station(0, (1.0, 0.0)), Station(1, (1.0, 1.0))]
    for u in (0.0, 0.9):
        assert resolve_collision(ts, cfg, _Fixed(u), powers=[1.0, 1.0]) is None


def test_resolve_collision_frequency():
    cfg = NetworkConfig(capture_mode="power-control")
    gen = RngSeed(1).generators()["fading"]
    ts = [Station(i, (1.0, 0.0)) for i in range(3)]
    n = 40_000
    wins = sum(resolve_collision(ts, cfg, gen) is not None for _ in range(n))
    p = (1 + cfg.capture_threshold) ** -2
    assert abs(wins / n - p) < 3 * math.sqrt(p * (1 - p) / n)
    with pytest.raises(ValueError):
        resolve_collision(ts[:1], cfg, gen)
    assert resolve_collision(ts, cfg.replace(capture_mode="off"), gen) is None
