"""Acceptance checks and the independent oracles they compare against.

Each ``criterion_*`` function returns a :class:`CriterionResult`; the
``validate`` CLI command and the acceptance test suite both call
:func:`run_criteria`. Oracles here deliberately avoid the code paths they
check: the stationary distribution is recovered by solving the balance
equations of the transition matrix, the saturation attempt rate by bisection
on the classical two-equation system, and capture by Monte Carlo.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import linear, markov, phy, solver
from .params import NetworkConfig, derive_slot_durations

# lambda_c (pkt/s per station) keyed by (payload bytes, SNR dB, N)
REFERENCE_LAMBDA_C = {
    (1024, 20.0, 4): 13.9187, (1024, 20.0, 10): 5.5372, (1024, 20.0, 20): 2.7638,
    (1024, 45.0, 4): 26.7546, (1024, 45.0, 10): 10.6444, (1024, 45.0, 20): 5.3132,
    (128, 45.0, 4): 135.0307, (128, 45.0, 10): 53.3990, (128, 45.0, 20): 26.6039,
}
TABLE_ROWS = ((1024, 20.0), (1024, 45.0), (128, 45.0))
TABLE_N = (4, 10, 20)

SIM_N = (5, 10, 20)
SIM_LAMBDAS = (1, 2, 5, 10, 20, 50, 100)
SIM_REPLICATIONS = 10
SIM_SLOTS = 10**6
SIM_SUCCESS_TARGET = 2e4  # expected deliveries per replication at low load
SIM_BASE_SEED = 100


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str
    metrics: dict = field(default_factory=dict, repr=False)

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] criterion {self.number} ({self.name}): {self.detail}"


# --- oracles -----------------------------------------------------------------

def stationary_by_linear_solve(p: markov.ChainParams) -> np.ndarray:
    """Solve pi T = pi, sum(pi) = 1 directly from the transition matrix."""
    T = markov.transition_matrix(p)
    n = T.shape[0]
    A = T.T - np.eye(n)
    A[-1, :] = 1.0
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    return np.linalg.solve(A, rhs)


def saturation_tau_bisection(N: int, W: int, m: int, tol: float = 1e-15) -> float:
    """Saturated attempt rate from tau = 2(1-2p) / ((1-2p)(W+1) + pW(1-(2p)^m)),
    p = 1 - (1-tau)^(N-1), by bisection on tau."""
    def g(t):
        p = 1.0 - (1.0 - t) ** (N - 1)
        den = (1 - 2 * p) * (W + 1) + p * W * (1 - (2 * p) ** m)
        # removable singularity at p = 1/2
        rhs = 2.0 / (W + 1 + p * W * sum((2 * p) ** k for k in range(m))) if abs(1 - 2 * p) < 1e-9 else 2 * (1 - 2 * p) / den
        return t - rhs
    lo, hi = 1e-12, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if (g(mid) > 0) == (g(hi) > 0):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def capture_monte_carlo(i: int, threshold: float, trials: int, rng: np.random.Generator) -> float:
    """Fraction of draws where one unit-mean exponential beats the sum of ``i`` others."""
    wanted = rng.standard_exponential(trials)
    interference = rng.standard_gamma(i, trials) if i > 0 else np.zeros(trials)
    return float(np.mean(wanted > threshold * interference))


def rayleigh_bpsk_closed_form(snr_linear: float) -> float:
    return 0.5 * (1.0 - math.sqrt(snr_linear / (1.0 + snr_linear)))


def table2(cfg: NetworkConfig | None = None) -> dict:
    """lambda_c over the (payload, SNR) x N grid, frame error rate from the phy chain."""
    cfg = cfg or NetworkConfig()
    out = {}
    for payload, snr in TABLE_ROWS:
        c = cfg.replace(payload=payload)
        p_e = phy.fer(c, phy.db_to_linear(snr)).p_e_total
        d = derive_slot_durations(c)
        for N in TABLE_N:
            out[(payload, snr, N)] = linear.lambda_c(N, d, p_e) if p_e < 1 else 0.0
    return out


# --- criteria ----------------------------------------------------------------

def criterion_1() -> CriterionResult:
    cfg = NetworkConfig(capture_mode="off", max_backoff_stage_m=0, cw_min_W=32)
    op = solver.solve_operating_point(cfg, 1e6, p_e=0.0)
    err = abs(op.tau - 2.0 / 33.0)
    return CriterionResult(1, "q -> 1 limit", err < 1e-6,
                           f"tau={op.tau:.12f}, 2/(W+1)={2 / 33:.12f}, |diff|={err:.2e} (tol 1e-6)",
                           {"tau": op.tau, "err": err})


def criterion_2(draws: int = 50, seed: int = 2) -> CriterionResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for W in (2, 4, 8):
        for m in (0, 1, 2, 3):
            for _ in range(draws):
                # keep q away from 0 where the chain degenerates
                p = markov.ChainParams(W, m, float(rng.uniform(0, 1)), float(rng.uniform(1e-3, 1)))
                closed = markov.stationary_distribution(p).flat()
                worst = max(worst, float(np.max(np.abs(closed - stationary_by_linear_solve(p)))))
    return CriterionResult(2, "closed form vs balance equations", worst < 1e-10,
                           f"max state-wise |diff|={worst:.2e} over 12 (W,m) x {draws} draws (tol 1e-10)",
                           {"max_err": worst})


def criterion_3() -> CriterionResult:
    worst, failures = 0.0, 0
    for N in (4, 10, 20):
        for snr in (20.0, 45.0):
            for z0 in (6.0, 24.0):
                cfg = NetworkConfig(n_stations_N=N, capture_ratio_z0=z0, capture_mode="power-control")
                for lam in range(1, 101):
                    try:
                        op = solver.solve_operating_point(cfg, float(lam), snr)
                        worst = max(worst, op.residual)
                    except solver.SolverError as exc:
                        failures += 1
                        worst = max(worst, exc.residual)
    ok = failures == 0 and worst < 1e-9
    return CriterionResult(3, "fixed-point residual", ok,
                           f"max residual={worst:.2e} over 1200 points, {failures} failures (tol 1e-9)",
                           {"max_residual": worst, "failures": failures})


def criterion_4() -> CriterionResult:
    ours = table2()
    rel = {k: abs(ours[k] - v) / v for k, v in REFERENCE_LAMBDA_C.items()}
    cells = ", ".join(f"{p}B/{s:g}dB/N={n}: {ours[(p, s, n)]:.4f} vs {v} ({rel[(p, s, n)]:+.1%})"
                      for (p, s, n), v in REFERENCE_LAMBDA_C.items())
    if max(rel.values()) < 0.02:
        return CriterionResult(4, "lambda_c table", True, f"all cells within 2%; {cells}", {"rel": rel})
    # fallback tier: internal consistency plus a 10% band
    cfg = NetworkConfig()
    worst_consistency = 0.0
    for payload, snr in TABLE_ROWS:
        c = cfg.replace(payload=payload)
        p_e = phy.fer(c, phy.db_to_linear(snr)).p_e_total
        if p_e >= 1:
            worst_consistency = math.inf
            continue
        d = derive_slot_durations(c)
        for N in TABLE_N:
            s_m, lc = linear.s_max(N, d, p_e), linear.lambda_c(N, d, p_e)
            slope = N * d.E_PL_time / linear.US_PER_S
            worst_consistency = max(worst_consistency, abs(s_m - slope * lc) / s_m)
    far = [k for k, r in rel.items() if r >= 0.10]
    ok = worst_consistency < 1e-12 and not far
    return CriterionResult(
        4, "lambda_c table", ok,
        f"2% tier missed; fallback: S_m = slope*lambda_c rel err {worst_consistency:.1e} (tol 1e-12), "
        f"{len(far)} cells beyond 10%; {cells}",
        {"rel": rel, "consistency": worst_consistency, "beyond_10pct": far})


def criterion_5(trials: int = 10**6, seed: int = 5) -> CriterionResult:
    cfg = NetworkConfig()
    thr = cfg.capture_threshold
    rng = np.random.default_rng(seed)
    parts, ok = [], True
    for i in (1, 2, 3, 5):
        expected = phy.capture_prob_conditional(i, cfg.z0_linear, cfg.spreading_factor_Sf)
        freq = capture_monte_carlo(i, thr, trials, rng)
        sigma = math.sqrt(expected * (1 - expected) / trials)
        z = (freq - expected) / sigma
        ok &= abs(z) < 3
        parts.append(f"i={i}: {freq:.5f} vs {expected:.5f} ({z:+.2f} sigma)")
    return CriterionResult(5, "capture Monte Carlo", ok, "; ".join(parts))


def sim_vs_analytic_grid(Ns=SIM_N, lambdas=SIM_LAMBDAS, replications=SIM_REPLICATIONS,
                         slots=SIM_SLOTS, snr_db: float = 45.0, modes=("off", "power-control"),
                         base_seed: int = SIM_BASE_SEED) -> list[dict]:
    """Mean simulated vs analytic throughput over the validation grid."""
    from .sim import run_sim

    rows = []
    for mode in modes:
        for N in Ns:
            cfg = NetworkConfig(n_stations_N=N, capture_mode=mode, capture_ratio_z0=6.0, payload=1024)
            for lam in lambdas:
                analytic = solver.throughput(cfg, float(lam), snr_db).s_normalized
                # at light load a pure slot budget sees few deliveries; stretch it in time
                duration = SIM_SUCCESS_TARGET / (N * lam) * 1e6
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore")
                    s = [run_sim(cfg, float(lam), snr_db, slots=slots, duration_us=duration,
                                 seed=base_seed + r).s_empirical for r in range(replications)]
                mean = float(np.mean(s))
                rows.append({"mode": mode, "N": N, "lam": lam, "S_analytic": analytic, "S_sim": mean,
                             "stderr": float(np.std(s, ddof=1) / math.sqrt(replications)) if replications > 1 else 0.0,
                             "rel": (mean - analytic) / analytic})
    return rows


def criterion_6(**kw) -> CriterionResult:
    rows = sim_vs_analytic_grid(**kw)
    bad = [r for r in rows if abs(r["rel"]) >= 0.05]
    worst = max(rows, key=lambda r: abs(r["rel"]))
    detail = (f"{len(rows) - len(bad)}/{len(rows)} points within 5%; worst {worst['mode']} N={worst['N']} "
              f"lambda={worst['lam']}: {worst['rel']:+.2%}")
    if bad:
        detail += "; outside: " + ", ".join(f"{r['mode']}/N={r['N']}/lambda={r['lam']} {r['rel']:+.2%}" for r in bad)
    return CriterionResult(6, "simulator vs analytic", not bad, detail, {"rows": rows})


def criterion_7() -> CriterionResult:
    worst, parts = 0.0, []
    for N in (4, 10, 20):
        cfg = NetworkConfig(n_stations_N=N, capture_mode="power-control")
        d = derive_slot_durations(cfg)
        p_e = phy.fer(cfg, phy.db_to_linear(45.0)).p_e_total
        lc = linear.lambda_c(N, d, p_e)
        lams = np.linspace(0.05, 0.5, 10) * lc
        S = [solver.throughput(cfg, float(x), 45.0).s_normalized for x in lams]
        slope = np.polyfit(lams, S, 1)[0]
        want = N * d.E_PL_time / linear.US_PER_S
        rel = abs(slope - want) / want
        worst = max(worst, rel)
        parts.append(f"N={N}: {slope:.6e} vs {want:.6e} ({rel:.2%})")
    return CriterionResult(7, "linear-regime slope", worst < 0.03, "; ".join(parts) + " (tol 3%)")


def criterion_8() -> CriterionResult:
    grid = np.arange(-5.0, 45.0 + 1e-9, 0.25)
    errs = [abs(phy.ber("DBPSK", phy.db_to_linear(x)) - rayleigh_bpsk_closed_form(phy.db_to_linear(x)))
            for x in grid]
    worst = max(errs)
    return CriterionResult(8, "BER quadrature vs closed form", worst < 1e-8,
                           f"max |diff|={worst:.2e} over {len(grid)} SNRs in [-5, 45] dB (tol 1e-8)")


def criterion_9() -> CriterionResult:
    """Qualitative curve shape: rise, plateau, and a peak flattened by capture."""
    checks = {}
    lams = [1, 2, 5, 8, 10, 11, 12, 15, 20, 50, 100, 1e3, 1e4]
    curves = {}
    for label, mode in (("no capture", "off"), ("capture 6 dB", "power-control")):
        cfg = NetworkConfig(n_stations_N=10, capture_mode=mode, capture_ratio_z0=6.0)
        curves[label] = np.array([solver.throughput(cfg, float(x), 45.0).s_normalized for x in lams])
    lc = linear.linear_model(NetworkConfig(n_stations_N=10), 45.0).lambda_c
    below = np.array(lams) <= lc
    for label, S in curves.items():
        checks[f"{label}: rises up to lambda_c"] = bool(np.all(np.diff(S[below]) > 0))
        checks[f"{label}: plateau"] = bool(abs(S[-1] - S[-2]) / S[-1] < 0.01)
    bump = {k: (S.max() - S[-1]) / S[-1] for k, S in curves.items()}
    checks["capture flattens the peak"] = bump["capture 6 dB"] < 0.5 * bump["no capture"]
    ok = all(checks.values())
    failed = [k for k, v in checks.items() if not v]
    return CriterionResult(9, "curve shape", ok,
                           f"peak over plateau {bump['no capture']:.1%} without capture, "
                           f"{bump['capture 6 dB']:.1%} with" + (f"; failed: {failed}" if failed else ""))


CRITERIA: dict[int, Callable[[], CriterionResult]] = {
    1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5,
    6: criterion_6, 7: criterion_7, 8: criterion_8, 9: criterion_9,
}


def run_criteria(numbers=None) -> list[CriterionResult]:
    return [CRITERIA[n]() for n in (numbers or sorted(CRITERIA))]
