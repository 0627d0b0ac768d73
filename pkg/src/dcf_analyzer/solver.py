"""Fixed point of the coupled attempt / collision / capture / offered-load system,
and the normalized throughput at that point."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

from . import markov, phy
from .params import NetworkConfig, SlotDurations, derive_slot_durations

log = logging.getLogger(__name__)

TAU_TOL = 1e-10
RESIDUAL_TOL = 1e-9
MAX_ITER = 10_000
DAMPING = 0.5
US_PER_S = 1e6


class SolverError(RuntimeError):
    def __init__(self, message: str, last: "OperatingPoint | None" = None, residual: float = math.inf):
        super().__init__(message)
        self.last = last
        self.residual = residual


@dataclass(frozen=True)
class OperatingPoint:
    tau: float
    p_col: float
    p_cap: float
    p_e: float
    p_eq: float
    q: float
    p_t: float
    p_s: float
    e_sts: float
    residual: float = 0.0
    iterations: int = 0
    method: str = "damped"


@dataclass(frozen=True)
class ThroughputResult:
    s_normalized: float
    operating_point: OperatingPoint | None
    slot_durations: SlotDurations
    lam: float
    snr_db: float


def expected_slot_time(op: OperatingPoint, d: SlotDurations) -> float:
    pt, ps, pe = op.p_t, op.p_s, op.p_e
    return ((1 - pt) * d.sigma + pt * (1 - ps) * d.T_c
            + pt * ps * pe * d.T_e + pt * ps * (1 - pe) * d.T_s)


def q_from_lambda(lam: float, e_sts: float) -> float:
    """Probability of at least one arrival in a slot of mean length ``e_sts`` us
    for Poisson traffic at ``lam`` packets per second."""
    if lam < 0:
        raise ValueError(f"lambda must be >= 0, got {lam}")
    if math.isinf(lam):
        return 1.0
    return -math.expm1(-lam / US_PER_S * e_sts)


def _capture_params(cfg: NetworkConfig, capture: bool | None):
    on = cfg.capture_enabled if capture is None else capture
    return on, cfg.z0_linear, cfg.spreading_factor_Sf


def _point(tau, cfg, d, lam, p_e, capture_on):
    """Everything that follows from a trial ``tau``; returns (op_without_residual, tau_new)."""
    N = cfg.n_stations_N
    p_cap = phy.capture_prob(tau, N, cfg.z0_linear, cfg.spreading_factor_Sf) if capture_on else 0.0
    p_col = 1.0 - (1.0 - tau) ** (N - 1) - p_cap
    p_eq = p_col + p_e - p_e * p_col
    p_t = 1.0 - (1.0 - tau) ** N
    p_s = (N * tau * (1.0 - tau) ** (N - 1) + p_cap) / p_t if p_t > 0 else 1.0
    op = OperatingPoint(tau, p_col, p_cap, p_e, p_eq, 0.0, p_t, p_s, 0.0)
    e_sts = expected_slot_time(op, d)
    q = q_from_lambda(lam, e_sts)
    tau_new = markov.tau(markov.ChainParams(cfg.cw_min_W, cfg.max_backoff_stage_m,
                                            min(max(p_eq, 0.0), 1.0), q))
    return OperatingPoint(tau, p_col, p_cap, p_e, p_eq, q, p_t, p_s, e_sts), tau_new


def residual_of(op: OperatingPoint, cfg: NetworkConfig, d: SlotDurations, lam: float,
                capture: bool | None = None) -> float:
    """Max mismatch when substituting ``op`` back into every model equation."""
    on, z0, Sf = _capture_params(cfg, capture)
    N = cfg.n_stations_N
    p_cap = phy.capture_prob(op.tau, N, z0, Sf) if on else 0.0
    q = q_from_lambda(lam, op.e_sts)
    checks = [
        op.tau - markov.tau(markov.ChainParams(cfg.cw_min_W, cfg.max_backoff_stage_m,
                                               min(max(op.p_eq, 0.0), 1.0), q)),
        op.p_col - (1.0 - (1.0 - op.tau) ** (N - 1) - p_cap),
        op.p_eq - (op.p_col + op.p_e - op.p_e * op.p_col),
        op.p_cap - p_cap,
        op.q - q,
        op.p_t - (1.0 - (1.0 - op.tau) ** N),
        op.p_s * op.p_t - (N * op.tau * (1.0 - op.tau) ** (N - 1) + p_cap),
        (op.e_sts - expected_slot_time(op, d)) / d.sigma,
    ]
    return max(abs(c) for c in checks)


def _bisect(f, lo, hi, tol, max_iter):
    flo = f(lo)
    for it in range(max_iter):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0.0 or hi - lo < tol:
            return mid, it
        if (fm < 0) == (flo < 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi), max_iter


def solve_operating_point(cfg: NetworkConfig, lam: float, snr_db: float | None = None, *,
                          p_e: float | None = None, capture: bool | None = None,
                          tau0: float = 0.05) -> OperatingPoint:
    """Solve the fixed point for per-station rate ``lam`` (pkt/s).

    ``p_e`` defaults to the frame error rate at ``snr_db``; pass it directly to
    study an arbitrary channel. ``capture`` overrides ``cfg.capture_mode``.
    """
    if not lam > 0:
        raise ValueError("lambda must be > 0; a zero offered load has zero throughput")
    if p_e is None:
        if snr_db is None:
            raise ValueError("need snr_db or p_e")
        p_e = phy.fer(cfg, phy.db_to_linear(snr_db)).p_e_total
    d = derive_slot_durations(cfg)
    on, _, _ = _capture_params(cfg, capture)

    tau_k = tau0
    prev_step = math.inf
    growth = 0
    method = "damped"
    it = 0
    for it in range(1, MAX_ITER + 1):
        _, tau_c = _point(tau_k, cfg, d, lam, p_e, on)
        step = abs(tau_c - tau_k)
        if step < TAU_TOL:
            tau_k = tau_c
            break
        growth = growth + 1 if step >= prev_step else 0
        if growth >= 20:
            log.debug("damped iteration not contracting at lam=%s; switching to bisection", lam)
            method = "bisection"
            break
        prev_step = step
        tau_k = min(max((1.0 - DAMPING) * tau_k + DAMPING * tau_c, 1e-300), 1.0)
    else:
        method = "bisection"

    if method == "bisection":
        def r(t):
            return t - _point(t, cfg, d, lam, p_e, on)[1]
        tau_k, extra = _bisect(r, 0.0, 1.0, 1e-15, 200)
        it += extra

    op, _ = _point(tau_k, cfg, d, lam, p_e, on)
    res = residual_of(op, cfg, d, lam, on)
    op = OperatingPoint(**{**op.__dict__, "residual": res, "iterations": it, "method": method})
    if not res < RESIDUAL_TOL:
        raise SolverError(f"no convergence at lam={lam}: residual {res:.3e}", op, res)
    return op


def throughput_from_point(op: OperatingPoint, d: SlotDurations) -> float:
    return op.p_t * op.p_s * (1.0 - op.p_e) * d.E_PL_time / expected_slot_time(op, d)


def throughput_rewritten(op: OperatingPoint, d: SlotDurations) -> float:
    """Same throughput, split into a tau-independent overhead and a contention term."""
    pe = op.p_e
    overhead = d.T_s - d.T_c / (1 - pe) + d.T_e * pe / (1 - pe)
    contention = (d.sigma * (1 - op.p_t) / op.p_t + d.T_c) / (op.p_s * (1 - pe))
    return d.E_PL_time / (overhead + contention)


def throughput(cfg: NetworkConfig, lam: float, snr_db: float | None = None, *,
               p_e: float | None = None, capture: bool | None = None) -> ThroughputResult:
    d = derive_slot_durations(cfg)
    if lam < 0:
        raise ValueError(f"lambda must be >= 0, got {lam}")
    if lam == 0:
        return ThroughputResult(0.0, None, d, lam, snr_db)
    op = solve_operating_point(cfg, lam, snr_db, p_e=p_e, capture=capture)
    return ThroughputResult(throughput_from_point(op, d), op, d, lam, snr_db)
