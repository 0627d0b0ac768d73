"""Light-load linear throughput model and its range of validity.

At low load every offered packet is delivered, so ``S = N * E[PL] * lam``.
The line stops at ``lambda_c``, where it meets the maximum throughput ``S_m``
reached at the attempt probability ``tau_m`` that optimizes contention.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from scipy import optimize

from . import phy
from .markov import DegenerateInputError
from .params import NetworkConfig, SlotDurations, derive_slot_durations

US_PER_S = 1e6


@dataclass(frozen=True)
class LinearModel:
    slope: float  # normalized throughput per pkt/s
    tau_m: float
    s_m: float
    lambda_c: float
    p_e: float

    def __call__(self, lam: float) -> float:
        return self.slope * lam


def contention_efficiency(tau: float, N: int, d: SlotDurations, p_e: float = 0.0) -> float:
    """Successful attempts per unit of idle-plus-collision time; maximized by ``tau_m``."""
    den = d.sigma * (1 - tau) + d.T_c * (1 - tau) ** (1 - N) - d.T_c * (1 - tau)
    return N * tau * (1 - p_e) / den


def tau_m(N: int, d: SlotDurations) -> float:
    """Second-order approximation of the efficiency-maximizing attempt probability."""
    if N < 2:
        raise DegenerateInputError("tau_m needs N >= 2; a lone station has no contention trade-off")
    a = d.sigma - d.T_c
    if a == 0:
        raise DegenerateInputError("sigma == T_c makes the closed form 0/0")
    radicand = d.sigma * (N * d.sigma - 2 * (N - 1) * a) / N
    if radicand < 0:
        raise ValueError(f"negative radicand {radicand}: needs sigma < T_c")
    return (d.sigma - math.sqrt(radicand)) / ((N - 1) * a)


def tau_m_exact(N: int, d: SlotDurations) -> float:
    """Numerical argmax of :func:`contention_efficiency` over ``(0, 1]``."""
    if N == 1:
        # efficiency is increasing in tau for a single station
        return 1.0
    res = optimize.minimize_scalar(lambda t: -contention_efficiency(t, N, d),
                                   bounds=(1e-12, 1 - 1e-12), method="bounded",
                                   options={"xatol": 1e-13})
    return float(res.x)


def _tau_m_or_exact(N: int, d: SlotDurations) -> float:
    try:
        return tau_m(N, d)
    except DegenerateInputError:
        return tau_m_exact(N, d)


def _overhead(d: SlotDurations, p_e: float) -> float:
    return d.T_s - d.T_c / (1 - p_e) + d.T_e * p_e / (1 - p_e)


def _contention_time(N: int, d: SlotDurations, p_e: float, tm: float) -> float:
    """Per-success contention term at ``tau_m`` (without the 1/N)."""
    return ((d.sigma - d.T_c) * (1 - tm) ** N + d.T_c) / (tm * (1 - tm) ** (N - 1) * (1 - p_e))


def s_max(N: int, d: SlotDurations, p_e: float) -> float:
    if not 0 <= p_e < 1:
        raise ValueError(f"p_e must lie in [0, 1), got {p_e}")
    tm = _tau_m_or_exact(N, d)
    return d.E_PL_time / (_overhead(d, p_e) + _contention_time(N, d, p_e, tm) / N)


def lambda_c(N: int, d: SlotDurations, p_e: float) -> float:
    """Offered load (pkt/s per station) where the linear model meets ``s_max``."""
    if not 0 <= p_e < 1:
        raise ValueError(f"p_e must lie in [0, 1), got {p_e}")
    tm = _tau_m_or_exact(N, d)
    per_us = 1.0 / (N * _overhead(d, p_e) + _contention_time(N, d, p_e, tm))
    return per_us * US_PER_S


def linear_throughput(N: int, e_pl_time: float, lam: float) -> float:
    return N * e_pl_time * lam / US_PER_S


def linear_model(cfg: NetworkConfig, snr_db: float | None = None, *, p_e: float | None = None) -> LinearModel:
    if p_e is None:
        if snr_db is None:
            raise ValueError("need snr_db or p_e")
        p_e = phy.fer(cfg, phy.db_to_linear(snr_db)).p_e_total
    d = derive_slot_durations(cfg)
    N = cfg.n_stations_N
    return LinearModel(
        slope=N * d.E_PL_time / US_PER_S,
        tau_m=_tau_m_or_exact(N, d),
        s_m=s_max(N, d, p_e),
        lambda_c=lambda_c(N, d, p_e),
        p_e=p_e,
    )
