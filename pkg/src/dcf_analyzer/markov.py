"""Stationary analysis of the unsaturated backoff chain.

States are ``(i, k)`` for backoff stage ``i`` in ``[0, m]`` and counter ``k`` in
``[0, W_i - 1]`` with ``W_i = 2**i * W``, plus an idle state ``I`` for a station
with an empty buffer. A station fails an attempt with probability ``p_eq`` and
finds a packet waiting with probability ``q``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class DegenerateInputError(ValueError):
    """Raised when ``q == 0``: the chain collapses into the idle state."""


@dataclass(frozen=True)
class ChainParams:
    W: int
    m: int
    p_eq: float
    q: float

    def __post_init__(self):
        if self.W < 1:
            raise ValueError(f"W must be >= 1, got {self.W}")
        if self.m < 0:
            raise ValueError(f"m must be >= 0, got {self.m}")
        if not 0.0 <= self.p_eq <= 1.0:
            raise ValueError(f"p_eq must lie in [0, 1], got {self.p_eq}")
        if not 0.0 <= self.q <= 1.0:
            raise ValueError(f"q must lie in [0, 1], got {self.q}")

    def window(self, i: int) -> int:
        return self.W << i


@dataclass(frozen=True)
class StationaryDistribution:
    b: list[np.ndarray]  # b[i][k]
    b_I: float

    def total(self) -> float:
        return float(sum(row.sum() for row in self.b) + self.b_I)

    def transmit_states(self) -> np.ndarray:
        return np.array([row[0] for row in self.b])

    def flat(self) -> np.ndarray:
        """Stage-major state vector with ``I`` last, matching :func:`state_index`."""
        return np.concatenate(self.b + [np.array([self.b_I])])


def _check(p: ChainParams) -> None:
    if p.q == 0.0:
        raise DegenerateInputError("q = 0: station never has traffic, all mass sits in the idle state")


def _geometric(x: float, n: int) -> float:
    # sum_{i<n} x^i by direct summation, exact at x = 1
    s, term = 0.0, 1.0
    for _ in range(n):
        s += term
        term *= x
    return s


def tau(p: ChainParams) -> float:
    """Per-slot transmission probability, the sum of the ``b_{i,0}``."""
    _check(p)
    P, q, W, m = p.p_eq, p.q, p.W, p.m
    denom = W * ((1.0 - P) * _geometric(2.0 * P, m) + (2.0 * P) ** m) + 1.0 + 2.0 * (1.0 - q) * (1.0 - P) / q
    return 2.0 / denom


def b00(p: ChainParams) -> float:
    """Normalising constant ``b_{0,0} = (1 - p_eq) * tau``.

    For ``m >= 1`` this is the probability of state ``(0, 0)``. With ``m = 0``
    stage 0 is also the retry stage and the probability of ``(0, 0)`` is
    ``tau`` itself (see :func:`stationary_distribution`).
    """
    return (1.0 - p.p_eq) * tau(p)


def stationary_distribution(p: ChainParams) -> StationaryDistribution:
    t = tau(p)
    P, q, m = p.p_eq, p.q, p.m
    head = np.empty(m + 1)
    for i in range(m):
        head[i] = P ** i * (1.0 - P) * t
    head[m] = P ** m * t
    rows = []
    for i in range(m + 1):
        Wi = p.window(i)
        inflow = 0.0
        if i == 0:
            inflow += (1.0 - P) * t
        else:
            inflow += P * head[i - 1]
        if i == m:
            inflow += P * head[m]
        rows.append(inflow * (Wi - np.arange(Wi)) / Wi)
    b_I = (1.0 - q) * (1.0 - P) * t / q
    return StationaryDistribution(rows, float(b_I))


def state_index(p: ChainParams) -> dict:
    idx, n = {}, 0
    for i in range(p.m + 1):
        for k in range(p.window(i)):
            idx[(i, k)] = n
            n += 1
    idx["I"] = n
    return idx


def transition_matrix(p: ChainParams) -> np.ndarray:
    """Row-stochastic one-step transition matrix of the chain (dense)."""
    idx = state_index(p)
    n = len(idx)
    T = np.zeros((n, n))
    P, q, W, m = p.p_eq, p.q, p.W, p.m
    for i in range(m + 1):
        Wi = p.window(i)
        for k in range(1, Wi):
            T[idx[(i, k)], idx[(i, k - 1)]] += 1.0
        src = idx[(i, 0)]
        for k in range(W):
            T[src, idx[(0, k)]] += q * (1.0 - P) / W
        nxt = min(i + 1, m)
        Wn = p.window(nxt)
        for k in range(Wn):
            T[src, idx[(nxt, k)]] += P / Wn
        T[src, idx["I"]] += (1.0 - q) * (1.0 - P)
    for k in range(W):
        T[idx["I"], idx[(0, k)]] += q / W
    T[idx["I"], idx["I"]] += 1.0 - q
    return T
