"""Bit and frame error rates over Rayleigh fading, and capture probabilities."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from math import comb
from pathlib import Path

import numpy as np
from scipy import integrate

from .params import NetworkConfig

QUAD_ABS_TOL = 1e-10
_BITS_PER_SYMBOL = {"DBPSK": 2, "DQPSK": 4}  # constellation size M


class BerRangeError(ValueError):
    pass


@dataclass(frozen=True)
class BerTable:
    """Sampled BER curve, linearly interpolated against SNR in dB."""

    snr_db: tuple[float, ...]
    ber: tuple[float, ...]

    def __post_init__(self):
        if len(self.snr_db) < 2 or len(self.snr_db) != len(self.ber):
            raise ValueError("a BER table needs at least two (snr_dB, ber) rows")
        if any(b >= a for a, b in zip(self.snr_db[1:], self.snr_db)):
            raise ValueError("BER table SNR column must be strictly increasing")
        if any(not 0.0 <= b <= 0.5 for b in self.ber):
            raise ValueError("BER table values must lie in [0, 0.5]")

    def __call__(self, snr_linear: float) -> float:
        if snr_linear <= 0:
            raise BerRangeError(f"SNR {snr_linear} outside BER table range")
        x = 10.0 * math.log10(snr_linear)
        if not self.snr_db[0] <= x <= self.snr_db[-1]:
            raise BerRangeError(
                f"SNR {x:.3f} dB outside BER table range [{self.snr_db[0]}, {self.snr_db[-1]}] dB")
        return float(np.interp(x, self.snr_db, self.ber))


@lru_cache(maxsize=32)
def load_ber_table(path: str) -> BerTable:
    data = np.loadtxt(Path(path), comments="#", ndmin=2)
    if data.shape[1] != 2:
        raise ValueError(f"{path}: expected two columns (snr_dB, ber)")
    return BerTable(tuple(data[:, 0]), tuple(data[:, 1]))


def _mpsk_rayleigh_ber(M: int, snr: float) -> float:
    k = math.log2(M)
    total = 0.0
    for i in range(1, max(M // 4, 1) + 1):
        a = snr * k * math.sin((2 * i - 1) * math.pi / M) ** 2
        # 1 / (1 + a / sin^2) written as sin^2 / (sin^2 + a): finite at theta = 0
        val, _ = integrate.quad(
            lambda th: math.sin(th) ** 2 / (math.sin(th) ** 2 + a) if a > 0 else 1.0,
            0.0, math.pi / 2, epsabs=QUAD_ABS_TOL, epsrel=1e-12, limit=200,
        )
        total += val / math.pi
    return 2.0 / max(k, 2.0) * total


@lru_cache(maxsize=4096)
def _ber_cached(modulation: str, snr_linear: float) -> float:
    return _mpsk_rayleigh_ber(_BITS_PER_SYMBOL[modulation], snr_linear)


def ber(modulation: str, snr_linear: float, table: BerTable | None = None) -> float:
    """Rayleigh-averaged bit error probability at average SNR ``snr_linear``."""
    if snr_linear < 0:
        raise ValueError(f"snr_linear must be >= 0, got {snr_linear}")
    if modulation == "TABLE":
        if table is None:
            raise ValueError("TABLE modulation needs a BerTable")
        return table(snr_linear)
    if modulation not in _BITS_PER_SYMBOL:
        raise ValueError(f"unknown modulation {modulation!r}")
    if math.isinf(snr_linear):
        return 0.0
    return _ber_cached(modulation, float(snr_linear))


def frame_error(bit_error: float, nbits: int) -> float:
    """1 - (1 - b)^n, accurate for tiny b."""
    if bit_error >= 1.0:
        return 1.0
    return -math.expm1(nbits * math.log1p(-bit_error))


@dataclass(frozen=True)
class FerResult:
    p_e_plcp: float
    p_e_data: float
    p_e_total: float


def fer(cfg: NetworkConfig, snr_linear: float) -> FerResult:
    """Frame error rate: PLCP at the DBPSK base rate, MAC header + payload at the
    configured modulation; a frame is lost if either part is corrupted."""
    table = load_ber_table(cfg.ber_table) if cfg.modulation == "TABLE" else None
    p_plcp = frame_error(ber("DBPSK", snr_linear), 8 * cfg.phy_header)
    p_data = frame_error(ber(cfg.modulation, snr_linear, table), 8 * (cfg.payload + cfg.mac_header))
    p_total = 1.0 - (1.0 - p_plcp) * (1.0 - p_data)
    return FerResult(p_plcp, p_data, min(max(p_total, 0.0), 1.0))


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def processing_gain_inverse(Sf: int) -> float:
    return 2.0 / (3.0 * Sf)


def capture_prob_conditional(i: int, z0_linear: float, Sf: int) -> float:
    """P(SIR > z0 g(Sf)) for one frame against ``i`` equal-mean Rayleigh interferers."""
    if i < 0:
        raise ValueError("number of interferers must be >= 0")
    return (1.0 + z0_linear * processing_gain_inverse(Sf)) ** (-i)


def capture_prob(tau: float, N: int, z0_linear: float, Sf: int) -> float:
    """Per-slot probability that a collision of two or more frames is captured."""
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must lie in [0, 1], got {tau}")
    if N < 1:
        raise ValueError("N must be >= 1")
    zg = z0_linear * processing_gain_inverse(Sf)
    total = 0.0
    for i in range(1, N):
        total += comb(N, i + 1) * tau ** (i + 1) * (1.0 - tau) ** (N - i - 1) / (1.0 + zg) ** i
    return total
