"""Slot-level simulator of N DCF stations sharing one access point.

Stations receive Poisson traffic, contend with binary exponential backoff,
and lose frames to collisions or channel errors. Overlapping frames may be
captured: the receiver locks onto one of them (uniformly at random) and
decodes it when its instantaneous Rayleigh-faded power beats the summed
interference by the capture threshold.

The slot loop lives in a compiled extension (``_kernel``) with a pure-Python
twin (``_pykernel``) used when the extension is missing or when
``DCF_ANALYZER_BACKEND=python`` is set.
"""
from __future__ import annotations

import math
import os
import warnings
from dataclasses import dataclass, field

import numpy as np

from .. import phy
from ..params import NetworkConfig, derive_slot_durations

from . import _pykernel

if os.environ.get("DCF_ANALYZER_BACKEND", "").lower() == "python":
    _kernel = _pykernel
else:
    try:
        from . import _kernel
    except ImportError:  # extension not built
        _kernel = _pykernel

BACKEND = _kernel.BACKEND
STREAMS = ("arrivals", "backoff", "fading", "placement", "errors")
MIN_DISTANCE = 0.01  # m; keeps r ** -n_p finite for a station on top of the AP
SHORT_RUN_SLOTS = 100_000


def kernels() -> dict:
    """Available slot-loop implementations keyed by backend name."""
    out = {"python": _pykernel}
    try:
        from . import _kernel as compiled
        out["cython"] = compiled
    except ImportError:
        pass
    return out


@dataclass(frozen=True)
class RngSeed:
    seed: int

    def generators(self) -> dict[str, np.random.Generator]:
        children = np.random.SeedSequence(self.seed).spawn(len(STREAMS))
        return {name: np.random.Generator(np.random.PCG64(ss)) for name, ss in zip(STREAMS, children)}


@dataclass
class Station:
    id: int
    position: tuple[float, float]
    backoff_stage: int = 0
    backoff_counter: int = 0
    queue: int = 0
    state: str = "idle"

    @property
    def distance(self) -> float:
        return math.hypot(*self.position)


@dataclass
class SimStats:
    n_stations: int
    slots_total: int
    slots_idle: int
    successes: int
    collisions: int
    collision_slots: int
    captures: int
    channel_error_losses: int
    arrivals: int
    dropped: int
    busy_time: float
    total_time: float
    payload_success_time: float
    tx_attempts_per_station: np.ndarray
    successes_per_station: np.ndarray
    busy_slots_by_multiplicity: np.ndarray
    captures_by_multiplicity: np.ndarray
    backoff_draws: np.ndarray = field(repr=False)
    short_run: bool = False
    backend: str = BACKEND

    @property
    def tx_attempts(self) -> int:
        return int(self.tx_attempts_per_station.sum())

    @property
    def s_empirical(self) -> float:
        return self.payload_success_time / self.total_time if self.total_time > 0 else 0.0

    @property
    def tau_empirical(self) -> float:
        return self.tx_attempts / (self.n_stations * self.slots_total) if self.slots_total else 0.0

    @property
    def p_col_empirical(self) -> float:
        """Fraction of attempts lost to collisions (capture losers included)."""
        return self.collisions / self.tx_attempts if self.tx_attempts else 0.0

    @property
    def p_cap_empirical(self) -> float:
        """Captures per slot, comparable with the analytic capture probability."""
        return self.captures / self.slots_total if self.slots_total else 0.0

    def summary(self) -> dict:
        return {
            "slots_total": self.slots_total, "slots_idle": self.slots_idle,
            "tx_attempts": self.tx_attempts, "successes": self.successes,
            "collisions": self.collisions, "collision_slots": self.collision_slots,
            "captures": self.captures, "channel_error_losses": self.channel_error_losses,
            "arrivals": self.arrivals, "dropped": self.dropped,
            "busy_time": self.busy_time, "total_time": self.total_time,
            "payload_success_time": self.payload_success_time,
            "s_empirical": self.s_empirical, "tau_empirical": self.tau_empirical,
            "p_col_empirical": self.p_col_empirical, "p_cap_empirical": self.p_cap_empirical,
            "short_run": self.short_run, "backend": self.backend,
        }

    def identical_to(self, other: "SimStats") -> bool:
        a, b = self.summary(), other.summary()
        a.pop("backend"), b.pop("backend")
        arrays = ("tx_attempts_per_station", "successes_per_station", "busy_slots_by_multiplicity",
                  "captures_by_multiplicity", "backoff_draws")
        return a == b and all(np.array_equal(getattr(self, k), getattr(other, k)) for k in arrays)


def place_stations(N: int, R: float, seed: int | np.random.Generator) -> list[Station]:
    """Uniform positions over a disc of radius ``R`` centred on the access point."""
    if N < 1 or not R > 0:
        raise ValueError("need N >= 1 and R > 0")
    gen = seed if isinstance(seed, np.random.Generator) else RngSeed(seed).generators()["placement"]
    r = R * np.sqrt(gen.random(N))
    theta = 2.0 * np.pi * gen.random(N)
    return [Station(i, (float(x), float(y))) for i, (x, y) in enumerate(zip(r * np.cos(theta), r * np.sin(theta)))]


def mean_powers(stations: list[Station], cfg: NetworkConfig) -> np.ndarray:
    """Local-mean received power per station, with path-loss constant and
    transmit power both set to 1 (only ratios matter)."""
    if cfg.capture_mode == "path-loss":
        d = np.array([max(s.distance, MIN_DISTANCE) for s in stations])
        return d ** (-cfg.path_loss_exp_np)
    return np.ones(len(stations))


def sir(powers, ref: int) -> float:
    powers = np.asarray(powers, dtype=float)
    interference = powers.sum() - powers[ref]
    return math.inf if interference == 0 else float(powers[ref] / interference)


def captured(powers, ref: int, threshold: float) -> bool:
    """Does frame ``ref`` survive at the receiver against all the others?"""
    return sir(powers, ref) > threshold


def resolve_collision(transmitters: list[Station], cfg: NetworkConfig, gen: np.random.Generator,
                      powers=None) -> int | None:
    """Outcome of overlapping frames: the id of the captured station, or ``None``.

    Instantaneous powers are exponential around each station's local mean
    unless ``powers`` is given. The receiver synchronises to one frame chosen
    uniformly at random and decodes it iff its SIR exceeds ``z0 * g(Sf)``;
    a frame far stronger than the rest therefore wins whenever it is the one
    locked onto, and equal-mean frames are captured with probability
    ``(1 + z0 g)**-i`` against ``i`` interferers.
    """
    if len(transmitters) < 2:
        raise ValueError("a collision needs at least two transmitters")
    if not cfg.capture_enabled:
        return None
    ref = int(gen.random() * len(transmitters))
    if powers is None:
        mean = mean_powers(transmitters, cfg)
        powers = [mean[a] * gen.standard_exponential() for a in range(len(transmitters))]
    return transmitters[ref].id if captured(powers, ref, cfg.capture_threshold) else None


def run_sim(cfg: NetworkConfig, lam: float, snr_db: float | None = None, *,
            slots: int | None = None, duration_us: float | None = None, seed: int = 1,
            p_e: float | None = None, queue_capacity: int = 1, post_backoff: bool = False,
            busy_decrement: bool = True, stations: list[Station] | None = None, backend: str | None = None) -> SimStats:
    """Simulate until at least ``slots`` slots and ``duration_us`` microseconds have elapsed.

    ``queue_capacity`` counts packets that may wait behind the frame in service;
    arrivals beyond it are dropped. ``p_e`` defaults to the frame error rate at
    ``snr_db``. Counters freeze while the medium is busy; with ``busy_decrement``
    the boundary closing a busy period still counts as one backoff slot for the
    stations that stayed silent, so each busy period costs them one decrement
    just like an idle slot. Set it to ``False`` to decrement on idle slots only.
    """
    if lam < 0:
        raise ValueError(f"lambda must be >= 0, got {lam}")
    if slots is None and duration_us is None:
        raise ValueError("give a slot budget, a duration, or both")
    if queue_capacity < 0:
        raise ValueError("queue_capacity must be >= 0")
    if p_e is None:
        if snr_db is None:
            raise ValueError("need snr_db or p_e")
        p_e = phy.fer(cfg, phy.db_to_linear(snr_db)).p_e_total
    kernel = _kernel if backend is None else kernels()[backend]

    d = derive_slot_durations(cfg)
    N, W, m = cfg.n_stations_N, cfg.cw_min_W, cfg.max_backoff_stage_m
    gens = RngSeed(seed).generators()
    if stations is None:
        stations = place_stations(N, cfg.cell_radius_R, gens["placement"])
    power = np.ascontiguousarray(mean_powers(stations, cfg), dtype=np.float64)

    attempts = np.zeros(N, dtype=np.int64)
    succ_per = np.zeros(N, dtype=np.int64)
    hist = np.zeros((m + 1, W << m), dtype=np.int64)
    mult = np.zeros(N + 1, dtype=np.int64)
    cap_mult = np.zeros(N + 1, dtype=np.int64)

    raw = kernel.run_kernel(
        N, W, m, d.sigma, d.T_s, d.T_c, d.T_e, lam / 1e6, float(p_e),
        cfg.capture_enabled, cfg.capture_threshold, power, int(queue_capacity), bool(post_backoff), bool(busy_decrement),
        int(slots or 0), float(duration_us or 0.0),
        gens["arrivals"], gens["backoff"], gens["fading"], gens["errors"],
        attempts, succ_per, hist, mult, cap_mult,
    )
    short = raw["slots_total"] < SHORT_RUN_SLOTS
    if short:
        warnings.warn(f"only {raw['slots_total']} slots simulated; estimates will be noisy", stacklevel=2)
    return SimStats(
        n_stations=N, payload_success_time=raw["successes"] * d.E_PL_time,
        tx_attempts_per_station=attempts, successes_per_station=succ_per,
        busy_slots_by_multiplicity=mult, captures_by_multiplicity=cap_mult,
        backoff_draws=hist, short_run=short, backend=kernel.BACKEND,
        **{k: raw[k] for k in ("slots_total", "slots_idle", "successes", "collisions",
                               "collision_slots", "captures", "channel_error_losses",
                               "arrivals", "dropped", "busy_time", "total_time")},
    )
