"""Throughput of the IEEE 802.11 DCF under unsaturated traffic, channel errors
and Rayleigh-fading capture: closed-form Markov model, fixed-point solver,
linear-regime model, and a slot-level simulator for validation."""

from .params import ConfigError, NetworkConfig, SlotDurations, derive_slot_durations, load_config
from .solver import OperatingPoint, SolverError, ThroughputResult, solve_operating_point, throughput

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "NetworkConfig", "SlotDurations", "derive_slot_durations", "load_config",
    "OperatingPoint", "SolverError", "ThroughputResult", "solve_operating_point", "throughput",
]
