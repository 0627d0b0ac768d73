"""Network configuration and derived slot durations.

All times are microseconds, all sizes bytes, all rates Mbps, so a frame of
``b`` bytes at ``r`` Mbps lasts ``8 * b / r`` microseconds.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

MODULATIONS = ("DBPSK", "DQPSK", "TABLE")
CAPTURE_MODES = ("off", "power-control", "path-loss")


class ConfigError(ValueError):
    """Invalid configuration value; ``field`` names the offending entry."""

    def __init__(self, field_name: str, message: str):
        self.field = field_name
        super().__init__(f"{field_name}: {message}")


@dataclass(frozen=True)
class NetworkConfig:
    # frame sizes (bytes)
    mac_header: int = 24
    phy_header: int = 16
    ack_frame: int = 14
    ack_phy_header: int = 16
    payload: int = 1024
    # timing (us)
    slot_sigma: float = 20.0
    sifs: float = 10.0
    difs: float = 50.0
    eifs: float = 300.0
    ack_timeout: float = 300.0
    prop_delay_tau_p: float = 1.0
    # contention
    cw_min_W: int = 32
    max_backoff_stage_m: int = 5
    # rates (Mbps)
    basic_rate: float = 1.0
    data_rate: float = 1.0
    # network / capture / channel
    n_stations_N: int = 10
    capture_ratio_z0: float = 6.0
    capture_mode: str = "path-loss"
    spreading_factor_Sf: int = 11
    path_loss_exp_np: float = 3.5
    cell_radius_R: float = 10.0
    modulation: str = "DBPSK"
    ber_table: str | None = None

    def __post_init__(self):
        validate(self)

    @property
    def cw_max(self) -> int:
        return self.cw_min_W << self.max_backoff_stage_m

    @property
    def z0_linear(self) -> float:
        return 10.0 ** (self.capture_ratio_z0 / 10.0)

    @property
    def capture_threshold(self) -> float:
        """SIR threshold z0 * g(Sf) with g(Sf) = 2 / (3 Sf)."""
        return self.z0_linear * 2.0 / (3.0 * self.spreading_factor_Sf)

    @property
    def capture_enabled(self) -> bool:
        return self.capture_mode != "off"

    def replace(self, **changes) -> "NetworkConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class SlotDurations:
    sigma: float
    T_s: float
    T_c: float
    T_e: float
    E_PL_time: float
    header_time: float = field(default=0.0, compare=False)
    ack_time: float = field(default=0.0, compare=False)


_POSITIVE = (
    "mac_header", "phy_header", "ack_frame", "ack_phy_header", "payload",
    "slot_sigma", "sifs", "difs", "eifs", "ack_timeout", "prop_delay_tau_p",
    "basic_rate", "data_rate", "path_loss_exp_np", "cell_radius_R",
)


def validate(cfg: NetworkConfig) -> None:
    for name in _POSITIVE:
        value = getattr(cfg, name)
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise ConfigError(name, f"expected a number, got {value!r}")
        if not value > 0:
            raise ConfigError(name, f"must be > 0, got {value!r}")
    if cfg.cw_min_W < 1:
        raise ConfigError("cw_min_W", f"must be >= 1, got {cfg.cw_min_W}")
    if cfg.max_backoff_stage_m < 0:
        raise ConfigError("max_backoff_stage_m", f"must be >= 0, got {cfg.max_backoff_stage_m}")
    if cfg.n_stations_N < 1:
        raise ConfigError("n_stations_N", f"must be >= 1, got {cfg.n_stations_N}")
    if cfg.spreading_factor_Sf < 1:
        raise ConfigError("spreading_factor_Sf", f"must be >= 1, got {cfg.spreading_factor_Sf}")
    if not cfg.z0_linear > 0 or cfg.z0_linear == float("inf"):
        raise ConfigError("capture_ratio_z0", f"not representable in linear scale: {cfg.capture_ratio_z0}")
    if cfg.modulation not in MODULATIONS:
        raise ConfigError("modulation", f"must be one of {MODULATIONS}, got {cfg.modulation!r}")
    if cfg.modulation == "TABLE" and not cfg.ber_table:
        raise ConfigError("ber_table", "TABLE modulation requires a BER table file")
    if cfg.capture_mode not in CAPTURE_MODES:
        raise ConfigError("capture_mode", f"must be one of {CAPTURE_MODES}, got {cfg.capture_mode!r}")


def airtime(nbytes: float, rate_mbps: float) -> float:
    return 8.0 * nbytes / rate_mbps


def derive_slot_durations(cfg: NetworkConfig) -> SlotDurations:
    """Busy-period durations for success, collision and channel error.

    Headers and ACK go at the basic rate, the payload at the data rate.
    Collisions and corrupted frames both last until the ACK timeout expires.
    """
    validate(cfg)
    H = airtime(cfg.mac_header + cfg.phy_header, cfg.basic_rate)
    PL = airtime(cfg.payload, cfg.data_rate)
    ACK = airtime(cfg.ack_frame + cfg.ack_phy_header, cfg.basic_rate)
    T_c = H + PL + cfg.ack_timeout
    T_s = H + PL + cfg.sifs + cfg.prop_delay_tau_p + ACK + cfg.difs + cfg.prop_delay_tau_p
    return SlotDurations(
        sigma=cfg.slot_sigma, T_s=T_s, T_c=T_c, T_e=T_c, E_PL_time=PL,
        header_time=H, ack_time=ACK,
    )


_FIELD_TYPES = {f.name: f.type for f in fields(NetworkConfig)}


def _coerce(name: str, value: Any) -> Any:
    kind = _FIELD_TYPES[name]
    if kind == "int":
        if isinstance(value, float) and value.is_integer():
            value = int(value)
        if isinstance(value, str):
            try:
                value = int(value)
            except ValueError:
                raise ConfigError(name, f"expected an integer, got {value!r}") from None
        if not isinstance(value, int) or isinstance(value, bool):
            raise ConfigError(name, f"expected an integer, got {value!r}")
        return value
    if kind == "float":
        if isinstance(value, str):
            try:
                value = float(value)
            except ValueError:
                raise ConfigError(name, f"expected a number, got {value!r}") from None
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise ConfigError(name, f"expected a number, got {value!r}")
        return float(value)
    return None if value in ("", None) else str(value)


def config_from_mapping(values: Mapping[str, Any], base: NetworkConfig | None = None) -> NetworkConfig:
    base = base or NetworkConfig()
    unknown = set(values) - set(_FIELD_TYPES)
    if unknown:
        name = sorted(unknown)[0]
        raise ConfigError(name, "unknown configuration key")
    coerced = {k: _coerce(k, v) for k, v in values.items()}
    return base.replace(**coerced)


def load_config(path: str | Path | None = None, overrides: Mapping[str, Any] | None = None) -> NetworkConfig:
    """Read a flat ``key = value`` TOML file; ``None`` loads the shipped default."""
    if path is None:
        text = resources.files("dcf_analyzer").joinpath("data/default.toml").read_text()
    else:
        text = Path(path).read_text()
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(str(path or "default.toml"), f"cannot parse: {exc}") from exc
    nested = [k for k, v in raw.items() if isinstance(v, dict)]
    if nested:
        raise ConfigError(nested[0], "tables are not allowed; the config file is flat")
    raw.update(overrides or {})
    return config_from_mapping(raw)


def dump_config(cfg: NetworkConfig) -> str:
    lines = []
    for name, value in cfg.to_dict().items():
        if value is None:
            continue
        if isinstance(value, str):
            lines.append(f'{name} = "{value}"')
        else:
            lines.append(f"{name} = {value!r}")
    return "\n".join(lines) + "\n"
