"""Network and physical-layer configuration, with JSON loading.

Defaults reproduce the reference operating point: five anchors in a
4.5 km square, 100 ms packets, 10 % link loss.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Any

from .errors import ConfigError

SOUND_SPEED = 1500.0


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


@dataclass(frozen=True)
class NetworkConfig:
    n_anchors: int = 5
    n_sensors: int = 100
    k_required: int = 3
    sound_speed: float = SOUND_SPEED
    d_x: float = 3 * SOUND_SPEED
    d_y: float = 3 * SOUND_SPEED
    # maximum anchor-anchor / anchor-sensor separations; None -> area diagonal
    d_aa: float | None = None
    d_sa: float | None = None
    p_l: float = 0.1
    p_ss: float = 0.99
    p_tt: float = 0.90
    mode: str = "periodic"

    def __post_init__(self):
        if self.d_aa is None:
            object.__setattr__(self, "d_aa", self.diagonal)
        if self.d_sa is None:
            object.__setattr__(self, "d_sa", self.diagonal)
        _check(self.n_anchors >= 1, "network.n_anchors", "must be >= 1")
        _check(self.n_sensors >= 0, "network.n_sensors", "must be >= 0")
        _check(1 <= self.k_required, "network.k_required", "must be >= 1")
        _check(self.sound_speed > 0, "network.sound_speed", "must be positive")
        _check(self.d_x > 0, "network.d_x", "must be positive")
        _check(self.d_y >= 0, "network.d_y", "must be non-negative")
        _check(0.0 <= self.p_l <= 1.0, "network.p_l", "must lie in [0, 1]")
        _check(0.0 < self.p_ss < 1.0, "network.p_ss", "must lie in (0, 1)")
        _check(0.0 < self.p_tt < 1.0, "network.p_tt", "must lie in (0, 1)")
        _check(self.mode in ("periodic", "on-demand"), "network.mode",
               "must be 'periodic' or 'on-demand'")

    @property
    def diagonal(self) -> float:
        return math.hypot(self.d_x, self.d_y)

    @property
    def c(self) -> float:
        return self.sound_speed

    def with_area(self, d_x: float, d_y: float | None = None) -> "NetworkConfig":
        """Resize the area; the maximum separations follow the new diagonal."""
        d_y = d_x if d_y is None else d_y
        return replace(self, d_x=d_x, d_y=d_y, d_aa=math.hypot(d_x, d_y),
                       d_sa=math.hypot(d_x, d_y))


@dataclass(frozen=True)
class PhyConfig:
    bandwidth: float = 2000.0
    bits_per_symbol: float = 2.0
    bits_per_packet: float = 200.0
    guard_time: float = 0.05
    # explicit packet duration; None -> guard time plus symbol payload
    packet_duration: float | None = None
    p_0: float = 15.0
    # listening power is not printed alongside the modem's transmit power;
    # 1.24 W reproduces the quoted average CFS energy at the default point
    p_listen: float = 1.24
    alpha_0: float = 1.0
    d_0: float = 1.0
    n_0: float = 1.4
    gamma_0_db: float = 6.0
    noise_power_db: float = -47.5
    k_e: float = 1e-8

    def __post_init__(self):
        for name in ("bandwidth", "bits_per_symbol", "p_0", "alpha_0", "d_0", "n_0"):
            _check(getattr(self, name) > 0, f"phy.{name}", "must be positive")
        for name in ("bits_per_packet", "guard_time", "p_listen", "k_e"):
            _check(getattr(self, name) >= 0, f"phy.{name}", "must be non-negative")
        if self.packet_duration is not None:
            _check(self.packet_duration >= 0, "phy.packet_duration", "must be non-negative")

    @property
    def gamma_0(self) -> float:
        return db_to_linear(self.gamma_0_db)

    @property
    def noise_power(self) -> float:
        return db_to_linear(self.noise_power_db)

    @property
    def t_p(self) -> float:
        from .channel import packet_duration
        return packet_duration(self)


def _check(ok: bool, path: str, msg: str) -> None:
    if not ok:
        raise ConfigError(f"{path}: {msg}")


SECTIONS = {"network": NetworkConfig, "phy": PhyConfig}


def _coerce(cls, key: str, raw: Any, path: str):
    ftype = {f.name: f.type for f in fields(cls)}[key]
    if raw is None:
        return None
    try:
        if isinstance(raw, str) and ftype.startswith(("float", "int")):
            raw = json.loads(raw)
        if ftype.startswith("int"):
            if isinstance(raw, float) and not raw.is_integer():
                raise ValueError
            return int(raw)
        if ftype.startswith("float"):
            return float(raw)
        return str(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"{path}: cannot interpret {raw!r} as {ftype}") from None


def build(doc: dict | None = None, overrides: list[str] | None = None
          ) -> tuple[NetworkConfig, PhyConfig]:
    """Build both configs from a nested document plus ``key=value`` overrides.

    Override keys may be qualified (``network.p_l``) or bare when the name
    is unique across sections.
    """
    doc = dict(doc or {})
    unknown = set(doc) - set(SECTIONS)
    if unknown:
        raise ConfigError(f"{sorted(unknown)[0]}: unknown section")
    values: dict[str, dict[str, Any]] = {s: {} for s in SECTIONS}
    for section, cls in SECTIONS.items():
        sub = doc.get(section) or {}
        if not isinstance(sub, dict):
            raise ConfigError(f"{section}: must be an object")
        names = {f.name for f in fields(cls)}
        for key, raw in sub.items():
            if key not in names:
                raise ConfigError(f"{section}.{key}: unknown field")
            values[section][key] = _coerce(cls, key, raw, f"{section}.{key}")
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"--set {item}: expected key=value")
        key, raw = item.split("=", 1)
        section, name = _resolve(key.strip())
        values[section][name] = _coerce(SECTIONS[section], name, raw.strip(), f"{section}.{name}")
    return NetworkConfig(**values["network"]), PhyConfig(**values["phy"])


def _resolve(key: str) -> tuple[str, str]:
    if "." in key:
        section, name = key.split(".", 1)
        if section in SECTIONS and name in {f.name for f in fields(SECTIONS[section])}:
            return section, name
        raise ConfigError(f"{key}: unknown field")
    hits = [s for s, cls in SECTIONS.items() if key in {f.name for f in fields(cls)}]
    if len(hits) != 1:
        raise ConfigError(f"{key}: unknown field" if not hits else f"{key}: ambiguous field")
    return hits[0], key


def load(path: str | Path | None, overrides: list[str] | None = None
         ) -> tuple[NetworkConfig, PhyConfig]:
    doc = {}
    if path is not None:
        try:
            doc = json.loads(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"{path}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc.msg})") from None
        if not isinstance(doc, dict):
            raise ConfigError(f"{path}: top level must be an object")
    return build(doc, overrides)


def to_dict(net: NetworkConfig, phy: PhyConfig) -> dict:
    return {"network": dataclasses.asdict(net), "phy": dataclasses.asdict(phy)}
