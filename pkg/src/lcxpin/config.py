"""Configuration loading and unit conversions.

Run parameters live in an INI file with one section per parameter group
(region, cables, users, scatterers, phys, rng, qos).  Powers are given in
dBm in the file and converted to linear milliwatts at the physics layer.
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass
from pathlib import Path


class ConfigError(ValueError):
    """Configuration file missing, malformed, or physically inconsistent."""


def dbm_to_mw(value_dbm: float) -> float:
    """dBm -> linear milliwatts."""
    return 10.0 ** (value_dbm / 10.0)


def mw_to_dbm(value_mw: float) -> float:
    """Linear milliwatts -> dBm.  Requires a positive power."""
    if value_mw <= 0.0:
        raise ValueError("power must be positive to express in dBm")
    import math

    return 10.0 * math.log10(value_mw)


@dataclass(frozen=True)
class SimConfig:
    """All run parameters, mirroring the INI layout.

    Geometry lengths in meters, frequencies in Hz, powers in dBm here
    (converted once when building physics constants), rates in bits/s/Hz.
    """

    dx: float = 50.0                # region extent along the cable axis
    dy: float = 30.0                # region extent across cables
    height: float = 3.0             # cable deployment height d
    cables: int = 2                 # K
    slots: int = 50                 # M openings per cable
    users: int = 2                  # N
    scatterers: int = 10            # L
    kappa_db_per_m: float = 0.1     # in-cable attenuation
    eps_r: float = 1.26             # dielectric constant of the cable filling
    fc_hz: float = 3.5e9            # carrier frequency
    noise_dbm: float = -64.0        # receiver noise power
    pt_dbm: float = 20.0            # total transmit power budget
    seed: int = 1                   # root RNG seed
    r_min: float = 0.1              # per-user QoS rate target

    def __post_init__(self):
        if self.dx <= 0 or self.dy <= 0:
            raise ConfigError("region extents must be positive")
        if self.height <= 0:
            raise ConfigError("deployment height must be positive")
        if self.cables < 1:
            raise ConfigError("need at least one cable")
        if self.slots < 2:
            raise ConfigError("need at least two slot positions per cable")
        if self.users < 1:
            raise ConfigError("need at least one user")
        if self.scatterers < 0:
            raise ConfigError("scatterer count cannot be negative")
        if self.kappa_db_per_m < 0:
            raise ConfigError("cable attenuation cannot be negative")
        if self.eps_r < 1.0:
            raise ConfigError("relative permittivity below 1")
        if self.fc_hz <= 0:
            raise ConfigError("carrier frequency must be positive")
        if self.r_min < 0:
            raise ConfigError("QoS rate target cannot be negative")

    def replace(self, **changes) -> "SimConfig":
        return dataclasses.replace(self, **changes)


_SCHEMA = {
    # section -> {key: (attribute, caster)}
    "region": {"dx": ("dx", float), "dy": ("dy", float), "height": ("height", float)},
    "cables": {"count": ("cables", int), "slots": ("slots", int)},
    "users": {"count": ("users", int)},
    "scatterers": {"count": ("scatterers", int)},
    "phys": {
        "kappa_db_per_m": ("kappa_db_per_m", float),
        "eps_r": ("eps_r", float),
        "fc_hz": ("fc_hz", float),
        "noise_dbm": ("noise_dbm", float),
        "pt_dbm": ("pt_dbm", float),
    },
    "rng": {"seed": ("seed", int)},
    "qos": {"r_min": ("r_min", float)},
}


def load_config(path: str | Path) -> SimConfig:
    """Read an INI file into a SimConfig; unknown keys are rejected.

    Missing sections or keys fall back to the defaults above.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser()
    try:
        parser.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc

    values = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
        for key, raw in parser.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key '{key}' in section [{section}]")
            attr, caster = _SCHEMA[section][key]
            try:
                values[attr] = caster(raw)
            except ValueError as exc:
                raise ConfigError(
                    f"bad value for {section}.{key}: {raw!r}"
                ) from exc
    try:
        return SimConfig(**values)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def write_config(cfg: SimConfig, path: str | Path) -> None:
    """Emit cfg as an INI file (the inverse of load_config)."""
    parser = configparser.ConfigParser()
    for section, keys in _SCHEMA.items():
        parser[section] = {key: repr(getattr(cfg, attr)) for key, (attr, _) in keys.items()}
    with open(path, "w") as fh:
        parser.write(fh)
