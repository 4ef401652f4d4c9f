"""Deployment geometry: cable feeds, radiating slots, users, scatterers.

Coordinate system: the service region is the rectangle
[-dx/2, dx/2] x [-dy/2, dy/2] on the ground plane z = 0.  Cables run
parallel to the x axis at height z = d, fed from the x = -dx/2 end, and
are spread evenly across the y extent.  Slot m of every cable sits at
x = -dx/2 + m * spacing with spacing dx/(M-1), so slot 0 is at the feed
and slot M-1 at the far end.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import ConfigError, SimConfig, dbm_to_mw

SPEED_OF_LIGHT = 3.0e8  # m/s


@dataclass(frozen=True)
class PhysConstants:
    """Physical-layer constants.  Powers are linear milliwatts."""

    kappa: float    # in-cable attenuation, dB/m
    eps_r: float    # relative permittivity inside the cable
    f_c: float      # carrier frequency, Hz
    sigma2: float   # noise power, mW
    P_t: float      # total transmit power budget, mW

    def __post_init__(self):
        if self.kappa < 0:
            raise ValueError("attenuation cannot be negative")
        if self.eps_r < 1.0:
            raise ValueError("relative permittivity below 1")
        if self.f_c <= 0:
            raise ValueError("carrier frequency must be positive")
        if self.sigma2 <= 0 or self.P_t <= 0:
            raise ValueError("powers must be positive")

    # wavelength and the free-space aperture constant are always derived
    # from f_c, never stored, so they cannot drift out of sync
    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.f_c

    @property
    def eta(self) -> float:
        """Free-space radiation constant c/(4 pi f_c), in meters."""
        return self.wavelength / (4.0 * math.pi)

    @classmethod
    def from_config(cls, cfg: SimConfig) -> "PhysConstants":
        return cls(
            kappa=cfg.kappa_db_per_m,
            eps_r=cfg.eps_r,
            f_c=cfg.fc_hz,
            sigma2=dbm_to_mw(cfg.noise_dbm),
            P_t=dbm_to_mw(cfg.pt_dbm),
        )


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Scenario:
    """One realization of the deployment: geometry plus scatterer draws.

    Arrays are read-only; a Scenario is safe to share across threads.
    """

    dx: float
    dy: float
    d: float                     # deployment height
    feeds: np.ndarray            # (K, 3) feed point of each cable
    slots: np.ndarray            # (K, M, 3) slot positions
    users: np.ndarray            # (N, 3) user positions, z = 0
    scatterers: np.ndarray       # (L, 3) scatterer positions on the walls
    scatterer_gains: np.ndarray  # (L,) complex CN(0,1) gains
    constants: PhysConstants

    @property
    def n_cables(self) -> int:
        return self.slots.shape[0]

    @property
    def n_slots(self) -> int:
        return self.slots.shape[1]

    @property
    def n_users(self) -> int:
        return self.users.shape[0]

    @property
    def n_scatterers(self) -> int:
        return self.scatterers.shape[0]

    @property
    def slot_spacing(self) -> float:
        return self.dx / (self.n_slots - 1)


def build_scenario(cfg: SimConfig, seed=None) -> Scenario:
    """Construct geometry and draw users/scatterers.

    Parameters
    ----------
    cfg : SimConfig
        Dimensions, counts, and physics parameters.
    seed : int, sequence of int, or numpy SeedSequence, optional
        Overrides cfg.seed.  The same seed yields a bitwise-identical
        scenario.

    Raises
    ------
    ConfigError
        If the slot spacing dx/(slots-1) would fall below half a
        wavelength, or any count/dimension is out of range (the latter
        is already enforced by SimConfig).
    """
    consts = PhysConstants.from_config(cfg)
    spacing = cfg.dx / (cfg.slots - 1)
    half_wave = consts.wavelength / 2.0
    if spacing < half_wave:
        raise ConfigError(
            f"slot spacing {spacing:.4g} m below half wavelength "
            f"{half_wave:.4g} m; reduce slots or widen the region"
        )

    K, M, N, L = cfg.cables, cfg.slots, cfg.users, cfg.scatterers
    d = cfg.height

    # feed k sits at the x = -dx/2 end, cables evenly spread in y
    feed_y = -cfg.dy / 2.0 + (np.arange(K) + 0.5) * cfg.dy / K
    feeds = np.column_stack([np.full(K, -cfg.dx / 2.0), feed_y, np.full(K, d)])

    slot_x = -cfg.dx / 2.0 + np.arange(M) * spacing
    slots = np.empty((K, M, 3))
    slots[:, :, 0] = slot_x[None, :]
    slots[:, :, 1] = feed_y[:, None]
    slots[:, :, 2] = d

    rng = np.random.default_rng(cfg.seed if seed is None else seed)

    users = np.column_stack([
        rng.uniform(-cfg.dx / 2.0, cfg.dx / 2.0, size=N),
        rng.uniform(-cfg.dy / 2.0, cfg.dy / 2.0, size=N),
        np.zeros(N),
    ])

    scatterers, gains = _draw_scatterers(rng, cfg.dx, cfg.dy, d, L)

    return Scenario(
        dx=cfg.dx,
        dy=cfg.dy,
        d=d,
        feeds=_frozen(feeds),
        slots=_frozen(slots),
        users=_frozen(users),
        scatterers=_frozen(scatterers),
        scatterer_gains=_frozen(gains),
        constants=consts,
    )


def _draw_scatterers(rng, dx, dy, d, L):
    """Scatterers sit on the four vertical walls bounding the region.

    Positions are uniform over total wall area: uniform along the
    perimeter, uniform in height over [0, d].  Gains are CN(0,1).
    """
    pos = np.zeros((L, 3))
    if L > 0:
        perimeter = 2.0 * (dx + dy)
        u = rng.uniform(0.0, perimeter, size=L)
        z = rng.uniform(0.0, d, size=L)
        for i, ui in enumerate(u):
            if ui < dx:                      # south wall y = -dy/2
                pos[i] = (-dx / 2.0 + ui, -dy / 2.0, z[i])
            elif ui < dx + dy:               # east wall x = dx/2
                pos[i] = (dx / 2.0, -dy / 2.0 + (ui - dx), z[i])
            elif ui < 2.0 * dx + dy:         # north wall y = dy/2
                pos[i] = (dx / 2.0 - (ui - dx - dy), dy / 2.0, z[i])
            else:                            # west wall x = -dx/2
                pos[i] = (-dx / 2.0, dy / 2.0 - (ui - 2.0 * dx - dy), z[i])
    gains = (rng.standard_normal(L) + 1j * rng.standard_normal(L)) / math.sqrt(2.0)
    return pos, gains


def trial_seed(root_seed: int, *counters: int) -> np.random.SeedSequence:
    """Derive a per-trial seed from the root seed and counter indices.

    Deterministic and collision-free across distinct counter tuples, so
    batches of trials can be generated independently and merged.
    """
    return np.random.SeedSequence([int(root_seed), *[int(c) for c in counters]])


def elevation_angle(slot_pos, target_pos) -> float:
    """Elevation angle phi seen from a slot toward a ground/wall point.

    sin(phi) = height difference / euclidean distance, so a target
    directly below gives pi/2 and a target at slot height gives 0.
    """
    slot_pos = np.asarray(slot_pos, dtype=float)
    target_pos = np.asarray(target_pos, dtype=float)
    diff = slot_pos - target_pos
    dist = float(np.linalg.norm(diff))
    if dist <= 0.0:
        raise ValueError("slot and target coincide")
    dz = float(diff[2])
    if dz < 0.0:
        raise ValueError("target above slot height")
    return math.asin(min(1.0, dz / dist))
