"""Two-stage channel model: guided propagation inside the cable, then
radiated propagation from an open slot to the user.

The guided leg from the feed to slot m attenuates the field by
10^(-kappa * dist / 20) and advances its phase by
(2 pi / lambda) sqrt(eps_r) * dist.  The radiated leg is a line-of-sight
spherical wave weighted by the slot's directional factor sin(phi), plus
a sum over wall scatterers (single bounce, complex gain per scatterer).
All of it composes into one complex coefficient per (cable, slot, user).
"""

from __future__ import annotations

import cmath
import csv
import math
from dataclasses import dataclass

import numpy as np

from .scenario import Scenario


@dataclass(frozen=True)
class ChannelSet:
    """Complex channel coefficients for every (cable, slot, user) triple.

    h = h_los + h_nlos holds elementwise; disabled components are stored
    as zeros so the identity survives flag changes.
    """

    h_los: np.ndarray   # (K, M, N) complex
    h_nlos: np.ndarray  # (K, M, N) complex
    h: np.ndarray       # (K, M, N) complex
    include_nlos: bool
    include_cable_attenuation: bool

    @property
    def shape(self):
        return self.h.shape


def cable_channel(k: int, m: int, sc: Scenario, include_attenuation: bool = True) -> complex:
    """Guided-leg coefficient from the feed of cable k to its slot m."""
    c = sc.constants
    dist = float(np.linalg.norm(sc.slots[k, m] - sc.feeds[k]))
    mag = 10.0 ** (-c.kappa * dist / 20.0) if include_attenuation else 1.0
    phase = -(2.0 * math.pi / c.wavelength) * math.sqrt(c.eps_r) * dist
    return mag * cmath.exp(1j * phase)


def radiated_los(k: int, m: int, n: int, sc: Scenario) -> complex:
    """Line-of-sight radiated leg from slot (k, m) to user n."""
    c = sc.constants
    diff = sc.slots[k, m] - sc.users[n]
    r = float(np.linalg.norm(diff))
    sin_phi = float(diff[2]) / r
    return c.eta * cmath.exp(-1j * 2.0 * math.pi * r / c.wavelength) / r * sin_phi


def scattered_channel(k: int, m: int, n: int, sc: Scenario) -> complex:
    """Single-bounce scattered leg from slot (k, m) to user n.

    Each wall scatterer contributes a spherical two-hop term weighted by
    its complex gain and by the slot's directional factor toward the
    scatterer, sin(phi) = (d - z_scat) / r1.
    """
    c = sc.constants
    total = 0.0 + 0.0j
    slot = sc.slots[k, m]
    user = sc.users[n]
    for ell in range(sc.n_scatterers):
        scat = sc.scatterers[ell]
        r1 = float(np.linalg.norm(slot - scat))
        r2 = float(np.linalg.norm(scat - user))
        sin_phi = (float(slot[2]) - float(scat[2])) / r1
        phase = -2.0 * math.pi * (r1 + r2) / c.wavelength
        total += sc.scatterer_gains[ell] * cmath.exp(1j * phase) / (r1 * r2) * sin_phi
    return c.eta * total


def compose_channels(
    sc: Scenario,
    include_nlos: bool = True,
    include_cable_attenuation: bool = True,
) -> ChannelSet:
    """Build the full (K, M, N) channel tensor for one scenario.

    Vectorized over all triples; the per-index functions above serve as
    the readable reference implementation.
    """
    c = sc.constants
    two_pi_over_lam = 2.0 * math.pi / c.wavelength

    # guided leg, (K, M)
    cable_dist = np.linalg.norm(sc.slots - sc.feeds[:, None, :], axis=2)
    if include_cable_attenuation:
        guided_mag = 10.0 ** (-c.kappa * cable_dist / 20.0)
    else:
        guided_mag = np.ones_like(cable_dist)
    guided = guided_mag * np.exp(-1j * two_pi_over_lam * math.sqrt(c.eps_r) * cable_dist)

    # LoS radiated leg, (K, M, N)
    diff = sc.slots[:, :, None, :] - sc.users[None, None, :, :]
    r = np.linalg.norm(diff, axis=3)
    sin_phi = diff[:, :, :, 2] / r
    rad_los = c.eta * np.exp(-1j * two_pi_over_lam * r) / r * sin_phi

    h_los = guided[:, :, None] * rad_los

    if include_nlos and sc.n_scatterers > 0:
        # slot -> scatterer, (K, M, L)
        d1 = sc.slots[:, :, None, :] - sc.scatterers[None, None, :, :]
        r1 = np.linalg.norm(d1, axis=3)
        sin_phi1 = d1[:, :, :, 2] / r1
        # scatterer -> user, (L, N)
        d2 = sc.scatterers[:, None, :] - sc.users[None, :, :]
        r2 = np.linalg.norm(d2, axis=2)
        # combine hops; gains fold in per scatterer
        hop1 = np.exp(-1j * two_pi_over_lam * r1) / r1 * sin_phi1        # (K, M, L)
        hop2 = np.exp(-1j * two_pi_over_lam * r2) / r2                   # (L, N)
        scat_sum = np.einsum("kml,l,ln->kmn", hop1, sc.scatterer_gains, hop2)
        h_nlos = c.eta * guided[:, :, None] * scat_sum
    else:
        h_nlos = np.zeros_like(h_los)

    return ChannelSet(
        h_los=h_los,
        h_nlos=h_nlos,
        h=h_los + h_nlos,
        include_nlos=include_nlos,
        include_cable_attenuation=include_cable_attenuation,
    )


def effective_channel(cs: ChannelSet, beta: np.ndarray, k: int, n: int) -> complex:
    """Coherent sum of cable k's active-slot channels toward user n."""
    return complex(np.sum(beta[k] * cs.h[k, :, n]))


def effective_channels(cs: ChannelSet, beta: np.ndarray) -> np.ndarray:
    """(K, N) effective channels for an activation pattern beta (K, M)."""
    return np.einsum("km,kmn->kn", beta.astype(float), cs.h)


def dump_channels(cs: ChannelSet, path) -> None:
    """Write the composite tensor to CSV (cable, slot, user, re, im, abs)."""
    K, M, N = cs.shape
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["cable", "slot", "user", "re", "im", "abs"])
        for k in range(K):
            for m in range(M):
                for n in range(N):
                    v = cs.h[k, m, n]
                    writer.writerow(
                        [k, m, n, repr(float(v.real)), repr(float(v.imag)),
                         repr(float(abs(v)))]
                    )
