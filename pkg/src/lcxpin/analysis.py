"""Closed-form rate laws and advantage conditions.

Single-link laws: a user served by its nearest slot at horizontal offset
rho sees |h|^2 = eta^2 d^2 / r^4 with r^2 = rho^2 + d^2 (directional
factor d/r on top of the spherical 1/r), versus eta^2 / dist^2 for a
conventional antenna at the region center.  The advantage condition
compares the cable system's worst-cell rate against the central
antenna's average rate at high SNR and reduces to an inequality between
(1 + a^2)^(1 + 1/a^2) and e (1 + b^2)^2, where a = D/(2d) measures
region size against deployment height and b^2 = (sx^2 + sy^2)/(4 d^2)
measures the worst in-cell offset (sx, sy = slot/cable spacings).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .scenario import PhysConstants, Scenario

LOG2_E = math.log2(math.e)


@dataclass(frozen=True)
class GeometrySummary:
    """Dimensionless geometry descriptors used by the advantage conditions."""

    D: float            # min(dx, dy), m
    a: float            # D / (2 d)
    b2: float           # (sx^2 + sy^2) / (4 d^2)
    sx: float           # slot spacing along the cable, m
    sy: float           # cable spacing across the region, m

    def __post_init__(self):
        if self.a <= 0:
            raise ValueError("a must be positive")
        if self.b2 < 0:
            raise ValueError("b2 cannot be negative")

    @property
    def d(self) -> float:
        return self.D / (2.0 * self.a)

    @classmethod
    def from_dimensions(cls, dx, dy, height, cables, slots) -> "GeometrySummary":
        sx = dx / (slots - 1)
        sy = dy / cables
        D = min(dx, dy)
        return cls(
            D=D,
            a=D / (2.0 * height),
            b2=(sx**2 + sy**2) / (4.0 * height**2),
            sx=sx,
            sy=sy,
        )

    @classmethod
    def from_scenario(cls, sc: Scenario) -> "GeometrySummary":
        return cls.from_dimensions(sc.dx, sc.dy, sc.d, sc.n_cables, sc.n_slots)


def single_slot_rate(P_n: float, d: float, r: float, consts: PhysConstants) -> float:
    """Interference-free rate of a user at 3-D distance r from its slot.

    P_n is the power (mW) spent on this user.  Requires r >= d (users
    are on the ground, never above it).
    """
    if r < d:
        raise ValueError("3-D distance cannot be below the deployment height")
    c2 = consts.eta**2 * d**2 / r**4
    return math.log2(1.0 + P_n * c2 / consts.sigma2)


def central_antenna_rate(P_n: float, dist: float, consts: PhysConstants) -> float:
    """Interference-free rate from a conventional antenna at distance dist."""
    if dist <= 0:
        raise ValueError("distance must be positive")
    return math.log2(1.0 + P_n * consts.eta**2 / (consts.sigma2 * dist**2))


def advantage_lhs_log2(a):
    """log2 of (1 + a^2)^(1 + 1/a^2), the condition's left side.

    Nondecreasing in a > 0; accepts scalars or arrays.
    """
    a = np.asarray(a, dtype=float)
    a2 = a**2
    # log1p keeps the small-a tail accurate, where 1 + a^2 rounds badly
    return (1.0 + 1.0 / a2) * np.log1p(a2) * LOG2_E


def coverage_advantage_condition(geo: GeometrySummary):
    """Sufficient condition for the cable layout to beat a central antenna.

    Compares the worst-cell rate bound of the cable system against the
    central antenna's disc-average rate bound in the high-SNR regime.
    Evaluated in log2 domain to avoid overflow for large regions.

    Returns
    -------
    (holds, lhs, rhs) : tuple
        holds = lhs >= rhs with both sides in log2 domain.
    """
    lhs = float(advantage_lhs_log2(geo.a))
    rhs = LOG2_E + 2.0 * math.log2(1.0 + geo.b2)
    return lhs >= rhs, lhs, rhs


def rate_gap_lower_bound(
    geo: GeometrySummary,
    consts: PhysConstants,
    P_n: float,
    snr_threshold_db: float = 30.0,
) -> float:
    """High-SNR lower bound on (worst-cell cable rate) - (average central rate).

    In bits/s/Hz; positive iff coverage_advantage_condition holds.  Warns
    when the worst-cell SNR is below snr_threshold_db, where the
    underlying high-SNR expansions lose accuracy.
    """
    a2 = geo.a**2
    bound = (
        math.log2(1.0 + a2)
        - 2.0 * math.log2(1.0 + geo.b2)
        - LOG2_E
        + math.log2(1.0 + a2) / a2
    )
    d = geo.d
    r_worst2 = d**2 * (1.0 + geo.b2)
    snr = P_n * consts.eta**2 * d**2 / (consts.sigma2 * r_worst2**2)
    if 10.0 * math.log10(snr) < snr_threshold_db:
        warnings.warn(
            "worst-cell SNR below the high-SNR regime; the gap bound may be loose",
            RuntimeWarning,
            stacklevel=2,
        )
    return bound


def worst_cell_rate(geo: GeometrySummary, consts: PhysConstants, P_n: float) -> float:
    """Exact single-slot rate at the worst in-cell corner (not the bound)."""
    d = geo.d
    r_worst = d * math.sqrt(1.0 + geo.b2)
    return single_slot_rate(P_n, d, r_worst, consts)


def local_gain(rho, d):
    """Channel gain d^2/(rho^2 + d^2)^2 at horizontal offset rho, height d.

    For fixed d it peaks at rho = 0; for fixed rho > 0 it peaks at
    d = rho.  Accepts scalars or arrays.
    """
    rho = np.asarray(rho, dtype=float)
    d = np.asarray(d, dtype=float)
    return d**2 / (rho**2 + d**2) ** 2


def _slot_link(sc: Scenario, k: int, m: int, n: int):
    """(guided amplitude / r, sin phi, r) for slot (k, m) toward user n."""
    c = sc.constants
    slot = sc.slots[k, m]
    cable_dist = float(np.linalg.norm(slot - sc.feeds[k]))
    diff = slot - sc.users[n]
    r = float(np.linalg.norm(diff))
    sin_phi = float(diff[2]) / r
    mu = 10.0 ** (-c.kappa * cable_dist / 20.0) / r
    return mu, sin_phi, r


def directional_advantage_condition(
    sc: Scenario,
    k: int,
    m: int,
    k_other: int,
    m_other: int,
    n: int,
    P_n: float,
    high_snr: bool = False,
):
    """Condition for the directional slot model to out-rate the isotropic one.

    User n is served by slot (k, m) and interfered by slot (k_other,
    m_other); both models share the guided attenuation and spherical
    spreading, differing only in the sin(phi) directional factor.  The
    condition is sin^2(phi) >= (gamma + sin^2(phi')) / (1 + gamma) with
    gamma = sigma^2 / (P_n eta^2 mu'^2) built from the interfering link;
    high_snr=True takes the gamma -> 0 limit, where the verdict reduces
    to comparing the two 3-D distances.

    Returns (holds, lhs, rhs) with lhs = sin^2(phi).
    """
    c = sc.constants
    _, sin_phi, _ = _slot_link(sc, k, m, n)
    mu_other, sin_phi_other, _ = _slot_link(sc, k_other, m_other, n)
    gamma = 0.0 if high_snr else c.sigma2 / (P_n * c.eta**2 * mu_other**2)
    lhs = sin_phi**2
    rhs = (gamma + sin_phi_other**2) / (1.0 + gamma)
    return lhs >= rhs, lhs, rhs


def interfered_rate_directional(sc, k, m, k_other, m_other, n, P_n) -> float:
    """Rate of user n under one serving and one interfering slot, with the
    directional sin(phi) factor on both links."""
    c = sc.constants
    mu, sin_phi, _ = _slot_link(sc, k, m, n)
    mu_o, sin_phi_o, _ = _slot_link(sc, k_other, m_other, n)
    noise = c.sigma2 / (P_n * c.eta**2)
    return math.log2(1.0 + mu**2 * sin_phi**2 / (mu_o**2 * sin_phi_o**2 + noise))


def interfered_rate_isotropic(sc, k, m, k_other, m_other, n, P_n) -> float:
    """Same two-slot setup without the directional factor (isotropic slots)."""
    c = sc.constants
    mu, _, _ = _slot_link(sc, k, m, n)
    mu_o, _, _ = _slot_link(sc, k_other, m_other, n)
    noise = c.sigma2 / (P_n * c.eta**2)
    return math.log2(1.0 + mu**2 / (mu_o**2 + noise))


def mean_central_rate_disc(P_n: float, D: float, d: float, consts: PhysConstants) -> float:
    """Average central-antenna rate over a uniform disc of radius D/2.

    Numerical quadrature; used as the oracle for the average-rate bound
    (the disc average upper-bounds the rectangle average because every
    point added by the rectangle lies farther out than the disc edge).
    """
    c2 = P_n * consts.eta**2 / consts.sigma2

    def integrand(r):
        return math.log2(1.0 + c2 / (r**2 + d**2)) * r

    val, _ = integrate.quad(integrand, 0.0, D / 2.0, limit=200)
    return 8.0 / D**2 * val
