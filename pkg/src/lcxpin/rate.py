"""Sum-rate evaluation for a user assignment, slot activation, and power split.

The total budget P_t is divided equally across serving cables (N_c of
them) and each cable's share is diluted over its N_k active slots; the
per-user fractions p then split a cable's share among its users.  Users
see every serving cable's transmission, so signals intended for others
arrive as interference through the same effective channels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelSet, effective_channels
from .scenario import PhysConstants

QOS_TOL = 1e-9  # slack on the QoS comparison R_n >= r_min


@dataclass
class AssignmentState:
    """User-to-cable assignment alpha (K, N) and slot activation beta (K, M)."""

    alpha: np.ndarray
    beta: np.ndarray

    def validate(self) -> None:
        alpha = np.asarray(self.alpha)
        beta = np.asarray(self.beta)
        if alpha.ndim != 2 or beta.ndim != 2 or alpha.shape[0] != beta.shape[0]:
            raise ValueError("alpha (K, N) and beta (K, M) must share K")
        if not np.isin(alpha, (0, 1)).all() or not np.isin(beta, (0, 1)).all():
            raise ValueError("alpha and beta must be 0/1")
        if not (alpha.sum(axis=0) == 1).all():
            raise ValueError("every user must be assigned to exactly one cable")
        serving = alpha.sum(axis=1) > 0
        if (beta.sum(axis=1)[serving] < 1).any():
            raise ValueError("a serving cable needs at least one active slot")


@dataclass
class PowerAllocation:
    """Per-cable per-user power fractions p (K, N)."""

    p: np.ndarray

    def validate(self, alpha: np.ndarray, tol: float = 1e-9) -> None:
        p = np.asarray(self.p, dtype=float)
        if p.shape != np.asarray(alpha).shape:
            raise ValueError("p must match alpha's shape")
        if (p < -tol).any() or (p > np.asarray(alpha) + tol).any():
            raise ValueError("power fractions must satisfy 0 <= p <= alpha")
        if (p.sum(axis=1) > 1.0 + tol).any():
            raise ValueError("per-cable power fractions must sum to at most 1")

    @classmethod
    def equal_split(cls, alpha: np.ndarray) -> "PowerAllocation":
        """Each serving cable's budget split equally over its users."""
        alpha = np.asarray(alpha, dtype=float)
        counts = alpha.sum(axis=1, keepdims=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            p = np.where(counts > 0, alpha / np.maximum(counts, 1.0), 0.0)
        return cls(p=p)


def active_counts(state: AssignmentState) -> tuple[int, np.ndarray]:
    """Serving-cable count N_c and per-cable active-slot counts N_k.

    N_k is floored at 1 so the power-dilution factor stays defined for
    idle cables (which transmit nothing anyway).
    """
    alpha = np.asarray(state.alpha)
    beta = np.asarray(state.beta)
    n_c = int((alpha.sum(axis=1) > 0).sum())
    n_k = np.maximum(beta.sum(axis=1), 1).astype(int)
    return n_c, n_k


def _signal_interference(h_eff_abs2, alpha, p, n_c, n_k, consts):
    """Per-user signal and interference powers in mW, vectorized over users."""
    w = (consts.P_t / n_c) * h_eff_abs2 / n_k[:, None]   # (K, N)
    q = np.asarray(p, dtype=float) * alpha               # effective fractions
    total = w.T @ q.sum(axis=1)                          # all power seen by n
    signal = (w * q).sum(axis=0)                         # own share
    return signal, total - signal


def user_rate(
    cs: ChannelSet,
    state: AssignmentState,
    p: np.ndarray,
    n: int,
    consts: PhysConstants,
) -> float:
    """Achievable rate of user n in bits/s/Hz."""
    return float(all_rates(cs, state, p, consts)[n])


def all_rates(cs, state, p, consts) -> np.ndarray:
    n_c, n_k = active_counts(state)
    if n_c == 0:
        raise ValueError("no serving cable; assign at least one user")
    h_eff = effective_channels(cs, np.asarray(state.beta, dtype=float))
    h_abs2 = np.abs(h_eff) ** 2
    signal, interf = _signal_interference(
        h_abs2, np.asarray(state.alpha, dtype=float), p, n_c, n_k, consts
    )
    return np.log2(1.0 + signal / (interf + consts.sigma2))


def sum_rate(cs, state, p, consts) -> float:
    return float(all_rates(cs, state, p, consts).sum())


@dataclass
class RateReport:
    """Per-user rates with QoS verdicts for one configuration."""

    rates: np.ndarray            # (N,) bits/s/Hz
    sum_rate: float
    qos_ok: np.ndarray           # (N,) bool, rate >= r_min - QOS_TOL
    n_serving_cables: int
    active_slots: np.ndarray     # (K,)
    r_min: float
    qos_infeasible: bool = False  # power stage proved the QoS target unreachable

    def write_csv_rows(self, writer, trial: int) -> None:
        for n, (r, ok) in enumerate(zip(self.rates, self.qos_ok)):
            writer.writerow([trial, n, repr(float(r)), int(ok)])


def rate_report(cs, state, p, consts, r_min: float, qos_infeasible: bool = False) -> RateReport:
    rates = all_rates(cs, state, p, consts)
    n_c, n_k = active_counts(state)
    return RateReport(
        rates=rates,
        sum_rate=float(rates.sum()),
        qos_ok=rates >= r_min - QOS_TOL,
        n_serving_cables=n_c,
        active_slots=n_k,
        r_min=r_min,
        qos_infeasible=qos_infeasible,
    )
