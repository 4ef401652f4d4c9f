"""QoS-constrained power allocation by successive convex approximation.

The sum-rate objective splits into a concave term (log of received
power) minus a convex term (log of interference-plus-noise).  Each
round replaces the convex term with its tangent at the previous
interference level, leaving a concave subproblem over the power
fractions and two slack vectors: mu_n below the total received power,
nu_n above interference-plus-noise, tied by the QoS row
mu_n >= nu_n * 2^r_min.  Subproblems are solved by an in-repo
log-barrier interior-point method with Newton centering; no external
convex-optimization package is involved.  Internally everything is
normalized by the noise power, which cancels in all rate expressions
and keeps the barrier well conditioned.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelSet, effective_channels
from .rate import AssignmentState, PowerAllocation, active_counts
from .scenario import PhysConstants

LN2 = math.log(2.0)


class InfeasibleQoSError(RuntimeError):
    """No power split can give every user its QoS rate target."""

    def __init__(self, message: str, margin: float | None = None):
        super().__init__(message)
        self.margin = margin


class SolverStallError(RuntimeError):
    """The barrier solver failed to reach its residual target."""


@dataclass(frozen=True)
class DcModel:
    """Frozen per-instance data for the power problem.

    g[k, n] is the gain (mW) from cable k toward user n with the
    cable/slot power dilution folded in, so user n's received signal is
    g[k_n, n] * p_n and all cross terms are interference.
    """

    g: np.ndarray        # (K, N) mW
    alpha: np.ndarray    # (K, N) 0/1 assignment
    sigma2: float        # noise power, mW
    r_min: float         # QoS rate target, bits/s/Hz

    @property
    def n_users(self) -> int:
        return self.alpha.shape[1]

    def cable_of(self) -> np.ndarray:
        return np.argmax(self.alpha, axis=0)


def build_dc_model(
    cs: ChannelSet, state: AssignmentState, consts: PhysConstants, r_min: float
) -> DcModel:
    """Collapse channels + assignment into the gain matrix of the problem."""
    state.validate()
    n_c, n_k = active_counts(state)
    if n_c == 0:
        raise ValueError("no serving cable")
    h_eff = effective_channels(cs, np.asarray(state.beta, dtype=float))
    g = (consts.P_t / n_c) * np.abs(h_eff) ** 2 / n_k[:, None]
    return DcModel(
        g=g, alpha=np.asarray(state.alpha, dtype=int).copy(), sigma2=consts.sigma2, r_min=r_min
    )


# ---------------------------------------------------------------------------
# surrogate objective


@dataclass(frozen=True)
class LinearizedObjective:
    """Tangent replacement of the convex log-interference term.

    rate_surrogate equals the true rate sum when nu == nu_t and
    under-estimates it elsewhere (the tangent of a concave log lies
    above it, and it enters with a minus sign).
    """

    nu_t: np.ndarray
    slope: np.ndarray  # d/d nu of the nat-log surrogate: 1 / nu_t

    def objective(self, mu, nu) -> float:
        """Constant-stripped surrogate in nats: sum ln mu - sum nu/nu_t."""
        return float(np.sum(np.log(mu)) - np.sum(np.asarray(nu) / self.nu_t))

    def rate_surrogate(self, mu, nu) -> float:
        """Tangent lower bound on sum log2(mu/nu), in bits/s/Hz."""
        mu = np.asarray(mu, dtype=float)
        nu = np.asarray(nu, dtype=float)
        return float(
            np.sum(np.log2(mu) - np.log2(self.nu_t) - (nu - self.nu_t) / (LN2 * self.nu_t))
        )


def linearize(nu_t) -> LinearizedObjective:
    nu_t = np.asarray(nu_t, dtype=float).copy()
    if (nu_t <= 0).any() or not np.isfinite(nu_t).all():
        raise ValueError("expansion point must be positive and finite")
    return LinearizedObjective(nu_t=nu_t, slope=1.0 / nu_t)


# ---------------------------------------------------------------------------
# generic log-barrier maximizer


def _barrier_max(
    value,
    grad,
    hess,
    domain_ok,
    A,
    b,
    x0,
    *,
    t0: float = 1.0,
    growth: float = 20.0,
    comp_tol: float = 1e-8,
    newton_tol: float = 1e-10,
    stall_tol: float = 1e-6,
    max_newton: int = 120,
):
    """Maximize a smooth concave f over {Ax <= b} from a strictly feasible x0.

    Returns (x, duals, t_final) with duals = 1/(t s_j), nonnegative by
    construction.  On well-conditioned problems the barrier parameter
    reaches max(1, 2m)/comp_tol, putting the per-row complementarity 1/t
    and the duality gap m/t below comp_tol.  Each stage centers until
    the squared Newton decrement drops below 2 * newton_tol; the
    decrement is the only convergence measure used because the raw
    barrier gradient drowns in cancellation noise at large t (slacks
    shrink like 1/t while constraint values stay O(1)).  Stages whose
    steps degenerate to no-ops at float resolution still count as
    centered when the decrement is below stall_tol.  When a stage fails
    outright, which happens for nearly degenerate active sets that
    squeeze the central path beyond what double precision can follow,
    the homotopy stops and the last certified stage is returned, so the
    duals always certify the gap m/t_final actually achieved.
    """
    x = np.asarray(x0, dtype=float).copy()
    s = b - A @ x
    if (s <= 0).any() or not domain_ok(x):
        raise ValueError("barrier start point is not strictly feasible")
    m = A.shape[0]
    t = float(t0)
    t_target = max(1.0, 2.0 * m) / comp_tol
    certified = None  # (x, t) of the last fully centered stage

    while True:
        converged = False
        dec2 = math.inf
        for _ in range(max_newton):
            s = b - A @ x
            inv_s = 1.0 / s
            g = -t * grad(x) + A.T @ inv_s
            H = -t * hess(x) + (A.T * inv_s**2) @ A
            try:
                dx = -np.linalg.solve(H, g)
            except np.linalg.LinAlgError:
                dx = -np.linalg.lstsq(H, g, rcond=None)[0]
            if not np.isfinite(dx).all():
                dx = -np.linalg.lstsq(H, g, rcond=None)[0]
            dec2 = float(-g @ dx)
            if not np.isfinite(dec2) or dec2 < 0.0:
                dx = -g
                dec2 = float(g @ g)
            if dec2 / 2.0 <= newton_tol:
                converged = True
                break
            psi0 = -t * value(x) - np.sum(np.log(s))
            g_dx = float(g @ dx)
            step = 1.0
            accepted = False
            while step > 1e-14:
                xn = x + step * dx
                sn = b - A @ xn
                if (sn > 0).all() and domain_ok(xn):
                    psin = -t * value(xn) - np.sum(np.log(sn))
                    if psin <= psi0 + 0.25 * step * g_dx:
                        accepted = True
                        break
                step *= 0.5
            if not accepted or np.array_equal(xn, x):
                # no representable step improves psi any further
                break
            x = xn
        if not converged and dec2 <= stall_tol:
            converged = True
        if not converged:
            if certified is None:
                raise SolverStallError(
                    "Newton centering failed at the initial barrier stage"
                )
            x, t = certified
            break
        certified = (x.copy(), t)
        if t >= t_target:
            break
        t = min(t * growth, t_target)

    s = b - A @ x
    return x, 1.0 / (t * s), t


# ---------------------------------------------------------------------------
# problem assembly (noise-normalized space)


class _Assembled:
    """Index layout and constraint matrix for one DcModel instance."""

    def __init__(self, model: DcModel):
        alpha = np.asarray(model.alpha)
        if not (alpha.sum(axis=0) == 1).all():
            raise ValueError("each user needs exactly one serving cable")
        N = model.n_users
        self.N = N
        self.cable_of = model.cable_of()
        # ghat[n, i]: scaled gain from user i's cable toward user n
        self.ghat = model.g[self.cable_of, :].T / model.sigma2
        self.theta = 2.0 ** model.r_min - 1.0
        self.Theta = 2.0 ** model.r_min
        self.serving = sorted(set(int(k) for k in self.cable_of))

        # rows: p >= 0, p <= 1, cable sums <= 1, signal cap on mu,
        # interference floor on nu, QoS tie between mu and nu
        dim = 3 * N
        rows = []
        rhs = []
        for i in range(N):
            r = np.zeros(dim)
            r[i] = -1.0
            rows.append(r)
            rhs.append(0.0)
        for i in range(N):
            r = np.zeros(dim)
            r[i] = 1.0
            rows.append(r)
            rhs.append(1.0)
        for k in self.serving:
            r = np.zeros(dim)
            r[: N][self.cable_of == k] = 1.0
            rows.append(r)
            rhs.append(1.0)
        for n in range(N):
            r = np.zeros(dim)
            r[N + n] = 1.0
            r[:N] = -self.ghat[n]
            rows.append(r)
            rhs.append(1.0)
        for n in range(N):
            r = np.zeros(dim)
            r[:N] = self.ghat[n]
            r[n] = 0.0
            r[2 * N + n] = -1.0
            rows.append(r)
            rhs.append(-1.0)
        for n in range(N):
            r = np.zeros(dim)
            r[2 * N + n] = self.Theta
            r[N + n] = -1.0
            rows.append(r)
            rhs.append(0.0)
        self.A = np.array(rows)
        self.b = np.array(rhs)

    def signal_interference(self, p_vec):
        """Scaled signal and interference per user for a power vector."""
        received = self.ghat @ p_vec
        signal = np.diag(self.ghat) * p_vec
        return signal, received - signal

    def equal_split_vec(self) -> np.ndarray:
        counts = np.bincount(self.cable_of, minlength=int(self.cable_of.max()) + 1)
        return 1.0 / counts[self.cable_of]

    def qos_margins(self, p_vec):
        s, i = self.signal_interference(p_vec)
        return s - self.theta * (i + 1.0)

    # worst-user margin (noise units) below which a point does not count
    # as a usable interior start; infeasible instances always classify
    # correctly because the check runs on actual margins of a concrete
    # power split, not on the solver's objective estimate
    MARGIN_FLOOR = 1e-9

    def feasible_power(self):
        """Strictly feasible p for the QoS rows, or raise InfeasibleQoSError.

        Tries the scaled equal split first; otherwise maximizes the worst
        QoS margin (a linear program) with the same barrier machinery and
        classifies on the margins of the returned split.  Instances whose
        true optimum margin is positive but below roughly 1e-6 noise
        units are conservatively declared infeasible.
        """
        p0 = 0.9 * self.equal_split_vec()
        if (self.qos_margins(p0) > self.MARGIN_FLOOR).all():
            return p0

        N = self.N
        dim = N + 1
        rows = []
        rhs = []
        for i in range(N):
            r = np.zeros(dim)
            r[i] = -1.0
            rows.append(r)
            rhs.append(0.0)
        for i in range(N):
            r = np.zeros(dim)
            r[i] = 1.0
            rows.append(r)
            rhs.append(1.0)
        for k in self.serving:
            r = np.zeros(dim)
            r[:N][self.cable_of == k] = 1.0
            rows.append(r)
            rhs.append(1.0)
        for n in range(N):
            # s <= signal_n - theta * (interference_n + 1)
            r = np.zeros(dim)
            r[:N] = self.theta * self.ghat[n]
            r[n] = r[n] - self.ghat[n, n] - self.theta * self.ghat[n, n]
            # note: ghat[n, n] appears in both signal and the removed
            # self-interference term, hence the combined coefficient
            r[-1] = 1.0
            rows.append(r)
            rhs.append(-self.theta)
        A = np.array(rows)
        b = np.array(rhs)

        c = np.zeros(dim)
        c[-1] = 1.0
        x0 = np.concatenate([p0, [float(self.qos_margins(p0).min()) - 1.0]])
        x, _, _ = _barrier_max(
            lambda x: float(c @ x),
            lambda x: c,
            lambda x: np.zeros((dim, dim)),
            lambda x: True,
            A,
            b,
            x0,
            comp_tol=1e-6,
            growth=30.0,
        )
        p_hat = x[:N]
        margin = float(self.qos_margins(p_hat).min())
        if margin <= self.MARGIN_FLOOR:
            raise InfeasibleQoSError(
                f"no power split reaches the per-user SINR target {self.theta:.3g} "
                f"(best worst-user margin {margin:.3e} in noise units)",
                margin=margin,
            )
        return p_hat


# ---------------------------------------------------------------------------
# subproblem solve and SCA loop


@dataclass
class ScaIterate:
    """One solved subproblem: powers, slacks, and certification data."""

    p: np.ndarray             # (K, N) power fractions
    mu: np.ndarray            # (N,) received-power slack, mW
    nu: np.ndarray            # (N,) interference slack, mW
    objective: float          # sum log2(mu/nu), bits/s/Hz
    kkt_residual: float
    duals: np.ndarray         # barrier multipliers, noise-normalized rows
    gap: float = 0.0          # certified optimality gap of the solve, bits


def solve_subproblem(model: DcModel, nu_t, tol: float = 1e-8) -> ScaIterate:
    """Solve one concave subproblem at expansion point nu_t (mW).

    The returned iterate carries its certified optimality gap, normally
    below tol (in bits) but larger when a nearly degenerate active set
    stops the barrier homotopy early.  Raises InfeasibleQoSError when
    the QoS rows admit no power split.
    """
    asm = _Assembled(model)
    N = asm.N
    lin = linearize(np.asarray(nu_t, dtype=float) / model.sigma2)

    p_start = asm.feasible_power()
    sig, intf = asm.signal_interference(p_start)
    rho = (sig + intf + 1.0) / (asm.Theta * (intf + 1.0))
    eps = min(1e-3, float(((rho - 1.0) / (rho + 1.0)).min()) / 2.0)
    mu0 = (sig + intf + 1.0) * (1.0 - eps)
    nu0 = (intf + 1.0) * (1.0 + eps)
    x0 = np.concatenate([p_start, mu0, nu0])

    def value(x):
        return lin.objective(x[N : 2 * N], x[2 * N :])

    def grad(x):
        g = np.zeros(3 * N)
        g[N : 2 * N] = 1.0 / x[N : 2 * N]
        g[2 * N :] = -lin.slope
        return g

    def hess(x):
        h = np.zeros(3 * N)
        h[N : 2 * N] = -1.0 / x[N : 2 * N] ** 2
        return np.diag(h)

    def domain_ok(x):
        return bool((x[N : 2 * N] > 0).all())

    x, duals, t_final = _barrier_max(
        value, grad, hess, domain_ok, asm.A, asm.b, x0, comp_tol=tol
    )

    p_matrix = np.zeros_like(model.g)
    p_matrix[asm.cable_of, np.arange(N)] = x[:N]
    iterate = ScaIterate(
        p=p_matrix,
        mu=x[N : 2 * N] * model.sigma2,
        nu=x[2 * N :] * model.sigma2,
        objective=float(np.sum(np.log2(x[N : 2 * N]) - np.log2(x[2 * N :]))),
        kkt_residual=0.0,
        duals=duals,
        gap=asm.A.shape[0] / (t_final * LN2),
    )
    iterate.kkt_residual = kkt_residual(model, nu_t, iterate)
    return iterate


def kkt_residual(model: DcModel, nu_t, iterate: ScaIterate) -> float:
    """Recompute the stationarity/complementarity residual of an iterate.

    Works purely from the returned primal point and multipliers in the
    noise-normalized space; independent of how the solver got there.
    The stationarity part involves slacks of order 1/t with constraint
    values of order the received SNR, so double precision floors the
    computable residual around 1e-7 even at an exact optimum.
    """
    asm = _Assembled(model)
    N = asm.N
    p_vec = iterate.p[asm.cable_of, np.arange(N)]
    x = np.concatenate(
        [p_vec, iterate.mu / model.sigma2, iterate.nu / model.sigma2]
    )
    nu_t_s = np.asarray(nu_t, dtype=float) / model.sigma2
    g = np.zeros(3 * N)
    g[N : 2 * N] = 1.0 / x[N : 2 * N]
    g[2 * N :] = -1.0 / nu_t_s
    s = asm.b - asm.A @ x
    lam = iterate.duals
    stationarity = float(np.abs(g - asm.A.T @ lam).max())
    complementarity = float(np.abs(lam * s).max())
    primal = float(max(0.0, (-s).max()))
    dual = float(max(0.0, (-lam).max()))
    return max(stationarity, complementarity, primal, dual)


@dataclass
class ScaTrace:
    """Objective, residual, and certified gap per round.

    Consecutive objectives can only decrease by at most the sum of the
    adjacent rounds' gaps (each solve is exact up to its gap and the
    previous solution stays feasible for the next subproblem).
    """

    objectives: list = field(default_factory=list)   # R(0), R(1), ...
    kkt_residuals: list = field(default_factory=list)
    gaps: list = field(default_factory=list)
    converged: bool = False
    iterations: int = 0

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["round", "objective", "kkt_residual", "gap"])
            for i, obj in enumerate(self.objectives):
                res = "" if i == 0 else repr(float(self.kkt_residuals[i - 1]))
                gap = "" if i == 0 else repr(float(self.gaps[i - 1]))
                writer.writerow([i, repr(float(obj)), res, gap])


def run_sca(
    model: DcModel,
    init_p: np.ndarray | None = None,
    eps: float = 1e-4,
    max_iters: int = 50,
    tol: float = 1e-8,
):
    """Iterate tangent subproblems until the rate objective settles.

    Returns (iterate, trace).  The expansion point starts at the
    interference level of the initial power split (equal split by
    default) and follows the subproblem solutions afterwards; stops when
    successive objectives differ by at most eps or max_iters is hit.
    """
    asm = _Assembled(model)
    N = asm.N
    if init_p is None:
        p_vec = asm.equal_split_vec()
    else:
        PowerAllocation(p=np.asarray(init_p, dtype=float)).validate(model.alpha)
        p_vec = np.asarray(init_p, dtype=float)[asm.cable_of, np.arange(N)]
    sig, intf = asm.signal_interference(p_vec)
    nu_t = (intf + 1.0) * model.sigma2
    r_prev = float(np.sum(np.log2(sig + intf + 1.0) - np.log2(intf + 1.0)))

    trace = ScaTrace(objectives=[r_prev])
    iterate = None
    for _ in range(max_iters):
        iterate = solve_subproblem(model, nu_t, tol=tol)
        trace.objectives.append(iterate.objective)
        trace.kkt_residuals.append(iterate.kkt_residual)
        trace.gaps.append(iterate.gap)
        trace.iterations += 1
        delta = abs(iterate.objective - r_prev)
        r_prev = iterate.objective
        nu_t = iterate.nu
        if delta <= eps:
            trace.converged = True
            break
    return iterate, trace
