"""Monte-Carlo harness: single trials, parameter sweeps, model-impact curves.

A trial draws one scenario and evaluates up to three benchmarks on the
same channel realization: the nearest-cable starting point with equal
power (lcx_initial), the full game plus QoS-constrained power stage
(lcx_optimized), and a conventional antenna at the region center with an
equal power split (fixed_antenna).  Sweeps repeat trials over a value
grid with counter-derived sub-seeds so runs are reproducible and can be
distributed over worker processes (LCXPIN_WORKERS) with a deterministic
merge.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .analysis import central_antenna_rate
from .channel import compose_channels
from .config import ConfigError, SimConfig
from .game import GameTrace, init_structure, run_coalition_game
from .power import InfeasibleQoSError, ScaTrace, build_dc_model, run_sca
from .rate import PowerAllocation, RateReport, rate_report
from .scenario import Scenario, build_scenario, trial_seed

BENCHMARKS = ("lcx_optimized", "lcx_initial", "fixed_antenna")

SWEEP_VARS = {
    # CLI name -> (SimConfig attribute, caster)
    "pt_dbm": ("pt_dbm", float),
    "r_min": ("r_min", float),
    "n_users": ("users", int),
    "height": ("height", float),
    "cables": ("cables", int),
    "slots": ("slots", int),
}


@dataclass
class TrialResult:
    reports: dict
    game_trace: GameTrace | None = None
    sca_trace: ScaTrace | None = None


def fixed_antenna_benchmark(sc: Scenario, r_min: float) -> RateReport:
    """Conventional single-antenna baseline at the region center.

    Each user gets an equal share of the budget and an interference-free
    inverse-square link from (0, 0, d).
    """
    consts = sc.constants
    center = np.array([0.0, 0.0, sc.d])
    dists = np.linalg.norm(sc.users - center, axis=1)
    p_n = consts.P_t / sc.n_users
    rates = np.array([central_antenna_rate(p_n, d, consts) for d in dists])
    return RateReport(
        rates=rates,
        sum_rate=float(rates.sum()),
        qos_ok=rates >= r_min - 1e-9,
        n_serving_cables=1,
        active_slots=np.array([1]),
        r_min=r_min,
    )


def run_trial(cfg: SimConfig, seed=None, benchmarks=BENCHMARKS) -> TrialResult:
    """One scenario draw, all requested benchmarks on the same channels."""
    unknown = set(benchmarks) - set(BENCHMARKS)
    if unknown:
        raise ConfigError(f"unknown benchmarks: {sorted(unknown)}")
    sc = build_scenario(cfg, seed)
    cs = compose_channels(sc)
    consts = sc.constants
    result = TrialResult(reports={})

    if "lcx_initial" in benchmarks:
        state = init_structure(sc, cs).to_assignment(sc.n_slots, sc.n_users)
        state.validate()
        p = PowerAllocation.equal_split(state.alpha).p
        result.reports["lcx_initial"] = rate_report(cs, state, p, consts, cfg.r_min)

    if "lcx_optimized" in benchmarks:
        structure, game_trace = run_coalition_game(sc, cs, consts)
        result.game_trace = game_trace
        state = structure.to_assignment(sc.n_slots, sc.n_users)
        state.validate()
        model = build_dc_model(cs, state, consts, cfg.r_min)
        try:
            iterate, sca_trace = run_sca(model)
            p = iterate.p
            result.sca_trace = sca_trace
            infeasible = False
        except InfeasibleQoSError:
            # QoS unreachable: transmit with the plain equal split and
            # let the outage accounting see the missed targets
            p = PowerAllocation.equal_split(state.alpha).p
            infeasible = True
        result.reports["lcx_optimized"] = rate_report(
            cs, state, p, consts, cfg.r_min, qos_infeasible=infeasible
        )

    if "fixed_antenna" in benchmarks:
        result.reports["fixed_antenna"] = fixed_antenna_benchmark(sc, cfg.r_min)

    return result


def write_trial_csv(results: list, path) -> None:
    """Per-user rates, one row per (trial, benchmark, user)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["trial", "benchmark", "user", "rate", "qos_ok", "qos_infeasible"])
        for t, res in enumerate(results):
            for name, rep in res.reports.items():
                for n, (r, ok) in enumerate(zip(rep.rates, rep.qos_ok)):
                    writer.writerow(
                        [t, name, n, repr(float(r)), int(ok), int(rep.qos_infeasible)]
                    )


# ---------------------------------------------------------------------------
# sweeps


@dataclass(frozen=True)
class SweepSpec:
    var: str
    values: tuple
    trials: int = 500
    seed: int = 1
    benchmarks: tuple = BENCHMARKS

    def __post_init__(self):
        if self.var not in SWEEP_VARS:
            raise ConfigError(
                f"unknown sweep variable {self.var!r}; choose from {sorted(SWEEP_VARS)}"
            )
        if self.trials < 1:
            raise ConfigError("need at least one trial per sweep point")
        if not self.values:
            raise ConfigError("sweep needs at least one value")


@dataclass
class SweepRow:
    benchmark: str
    value: float
    mean_sum_rate: float
    ci_halfwidth: float      # 95% normal CI; NaN when trials == 1
    outage: float            # fraction of (user, trial) events below target
    trials: int
    users: int


@dataclass
class SweepResult:
    var: str
    rows: list = field(default_factory=list)
    # raw per-trial sum rates keyed by (benchmark, value), for statistics
    samples: dict = field(default_factory=dict)
    infeasible_trials: int = 0
    optimized_trials: int = 0

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["var", "value", "benchmark", "mean_sum_rate",
                 "ci_halfwidth", "outage", "trials", "users"]
            )
            for row in self.rows:
                writer.writerow(
                    [self.var, repr(float(row.value)), row.benchmark,
                     repr(float(row.mean_sum_rate)), repr(float(row.ci_halfwidth)),
                     repr(float(row.outage)), row.trials, row.users]
                )


def apply_sweep_value(cfg: SimConfig, var: str, value) -> SimConfig:
    attr, caster = SWEEP_VARS[var]
    try:
        return cfg.replace(**{attr: caster(value)})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value {value!r} for sweep variable {var}") from exc


def _trial_task(args):
    cfg, entropy, benchmarks = args
    return run_trial(cfg, trial_seed(*entropy), benchmarks)


def run_sweep(cfg: SimConfig, spec: SweepSpec) -> SweepResult:
    """Repeat trials across the value grid and aggregate.

    Per (benchmark, value): mean sum rate, 95% CI half-width, and the
    outage fraction counted over every (user, trial) pair.  Every trial
    is accounted exactly once; sub-seeds derive from (seed, value index,
    trial index).
    """
    workers = int(os.environ.get("LCXPIN_WORKERS", "1"))
    result = SweepResult(var=spec.var)

    for vi, value in enumerate(spec.values):
        c = apply_sweep_value(cfg, spec.var, value)
        tasks = [
            (c, [spec.seed, vi, t], tuple(spec.benchmarks)) for t in range(spec.trials)
        ]
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                trial_results = list(pool.map(_trial_task, tasks))
        else:
            trial_results = [_trial_task(task) for task in tasks]

        for name in spec.benchmarks:
            sums = np.array([tr.reports[name].sum_rate for tr in trial_results])
            misses = sum(
                int((~tr.reports[name].qos_ok).sum()) for tr in trial_results
            )
            users = c.users
            if spec.trials > 1:
                ci = 1.96 * float(np.std(sums, ddof=1)) / math.sqrt(spec.trials)
            else:
                ci = float("nan")
            result.rows.append(
                SweepRow(
                    benchmark=name,
                    value=float(value),
                    mean_sum_rate=float(sums.mean()),
                    ci_halfwidth=ci,
                    outage=misses / (users * spec.trials),
                    trials=spec.trials,
                    users=users,
                )
            )
            result.samples[(name, float(value))] = sums
        if "lcx_optimized" in spec.benchmarks:
            result.optimized_trials += spec.trials
            result.infeasible_trials += sum(
                int(tr.reports["lcx_optimized"].qos_infeasible) for tr in trial_results
            )
    return result


# ---------------------------------------------------------------------------
# model-impact curve (single user swept under one cable)


@dataclass
class ImpactCurve:
    """Single-user rate along the cable under three channel variants."""

    distance: np.ndarray          # position along the cable from the feed, m
    x: np.ndarray                 # user x coordinate, m
    rate_full: np.ndarray         # scattering + cable attenuation
    rate_los_only: np.ndarray     # attenuation kept, scattering off
    rate_no_attenuation: np.ndarray  # scattering kept, attenuation off

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["distance", "x", "rate_full", "rate_los_only", "rate_no_attenuation"]
            )
            for i in range(len(self.distance)):
                writer.writerow(
                    [repr(float(self.distance[i])), repr(float(self.x[i])),
                     repr(float(self.rate_full[i])), repr(float(self.rate_los_only[i])),
                     repr(float(self.rate_no_attenuation[i]))]
                )


def channel_impact_experiment(
    cfg: SimConfig, seed=None, n_positions: int = 101
) -> ImpactCurve:
    """Sweep one user along the line under a single cable, closest slot active.

    Forces a one-cable one-user layout and evaluates the full channel,
    the scattering-free channel, and the attenuation-free channel at
    each position, with the full transmit budget on the single user.
    """
    c = cfg.replace(cables=1, users=1)
    sc = build_scenario(c, seed)
    consts = sc.constants

    xs = np.linspace(-c.dx / 2.0, c.dx / 2.0, n_positions)
    cable_y = float(sc.feeds[0, 1])
    users = np.column_stack([xs, np.full(n_positions, cable_y), np.zeros(n_positions)])
    sc_grid = replace(sc, users=users)

    # closest slot per position; shared by all three variants
    slot_x = sc.slots[0, :, 0]
    nearest = np.argmin(np.abs(xs[:, None] - slot_x[None, :]), axis=1)

    variants = {
        "rate_full": dict(include_nlos=True, include_cable_attenuation=True),
        "rate_los_only": dict(include_nlos=False, include_cable_attenuation=True),
        "rate_no_attenuation": dict(include_nlos=True, include_cable_attenuation=False),
    }
    rates = {}
    for name, flags in variants.items():
        cs = compose_channels(sc_grid, **flags)
        h = cs.h[0, nearest, np.arange(n_positions)]
        snr = consts.P_t * np.abs(h) ** 2 / consts.sigma2
        rates[name] = np.log2(1.0 + snr)

    return ImpactCurve(
        distance=xs + c.dx / 2.0,
        x=xs,
        rate_full=rates["rate_full"],
        rate_los_only=rates["rate_los_only"],
        rate_no_attenuation=rates["rate_no_attenuation"],
    )
