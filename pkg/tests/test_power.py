"""Power allocation: tangent surrogates, subproblem certification, and
the outer descent loop, checked against grid search."""

import csv
import math

import numpy as np
import pytest

from lcxpin.channel import compose_channels
from lcxpin.config import SimConfig
from lcxpin.game import init_structure, run_coalition_game
from lcxpin.power import (
    DcModel,
    InfeasibleQoSError,
    build_dc_model,
    kkt_residual,
    linearize,
    run_sca,
    solve_subproblem,
)
from lcxpin.rate import AssignmentState, PowerAllocation, all_rates, sum_rate
from lcxpin.scenario import build_scenario, trial_seed


def game_model(cfg, seed, r_min=None):
    sc = build_scenario(cfg, seed)
    cs = compose_channels(sc)
    structure, _ = run_coalition_game(sc, cs)
    state = structure.to_assignment(sc.n_slots, sc.n_users)
    model = build_dc_model(cs, state, sc.constants,
                           cfg.r_min if r_min is None else r_min)
    return sc, cs, state, model


def test_build_dc_model_gains_match_rate_law():
    cfg = SimConfig(users=3, scatterers=4)
    sc, cs, state, model = game_model(cfg, trial_seed(51))
    n_c = int((state.alpha.sum(axis=1) > 0).sum())
    n_k = np.maximum(state.beta.sum(axis=1), 1)
    h_eff = np.einsum("km,kmn->kn", state.beta.astype(float), cs.h)
    want = (sc.constants.P_t / n_c) * np.abs(h_eff) ** 2 / n_k[:, None]
    np.testing.assert_allclose(model.g, want, rtol=1e-12)
    np.testing.assert_array_equal(model.alpha, state.alpha)
    assert model.sigma2 == sc.constants.sigma2
    assert model.r_min == cfg.r_min
    assert model.n_users == 3
    # cable_of inverts the assignment matrix
    np.testing.assert_array_equal(model.alpha[model.cable_of(), np.arange(3)], 1)


def test_build_dc_model_validates_state():
    cfg = SimConfig()
    sc = build_scenario(cfg, trial_seed(53))
    cs = compose_channels(sc)
    bad = AssignmentState(alpha=np.array([[1, 1], [1, 0]]),
                          beta=np.ones((2, 50), dtype=int))
    with pytest.raises(ValueError):
        build_dc_model(cs, bad, sc.constants, 0.1)


def test_linearize_tangent_and_minorant():
    nu_t = np.array([2.0, 0.5, 7.0])
    lin = linearize(nu_t)
    mu = np.array([4.0, 1.0, 21.0])
    exact_at_tangent = float(np.sum(np.log2(mu / nu_t)))
    assert lin.rate_surrogate(mu, nu_t) == pytest.approx(exact_at_tangent, rel=1e-13)
    rng = np.random.default_rng(3)
    for _ in range(200):
        nu = nu_t * rng.uniform(0.05, 20.0, size=3)
        surrogate = lin.rate_surrogate(mu, nu)
        exact = float(np.sum(np.log2(mu / nu)))
        assert surrogate <= exact + 1e-10


def test_linearize_guards():
    with pytest.raises(ValueError):
        linearize(np.array([1.0, 0.0]))
    with pytest.raises(ValueError):
        linearize(np.array([1.0, -2.0]))
    with pytest.raises(ValueError):
        linearize(np.array([1.0, np.inf]))


def test_single_user_gets_full_budget():
    cfg = SimConfig(users=1, r_min=0.0)
    sc, cs, state, model = game_model(cfg, trial_seed(59))
    iterate, trace = run_sca(model)
    assert trace.converged
    k = int(model.cable_of()[0])
    assert iterate.p[k, 0] == pytest.approx(1.0, abs=1e-6)
    want = math.log2(1.0 + model.g[k, 0] / model.sigma2)
    assert iterate.objective == pytest.approx(want, abs=1e-6)
    assert iterate.kkt_residual < 1e-4
    assert np.all(iterate.duals >= 0.0)


def test_outer_loop_starts_at_equal_split_rate():
    """Cross-module identity: the first trace entry is the plain rate of
    the equal power split."""
    cfg = SimConfig(cables=1, users=2, r_min=0.0)
    sc, cs, state, model = game_model(cfg, trial_seed(61))
    _, trace = run_sca(model)
    p0 = PowerAllocation.equal_split(state.alpha).p
    assert trace.objectives[0] == pytest.approx(
        sum_rate(cs, state, p0, sc.constants), rel=1e-10
    )


def grid_optimum(model, step=1e-3):
    """Dense simplex search for two users sharing one cable."""
    (k0, k1) = model.cable_of()
    assert k0 == k1
    g = model.g[k0]
    f = np.arange(0.0, 1.0 + step / 2.0, step)
    P0, P1 = np.meshgrid(f, f, indexing="ij")
    r = np.log2(1.0 + g[0] * P0 / (g[0] * P1 + model.sigma2)) + np.log2(
        1.0 + g[1] * P1 / (g[1] * P0 + model.sigma2)
    )
    r[P0 + P1 > 1.0 + 1e-12] = -np.inf
    return float(r.max())


def test_sca_matches_grid_search():
    cfg = SimConfig(cables=1, users=2, r_min=0.0)
    for t in range(10):
        sc, cs, state, model = game_model(cfg, trial_seed(67, t))
        iterate, trace = run_sca(model)
        want = grid_optimum(model)
        assert iterate.objective == pytest.approx(want, abs=1e-2)
        # the final point must be a genuine power split achieving that rate
        PowerAllocation(iterate.p).validate(model.alpha)
        achieved = sum_rate(cs, state, iterate.p, sc.constants)
        assert achieved == pytest.approx(iterate.objective, abs=1e-6)


def test_trace_dips_bounded_by_certified_gaps():
    checked = 0
    for t in range(8):
        cfg = SimConfig(users=3)
        sc, cs, state, model = game_model(cfg, trial_seed(71, t))
        try:
            iterate, trace = run_sca(model)
        except InfeasibleQoSError:
            continue   # a user in a deep fade can make the 0.1 target unreachable
        diffs = np.diff(trace.objectives)
        gaps = np.array(trace.gaps)
        assert np.all(diffs >= -(gaps + 1e-9))
        assert np.all(np.array(trace.kkt_residuals) < 1e-4)
        assert trace.iterations == len(trace.objectives) - 1
        assert trace.converged
        checked += 1
    assert checked >= 5


def test_qos_respected_on_feasible_instances():
    cfg = SimConfig(cables=1, users=2, r_min=0.3)
    for t in range(12):
        sc, cs, state, model = game_model(cfg, trial_seed(73, t))
        iterate, _ = run_sca(model)
        rates = all_rates(cs, state, iterate.p, sc.constants)
        assert np.all(rates >= 0.3 - 1e-9)


def test_structurally_infeasible_qos_raises():
    """Two users sharing one cable cannot both hit 1.5 bits: the SINR
    targets sum past the available budget no matter the channels."""
    cfg = SimConfig(cables=1, users=2, r_min=1.5)
    sc, cs, state, model = game_model(cfg, trial_seed(79))
    with pytest.raises(InfeasibleQoSError) as err:
        run_sca(model)
    assert err.value.margin is not None
    assert err.value.margin <= 1e-6


def test_subproblem_certificate():
    cfg = SimConfig(cables=1, users=2, r_min=0.0)
    sc, cs, state, model = game_model(cfg, trial_seed(83))
    nu_t = np.full(2, model.sigma2)
    iterate = solve_subproblem(model, nu_t)
    assert iterate.gap >= 0.0
    assert iterate.gap < 1e-6
    assert iterate.kkt_residual == pytest.approx(
        kkt_residual(model, nu_t, iterate), rel=1e-9
    )
    assert np.all(iterate.duals >= 0.0)
    assert np.all(iterate.mu > 0.0) and np.all(iterate.nu > 0.0)


def test_run_sca_rejects_bad_init():
    cfg = SimConfig(cables=1, users=2, r_min=0.0)
    sc, cs, state, model = game_model(cfg, trial_seed(89))
    bad = np.array([[0.9, 0.9]])
    with pytest.raises(ValueError):
        run_sca(model, init_p=bad)


def test_sca_trace_csv(tmp_path):
    cfg = SimConfig(cables=1, users=2, r_min=0.0)
    sc, cs, state, model = game_model(cfg, trial_seed(97))
    iterate, trace = run_sca(model)
    path = tmp_path / "sca.csv"
    trace.write_csv(path)
    rows = list(csv.reader(open(path, newline="")))
    assert rows[0] == ["round", "objective", "kkt_residual", "gap"]
    assert len(rows) == 1 + len(trace.objectives)
    assert rows[1][1:] == [repr(float(trace.objectives[0])), "", ""]
    assert float(rows[2][2]) == trace.kkt_residuals[0]
    assert float(rows[-1][1]) == trace.objectives[-1]
