"""Coalition formation: move mechanics, monotonicity, and stability."""

import csv
import dataclasses
import itertools

import numpy as np
import pytest

from lcxpin.channel import compose_channels
from lcxpin.config import SimConfig
from lcxpin.game import (
    CoalitionStructure,
    GameLimits,
    GameTrace,
    init_structure,
    nearest_cable,
    nearest_slot,
    run_coalition_game,
    try_slot_toggle,
    try_user_switch,
    utility,
    verify_nash_stable,
)
from lcxpin.rate import PowerAllocation, all_rates
from lcxpin.scenario import build_scenario, trial_seed


def scenario_with_users(cfg, users, seed=0):
    sc = build_scenario(cfg, seed)
    return dataclasses.replace(sc, users=np.asarray(users, dtype=float))


def test_nearest_cable_and_slot():
    cfg = SimConfig(scatterers=0)
    spacing = 50.0 / 49.0
    slot10_x = -25.0 + 10.0 * spacing
    users = [
        [slot10_x, -10.0, 0.0],                  # below slot 10 of cable 0
        [slot10_x, 10.0, 0.0],                   # same, cable 1
        [slot10_x + spacing / 2.0, 0.0, 0.0],    # midway: ties go low
    ]
    sc = scenario_with_users(cfg, users)
    assert nearest_cable(sc, 0) == 0
    assert nearest_cable(sc, 1) == 1
    assert nearest_cable(sc, 2) == 0            # y = 0 is equidistant
    assert nearest_slot(sc, 0, 0) == 10
    assert nearest_slot(sc, 1, 1) == 10
    assert nearest_slot(sc, 0, 2) == 10         # exact midpoint, lower index


def test_init_structure_layout():
    cfg = SimConfig(scatterers=0)
    spacing = 50.0 / 49.0
    users = [[-25.0 + 3 * spacing, -9.0, 0.0], [-25.0 + 40 * spacing, 12.0, 0.0]]
    sc = scenario_with_users(cfg, users)
    cs = compose_channels(sc)
    structure = init_structure(sc, cs)
    assert structure.members == [{0}, {1}]
    assert structure.active == [{3}, {40}]


def test_to_assignment_round_trip():
    structure = CoalitionStructure(members=[{0, 2}, {1}], active=[{0, 4}, {2}])
    state = structure.to_assignment(n_slots=5, n_users=3)
    state.validate()
    np.testing.assert_array_equal(state.alpha, [[1, 0, 1], [0, 1, 0]])
    np.testing.assert_array_equal(state.beta, [[1, 0, 0, 0, 1], [0, 0, 1, 0, 0]])


def test_copy_is_deep():
    a = CoalitionStructure(members=[{0}, {1}], active=[{2}, {3}])
    b = a.copy()
    b.members[0].add(1)
    b.active[1].add(7)
    assert a.members == [{0}, {1}] and a.active == [{2}, {3}]


def test_utility_matches_rate_stack():
    """The incremental game engine and the reference rate law must agree
    on arbitrary structures."""
    cfg = SimConfig(slots=6, users=3, scatterers=4)
    sc = build_scenario(cfg, trial_seed(31))
    cs = compose_channels(sc)
    rng = np.random.default_rng(8)
    for _ in range(30):
        members = [set(), set()]
        for n in range(3):
            members[rng.integers(2)].add(n)
        active = []
        for k in range(2):
            count = rng.integers(1, 4) if members[k] else rng.integers(0, 3)
            active.append(set(rng.choice(6, size=count, replace=False).tolist()))
        structure = CoalitionStructure(members=members, active=active)
        if not any(members[k] for k in range(2)):
            continue
        v, total = utility(structure, cs, sc.constants)
        state = structure.to_assignment(6, 3)
        p = PowerAllocation.equal_split(state.alpha).p
        want = all_rates(cs, state, p, sc.constants)
        np.testing.assert_allclose(v, want, rtol=1e-12)
        assert total == pytest.approx(want.sum(), rel=1e-12)


def micro_single_cable(user_x):
    cfg = SimConfig(dx=40, dy=10, height=3, cables=1, slots=3, users=1,
                    scatterers=0, seed=7)
    return scenario_with_users(cfg, [[user_x, 0.0, 0.0]])


def find_user_x(improving):
    """Scan user positions between slots 1 and 2 of the micro layout for a
    point where adding slot 2 helps (or hurts) the single user."""
    for x in np.linspace(3.0, 9.0, 400):
        sc = micro_single_cable(x)
        cs = compose_channels(sc)
        one = CoalitionStructure(members=[{0}], active=[{1}])
        both = CoalitionStructure(members=[{0}], active=[{1, 2}])
        _, u_one = utility(one, cs, sc.constants)
        _, u_both = utility(both, cs, sc.constants)
        if improving and u_both > u_one + 1e-6:
            return x, u_both - u_one
        if not improving and u_both < u_one - 1e-6:
            return x, u_both - u_one
    raise AssertionError("no suitable user position found")


def test_slot_toggle_accepts_coherent_gain():
    x, _ = find_user_x(improving=True)
    sc = micro_single_cable(x)
    cs = compose_channels(sc)
    structure = CoalitionStructure(members=[{0}], active=[{1}])
    accepted, structure = try_slot_toggle(structure, 0, 2, cs, sc.constants)
    assert accepted
    assert structure.active[0] == {1, 2}


def test_slot_toggle_rejects_destructive_slot():
    x, _ = find_user_x(improving=False)
    sc = micro_single_cable(x)
    cs = compose_channels(sc)
    structure = CoalitionStructure(members=[{0}], active=[{1}])
    accepted, structure = try_slot_toggle(structure, 0, 2, cs, sc.constants)
    assert not accepted
    assert structure.active[0] == {1}


def test_slot_toggle_guards_last_slot():
    sc = micro_single_cable(0.0)
    cs = compose_channels(sc)
    structure = CoalitionStructure(members=[{0}], active=[{1}])
    with pytest.raises(ValueError, match="only active slot"):
        try_slot_toggle(structure, 0, 1, cs, sc.constants)


def test_idle_cable_toggle_gains_nothing():
    """Slots of a cable with no users radiate nothing, so toggling one is
    a zero-gain move and must be rejected."""
    cfg = SimConfig(scatterers=0)
    sc = scenario_with_users(cfg, [[0.0, -9.0, 0.0], [3.0, -12.0, 0.0]])
    cs = compose_channels(sc)
    structure = CoalitionStructure(members=[{0, 1}, set()], active=[{20, 25}, set()])
    before = structure.copy()
    accepted, structure = try_slot_toggle(structure, 1, 7, cs, sc.constants)
    assert not accepted
    assert structure.active == before.active


def test_user_switch_same_cable_rejected():
    sc = build_scenario(SimConfig(), trial_seed(37))
    cs = compose_channels(sc)
    structure = init_structure(sc, cs)
    k = next(k for k in range(2) if 0 in structure.members[k])
    with pytest.raises(ValueError, match="already on"):
        try_user_switch(structure, 0, k, cs, sc.constants)


def test_user_switch_agrees_with_utility_comparison():
    """Acceptance must mirror the sign of the total-utility change."""
    for seed in range(6):
        sc = build_scenario(SimConfig(scatterers=3), trial_seed(41, seed))
        cs = compose_channels(sc)
        structure = init_structure(sc, cs)
        for n in range(sc.n_users):
            k_from = next(k for k in range(2) if n in structure.members[k])
            k_to = 1 - k_from
            probe = structure.copy()
            accepted, probe = try_user_switch(probe, n, k_to, cs, sc.constants)
            _, before = utility(structure, cs, sc.constants)
            _, after = utility(probe, cs, sc.constants)
            if accepted:
                assert n in probe.members[k_to]
                assert after > before + 1e-9
            else:
                assert after == pytest.approx(before, abs=1e-12)
                assert probe.members == structure.members
                assert probe.active == structure.active


def test_switch_to_empty_cable_activates_best_slot():
    """Both users start crowded on cable 0; sending the one that lives
    near cable 1 to the empty cable must bring its strongest slot along."""
    cfg = SimConfig(scatterers=0)
    sc = scenario_with_users(cfg, [[0.0, -13.0, 0.0], [0.0, 13.0, 0.0]])
    cs = compose_channels(sc)
    m0 = nearest_slot(sc, 0, 0)
    structure = CoalitionStructure(members=[{0, 1}, set()], active=[{m0}, set()])
    accepted, structure = try_user_switch(structure, 1, 1, cs, sc.constants)
    assert accepted
    assert structure.members == [{0}, {1}]
    best = int(np.argmax(np.abs(cs.h_los[1, :, 1])))
    assert structure.active[1] == {best}


def test_game_monotone_convergent_stable():
    cfg = SimConfig()
    for t in range(8):
        sc = build_scenario(cfg, trial_seed(1, 100, t))
        cs = compose_channels(sc)
        structure, trace = run_coalition_game(sc, cs)
        diffs = np.diff(trace.utilities)
        assert np.all(diffs > 1e-9), "every accepted move must strictly gain"
        assert trace.converged
        assert trace.passes <= GameLimits().max_passes
        assert len(trace.utilities) == len(trace.moves) + 1
        _, total = utility(structure, cs, sc.constants)
        assert trace.utilities[-1] == pytest.approx(total, rel=1e-12)
        assert verify_nash_stable(structure, cs, sc.constants)
        # structural sanity: partition plus nonempty activation where needed
        assert sorted(n for mem in structure.members for n in mem) == [0, 1]
        for k in range(2):
            if structure.members[k]:
                assert structure.active[k]


def test_game_starts_from_nearest_assignment():
    sc = build_scenario(SimConfig(), trial_seed(1, 100, 0))
    cs = compose_channels(sc)
    _, init_total = utility(init_structure(sc, cs), cs, sc.constants)
    _, trace = run_coalition_game(sc, cs)
    assert trace.utilities[0] == pytest.approx(init_total, rel=1e-12)


def test_game_single_cable_still_optimizes_slots():
    cfg = SimConfig(cables=1, users=2)
    moved_somewhere = False
    for t in range(6):
        sc = build_scenario(cfg, trial_seed(43, t))
        cs = compose_channels(sc)
        structure, trace = run_coalition_game(sc, cs)
        assert trace.converged
        assert verify_nash_stable(structure, cs, sc.constants)
        moved_somewhere |= bool(trace.moves)
    assert moved_somewhere, "slot sweeps should fire even with no switch targets"


def enumerate_structures(n_slots):
    """All two-user two-cable structures: serving cables take any nonempty
    slot set, idle cables any slot set at all."""
    slot_sets = [set(s) for r in range(n_slots + 1)
                 for s in itertools.combinations(range(n_slots), r)]
    nonempty = [s for s in slot_sets if s]
    for assign in range(4):
        members = [set(), set()]
        for n in range(2):
            members[(assign >> n) & 1].add(n)
        options = [nonempty if members[k] else slot_sets for k in range(2)]
        for a0 in options[0]:
            for a1 in options[1]:
                yield CoalitionStructure(
                    members=[set(members[0]), set(members[1])],
                    active=[set(a0), set(a1)],
                )


def test_small_instance_against_exhaustive_enumeration():
    """On an enumerable instance the game must land on a Nash-stable
    structure and never exceed the enumerated optimum."""
    cfg = SimConfig(slots=3)
    for t in range(10):
        sc = build_scenario(cfg, trial_seed(47, t))
        cs = compose_channels(sc)
        structure, trace = run_coalition_game(sc, cs)
        final = trace.utilities[-1]

        best = -np.inf
        stable_totals = []
        for cand in enumerate_structures(3):
            _, total = utility(cand, cs, sc.constants)
            best = max(best, total)
            if verify_nash_stable(cand, cs, sc.constants):
                stable_totals.append(total)
        assert final <= best + 1e-9
        assert stable_totals, "enumeration found no stable structure"
        assert min(abs(final - s) for s in stable_totals) < 1e-9
        assert final >= trace.utilities[0] - 1e-12


def test_verify_nash_stable_flags_bad_structure():
    """A hand-scrambled assignment with both users crammed onto the far
    cable's feed slot must not verify as stable."""
    cfg = SimConfig(scatterers=0)
    sc = scenario_with_users(cfg, [[20.0, -13.0, 0.0], [22.0, -11.0, 0.0]])
    cs = compose_channels(sc)
    bad = CoalitionStructure(members=[set(), {0, 1}], active=[set(), {0}])
    assert not verify_nash_stable(bad, cs, sc.constants)
    good, _ = run_coalition_game(sc, cs)
    assert verify_nash_stable(good, cs, sc.constants)


def test_trace_csv(tmp_path):
    trace = GameTrace(utilities=[1.0, 1.5, 2.25], moves=[("a", 0, 0, None)] * 2,
                      converged=True, passes=2)
    path = tmp_path / "trace.csv"
    trace.write_csv(path)
    rows = list(csv.reader(open(path, newline="")))
    assert rows[0] == ["iteration", "sum_rate"]
    assert [r[0] for r in rows[1:]] == ["0", "1", "2"]
    assert [float(r[1]) for r in rows[1:]] == [1.0, 1.5, 2.25]
