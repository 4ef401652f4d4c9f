"""Coalitional user assignment and slot activation.

Users are partitioned into one coalition per cable; each serving cable
additionally carries a set of active slots.  Moves are evaluated against
the summed utility of ALL users (not just the mover), with each serving
cable's power split equally among its users, so a move that helps one
user but hurts the rest is rejected.  The main loop alternates slot
sweeps (first-improvement activation/deactivation over every slot of
every serving cable) with single-user switch tests, and stops when a
full pass makes no move.  Every accepted move strictly increases the
total utility, which bounds the number of moves and yields a structure
in which no unilateral deviation is profitable.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelSet, effective_channels
from .rate import AssignmentState
from .scenario import PhysConstants, Scenario


@dataclass(frozen=True)
class GameLimits:
    max_passes: int = 100     # full outer passes before giving up
    move_tol: float = 1e-9    # minimum utility gain to accept a move


@dataclass
class CoalitionStructure:
    """Users per cable (members) and active slots per cable (active)."""

    members: list
    active: list

    def copy(self) -> "CoalitionStructure":
        return CoalitionStructure(
            members=[set(s) for s in self.members],
            active=[set(s) for s in self.active],
        )

    def to_assignment(self, n_slots: int, n_users: int) -> AssignmentState:
        K = len(self.members)
        alpha = np.zeros((K, n_users), dtype=int)
        beta = np.zeros((K, n_slots), dtype=int)
        for k in range(K):
            for n in self.members[k]:
                alpha[k, n] = 1
            for m in self.active[k]:
                beta[k, m] = 1
        return AssignmentState(alpha=alpha, beta=beta)


@dataclass
class GameTrace:
    """Utility after every accepted move, plus the move log."""

    utilities: list = field(default_factory=list)
    moves: list = field(default_factory=list)   # (kind, actor, src, dst)
    converged: bool = False
    passes: int = 0

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iteration", "sum_rate"])
            for i, u in enumerate(self.utilities):
                writer.writerow([i, repr(float(u))])


class _Engine:
    """Incremental utility evaluation for one structure.

    Keeps the effective channels, coalition sizes, and slot counts in
    arrays so candidate moves cost a handful of small numpy ops.
    """

    def __init__(self, structure: CoalitionStructure, cs: ChannelSet, consts: PhysConstants):
        K, M, N = cs.shape
        if len(structure.members) != K or len(structure.active) != K:
            raise ValueError("structure does not match the channel tensor")
        assigned = sorted(n for mem in structure.members for n in mem)
        if assigned != list(range(N)):
            raise ValueError("every user must belong to exactly one coalition")
        self.cs = cs
        self.consts = consts
        self.structure = structure
        self.K, self.M, self.N = K, M, N
        self.cable_of = np.empty(N, dtype=int)
        self.counts = np.zeros(K, dtype=int)
        beta = np.zeros((K, M))
        for k in range(K):
            self.counts[k] = len(structure.members[k])
            for n in structure.members[k]:
                self.cable_of[n] = k
            for m in structure.active[k]:
                beta[k, m] = 1.0
        self.slot_counts = beta.sum(axis=1).astype(int)
        self.h_eff = effective_channels(cs, beta)
        for k in range(K):
            if self.counts[k] > 0 and self.slot_counts[k] == 0:
                raise ValueError(f"cable {k} serves users but has no active slot")

    # -- utility ---------------------------------------------------------

    def _utilities(self, h_eff, cable_of, counts, slot_counts):
        c = self.consts
        n_c = int((counts > 0).sum())
        w = (c.P_t / n_c) * (h_eff.real**2 + h_eff.imag**2)
        w /= np.maximum(slot_counts, 1)[:, None]
        served = (counts > 0).astype(float)
        total = w.T @ served
        own = w[cable_of, np.arange(len(cable_of))] / counts[cable_of]
        return np.log2(1.0 + own / (total - own + c.sigma2))

    def total_utility(self) -> float:
        return float(
            self._utilities(self.h_eff, self.cable_of, self.counts, self.slot_counts).sum()
        )

    # -- candidate moves -------------------------------------------------

    def eval_toggle(self, i: int, m: int) -> float:
        """Total utility if slot m of cable i were flipped."""
        active = m in self.structure.active[i]
        h_eff = self.h_eff.copy()
        h_eff[i] += -self.cs.h[i, m] if active else self.cs.h[i, m]
        slot_counts = self.slot_counts.copy()
        slot_counts[i] += -1 if active else 1
        return float(
            self._utilities(h_eff, self.cable_of, self.counts, slot_counts).sum()
        )

    def commit_toggle(self, i: int, m: int) -> None:
        if m in self.structure.active[i]:
            self.structure.active[i].discard(m)
            self.h_eff[i] -= self.cs.h[i, m]
            self.slot_counts[i] -= 1
        else:
            self.structure.active[i].add(m)
            self.h_eff[i] += self.cs.h[i, m]
            self.slot_counts[i] += 1

    def _best_slot(self, k: int, n: int) -> int:
        """Slot of cable k with the strongest line-of-sight toward user n.

        Stands in for geometric proximity when hypothetically activating
        a slot on an idle cable (the evaluation context carries channels,
        not geometry); identical ordering when cable attenuation is off.
        """
        return int(np.argmax(np.abs(self.cs.h_los[k, :, n])))

    def _switch_candidate(self, n: int, k_to: int):
        """Arrays describing the hypothetical move of user n to cable k_to.

        A target cable with no active slot hypothetically activates the
        mover's best slot; the returned activation index is None when
        no activation is needed.
        """
        k_from = int(self.cable_of[n])
        cable_of = self.cable_of.copy()
        cable_of[n] = k_to
        counts = self.counts.copy()
        counts[k_from] -= 1
        counts[k_to] += 1
        h_eff = self.h_eff
        slot_counts = self.slot_counts
        activate = None
        if self.slot_counts[k_to] == 0:
            activate = self._best_slot(k_to, n)
            h_eff = h_eff.copy()
            h_eff[k_to] = self.cs.h[k_to, activate]
            slot_counts = slot_counts.copy()
            slot_counts[k_to] = 1
        return cable_of, counts, h_eff, slot_counts, activate

    def eval_switch(self, n: int, k_to: int) -> float:
        cable_of, counts, h_eff, slot_counts, _ = self._switch_candidate(n, k_to)
        return float(self._utilities(h_eff, cable_of, counts, slot_counts).sum())

    def commit_switch(self, n: int, k_to: int) -> None:
        cable_of, counts, h_eff, slot_counts, activate = self._switch_candidate(n, k_to)
        k_from = int(self.cable_of[n])
        self.structure.members[k_from].discard(n)
        self.structure.members[k_to].add(n)
        if activate is not None:
            self.structure.active[k_to].add(activate)
        self.cable_of = cable_of
        self.counts = counts
        self.h_eff = h_eff
        self.slot_counts = slot_counts


def nearest_cable(sc: Scenario, n: int) -> int:
    """Index of the cable whose line is closest in y; ties go low."""
    return int(np.argmin(np.abs(sc.users[n, 1] - sc.feeds[:, 1])))


def nearest_slot(sc: Scenario, k: int, n: int) -> int:
    """Index of cable k's slot nearest to user n (3-D distance; ties go low)."""
    dists = np.linalg.norm(sc.slots[k] - sc.users[n], axis=1)
    return int(np.argmin(dists))


def init_structure(sc: Scenario, cs: ChannelSet) -> CoalitionStructure:
    """Nearest-cable assignment with each user's nearest slot activated."""
    K = sc.n_cables
    members = [set() for _ in range(K)]
    active = [set() for _ in range(K)]
    for n in range(sc.n_users):
        k = nearest_cable(sc, n)
        members[k].add(n)
        active[k].add(nearest_slot(sc, k, n))
    return CoalitionStructure(members=members, active=active)


def utility(structure: CoalitionStructure, cs: ChannelSet, consts: PhysConstants):
    """Per-user utilities and their sum under the equal-split power rule."""
    eng = _Engine(structure.copy(), cs, consts)
    v = eng._utilities(eng.h_eff, eng.cable_of, eng.counts, eng.slot_counts)
    return v, float(v.sum())


def try_slot_toggle(structure, i, m, cs, consts, tol: float = 1e-9):
    """Flip slot m of cable i if that strictly improves the total utility.

    Returns (accepted, structure); the structure is updated in place on
    acceptance.  Deactivating the only active slot of a serving cable is
    an error.
    """
    eng = _Engine(structure, cs, consts)
    if m in structure.active[i] and eng.counts[i] > 0 and eng.slot_counts[i] <= 1:
        raise ValueError("cannot deactivate the only active slot of a serving cable")
    gain = eng.eval_toggle(i, m) - eng.total_utility()
    if gain > tol:
        eng.commit_toggle(i, m)
        return True, structure
    return False, structure


def try_user_switch(structure, n, k_to, cs, consts, tol: float = 1e-9):
    """Move user n to cable k_to if the total utility strictly improves.

    A target cable with no active slot hypothetically activates the
    mover's nearest slot; the activation is committed together with an
    accepted move.  Returns (accepted, structure).
    """
    eng = _Engine(structure, cs, consts)
    if int(eng.cable_of[n]) == k_to:
        raise ValueError("user already on the target cable")
    gain = eng.eval_switch(n, k_to) - eng.total_utility()
    if gain > tol:
        eng.commit_switch(n, k_to)
        return True, structure
    return False, structure


def run_coalition_game(
    sc: Scenario,
    cs: ChannelSet,
    consts: PhysConstants | None = None,
    limits: GameLimits = GameLimits(),
):
    """Run the full assignment/activation game from the nearest-cable start.

    Returns (structure, trace).  trace.utilities starts at the initial
    total utility and appends after every accepted move, so it is
    strictly increasing by more than limits.move_tol per step.
    """
    consts = consts or sc.constants
    structure = init_structure(sc, cs)
    eng = _Engine(structure, cs, consts)
    tol = limits.move_tol
    current = eng.total_utility()
    trace = GameTrace(utilities=[current])

    def sweep_slots():
        nonlocal current
        any_move = False
        for i in range(eng.K):
            if eng.counts[i] == 0:
                continue
            for m in range(eng.M):
                deactivating = m in structure.active[i]
                if deactivating and eng.slot_counts[i] <= 1:
                    continue
                cand = eng.eval_toggle(i, m)
                if cand > current + tol:
                    eng.commit_toggle(i, m)
                    trace.moves.append(
                        ("deactivate" if deactivating else "activate", i, m, None)
                    )
                    current = cand
                    trace.utilities.append(current)
                    any_move = True
        return any_move

    converged = False
    passes = 0
    for _ in range(limits.max_passes):
        passes += 1
        moved = False
        for n in range(eng.N):
            had_candidate = False
            for k_to in range(eng.K):
                if k_to == int(eng.cable_of[n]):
                    continue
                had_candidate = True
                moved |= sweep_slots()
                cand = eng.eval_switch(n, k_to)
                if cand > current + tol:
                    k_from = int(eng.cable_of[n])
                    eng.commit_switch(n, k_to)
                    trace.moves.append(("switch", n, k_from, k_to))
                    current = cand
                    trace.utilities.append(current)
                    moved = True
            if not had_candidate:
                # single-cable layout: the switch loop is empty but slot
                # activation still needs optimizing
                moved |= sweep_slots()
        if not moved:
            converged = True
            break

    trace.converged = converged
    trace.passes = passes
    return structure, trace


def verify_nash_stable(structure, cs, consts, tol: float = 1e-9) -> bool:
    """Check that no single slot toggle or user switch improves the total
    utility by more than tol.

    Rebuilds all bookkeeping from the structure, so it also catches
    stale incremental state in the game loop.
    """
    eng = _Engine(structure.copy(), cs, consts)
    current = eng.total_utility()
    for i in range(eng.K):
        if eng.counts[i] == 0:
            continue
        for m in range(eng.M):
            if m in structure.active[i] and eng.slot_counts[i] <= 1:
                continue
            if eng.eval_toggle(i, m) > current + tol:
                return False
    for n in range(eng.N):
        for k_to in range(eng.K):
            if k_to == int(eng.cable_of[n]):
                continue
            if eng.eval_switch(n, k_to) > current + tol:
                return False
    return True
