"""Distributed multi-user policy optimization by sequential best response.

One UE at a time rebuilds its single-agent MDP against the frozen
policies of everyone else and re-solves it with value iteration. Other
UEs are modeled without identities: each occupant of a BS slot moves
according to the average of the other UEs' policies, with its channel
vector.drawn from the stationary distribution. Updates cycle round-robin
until a full round changes nothing.
"""

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy import sparse

from .channel import ChannelMatrix, steady_state
from .errors import ValidationError
from .mdp import (
    DeterministicPolicy,
    Kernel,
    SolverParams,
    ValueIterationResult,
    expected_reward,
    transition_reward,
    value_iteration,
)
from .rates import RateTable
from .states import StateSpace, SystemState, canonicalize


class PolicyProfile:
    """One deterministic policy per UE, all over the same state space."""

    def __init__(self, policies: Sequence[np.ndarray], n_states: int, n_actions: int):
        pols = []
        for i, p in enumerate(policies):
            arr = np.asarray(p, dtype=np.int64)
            if arr.shape != (n_states,):
                raise ValidationError(f"policy {i} must cover all {n_states} states")
            if np.any((arr < 0) | (arr >= n_actions)):
                raise ValidationError(f"policy {i} has actions outside 0..{n_actions - 1}")
            arr = arr.copy()
            arr.setflags(write=False)
            pols.append(arr)
        self.policies = tuple(pols)
        self.n_states = n_states
        self.n_actions = n_actions

    @property
    def n_ues(self) -> int:
        return len(self.policies)

    def __getitem__(self, ue: int) -> np.ndarray:
        return self.policies[ue]

    def replace(self, ue: int, policy: np.ndarray) -> "PolicyProfile":
        pols = list(self.policies)
        pols[ue] = policy
        return PolicyProfile(pols, self.n_states, self.n_actions)

    def __eq__(self, other):
        return (
            isinstance(other, PolicyProfile)
            and self.n_ues == other.n_ues
            and all(np.array_equal(a, b) for a, b in zip(self.policies, other.policies))
        )


def random_profile(space: StateSpace, n_ues: int, seed: int = 0) -> PolicyProfile:
    """Uniform-random initial policies; the fixed point may depend on the seed."""
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 2]))
    pols = [rng.integers(0, space.n_bss, size=len(space)) for _ in range(n_ues)]
    return PolicyProfile(pols, len(space), space.n_bss)


def _view_order(channels, loads, serving_slot):
    """Slot visited by each canonical-view position: serving first, then
    neighbors sorted descending by (channel, load), ties keeping slot order."""
    rest = sorted(
        ((channels[l], loads[l], l) for l in range(len(loads)) if l != serving_slot),
        key=lambda t: (t[0], t[1]),
        reverse=True,
    )
    return [serving_slot] + [t[2] for t in rest]


def selection_probabilities(
    policy: DeterministicPolicy,
    pi_channel: np.ndarray,
    loads: Sequence[int],
    serving_slot: int,
    space: StateSpace,
) -> np.ndarray:
    """Probability that a UE on ``serving_slot`` picks each BS next slot.

    Marginalizes the UE's policy over all K^L channel combinations, each
    weighted by the product of per-link stationary probabilities, grafted
    onto the given load vector.
    """
    L, K = space.n_bss, space.n_channel_states
    loads = tuple(int(u) for u in loads)
    if len(loads) != L or sum(loads) != space.n_ues:
        raise ValidationError(f"loads {loads} inconsistent with L={L}, N={space.n_ues}")
    if not 0 <= serving_slot < L or loads[serving_slot] < 1:
        raise ValidationError(f"serving slot {serving_slot} is empty or out of range")
    out = np.zeros(L)
    for combo in itertools.product(range(K), repeat=L):
        weight = 1.0
        for c in combo:
            weight *= pi_channel[c]
        state = canonicalize(
            (combo[serving_slot], loads[serving_slot]),
            [(combo[l], loads[l]) for l in range(L) if l != serving_slot],
        )
        action = int(policy[space.index_of(state)])
        chosen = _view_order(combo, loads, serving_slot)[action]
        out[chosen] += weight
    return out


class MultiUserEnv:
    """Shared problem instance: state space, channel statistics, reward shape."""

    def __init__(
        self,
        space: StateSpace,
        channel: ChannelMatrix,
        rates: RateTable,
        oh: float,
        solver: SolverParams = SolverParams(),
    ):
        if channel.k != space.n_channel_states:
            raise ValidationError("channel matrix order does not match the state space")
        if rates.k != space.n_channel_states:
            raise ValidationError("rate table length does not match the state space")
        if not 0.0 <= oh <= 1.0:
            raise ValidationError("handover cost fraction must lie in [0, 1]")
        self.space = space
        self.channel = channel
        self.rates = rates
        self.oh = float(oh)
        self.solver = solver
        self.pi = steady_state(channel)

    @cached_property
    def _combos(self) -> list[tuple[int, ...]]:
        return list(itertools.product(range(self.space.n_channel_states), repeat=self.space.n_bss))

    @cached_property
    def _own_step_weights(self) -> np.ndarray:
        """(K^L, K^L) joint probability of all L links stepping code -> code."""
        w = np.array([[1.0]])
        for _ in range(self.space.n_bss):
            w = np.kron(w, self.channel.p)
        return w

    @cached_property
    def _others_occupancies(self) -> list[tuple[int, ...]]:
        """All load vectors the N-1 other UEs can land on, fixed order."""
        L, N = self.space.n_bss, self.space.n_ues
        return [v for v in itertools.product(range(N), repeat=L) if sum(v) == N - 1]

    @cached_property
    def _occupancy_index(self) -> dict[tuple[int, ...], int]:
        return {v: i for i, v in enumerate(self._others_occupancies)}

    @cached_property
    def _dest_index(self) -> list[np.ndarray]:
        """Per action: (K^L, n_V) canonical destination for every pairing of
        the UE's next channel combo with the others' occupancy outcome."""
        space = self.space
        L = space.n_bss
        tables = []
        for a in range(L):
            tab = np.empty((len(self._combos), len(self._others_occupancies)), dtype=np.int64)
            for ci, combo in enumerate(self._combos):
                for vi, occ in enumerate(self._others_occupancies):
                    dest = canonicalize(
                        (combo[a], occ[a] + 1),
                        [(combo[l], occ[l]) for l in range(L) if l != a],
                    )
                    tab[ci, vi] = space.index_of(dest)
            tables.append(tab)
        return tables

    @cached_property
    def _state_codes(self) -> np.ndarray:
        """Big-endian channel code of each state, matching _combos order."""
        K = self.space.n_channel_states
        codes = np.empty(len(self.space), dtype=np.int64)
        for i, s in enumerate(self.space):
            code = 0
            for c in s.channels():
                code = code * K + c
            codes[i] = code
        return codes


def _others_move_distribution(ue, profile, env, loads):
    """Distribution of the other N-1 UEs' next-slot occupancy vector.

    Exactly loads[b] (minus the tagged UE on its serving slot 0) anonymous
    occupants sit on slot b; each moves independently according to the
    average of the other UEs' selection probabilities for that slot.
    """
    L, N = env.space.n_bss, env.space.n_ues
    others = [m for m in range(profile.n_ues) if m != ue]
    dist = {(0,) * L: 1.0}
    for b in range(L):
        n_occupants = loads[b] - (1 if b == 0 else 0)
        if n_occupants == 0:
            continue
        sel = np.zeros(L)
        for m in others:
            sel += selection_probabilities(profile[m], env.pi, loads, b, env.space)
        sel /= len(others)
        for _ in range(n_occupants):
            nxt: dict[tuple[int, ...], float] = {}
            for occ, p in dist.items():
                for l in range(L):
                    if sel[l] == 0.0:
                        continue
                    key = occ[:l] + (occ[l] + 1,) + occ[l + 1 :]
                    nxt[key] = nxt.get(key, 0.0) + p * sel[l]
            dist = nxt
    out = np.zeros(len(env._others_occupancies))
    for occ, p in dist.items():
        out[env._occupancy_index[occ]] += p
    return out


def build_kernel(ue: int, profile: PolicyProfile, env: MultiUserEnv) -> tuple[Kernel, np.ndarray]:
    """Single-agent kernel and rewards for UE ``ue`` against frozen others.

    The destination law factorizes into the UE's own L link transitions and
    the others' occupancy evolution under previous-slot loads; both are
    enumerated exactly and accumulated onto canonical states.
    """
    space = env.space
    if profile.n_states != len(space) or profile.n_ues != space.n_ues:
        raise ValidationError("profile does not match the environment's state space")
    if not 0 <= ue < profile.n_ues:
        raise ValidationError(f"UE index {ue} outside 0..{profile.n_ues - 1}")
    n_states = len(space)
    L = space.n_bss
    W = env._own_step_weights
    dest_tables = env._dest_index
    codes = env._state_codes

    occ_dist_cache: dict[tuple[int, ...], np.ndarray] = {}
    indptr = [[0] for _ in range(L)]
    cols = [[] for _ in range(L)]
    vals = [[] for _ in range(L)]
    for i, state in enumerate(space):
        loads = state.loads()
        occ = occ_dist_cache.get(loads)
        if occ is None:
            occ = _others_move_distribution(ue, profile, env, loads)
            occ_dist_cache[loads] = occ
        own = W[codes[i]]
        probs = np.outer(own, occ).ravel()
        for a in range(L):
            row = np.bincount(dest_tables[a].ravel(), weights=probs, minlength=n_states)
            nz = np.flatnonzero(row)
            cols[a].append(nz)
            vals[a].append(row[nz])
            indptr[a].append(indptr[a][-1] + nz.size)
    mats = []
    for a in range(L):
        mats.append(
            sparse.csr_matrix(
                (np.concatenate(vals[a]), np.concatenate(cols[a]), np.asarray(indptr[a])),
                shape=(n_states, n_states),
            )
        )
    kernel = Kernel(mats)
    states = space.states
    rewards = expected_reward(
        kernel,
        lambda i, a, j: transition_reward(states[i], a, states[j], env.rates, env.oh),
    )
    return kernel, rewards


def best_response(
    ue: int, profile: PolicyProfile, env: MultiUserEnv
) -> tuple[DeterministicPolicy, ValueIterationResult]:
    """Value-iteration optimal policy for one UE, everyone else frozen."""
    kernel, rewards = build_kernel(ue, profile, env)
    result = value_iteration(kernel, rewards, env.solver)
    return result.policy, result


@dataclass
class IterationRecord:
    iteration: int
    ue: int
    changed: int
    via_converged: bool


@dataclass
class ConvergeResult:
    profile: PolicyProfile
    log: list[IterationRecord] = field(repr=False)
    converged: bool = False
    iterations: int = 0

    def last_cycle_changes(self) -> list[int]:
        n = self.profile.n_ues
        return [r.changed for r in self.log[-n:]]


def converge(
    initial: PolicyProfile, env: MultiUserEnv, max_outer: int | None = None
) -> ConvergeResult:
    """Round-robin best response until a full round leaves every policy fixed.

    Returns a flagged (converged=False) result when max_outer is exhausted
    first; callers decide whether that is fatal.
    """
    n_ues = initial.n_ues
    if n_ues != env.space.n_ues:
        raise ValidationError("profile UE count does not match the state space")
    if max_outer is None:
        max_outer = 50 * n_ues
    profile = initial
    log: list[IterationRecord] = []
    streak = 0
    for n in range(1, max_outer + 1):
        ue = (n - 1) % n_ues
        policy, via = best_response(ue, profile, env)
        changed = int(np.count_nonzero(policy != profile[ue]))
        profile = profile.replace(ue, policy)
        streak = streak + 1 if changed == 0 else 0
        log.append(IterationRecord(n, ue, changed, via.converged))
        if streak >= n_ues:
            return ConvergeResult(profile, log, True, n)
    return ConvergeResult(profile, log, False, max_outer)


def verify_fixed_point(profile: PolicyProfile, env: MultiUserEnv) -> bool:
    """True when one further full round of best responses changes nothing."""
    for ue in range(profile.n_ues):
        policy, _ = best_response(ue, profile, env)
        if not np.array_equal(policy, profile[ue]):
            return False
    return True
