"""Symmetry-reduced joint state space of one UE's view of the system.

A state is the UE's serving connection plus the multiset of its L-1
neighbor connections, each connection a (channel, load) pair. Neighbor
order carries no meaning, so neighbors are stored sorted descending by
(channel, load); two raw configurations that differ only by a neighbor
permutation collapse onto the same canonical state.
"""

import itertools
from typing import Iterator, NamedTuple

from .errors import SizeLimitError, UnsupportedError, ValidationError

DEFAULT_MAX_STATES = 10_000_000


class Connection(NamedTuple):
    channel: int
    load: int


class SystemState(NamedTuple):
    serving: Connection
    neighbors: tuple[Connection, ...]

    @property
    def n_bss(self) -> int:
        return 1 + len(self.neighbors)

    def loads(self) -> tuple[int, ...]:
        return (self.serving.load,) + tuple(c.load for c in self.neighbors)

    def channels(self) -> tuple[int, ...]:
        return (self.serving.channel,) + tuple(c.channel for c in self.neighbors)


def canonicalize(serving, neighbors, n_ues: int | None = None) -> SystemState:
    """Canonical state for a serving connection and unordered neighbors.

    Idempotent and invariant under any permutation of ``neighbors``.
    When ``n_ues`` is given the total load is checked against it.
    """
    serving = Connection(*serving)
    neighbors = tuple(sorted((Connection(*c) for c in neighbors), reverse=True))
    if serving.load < 1:
        raise ValidationError("serving BS load must include the tagged UE (>= 1)")
    if any(c.load < 0 for c in neighbors) or any(c.channel < 0 for c in neighbors):
        raise ValidationError("connections need nonnegative channel and load")
    if n_ues is not None:
        total = serving.load + sum(c.load for c in neighbors)
        if total != n_ues:
            raise ValidationError(f"loads sum to {total}, expected {n_ues}")
    return SystemState(serving, neighbors)


class StateSpace:
    """Indexed set of every canonical state for (L, K, N)."""

    def __init__(self, n_bss: int, n_channel_states: int, n_ues: int, states):
        self.n_bss = n_bss
        self.n_channel_states = n_channel_states
        self.n_ues = n_ues
        self.states: tuple[SystemState, ...] = tuple(states)
        self._index = {s: i for i, s in enumerate(self.states)}

    def __len__(self) -> int:
        return len(self.states)

    def __iter__(self) -> Iterator[SystemState]:
        return iter(self.states)

    def __getitem__(self, i: int) -> SystemState:
        return self.states[i]

    def index_of(self, state: SystemState) -> int:
        try:
            return self._index[state]
        except KeyError:
            raise ValidationError(f"state {state} is not a member of this space") from None

    def __contains__(self, state) -> bool:
        return state in self._index


def enumerate_states(
    n_bss: int,
    n_channel_states: int,
    n_ues: int,
    max_states: int = DEFAULT_MAX_STATES,
) -> StateSpace:
    """Every canonical state exactly once, in a deterministic order.

    Raises SizeLimitError when the space would exceed ``max_states``.
    """
    if n_bss < 1 or n_channel_states < 1 or n_ues < 1:
        raise ValidationError("n_bss, n_channel_states and n_ues must all be >= 1")
    L, K, N = n_bss, n_channel_states, n_ues
    states: list[SystemState] = []
    for k1 in range(K):
        for u1 in range(1, N + 1):
            remaining = N - u1
            # Candidate neighbor connections, descending; combinations with
            # replacement over this order emit each multiset already sorted.
            pairs = [
                Connection(k, u)
                for k in range(K - 1, -1, -1)
                for u in range(remaining, -1, -1)
            ]
            if L == 1:
                if remaining == 0:
                    states.append(SystemState(Connection(k1, u1), ()))
                continue
            for neigh in itertools.combinations_with_replacement(pairs, L - 1):
                if sum(c.load for c in neigh) != remaining:
                    continue
                states.append(SystemState(Connection(k1, u1), neigh))
                if len(states) > max_states:
                    raise SizeLimitError(
                        f"state space for L={L}, K={K}, N={N} exceeds cap {max_states}"
                    )
    return StateSpace(L, K, N, states)


def _q(x: int) -> int:
    return max(x, 0)


def closed_form_occupancy_count(n_bss: int, n_ues: int) -> int:
    """Closed-form occupancy-combination count c_L(N), derived for L in 1..4.

    Diagnostic companion to enumeration; the two are reported side by side
    and are not asserted equal (see closed_form_state_count).
    """
    L, N = n_bss, n_ues
    if not 1 <= L <= 4:
        raise UnsupportedError(f"closed-form occupancy count covers L in 1..4, got {L}")
    if N < 0:
        raise ValidationError("n_ues must be nonnegative")
    if L == 1:
        return N + 1
    if L == 2:
        return N // 2
    if L == 3:
        return sum(_q((N - 1 - i) // 2 - i) for i in range(N))
    # L == 4: the inner k-sum depends on i, so it sits inside the i-sum.
    c3 = closed_form_occupancy_count(3, N)
    return sum(
        c3 - sum(_q((N - 2 - i - k) // 2 - k) for k in range(i)) for i in range(N)
    )


def closed_form_load_combinations(n_bss: int, n_ues: int) -> int:
    """Closed-form C_L(N): occupancy combinations at L base stations."""
    L, N = n_bss, n_ues
    if L < 1:
        raise ValidationError("n_bss must be >= 1")
    if L > 5:
        raise UnsupportedError(f"closed-form combinations cover L in 1..5, got {L}")
    total = closed_form_occupancy_count(1, N)
    for i in range(N):
        for k in range(2, L):
            total += closed_form_occupancy_count(k, N - i)
    return total


def closed_form_state_count(n_bss: int, n_channel_states: int, n_ues: int) -> int:
    """Closed-form |S| = K^L * C_L(N).

    Kept as a diagnostic: enumerate_states() is the authoritative count and
    the two may disagree; compare them via the statespace CLI report.
    """
    return n_channel_states**n_bss * closed_form_load_combinations(n_bss, n_ues)
