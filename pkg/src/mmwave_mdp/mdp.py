"""Generic finite discounted MDP: sparse kernel, rewards, value iteration.

Actions index the connection slots of the current state: action 0 keeps
the serving BS, action j >= 1 hands over to neighbor slot j - 1. The
solver itself is agnostic to that interpretation and works on any
(states x actions) kernel.
"""

import csv
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import sparse

from .errors import ValidationError
from .rates import RateTable
from .states import SystemState

#: A deterministic policy is an int array mapping state index -> action.
DeterministicPolicy = np.ndarray


@dataclass(frozen=True)
class SolverParams:
    omega: float = 0.9
    epsilon: float = 1e-6
    max_sweeps: int = 10_000

    def __post_init__(self):
        if not 0.0 < self.omega < 1.0:
            raise ValidationError("discount factor omega must lie in (0, 1)")
        if self.epsilon <= 0.0:
            raise ValidationError("stopping tolerance epsilon must be > 0")
        if self.max_sweeps < 1:
            raise ValidationError("max_sweeps must be >= 1")

    @property
    def stop_threshold(self) -> float:
        """Sweep-to-sweep sup-norm gap that certifies an epsilon-optimal policy."""
        return self.epsilon * (1.0 - self.omega) / (2.0 * self.omega)


class Kernel:
    """Transition probabilities p(j | i, a), one CSR matrix per action."""

    def __init__(self, mats: Sequence[sparse.csr_matrix], validate: bool = True):
        mats = tuple(sparse.csr_matrix(m) for m in mats)
        if not mats:
            raise ValidationError("kernel needs at least one action")
        n = mats[0].shape[0]
        for m in mats:
            if m.shape != (n, n):
                raise ValidationError("all action matrices must be square and same size")
        self.mats = mats
        self.n_states = n
        self.n_actions = len(mats)
        if validate:
            self.validate()

    def validate(self, tol: float = 1e-9) -> None:
        for a, m in enumerate(self.mats):
            sums = np.asarray(m.sum(axis=1)).ravel()
            worst = float(np.max(np.abs(sums - 1.0)))
            if worst > tol:
                raise ValidationError(
                    f"kernel rows for action {a} sum off unit by {worst:.3g} (> {tol})"
                )
            if m.nnz and m.data.min() < 0:
                raise ValidationError(f"kernel for action {a} has negative entries")

    def row(self, state: int, action: int) -> tuple[np.ndarray, np.ndarray]:
        """Destination indices and probabilities of one (state, action) row."""
        m = self.mats[action]
        lo, hi = m.indptr[state], m.indptr[state + 1]
        return m.indices[lo:hi], m.data[lo:hi]

    @classmethod
    def from_dense(cls, per_action: Sequence[np.ndarray], validate: bool = True) -> "Kernel":
        return cls([sparse.csr_matrix(np.asarray(m)) for m in per_action], validate=validate)


@dataclass
class ValueIterationResult:
    values: np.ndarray
    policy: DeterministicPolicy
    sweeps: int
    converged: bool
    sweep_gaps: list[float] = field(default_factory=list, repr=False)


def transition_reward(
    state: SystemState,
    action: int,
    dest: SystemState,
    rates: RateTable,
    oh: float,
) -> float:
    """Instantaneous reward (1 - c) * R(dest channel) / (U_target + 1).

    The denominator uses the target-BS load observed in ``state`` excluding
    the tagged UE itself, plus one for the UE joining; c equals ``oh`` on a
    handover (action != 0) and zero otherwise.
    """
    if not 0.0 <= oh <= 1.0:
        raise ValidationError("handover cost fraction must lie in [0, 1]")
    if action == 0:
        cost = 0.0
        load_excl_self = state.serving.load - 1
    else:
        cost = oh
        load_excl_self = state.neighbors[action - 1].load
    return (1.0 - cost) * rates.rate(dest.serving.channel) / (load_excl_self + 1)


def expected_reward(
    kernel: Kernel,
    per_transition: Callable[[int, int, int], float],
) -> np.ndarray:
    """Kernel-weighted average reward r(i, a) = sum_j p(j|i,a) r(i, a, j)."""
    out = np.zeros((kernel.n_states, kernel.n_actions))
    for a, m in enumerate(kernel.mats):
        indptr, indices, data = m.indptr, m.indices, m.data
        for i in range(kernel.n_states):
            lo, hi = indptr[i], indptr[i + 1]
            out[i, a] = sum(
                data[t] * per_transition(i, a, int(indices[t])) for t in range(lo, hi)
            )
    return out


def value_iteration(
    kernel: Kernel,
    rewards: np.ndarray,
    params: SolverParams = SolverParams(),
) -> ValueIterationResult:
    """Discounted value iteration from v0 = 0 with Jacobi sweeps.

    Stops once the sup-norm sweep gap falls below eps(1-w)/(2w), which makes
    the greedily extracted policy epsilon-optimal; ties in the argmax break
    toward the lowest action index. Hitting max_sweeps first returns a
    result flagged converged=False.
    """
    rewards = np.asarray(rewards, dtype=float)
    if rewards.shape != (kernel.n_states, kernel.n_actions):
        raise ValidationError(
            f"rewards shape {rewards.shape} does not match kernel "
            f"({kernel.n_states}, {kernel.n_actions})"
        )
    omega = params.omega
    threshold = params.stop_threshold
    v = np.zeros(kernel.n_states)
    gaps: list[float] = []
    converged = False
    sweeps = 0
    q = np.empty((kernel.n_actions, kernel.n_states))
    for sweeps in range(1, params.max_sweeps + 1):
        for a, m in enumerate(kernel.mats):
            q[a] = rewards[:, a] + omega * (m @ v)
        v_next = q.max(axis=0)
        gap = float(np.max(np.abs(v_next - v))) if kernel.n_states else 0.0
        gaps.append(gap)
        v = v_next
        if gap < threshold:
            converged = True
            break
    policy = np.argmax(q, axis=0)
    return ValueIterationResult(v, policy, sweeps, converged, gaps)


def policy_evaluation_exact(
    policy: DeterministicPolicy,
    kernel: Kernel,
    rewards: np.ndarray,
    omega: float,
) -> np.ndarray:
    """Exact value of a fixed policy via the linear solve (I - w P_d) v = r_d."""
    n = kernel.n_states
    policy = np.asarray(policy)
    if policy.shape != (n,):
        raise ValidationError("policy must assign one action per state")
    if np.any((policy < 0) | (policy >= kernel.n_actions)):
        raise ValidationError("policy contains out-of-range actions")
    p_d = np.zeros((n, n))
    r_d = np.empty(n)
    rewards = np.asarray(rewards, dtype=float)
    for a in range(kernel.n_actions):
        rows = np.flatnonzero(policy == a)
        if rows.size:
            p_d[rows] = kernel.mats[a][rows].toarray()
            r_d[rows] = rewards[rows, a]
    return np.linalg.solve(np.eye(n) - omega * p_d, r_d)


def dump_kernel_csv(path, kernel: Kernel, rewards: np.ndarray) -> None:
    """Debug dump: one row per transition with its expected source reward."""
    rewards = np.asarray(rewards)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["state", "action", "dest", "prob", "reward"])
        for a in range(kernel.n_actions):
            for i in range(kernel.n_states):
                dests, probs = kernel.row(i, a)
                for j, p in zip(dests, probs):
                    w.writerow([i, a, int(j), repr(float(p)), repr(float(rewards[i, a]))])
