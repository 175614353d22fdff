"""Independent reference implementations shared by unit and acceptance tests.

Everything here is deliberately written from scratch (dense loops, direct
solves) so the code paths under test are checked against arithmetic that
shares nothing with the package internals.
"""

import itertools

import numpy as np

from mmwave_mdp.mdp import Kernel
from mmwave_mdp.states import Connection, SystemState


def power_iteration_oracle(p, tol=1e-12):
    pi = np.full(p.shape[0], 1.0 / p.shape[0])
    for _ in range(1_000_000):
        nxt = pi @ p
        if np.max(np.abs(nxt - pi)) < tol:
            return nxt
        pi = nxt
    raise AssertionError("power iteration did not converge")


def ordered_compositions(total, parts):
    if parts == 0:
        if total == 0:
            yield ()
        return
    for first in range(total + 1):
        for rest in ordered_compositions(total - first, parts - 1):
            yield (first,) + rest


def raw_configurations(L, K, N):
    """Every ordered (serving, neighbors) configuration, no symmetry folding."""
    for k1 in range(K):
        for u1 in range(1, N + 1):
            rest = N - u1
            for channels in itertools.product(range(K), repeat=L - 1):
                for loads in ordered_compositions(rest, L - 1):
                    yield (k1, u1), tuple(zip(channels, loads))


def random_mdp(rng, n_states, n_actions, branching=3):
    """Garnet-style random instance: sparse rows, uniform rewards."""
    mats = []
    for _ in range(n_actions):
        dense = np.zeros((n_states, n_states))
        for s in range(n_states):
            dests = rng.choice(n_states, size=min(branching, n_states), replace=False)
            dense[s, dests] = rng.dirichlet(np.ones(len(dests)))
        mats.append(dense)
    rewards = rng.random((n_states, n_actions))
    return Kernel.from_dense(mats), rewards


def exact_policy_value_oracle(policy, mats, rewards, omega):
    """Independent dense policy evaluation."""
    n = len(policy)
    p = np.array([mats[policy[s]][s] for s in range(n)])
    r = np.array([rewards[s, policy[s]] for s in range(n)])
    return np.linalg.solve(np.eye(n) - omega * p, r)


def policy_iteration_oracle(mats, rewards, omega):
    """Exact policy iteration; terminates at the optimal policy."""
    n, n_actions = rewards.shape
    policy = np.zeros(n, dtype=int)
    for _ in range(1000):
        v = exact_policy_value_oracle(policy, mats, rewards, omega)
        q = np.stack(
            [rewards[:, a] + omega * (mats[a] @ v) for a in range(n_actions)], axis=1
        )
        new_policy = np.argmax(q, axis=1)
        if np.array_equal(new_policy, policy):
            return v, policy
        policy = new_policy
    raise AssertionError("policy iteration failed to terminate")


def joint_enumeration_oracle(other_policy, env):
    """Brute-force L=2, K=2, N=2 kernel for UE 0: enumerates the other UE's
    serving slot, channel combo and move, plus UE 0's own link transitions."""
    space, P, pi = env.space, env.channel.p, env.pi
    rates, oh = env.rates.as_array(), env.oh
    n = len(space)
    mats = [np.zeros((n, n)) for _ in range(2)]
    rewards = np.zeros((n, 2))
    for i, st in enumerate(space):
        ch = (st.serving.channel, st.neighbors[0].channel)
        loads = (st.serving.load, st.neighbors[0].load)
        counts = (loads[0] - 1, loads[1])  # other UEs per slot
        for a in (0, 1):
            denom = (loads[0] - 1 if a == 0 else loads[1]) + 1
            cost = 0.0 if a == 0 else oh
            for c0, c1 in itertools.product(range(2), repeat=2):
                w_own = P[ch[0], c0] * P[ch[1], c1]
                cprime = (c0, c1)
                for b in (0, 1):
                    if counts[b] == 0:
                        continue
                    w_b = counts[b]  # N-1 = 1, so this is 0 or 1
                    for h0, h1 in itertools.product(range(2), repeat=2):
                        w_other = pi[h0] * pi[h1]
                        h = (h0, h1)
                        other_state = SystemState(
                            Connection(h[b], loads[b]),
                            (Connection(h[1 - b], loads[1 - b]),),
                        )
                        act = other_policy[space.index_of(other_state)]
                        chosen = b if act == 0 else 1 - b
                        f = [0, 0]
                        f[chosen] += 1
                        f[a] += 1
                        dest = SystemState(
                            Connection(cprime[a], f[a]), (Connection(cprime[1 - a], f[1 - a]),)
                        )
                        w = w_own * w_b * w_other
                        j = space.index_of(dest)
                        mats[a][i, j] += w
                        rewards[i, a] += w * (1 - cost) * rates[cprime[a]] / denom
    return mats, rewards


def state_run_lengths(paths, state):
    """Complete sojourns in ``state`` across all chains (censored edges dropped)."""
    lengths = []
    for col in paths.T:
        mask = np.concatenate([[False], col == state, [False]])
        diff = np.diff(mask.astype(int))
        starts = np.flatnonzero(diff == 1)
        ends = np.flatnonzero(diff == -1)
        for s, e in zip(starts, ends):
            if s > 0 and e < len(col):
                lengths.append(e - s)
    return np.asarray(lengths)
