import itertools

import numpy as np
import pytest

from mmwave_mdp.channel import ChannelMatrix, preset, steady_state
from mmwave_mdp.errors import ValidationError
from mmwave_mdp.mdp import SolverParams, policy_evaluation_exact, value_iteration
from mmwave_mdp.multiuser import (
    MultiUserEnv,
    PolicyProfile,
    best_response,
    build_kernel,
    converge,
    random_profile,
    selection_probabilities,
    verify_fixed_point,
)
from mmwave_mdp.rates import RateTable
from mmwave_mdp.states import Connection, SystemState, enumerate_states
from oracles import joint_enumeration_oracle

TWO_STATE = ChannelMatrix([[0.7, 0.3], [0.4, 0.6]])
RATES2 = RateTable((0.0, 2.0))


def env_for(L, K, N, channel, rates, oh=0.1, **solver_kw):
    space = enumerate_states(L, K, N)
    return MultiUserEnv(space, channel, rates, oh, SolverParams(**solver_kw))


class TestSelectionProbabilities:
    def test_constant_stay_policy_is_indicator_of_serving(self):
        env = env_for(3, 2, 3, TWO_STATE, RATES2)
        policy = np.zeros(len(env.space), dtype=int)
        for b, loads in ((0, (1, 1, 1)), (1, (1, 2, 0)), (2, (2, 0, 1))):
            got = selection_probabilities(policy, env.pi, loads, b, env.space)
            want = np.zeros(3)
            want[b] = 1.0
            assert np.allclose(got, want, atol=1e-12)

    def test_single_channel_state_is_indicator_of_action(self):
        env = env_for(2, 1, 2, ChannelMatrix([[1.0]]), RateTable((0.0,)))
        policy = np.array([s.serving.load - 1 for s in env.space])  # arbitrary but known
        for b in (0, 1):
            loads = (1, 1)
            got = selection_probabilities(policy, env.pi, loads, b, env.space)
            state = SystemState(Connection(0, 1), (Connection(0, 1),))
            action = policy[env.space.index_of(state)]
            want = np.zeros(2)
            want[b if action == 0 else 1 - b] = 1.0
            assert np.allclose(got, want)

    def test_matches_exhaustive_combo_sum(self):
        env = env_for(2, 2, 2, TWO_STATE, RATES2)
        rng = np.random.default_rng(8)
        policy = rng.integers(0, 2, size=len(env.space))
        pi = env.pi
        for b, loads in ((0, (1, 1)), (1, (1, 1)), (0, (2, 0))):
            want = np.zeros(2)
            for h0, h1 in itertools.product(range(2), repeat=2):
                h = (h0, h1)
                state = SystemState(
                    Connection(h[b], loads[b]), (Connection(h[1 - b], loads[1 - b]),)
                )
                act = policy[env.space.index_of(state)]
                want[b if act == 0 else 1 - b] += pi[h0] * pi[h1]
            got = selection_probabilities(policy, pi, loads, b, env.space)
            assert np.allclose(got, want, atol=1e-14)

    def test_inconsistent_loads_rejected(self):
        env = env_for(2, 2, 2, TWO_STATE, RATES2)
        policy = np.zeros(len(env.space), dtype=int)
        with pytest.raises(ValidationError):
            selection_probabilities(policy, env.pi, (1, 3), 0, env.space)
        with pytest.raises(ValidationError):
            selection_probabilities(policy, env.pi, (2, 0), 1, env.space)


class TestBuildKernel:
    def test_small_instance_matches_joint_enumeration_oracle(self):
        env = env_for(2, 2, 2, TWO_STATE, RATES2, oh=0.1)
        rng = np.random.default_rng(17)
        for trial in range(5):
            profile = PolicyProfile(
                [rng.integers(0, 2, size=len(env.space)) for _ in range(2)],
                len(env.space),
                2,
            )
            kernel, rewards = build_kernel(0, profile, env)
            want_mats, want_rewards = joint_enumeration_oracle(profile[1], env)
            for a in range(2):
                got = kernel.mats[a].toarray()
                assert np.max(np.abs(got - want_mats[a])) <= 1e-12
            assert np.max(np.abs(rewards - want_rewards)) <= 1e-12

    def test_single_ue_reduces_to_channel_product(self):
        env = env_for(3, 2, 1, TWO_STATE, RATES2)
        profile = PolicyProfile([np.zeros(len(env.space), dtype=int)], len(env.space), 3)
        kernel, _ = build_kernel(0, profile, env)
        P = env.channel.p
        for i, st in enumerate(env.space):
            ch = st.channels()
            for a in range(3):
                dense = kernel.mats[a][i].toarray().ravel()
                want = np.zeros(len(env.space))
                for combo in itertools.product(range(2), repeat=3):
                    w = P[ch[0], combo[0]] * P[ch[1], combo[1]] * P[ch[2], combo[2]]
                    neigh = [(combo[l], 0) for l in range(3) if l != a]
                    dest = SystemState(
                        Connection(combo[a], 1),
                        tuple(sorted((Connection(*c) for c in neigh), reverse=True)),
                    )
                    want[env.space.index_of(dest)] += w
                assert np.allclose(dense, want, atol=1e-13)

    def test_stay_put_others_give_deterministic_occupancy(self):
        env = env_for(2, 2, 3, TWO_STATE, RATES2)
        stay = np.zeros(len(env.space), dtype=int)
        rng = np.random.default_rng(3)
        profile = PolicyProfile(
            [rng.integers(0, 2, size=len(env.space)), stay, stay], len(env.space), 2
        )
        kernel, _ = build_kernel(0, profile, env)
        for i, st in enumerate(env.space):
            counts = (st.serving.load - 1, st.neighbors[0].load)
            for a in (0, 1):
                dests, probs = kernel.row(i, a)
                want_serving = counts[a] + 1
                want_neighbor = counts[1 - a]
                for j in dests:
                    dest = env.space[int(j)]
                    assert dest.serving.load == want_serving
                    assert dest.neighbors[0].load == want_neighbor
                assert probs.sum() == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("n_ues", [2, 3])
    def test_rows_stochastic_and_destinations_canonical(self, n_ues):
        env = env_for(3, 3, n_ues, preset("urban-nlos-dominant"), RateTable())
        profile = random_profile(env.space, n_ues, seed=5)
        for ue in range(n_ues):
            kernel, _ = build_kernel(ue, profile, env)
            kernel.validate(tol=1e-9)  # row sums within 1e-9, entries >= 0
            for m in kernel.mats:
                assert m.indices.max() < len(env.space)

    def test_profile_space_mismatch_rejected(self):
        env = env_for(2, 2, 2, TWO_STATE, RATES2)
        bad = PolicyProfile([np.zeros(3, dtype=int)] * 2, 3, 2)
        with pytest.raises(ValidationError):
            build_kernel(0, bad, env)


class TestBestResponse:
    def test_single_agent_reduction(self):
        env = env_for(2, 2, 1, TWO_STATE, RATES2)
        profile = PolicyProfile([np.zeros(len(env.space), dtype=int)], len(env.space), 2)
        policy, res = best_response(0, profile, env)
        kernel, rewards = build_kernel(0, profile, env)
        direct = value_iteration(kernel, rewards, env.solver)
        assert np.array_equal(policy, direct.policy)
        assert res.converged

    def test_zero_rates_yield_stay_tie_break(self):
        env = env_for(2, 2, 2, TWO_STATE, RateTable((0.0, 0.0)))
        profile = random_profile(env.space, 2, seed=11)
        policy, _ = best_response(0, profile, env)
        assert np.all(policy == 0)

    def test_improves_over_previous_policy(self):
        env = env_for(2, 2, 2, TWO_STATE, RATES2)
        profile = random_profile(env.space, 2, seed=23)
        kernel, rewards = build_kernel(0, profile, env)
        v_old = policy_evaluation_exact(profile[0], kernel, rewards, env.solver.omega)
        policy, _ = best_response(0, profile, env)
        v_new = policy_evaluation_exact(policy, kernel, rewards, env.solver.omega)
        assert np.all(v_new >= v_old - 1e-9)


class TestConverge:
    def test_single_ue_takes_two_iterations(self):
        env = env_for(2, 2, 1, TWO_STATE, RATES2)
        initial = random_profile(env.space, 1, seed=1)  # seed 1 starts off-optimum
        result = converge(initial, env)
        assert result.converged
        assert result.iterations == 2
        assert not np.array_equal(initial[0], result.profile[0])

    def test_zero_rates_converge_to_tie_break_profile(self):
        env = env_for(2, 2, 2, TWO_STATE, RateTable((0.0, 0.0)))
        result = converge(random_profile(env.space, 2, seed=4), env)
        assert result.converged
        assert result.iterations <= 4
        for pol in result.profile.policies:
            assert np.all(pol == 0)

    def test_round_robin_schedule_logged(self):
        env = env_for(2, 2, 2, TWO_STATE, RATES2)
        result = converge(random_profile(env.space, 2, seed=1), env)
        for rec in result.log:
            assert rec.ue == (rec.iteration - 1) % 2

    def test_default_scenario_reaches_fixed_point(self):
        env = env_for(3, 3, 3, preset("urban-nlos-dominant"), RateTable(), oh=0.1)
        result = converge(random_profile(env.space, 3, seed=0), env, max_outer=150)
        assert result.converged
        assert verify_fixed_point(result.profile, env)

    def test_non_convergence_flagged_at_tiny_budget(self):
        env = env_for(2, 2, 2, TWO_STATE, RATES2)
        result = converge(random_profile(env.space, 2, seed=1), env, max_outer=1)
        assert not result.converged
        assert len(result.last_cycle_changes()) <= 2
