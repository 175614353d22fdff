import itertools

import numpy as np
import pytest

from mmwave_mdp.baselines import (
    JointObservation,
    channel_policy,
    load_policy,
    rate_policy,
    upper_bound_assignment,
)
from mmwave_mdp.errors import SizeLimitError, ValidationError
from mmwave_mdp.rates import RateTable

RATES = RateTable((0.0, 1.0, 4.0))
R2 = RateTable((0.0, 2.0, 4.0))


class TestLoadPolicy:
    def test_unique_minimum(self):
        assert load_policy((0, 2, 1), np.random.default_rng(0)) == 0

    def test_ties_restricted_to_minima(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            assert load_policy((2, 0, 0), rng) in (1, 2)

    def test_uniform_tie_break(self):
        rng = np.random.default_rng(2)
        picks = np.array([load_policy((1, 1, 1), rng) for _ in range(6000)])
        counts = np.bincount(picks, minlength=3)
        # 3-sigma band around 2000 per BS
        assert np.all(np.abs(counts - 2000) < 3 * np.sqrt(6000 * (1 / 3) * (2 / 3)))


class TestRatePolicy:
    def test_los_wins_regardless_of_load(self):
        assert rate_policy((2, 0, 0), (9, 0, 0), RATES) == 0

    def test_load_discount_flips_choice(self):
        # 4/(3+1) = 1 against 2/(0+1) = 2
        assert rate_policy((2, 1), (3, 0), R2) == 1

    def test_matches_exhaustive_scan(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            ch = rng.integers(0, 3, size=4)
            loads = rng.integers(0, 5, size=4)
            got = rate_policy(ch, loads, RATES)
            scores = [RATES.rate(ch[i]) / (loads[i] + 1) for i in range(4)]
            best = max(range(4), key=lambda i: (scores[i], -i))
            assert got == best


class TestChannelPolicy:
    def test_picks_best_channel(self):
        assert channel_policy((1, 2, 0)) == 1

    def test_all_outage_tie_breaks_low(self):
        assert channel_policy((0, 0, 0)) == 0

    def test_tie_breaks_low_on_equal_los(self):
        assert channel_policy((2, 2, 1)) == 0


def second_upper_bound_oracle(channels, prev, rates, oh, charge_oh=True):
    """Independent exhaustive scan (kept separate from the implementation)."""
    n, L = channels.shape
    best, best_total = None, -1e18
    for cand in itertools.product(range(L), repeat=n):
        counts = [0] * L
        for a in cand:
            counts[a] += 1
        total = 0.0
        for k, a in enumerate(cand):
            c = oh if charge_oh and a != prev[k] else 0.0
            total += (1 - c) * rates.rate(channels[k, a]) / counts[a]
        if total > best_total:
            best_total, best = total, cand
    return np.array(best), best_total


class TestUpperBound:
    def test_single_ue_reduces_to_resulting_load_rate_choice(self):
        obs = JointObservation(np.array([[2, 1, 0]]), np.array([1, 0, 0]))
        got = upper_bound_assignment(obs, RATES, 0.0, previous=[0])
        assert got.tolist() == [0]

    def test_two_ue_hand_check(self):
        # Both LOS only on BS 0: sharing it beats any split with an outage BS.
        channels = np.array([[2, 0, 0], [2, 0, 0]])
        obs = JointObservation(channels, np.array([1, 1, 0]))
        got = upper_bound_assignment(obs, RATES, 0.1, previous=[0, 0])
        assert got.tolist() == [0, 0]

    def test_matches_second_oracle(self):
        rng = np.random.default_rng(7)
        for _ in range(30):
            channels = rng.integers(0, 3, size=(3, 3))
            prev = rng.integers(0, 3, size=3)
            loads = np.bincount(prev, minlength=3)
            obs = JointObservation(channels, loads)
            got = upper_bound_assignment(obs, RATES, 0.1, previous=prev)
            want, _ = second_upper_bound_oracle(channels, prev, RATES, 0.1)
            assert got.tolist() == want.tolist()

    def test_dominates_per_ue_rate_policy(self):
        rng = np.random.default_rng(11)
        for _ in range(30):
            channels = rng.integers(0, 3, size=(3, 3))
            prev = rng.integers(0, 3, size=3)
            loads = np.bincount(prev, minlength=3)
            obs = JointObservation(channels, loads)
            ub = upper_bound_assignment(obs, RATES, 0.1, previous=prev)
            rate_assign = np.array(
                [rate_policy(channels[k], loads, RATES) for k in range(3)]
            )
            _, ub_total = second_upper_bound_oracle(channels, prev, RATES, 0.1)
            counts = np.bincount(rate_assign, minlength=3)
            rate_total = sum(
                (1 - (0.1 if rate_assign[k] != prev[k] else 0.0))
                * RATES.rate(channels[k, rate_assign[k]])
                / counts[rate_assign[k]]
                for k in range(3)
            )
            assert ub_total >= rate_total - 1e-12

    def test_budget_guard(self):
        channels = np.zeros((30, 3), dtype=int)
        obs = JointObservation(channels, np.r_[30, 0, 0])
        with pytest.raises(SizeLimitError):
            upper_bound_assignment(obs, RATES, 0.1, previous=np.zeros(30, dtype=int))

    def test_validation(self):
        obs = JointObservation(np.array([[2, 1]]), np.array([1, 1]))  # loads sum 2 != 1 UE
        with pytest.raises(ValidationError):
            upper_bound_assignment(obs, RATES, 0.1, previous=[0])
