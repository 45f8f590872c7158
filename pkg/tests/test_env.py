"""World dynamics, reward tables, and the episode engine."""
import math

import numpy as np
import pytest

from threatprobe.env import (
    DISCOUNT,
    INITIAL_DISTANCE,
    NUM_ROUNDS,
    AgentAction,
    Intent,
    OpponentAction,
    UniformAgentPolicy,
    WorldState,
    run_episode,
    sample_index,
    state_reward,
    step_distance,
)
from threatprobe.opponents import AdversaryParams, GenerativeOpponent, NeutralOpponent

MAX_EPISODE_LOSS = (math.log(2.0) + 0.7) * (1 - DISCOUNT ** NUM_ROUNDS) / (1 - DISCOUNT)


class AlwaysStayOpponent:
    def __call__(self, view):
        return np.array([1.0, 0.0])


class TestStepDistance:
    def test_proceed_closes_one_unit(self):
        assert step_distance(12, OpponentAction.PROCEED) == 11

    def test_stay_keeps_distance(self):
        assert step_distance(7, OpponentAction.STAY) == 7

    def test_clamped_at_checkpoint(self):
        assert step_distance(0, OpponentAction.PROCEED) == 0

    @pytest.mark.parametrize("d", [-1, 13, 100])
    def test_rejects_out_of_range(self, d):
        with pytest.raises(ValueError):
            step_distance(d, OpponentAction.STAY)


class TestStateReward:
    def test_table_values(self):
        assert state_reward(Intent.NEUTRAL, AgentAction.FLARE) == -0.7
        assert state_reward(Intent.NEUTRAL, AgentAction.HAND) == -0.1
        assert state_reward(Intent.NEUTRAL, AgentAction.LOUDSPEAKER) == -0.3
        assert state_reward(Intent.ADVERSARY, AgentAction.LOUDSPEAKER) == 0.0

    def test_never_positive_and_zero_against_adversary(self):
        for a in AgentAction:
            assert state_reward(Intent.NEUTRAL, a) <= 0.0
            assert state_reward(Intent.ADVERSARY, a) == 0.0


class TestWorldState:
    def test_valid(self):
        WorldState(distance=12, round=0)
        WorldState(distance=2, round=10)

    def test_rejects_unreachable_distance(self):
        # at most one unit of approach per round
        with pytest.raises(ValueError):
            WorldState(distance=5, round=3)
        with pytest.raises(ValueError):
            WorldState(distance=13, round=0)
        with pytest.raises(ValueError):
            WorldState(distance=12, round=11)


class TestSampleIndex:
    def test_exhaustive_coverage(self):
        rng = np.random.default_rng(0)
        probs = np.array([0.2, 0.5, 0.3])
        draws = [sample_index(rng, probs) for _ in range(20000)]
        freq = np.bincount(draws, minlength=3) / len(draws)
        assert np.allclose(freq, probs, atol=0.02)

    def test_degenerate_distribution(self):
        rng = np.random.default_rng(0)
        assert all(sample_index(rng, np.array([0.0, 1.0])) == 1 for _ in range(100))


class TestRunEpisode:
    def test_ten_rounds_and_reachable_distance(self):
        rec = run_episode(UniformAgentPolicy(), NeutralOpponent(), Intent.NEUTRAL, 123)
        assert len(rec.rounds) == NUM_ROUNDS
        assert rec.rounds[-1].distance_after >= INITIAL_DISTANCE - NUM_ROUNDS

    def test_distance_monotone_and_bounded_by_round(self):
        rec = run_episode(UniformAgentPolicy(),
                          GenerativeOpponent(AdversaryParams(2.0, 1.0)),
                          Intent.ADVERSARY, 5)
        d_prev = INITIAL_DISTANCE
        for t, rr in enumerate(rec.rounds):
            assert rr.distance_after <= d_prev
            assert rr.distance_after >= INITIAL_DISTANCE - (t + 1)
            d_prev = rr.distance_after

    def test_always_stay_never_moves(self):
        rec = run_episode(UniformAgentPolicy(), AlwaysStayOpponent(),
                          Intent.ADVERSARY, 77)
        assert all(rr.distance_after == INITIAL_DISTANCE for rr in rec.rounds)

    def test_deterministic_and_bitwise_identical(self):
        opp = GenerativeOpponent(AdversaryParams(1.5, 1.5))
        a = run_episode(UniformAgentPolicy(), opp, Intent.ADVERSARY, 42)
        b = run_episode(UniformAgentPolicy(), opp, Intent.ADVERSARY, 42)
        assert a == b

    def test_return_recomputes_from_rounds(self):
        rec = run_episode(UniformAgentPolicy(),
                          GenerativeOpponent(AdversaryParams(1.5, 1.5)),
                          Intent.ADVERSARY, 0)
        recomputed = sum(DISCOUNT ** t * rr.reward for t, rr in enumerate(rec.rounds))
        assert abs(recomputed - rec.discounted_return) < 1e-12

    def test_return_within_loss_bound(self):
        rec = run_episode(UniformAgentPolicy(),
                          GenerativeOpponent(AdversaryParams(1.5, 1.5)),
                          Intent.ADVERSARY, 0)
        assert -MAX_EPISODE_LOSS - 1e-9 <= rec.discounted_return <= 0.0

    def test_rewards_never_positive(self):
        for seed in range(5):
            rec = run_episode(UniformAgentPolicy(), NeutralOpponent(),
                              Intent.NEUTRAL, seed)
            assert all(rr.reward <= 0.0 for rr in rec.rounds)

    def test_belief_chain_is_consistent(self):
        rec = run_episode(UniformAgentPolicy(), NeutralOpponent(), Intent.NEUTRAL, 9)
        b = 0.5
        for rr in rec.rounds:
            assert rr.belief_before == b
            b = rr.belief_after
        assert rec.final_belief == b
