"""Opponent family: reaction tables, the closing MDP, blending, averaging."""
import numpy as np
import pytest
from scipy import integrate

from threatprobe.opponents import (
    AdversaryParams,
    adversary_mdp_reward,
    adversary_policy,
    averaged_adversary_policy,
    default_q_table,
    kl_blend,
    neutral_policy,
    quadrature_nodes,
    sample_adversary_params,
    soft_rational_policy,
    solve_adversary_q,
)
from threatprobe.env import AgentAction

from conftest import blend_objective, blend_oracle

GAMMA_O = 0.95


def dp_q_oracle(horizon=500):
    """Brute-force finite-horizon DP, written independently of the solver."""
    v = np.zeros(13)
    q = np.zeros((13, 2))
    for _ in range(horizon):
        for d in range(13):
            for a in range(2):
                d2 = d if a == 0 else max(0, d - 1)
                q[d, a] = (1.1 ** (12 - d2) - 1.0) + GAMMA_O * v[d2]
        v = q.max(axis=1).copy()
    return q


class TestNeutralPolicy:
    def test_table_rows(self):
        assert np.allclose(neutral_policy(AgentAction.FLARE), [0.90, 0.10])
        assert np.allclose(neutral_policy(AgentAction.HAND), [0.60, 0.40])
        assert np.allclose(neutral_policy(AgentAction.LOUDSPEAKER), [0.75, 0.25])

    def test_rows_normalized(self):
        for a in AgentAction:
            assert abs(neutral_policy(a).sum() - 1.0) < 1e-12


class TestAdversaryParams:
    def test_accepts_support(self):
        AdversaryParams(1.0, 2.0)
        AdversaryParams(1.5, 1.5)

    @pytest.mark.parametrize("alpha,beta", [(0.5, 1.5), (1.5, 2.5), (0.0, 0.0)])
    def test_rejects_outside_support(self, alpha, beta):
        with pytest.raises(ValueError):
            AdversaryParams(alpha, beta)


class TestMdpReward:
    def test_zero_at_start(self):
        assert adversary_mdp_reward(12, 12) == 0.0

    def test_two_units_in(self):
        assert abs(adversary_mdp_reward(12, 10) - 0.21) < 1e-12

    def test_ten_units_in(self):
        assert abs(adversary_mdp_reward(12, 2) - (1.1 ** 10 - 1.0)) < 1e-12

    def test_rejects_beyond_start(self):
        with pytest.raises(ValueError):
            adversary_mdp_reward(12, 13)


class TestSolveAdversaryQ:
    def test_matches_brute_force_dp(self):
        table = solve_adversary_q()
        assert np.allclose(table.q, dp_q_oracle(), atol=1e-7)

    def test_proceed_strictly_better_away_from_checkpoint(self):
        q = dp_q_oracle()
        table = solve_adversary_q()
        for d in range(1, 13):
            assert q[d, 1] > q[d, 0]
            assert table.q[d, 1] > table.q[d, 0]

    def test_clamped_state_closed_form(self):
        table = solve_adversary_q(tol=1e-12)
        closed = (1.1 ** 12 - 1.0) / (1.0 - GAMMA_O)
        assert abs(table.q[0, 0] - closed) < 1e-8

    def test_stops_below_tolerance(self):
        table = solve_adversary_q(tol=1e-10)
        assert table.residuals[-1] < 1e-10

    def test_residuals_contract_geometrically(self):
        table = solve_adversary_q(tol=1e-10)
        rs = table.residuals
        for a, b in zip(rs, rs[1:]):
            if a > 1e-12:
                assert b <= GAMMA_O * a + 1e-12

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            solve_adversary_q(gamma_o=1.0)
        with pytest.raises(ValueError):
            solve_adversary_q(tol=0.0)


class TestSoftRationalPolicy:
    def test_equal_values_give_even_split(self):
        table = solve_adversary_q()
        table.q[5] = np.array([2.0, 2.0])
        assert np.allclose(soft_rational_policy(table, 1.0, 5), [0.5, 0.5])

    def test_small_alpha_near_uniform(self):
        table = default_q_table()
        pol = soft_rational_policy(table, 1e-9, 6)
        assert np.allclose(pol, [0.5, 0.5], atol=1e-6)

    def test_favors_proceed_at_solved_values(self):
        pol = soft_rational_policy(default_q_table(), 1.0, 6)
        oracle = dp_q_oracle()[6]
        expected = np.exp(oracle - oracle.max())
        expected /= expected.sum()
        assert pol[1] > pol[0]
        assert np.allclose(pol, expected, atol=1e-7)

    def test_huge_logits_do_not_overflow(self):
        table = solve_adversary_q()
        table.q[3] = np.array([0.0, 5000.0])
        pol = soft_rational_policy(table, 2.0, 3)
        assert np.isfinite(pol).all()
        assert abs(pol.sum() - 1.0) < 1e-12

    def test_rejects_nonpositive_alpha(self):
        with pytest.raises(ValueError):
            soft_rational_policy(default_q_table(), 0.0, 5)


class TestKlBlend:
    def test_zero_beta_returns_goal(self):
        p = np.array([0.8, 0.2])
        q = np.array([0.3, 0.7])
        assert np.allclose(kl_blend(p, q, 0.0), p, atol=1e-12)

    def test_identical_inputs_fixed_point(self):
        p = np.array([0.45, 0.55])
        for beta in (0.0, 1.0, 7.5):
            assert np.allclose(kl_blend(p, p, beta), p, atol=1e-12)

    def test_worked_example(self):
        # sqrt(0.8*0.5) : sqrt(0.2*0.5) reduces to 2 : 1
        out = kl_blend(np.array([0.8, 0.2]), np.array([0.5, 0.5]), 1.0)
        assert np.allclose(out, [2.0 / 3.0, 1.0 / 3.0], atol=1e-12)

    def test_rejects_zero_support_and_negative_beta(self):
        with pytest.raises(ValueError):
            kl_blend(np.array([1.0, 0.0]), np.array([0.5, 0.5]), 1.0)
        with pytest.raises(ValueError):
            kl_blend(np.array([0.5, 0.5]), np.array([0.0, 1.0]), 1.0)
        with pytest.raises(ValueError):
            kl_blend(np.array([0.5, 0.5]), np.array([0.5, 0.5]), -0.1)

    def test_matches_numeric_minimizer_on_random_instances(self):
        """Closed form vs direct minimization of the objective, 100 cases."""
        rng = np.random.default_rng(2024)
        for _ in range(100):
            p = rng.dirichlet([1.5, 1.5])
            q = rng.dirichlet([1.5, 1.5])
            p = np.clip(p, 1e-3, None); p /= p.sum()
            q = np.clip(q, 1e-3, None); q /= q.sum()
            beta = rng.uniform(0.0, 4.0)
            closed = kl_blend(p, q, beta)
            numeric = blend_oracle(p, q, beta)
            assert np.allclose(closed, numeric, atol=1e-6)
            # and the closed form never scores worse than the numeric optimum
            assert (blend_objective(closed[0], p, q, beta)
                    <= blend_objective(numeric[0], p, q, beta) + 1e-10)


class TestAdversaryPolicy:
    def test_goal_equal_to_neutral_is_fixed_point(self):
        # rig the closing values so the goal policy reproduces the neutral
        # row exactly; the blend must then return it for any beta
        table = solve_adversary_q()
        table.q[4] = np.log(neutral_policy(AgentAction.HAND))
        for beta in (1.0, 1.5, 2.0):
            pol = adversary_policy(4, AgentAction.HAND, AdversaryParams(1.0, beta),
                                   q_table=table)
            assert np.allclose(pol, neutral_policy(AgentAction.HAND), atol=1e-12)

    def test_composition_matches_components(self):
        params = AdversaryParams(1.5, 1.5)
        expected = kl_blend(soft_rational_policy(default_q_table(), 1.5, 6),
                            neutral_policy(AgentAction.FLARE), 1.5)
        assert np.allclose(adversary_policy(6, AgentAction.FLARE, params), expected,
                           atol=1e-15)

    def test_more_imitation_moves_toward_neutral(self):
        neu = neutral_policy(AgentAction.FLARE)
        dists = []
        for beta in (1.0, 1.5, 2.0):
            pol = adversary_policy(6, AgentAction.FLARE, AdversaryParams(1.5, beta))
            dists.append(0.5 * np.abs(pol - neu).sum())
        assert dists[0] > dists[1] > dists[2]


class TestAveragedAdversaryPolicy:
    def test_quadrature_weights_form_convex_combination(self):
        pts, wts = quadrature_nodes(8)
        assert abs(wts.sum() - 1.0) < 1e-12
        assert (wts > 0.0).all()
        assert ((pts >= 1.0) & (pts <= 2.0)).all()

    def test_refinement_agreement(self):
        for d in (12, 6, 2):
            for a_a in AgentAction:
                coarse = averaged_adversary_policy(d, a_a, nodes=8)
                fine = averaged_adversary_policy(d, a_a, nodes=32)
                assert np.allclose(coarse, fine, atol=1e-3)

    def test_matches_adaptive_quadrature(self):
        """Independent integrator over the same family."""
        def entry(d, a_a, k):
            val, _ = integrate.dblquad(
                lambda b, a: adversary_policy(d, a_a, AdversaryParams(a, b))[k],
                1, 2, 1, 2, epsabs=1e-10, epsrel=1e-10)
            return val

        for d, a_a in [(12, AgentAction.FLARE), (6, AgentAction.HAND)]:
            avg = averaged_adversary_policy(d, a_a)
            assert abs(avg[0] - entry(d, a_a, 0)) < 1e-7
            assert abs(avg[1] - entry(d, a_a, 1)) < 1e-7

    def test_full_support_and_normalized(self):
        for d in range(13):
            for a_a in AgentAction:
                avg = averaged_adversary_policy(d, a_a)
                assert (avg > 0.0).all()
                assert abs(avg.sum() - 1.0) < 1e-9

    def test_within_convex_hull_of_family(self):
        pts, _ = quadrature_nodes(8)
        for d, a_a in [(12, AgentAction.HAND), (5, AgentAction.FLARE)]:
            members = np.array([adversary_policy(d, a_a, AdversaryParams(a, b))
                                for a in pts for b in pts])
            avg = averaged_adversary_policy(d, a_a)
            assert (avg >= members.min(axis=0) - 1e-12).all()
            assert (avg <= members.max(axis=0) + 1e-12).all()


class TestSampleAdversaryParams:
    def test_mean_and_support(self):
        rng = np.random.default_rng(11)
        draws = [sample_adversary_params(rng) for _ in range(100_000)]
        alphas = np.array([p.alpha for p in draws])
        betas = np.array([p.beta for p in draws])
        assert ((alphas >= 1.0) & (alphas <= 2.0)).all()
        assert ((betas >= 1.0) & (betas <= 2.0)).all()
        assert abs(alphas.mean() - 1.5) < 0.01
        assert abs(betas.mean() - 1.5) < 0.01

    def test_independence(self):
        rng = np.random.default_rng(12)
        draws = [sample_adversary_params(rng) for _ in range(100_000)]
        alphas = np.array([p.alpha for p in draws])
        betas = np.array([p.beta for p in draws])
        corr = np.corrcoef(alphas, betas)[0, 1]
        assert abs(corr) < 0.02
