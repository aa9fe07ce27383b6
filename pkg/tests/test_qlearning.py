import numpy as np
import pytest

from wavead.qlearning import (
    RLParams,
    apply_action,
    calibrate,
    fit_state_bins,
    fit_threshold_to_policy,
    predict_label,
    q_update,
    read_calibration_log,
    reward_acc,
    reward_sep,
    select_action,
    total_reward,
    write_calibration_log,
)


class TestPredictLabel:
    def test_below_boundary_is_normal(self):
        assert predict_label(0.3, 0.5) == 0

    def test_boundary_inclusive_normal(self):
        assert predict_label(0.5, 0.5) == 0

    def test_strict_exceedance_is_anomalous(self):
        assert predict_label(0.51, 0.5) == 1

    def test_negative_error_rejected(self):
        with pytest.raises(ValueError):
            predict_label(-0.1, 0.5)


class TestRewards:
    def test_sep_identical_sets(self):
        z = np.random.default_rng(0).normal(size=(5, 3))
        assert reward_sep(z, z) == 0.0

    def test_sep_reference_value(self):
        mu0 = np.zeros((1, 3))
        mu1 = np.array([[3.0, 4.0, 0.0]])
        assert reward_sep(mu0, mu1) == 25.0

    def test_sep_translation_invariance(self):
        rng = np.random.default_rng(1)
        a, b = rng.normal(size=(4, 3)), rng.normal(size=(6, 3))
        shift = rng.normal(size=3)
        assert reward_sep(a + shift, b + shift) == pytest.approx(reward_sep(a, b))

    def test_sep_empty_set(self):
        with pytest.raises(ValueError, match="centroid undefined"):
            reward_sep(np.zeros((0, 3)), np.zeros((2, 3)))

    def test_acc_cases(self):
        assert reward_acc(1, 1) == 1
        assert reward_acc(0, 1) == -1
        assert reward_acc(0, 0) == 1
        assert reward_acc(1, 0) == -1

    def test_total_reference(self):
        breakdown = total_reward(25.0, 1, 1.0)
        assert breakdown.total == 26.0
        assert breakdown.separation == 25.0 and breakdown.accuracy == 1

    def test_total_weight_annihilation(self):
        assert total_reward(17.3, -1, 0.0).total == -1.0

    def test_total_no_separation(self):
        assert total_reward(0.0, -1, 1.0).total == -1.0


class TestSelectAction:
    def test_pure_greedy(self):
        q = np.array([[0.2, 0.7]])
        assert select_action(q, 0, 0.0, 0) == 1

    def test_tie_break_lowest_index(self):
        q = np.zeros((1, 2))
        assert select_action(q, 0, 0.0, 0) == 0

    def test_uniform_when_fully_exploratory(self):
        q = np.array([[5.0, -5.0]])  # greedy would always pick 0
        rng = np.random.default_rng(123)
        draws = 10_000
        ones = sum(select_action(q, 0, 1.0, rng) for _ in range(draws))
        sigma = np.sqrt(draws * 0.25)
        assert abs(ones - draws / 2) <= 3.0 * sigma

    def test_epsilon_bounds(self):
        with pytest.raises(ValueError):
            select_action(np.zeros((1, 2)), 0, 1.5, 0)


class TestQUpdate:
    def test_zero_table_single_reward(self):
        q = np.zeros((2, 2))
        q_update(q, 0, 0, 1.0, 1, alpha=0.01, gamma=0.95)
        assert q[0, 0] == pytest.approx(0.01)

    def test_zero_alpha_is_noop(self):
        q = np.full((2, 2), 0.3)
        q_update(q, 0, 1, 5.0, 1, alpha=0.0, gamma=0.95)
        assert np.array_equal(q, np.full((2, 2), 0.3))

    def test_bootstrap_reference_value(self):
        q = np.zeros((2, 2))
        q[1] = [0.5, 0.2]
        q_update(q, 0, 0, 0.0, 1, alpha=0.1, gamma=0.95)
        assert q[0, 0] == pytest.approx(0.1 * 0.95 * 0.5)  # 0.0475

    def test_touches_exactly_one_entry(self):
        rng = np.random.default_rng(2)
        q = rng.normal(size=(4, 3))
        before = q.copy()
        q_update(q, 2, 1, 1.0, 3, alpha=0.1, gamma=0.9)
        changed = np.argwhere(q != before)
        assert [list(row) for row in changed] == [[2, 1]]

    def test_terminal_has_no_bootstrap(self):
        q = np.zeros((2, 2))
        q[1] = [100.0, 100.0]
        q_update(q, 0, 0, 1.0, None, alpha=0.5, gamma=0.95)
        assert q[0, 0] == pytest.approx(0.5)


class TestApplyAction:
    def test_boundary_step_up(self):
        assert apply_action(0.5, 2, "boundary", 0.01, 10.0) == pytest.approx(0.51)

    def test_clamp_at_floor(self):
        assert apply_action(0.0, 0, "boundary", 0.01, 10.0) == 0.0

    def test_clamp_at_ceiling(self):
        assert apply_action(10.0, 2, "boundary", 0.5, 10.0) == 10.0

    def test_classify_mode_never_moves_theta(self):
        for action in (0, 1):
            assert apply_action(0.7, action, "classify", 0.01, 10.0) == 0.7

    def test_mode_action_mismatch(self):
        with pytest.raises(ValueError):
            apply_action(0.5, 2, "classify", 0.01, 10.0)
        with pytest.raises(ValueError):
            apply_action(0.5, 3, "boundary", 0.01, 10.0)


class TestTableDefaults:
    def test_reference_hyperparameters(self):
        params = RLParams()
        assert params.learning_rate == 0.01
        assert params.discount == 0.95
        assert params.epsilon == 0.1
        assert params.epsilon_decay == 0.99
        assert params.theta0 == 0.5
        assert params.sep_weight == 1.0
        assert params.episodes == 1000
        assert params.action_mode == "classify"

    def test_validation(self):
        with pytest.raises(ValueError):
            RLParams(learning_rate=0.0).validate()
        with pytest.raises(ValueError):
            RLParams(discount=1.2).validate()
        with pytest.raises(ValueError):
            RLParams(action_mode="hybrid").validate()


def value_iteration(transitions, rewards, gamma, tol=1e-12):
    """Dynamic-programming oracle: iterate the fixed point of the optimal
    action-value equations on a known deterministic chain."""
    n_states, n_actions = rewards.shape
    q = np.zeros((n_states, n_actions))
    while True:
        new = np.empty_like(q)
        for s in range(n_states):
            for a in range(n_actions):
                new[s, a] = rewards[s, a] + gamma * q[transitions[s, a]].max()
        if np.abs(new - q).max() < tol:
            return new
        q = new


class TestAgainstValueIterationOracle:
    def test_greedy_q_matches_oracle(self):
        # fixed 2-state/2-action deterministic chain
        transitions = np.array([[0, 1], [0, 1]])
        rewards = np.array([[0.0, 1.0], [2.0, -1.0]])
        gamma = 0.9
        oracle = value_iteration(transitions, rewards, gamma)

        q = np.zeros((2, 2))
        rng = np.random.default_rng(0)
        state = 0
        for _ in range(20_000):
            action = select_action(q, state, 1.0, rng)  # pure exploration
            nxt = int(transitions[state, action])
            q_update(q, state, action, rewards[state, action], nxt,
                     alpha=0.2, gamma=gamma)
            state = nxt
        assert np.abs(q - oracle).max() < 1e-3
        assert np.array_equal(np.argmax(q, axis=1), np.argmax(oracle, axis=1))


def separable_features(n=40, n_anom=8, sep_distance=0.2, seed=0):
    """Feature batch whose anomalies occupy strictly higher error bins."""
    rng = np.random.default_rng(seed)
    errors = np.concatenate([
        rng.uniform(0.05, 0.4, size=n - n_anom),
        rng.uniform(0.6, 1.0, size=n_anom),
    ])
    uncertainties = np.full(n, 1.0)  # all tied: the high-uncertainty set is empty
    labels = np.concatenate([np.zeros(n - n_anom, dtype=int), np.ones(n_anom, dtype=int)])
    latents = np.zeros((n, 3))
    latents[labels == 1, 0] = sep_distance
    return errors, uncertainties, latents, labels


class TestCalibrate:
    def test_single_class_rejected(self):
        errors, unc, lat, _ = separable_features()
        with pytest.raises(ValueError, match="both classes"):
            calibrate(errors, unc, lat, np.zeros(len(errors), dtype=int),
                      RLParams(episodes=2), 0)

    def test_epsilon_trajectory(self):
        errors, unc, lat, labels = separable_features()
        result = calibrate(errors, unc, lat, labels, RLParams(episodes=50), 0)
        expected, eps = [], 0.1
        for _ in range(50):
            expected.append(eps)
            eps *= 0.99
        assert result.epsilons == expected
        assert np.allclose(result.epsilons, 0.1 * 0.99 ** np.arange(50), rtol=1e-12)

    def test_classify_mode_has_constant_trajectory(self):
        errors, unc, lat, labels = separable_features()
        result = calibrate(errors, unc, lat, labels, RLParams(episodes=30), 0)
        assert set(result.theta_trajectory) == {result.theta0}

    def test_separable_batch_reaches_perfect_policy(self):
        errors, unc, lat, labels = separable_features()
        params = RLParams(episodes=1000)
        result = calibrate(errors, unc, lat, labels, params, 0)
        states = result.bins.states_of(errors, unc)
        greedy = np.argmax(result.q_table[states], axis=1)
        assert np.array_equal(greedy, labels)  # 100% accuracy
        expected = len(errors) * (params.sep_weight * result.separation + 1.0)
        assert result.rewards[-1] == pytest.approx(expected)
        # the distilled boundary separates the classes
        assert errors[labels == 0].max() <= result.theta < errors[labels == 1].min()

    def test_frozen_epsilon_and_zero_table_take_action_zero(self):
        # one window per state, so every row is still all-zero when its
        # window arrives and the tie-break decides each action
        errors = np.arange(1.0, 11.0)
        unc = np.full(10, 1.0)
        labels = np.array([0] * 5 + [1] * 5)
        lat = np.zeros((10, 3))
        lat[labels == 1, 0] = 0.2
        params = RLParams(episodes=1, epsilon=0.0, epsilon_decay=1.0)
        result = calibrate(errors, unc, lat, labels, params, 0)
        assert np.array_equal(result.q_table[:, 1], np.zeros(result.q_table.shape[0]))
        states = result.bins.states_of(errors, unc)
        assert len(set(states.tolist())) == 10
        assert (result.q_table[states, 0] != 0).all()

    def test_q_values_respect_reward_bound(self):
        errors, unc, lat, labels = separable_features(sep_distance=1.5)
        for episodes in (1, 5, 25, 100):
            params = RLParams(episodes=episodes)
            result = calibrate(errors, unc, lat, labels, params, 0)
            r_max = params.sep_weight * result.separation + 1.0
            bound = r_max / (1.0 - params.discount)
            assert np.abs(result.q_table).max() <= bound + 1e-12

    def test_boundary_mode_respects_clamp(self):
        errors, unc, lat, labels = separable_features()
        params = RLParams(episodes=40, action_mode="boundary", boundary_step=0.05)
        result = calibrate(errors, unc, lat, labels, params, 0, theta_max=1.2)
        assert all(0.0 <= t <= 1.2 for t in result.theta_trajectory)
        assert 0.0 <= result.theta <= 1.2
        assert result.q_table.shape[1] == 3

    def test_theta0_quantile_override(self):
        errors, unc, lat, labels = separable_features()
        params = RLParams(episodes=1, theta0_quantile=0.5)
        result = calibrate(errors, unc, lat, labels, params, 0)
        sorted_errors = np.sort(errors)
        assert result.theta0 == sorted_errors[int(np.ceil(0.5 * len(errors))) - 1]

    def test_deterministic_given_seed(self):
        errors, unc, lat, labels = separable_features()
        a = calibrate(errors, unc, lat, labels, RLParams(episodes=50), 7)
        b = calibrate(errors, unc, lat, labels, RLParams(episodes=50), 7)
        assert np.array_equal(a.q_table, b.q_table)
        assert a.rewards == b.rewards and a.theta == b.theta

    def test_log_round_trip(self, tmp_path):
        errors, unc, lat, labels = separable_features()
        result = calibrate(errors, unc, lat, labels, RLParams(episodes=20), 0)
        path = tmp_path / "calibration.jsonl"
        write_calibration_log(result, path)
        records = read_calibration_log(path)
        assert len(records) == 20
        assert set(records[0]) == {"episode", "epsilon", "cumulative_reward", "theta"}
        assert [r["cumulative_reward"] for r in records] == result.rewards


class TestStateBins:
    def test_decile_edges(self):
        errors = np.arange(1.0, 101.0)
        unc = np.arange(1.0, 101.0)
        bins = fit_state_bins(errors, unc, error_bins=10, uncertainty_bins=2)
        assert bins.error_edges.tolist() == [10, 20, 30, 40, 50, 60, 70, 80, 90]
        assert bins.uncertainty_threshold == 75.0
        assert bins.n_states == 20

    def test_state_mapping_is_total(self):
        errors = np.arange(1.0, 101.0)
        bins = fit_state_bins(errors, errors, 10, 2)
        states = bins.states_of(np.array([-5.0, 1.0, 55.0, 1e9]), np.array([0.0, 80.0, 75.0, 76.0]))
        assert states.tolist() == [0 * 2 + 0, 0 * 2 + 1, 5 * 2 + 0, 9 * 2 + 1]


class TestThresholdFit:
    def test_separable_midpoint(self):
        errors = np.array([0.1, 0.2, 0.3, 0.8, 0.9])
        flags = np.array([0, 0, 0, 1, 1])
        assert fit_threshold_to_policy(errors, flags, 10.0) == pytest.approx(0.55)

    def test_all_normal(self):
        errors = np.array([0.1, 0.2, 0.3])
        assert fit_threshold_to_policy(errors, np.zeros(3, dtype=int), 10.0) == 0.3

    def test_all_anomalous(self):
        errors = np.array([0.1, 0.2, 0.3])
        assert fit_threshold_to_policy(errors, np.ones(3, dtype=int), 10.0) == 0.0

    def test_majority_wins_over_label_noise(self):
        rng = np.random.default_rng(3)
        normal_errors = rng.uniform(0.0, 1.0, size=200)
        anom_errors = rng.uniform(2.0, 3.0, size=30)
        errors = np.concatenate([normal_errors, anom_errors])
        flags = np.concatenate([np.zeros(200, dtype=int), np.ones(30, dtype=int)])
        # flip a sixth of the normal flags to 1: the fitted threshold must
        # still sit in the gap between the classes
        noisy = flags.copy()
        noisy[rng.choice(200, size=33, replace=False)] = 1
        theta = fit_threshold_to_policy(errors, noisy, 10.0)
        assert normal_errors.max() <= theta <= anom_errors.min()

    def test_clamped_to_theta_max(self):
        errors = np.array([0.5, 1.5])
        assert fit_threshold_to_policy(errors, np.zeros(2, dtype=int), 1.0) == 1.0
