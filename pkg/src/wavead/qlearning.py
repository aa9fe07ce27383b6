"""Tabular Q-learning calibration of the anomaly decision boundary.

The agent sees each window as a discrete state built from its
reconstruction-error decile and its uncertainty split (below/above the
75th percentile). Rewards combine a fixed separation term, the squared
distance between the latent centroids of the two label classes, with a
per-step accuracy term of +1/-1 for matching the window's label.

Two action modes are supported. In ``classify`` mode the two actions are
the predicted labels themselves and the boundary is distilled afterwards
from the greedy policy: windows are sorted by error and the threshold
minimizing disagreement with the policy's labels is taken (midpoint of the
two errors adjacent to the split; ties resolved toward the larger
threshold). In ``boundary`` mode the actions nudge the threshold by
{-step, 0, +step} and predictions come from the running threshold.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .autoencoder import nearest_rank

ACTION_MODES = ("classify", "boundary")
_BOUNDARY_DELTAS = (-1.0, 0.0, 1.0)


@dataclass
class RLParams:
    """Agent hyperparameters; defaults reproduce the reference setting."""

    learning_rate: float = 0.01  # alpha
    discount: float = 0.95  # gamma
    epsilon: float = 0.1
    epsilon_decay: float = 0.99
    theta0: float = 0.5
    theta0_quantile: float | None = None  # optional data-driven start
    sep_weight: float = 1.0  # lambda
    episodes: int = 1000
    action_mode: str = "classify"
    boundary_step: float = 0.01  # delta, boundary mode only
    error_bins: int = 10
    uncertainty_bins: int = 2

    def validate(self) -> None:
        if not 0.0 < self.learning_rate <= 1.0:
            raise ValueError("learning_rate must be in (0, 1]")
        if not 0.0 <= self.discount <= 1.0:
            raise ValueError("discount must be in [0, 1]")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must be in [0, 1]")
        if not 0.0 < self.epsilon_decay <= 1.0:
            raise ValueError("epsilon_decay must be in (0, 1]")
        if self.sep_weight < 0.0:
            raise ValueError("sep_weight must be nonnegative")
        if self.boundary_step <= 0.0:
            raise ValueError("boundary_step must be positive")
        if self.episodes < 1:
            raise ValueError("episodes must be positive")
        if self.action_mode not in ACTION_MODES:
            raise ValueError(f"action_mode must be one of {ACTION_MODES}")
        if self.error_bins < 1 or self.uncertainty_bins < 1:
            raise ValueError("bin counts must be positive")

    @property
    def n_actions(self) -> int:
        return 2 if self.action_mode == "classify" else len(_BOUNDARY_DELTAS)


@dataclass
class StateBins:
    """Fixed discretization of (error, uncertainty) into table states."""

    error_edges: np.ndarray  # interior quantile edges, length error_bins - 1
    uncertainty_threshold: float
    error_bins: int
    uncertainty_bins: int

    @property
    def n_states(self) -> int:
        return self.error_bins * self.uncertainty_bins

    def state_of(self, error: float, uncertainty: float) -> int:
        # values equal to an edge stay in the lower bin, matching the
        # <=-inclusive threshold convention used throughout
        e_bin = int(np.searchsorted(self.error_edges, error, side="left"))
        u_bin = 0
        if self.uncertainty_bins > 1 and uncertainty > self.uncertainty_threshold:
            u_bin = 1
        return e_bin * self.uncertainty_bins + u_bin

    def states_of(self, errors: np.ndarray, uncertainties: np.ndarray) -> np.ndarray:
        e_bins = np.searchsorted(self.error_edges, errors, side="left")
        if self.uncertainty_bins > 1:
            u_bins = (uncertainties > self.uncertainty_threshold).astype(int)
        else:
            u_bins = np.zeros(len(errors), dtype=int)
        return e_bins * self.uncertainty_bins + u_bins


def fit_state_bins(
    errors: np.ndarray,
    uncertainties: np.ndarray,
    error_bins: int = 10,
    uncertainty_bins: int = 2,
) -> StateBins:
    """Quantile edges for errors plus the 75th-percentile uncertainty split."""
    errors = np.asarray(errors, dtype=float)
    quantiles = [q / error_bins for q in range(1, error_bins)]
    edges = np.array([nearest_rank(errors, q) for q in quantiles])
    threshold = nearest_rank(np.asarray(uncertainties, dtype=float), 0.75)
    return StateBins(
        error_edges=edges,
        uncertainty_threshold=threshold,
        error_bins=error_bins,
        uncertainty_bins=uncertainty_bins,
    )


def predict_label(error: float, theta: float) -> int:
    """0 (normal) when the error is at or below the boundary, else 1."""
    if error < 0:
        raise ValueError("reconstruction error must be nonnegative")
    return 0 if error <= theta else 1


def reward_sep(latents_normal: np.ndarray, latents_anomalous: np.ndarray) -> float:
    """Squared distance between the two latent centroids."""
    a = np.asarray(latents_normal, dtype=float)
    b = np.asarray(latents_anomalous, dtype=float)
    if a.size == 0 or b.size == 0:
        raise ValueError("centroid undefined for an empty class")
    diff = a.mean(axis=0) - b.mean(axis=0)
    return float((diff**2).sum())


def reward_acc(predicted: int, truth: int) -> int:
    """+1 for a matching label, -1 otherwise."""
    return 1 if int(predicted) == int(truth) else -1


@dataclass
class RewardBreakdown:
    separation: float
    accuracy: int
    total: float


def total_reward(r_sep: float, r_acc: int, sep_weight: float) -> RewardBreakdown:
    """Weighted sum ``sep_weight * r_sep + r_acc``."""
    if sep_weight < 0:
        raise ValueError("sep_weight must be nonnegative")
    return RewardBreakdown(
        separation=r_sep, accuracy=r_acc, total=sep_weight * r_sep + r_acc
    )


def select_action(
    q_table: np.ndarray,
    state: int,
    epsilon: float,
    rng: np.random.Generator | int,
) -> int:
    """Epsilon-greedy over the state's row; ties go to the lowest index."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must be in [0, 1]")
    rng = np.random.default_rng(rng)
    n_actions = q_table.shape[1]
    if epsilon > 0.0 and rng.random() < epsilon:
        return int(rng.integers(n_actions))
    return int(np.argmax(q_table[state]))


def q_update(
    q_table: np.ndarray,
    state: int,
    action: int,
    reward: float,
    next_state: int | None,
    alpha: float,
    gamma: float,
) -> np.ndarray:
    """Temporal-difference update of one entry; ``next_state=None`` is terminal."""
    bootstrap = 0.0 if next_state is None else gamma * float(q_table[next_state].max())
    q_table[state, action] += alpha * (reward + bootstrap - q_table[state, action])
    return q_table


def apply_action(
    theta: float,
    action: int,
    mode: str,
    step: float,
    theta_max: float,
) -> float:
    """Boundary mode moves theta by {-step, 0, +step} and clamps; classify
    mode leaves it untouched."""
    if mode == "classify":
        if action not in (0, 1):
            raise ValueError("classify mode has actions {0, 1}")
        return theta
    if mode == "boundary":
        if not 0 <= action < len(_BOUNDARY_DELTAS):
            raise ValueError("boundary mode has actions {0, 1, 2}")
        return float(np.clip(theta + _BOUNDARY_DELTAS[action] * step, 0.0, theta_max))
    raise ValueError(f"unknown action mode: {mode!r}")


def fit_threshold_to_policy(
    errors: np.ndarray, policy_labels: np.ndarray, theta_max: float
) -> float:
    """Distill a scalar boundary from per-window policy labels.

    Scans splits of the error-sorted windows and takes the one that
    disagrees least with the policy, breaking ties toward the larger
    threshold; the boundary is the midpoint of the errors adjacent to the
    chosen split.
    """
    errors = np.asarray(errors, dtype=float)
    flags = np.asarray(policy_labels, dtype=int)
    order = np.argsort(errors, kind="stable")
    e = errors[order]
    f = flags[order]
    n = e.size
    ones_below = np.concatenate([[0], np.cumsum(f)])
    zeros_below = np.arange(n + 1) - ones_below
    zeros_total = int((f == 0).sum())
    # split k predicts 1 for sorted positions >= k
    mistakes = ones_below + (zeros_total - zeros_below)
    best = int(np.flatnonzero(mistakes == mistakes.min())[-1])
    if best == n:
        theta = float(e[-1])
    elif best == 0:
        theta = 0.0
    else:
        theta = float((e[best - 1] + e[best]) / 2.0)
    return float(np.clip(theta, 0.0, theta_max))


@dataclass
class CalibrationResult:
    """Everything a calibration run produces."""

    q_table: np.ndarray
    theta: float
    theta_trajectory: list[float]  # boundary at the end of each episode
    rewards: list[float]  # cumulative reward per episode
    epsilons: list[float]  # exploration rate used in each episode
    bins: StateBins
    separation: float
    action_mode: str
    theta_max: float
    theta0: float


def calibrate(
    errors: np.ndarray,
    uncertainties: np.ndarray,
    latents: np.ndarray,
    labels: np.ndarray,
    params: RLParams,
    rng_seed: int | np.random.Generator,
    theta_max: float | None = None,
) -> CalibrationResult:
    """Run the episodic boundary-calibration loop over a feature batch.

    ``errors`` are expected in normalized units (raw errors divided by the
    training scale) so the default starting boundary is meaningful.
    Episodes traverse the windows in order; each step's successor state is
    the next window's state, with the episode end treated as terminal.
    Epsilon decays by ``epsilon_decay`` after every episode.
    """
    params.validate()
    errors = np.asarray(errors, dtype=float)
    uncertainties = np.asarray(uncertainties, dtype=float)
    latents = np.asarray(latents, dtype=float)
    labels = np.asarray(labels, dtype=int)
    n = errors.size
    if not (n == uncertainties.size == latents.shape[0] == labels.size):
        raise ValueError("feature arrays must share their length")
    if labels.min() == labels.max():
        raise ValueError("calibration requires both classes")

    if theta_max is None:
        theta_max = 2.0 * nearest_rank(errors, 0.999)
    theta0 = params.theta0
    if params.theta0_quantile is not None:
        theta0 = nearest_rank(errors, params.theta0_quantile)
    theta0 = float(np.clip(theta0, 0.0, theta_max))

    bins = fit_state_bins(errors, uncertainties, params.error_bins, params.uncertainty_bins)
    states = bins.states_of(errors, uncertainties)
    separation = reward_sep(latents[labels == 0], latents[labels == 1])

    q = np.zeros((bins.n_states, params.n_actions))
    rng = np.random.default_rng(rng_seed)
    classify = params.action_mode == "classify"
    sep_term = params.sep_weight * separation

    theta = theta0
    rewards: list[float] = []
    epsilons: list[float] = []
    trajectory: list[float] = []
    epsilon = params.epsilon
    for _ in range(params.episodes):
        cumulative = 0.0
        for i in range(n):
            s = int(states[i])
            a = select_action(q, s, epsilon, rng)
            if classify:
                predicted = a
            else:
                theta = apply_action(
                    theta, a, params.action_mode, params.boundary_step, theta_max
                )
                predicted = predict_label(errors[i], theta)
            r = sep_term + reward_acc(predicted, labels[i])
            next_state = int(states[i + 1]) if i + 1 < n else None
            q_update(q, s, a, r, next_state, params.learning_rate, params.discount)
            cumulative += r
        rewards.append(cumulative)
        epsilons.append(epsilon)
        trajectory.append(theta)
        epsilon *= params.epsilon_decay

    if classify:
        greedy = np.argmax(q[states], axis=1)
        theta = fit_threshold_to_policy(errors, greedy, theta_max)

    return CalibrationResult(
        q_table=q,
        theta=float(theta),
        theta_trajectory=trajectory,
        rewards=rewards,
        epsilons=epsilons,
        bins=bins,
        separation=separation,
        action_mode=params.action_mode,
        theta_max=float(theta_max),
        theta0=theta0,
    )


def write_calibration_log(result: CalibrationResult, path: str | Path) -> None:
    """One JSON record per episode: episode, epsilon, cumulative_reward, theta."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for episode, (eps, reward, theta) in enumerate(
            zip(result.epsilons, result.rewards, result.theta_trajectory)
        ):
            fh.write(
                json.dumps(
                    {
                        "episode": episode,
                        "epsilon": float(eps),
                        "cumulative_reward": float(reward),
                        "theta": float(theta),
                    },
                    sort_keys=True,
                )
                + "\n"
            )


def read_calibration_log(path: str | Path) -> list[dict]:
    with Path(path).open(encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]
