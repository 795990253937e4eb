"""Learning-from-reaction loop: alert actor, crowd behavior, change-detecting critic.

The actor is the snapshot classifier; when it raises an alert and the alert
was justified, the simulated crowd disperses (with probability p_react) and
the resulting channel change shows up in the post-alert snapshot series.  The
critic, a small 1-D CNN over time, scores that series and turns it into the
actor's reward: +1 when it sees a reaction, -1 when it does not, 0 reward (and
no update) when no alert was raised because nothing observable follows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .beamtraining import feature_vector
from .classifier import Adam, FFNN, TrainingDiverged, _glorot_uniform
from .features import AlertArea, Standardizer
from .scene import (
    LABEL_COMPLIANCE,
    LABEL_VIOLATION,
    Arrangement,
    Person,
    ScenarioConfig,
    label_of,
    sample_arrangement,
)


@dataclass(frozen=True)
class BehaviorModel:
    """How the crowd responds to an alert."""

    p_react: float = 0.8
    react_delay: int = 5
    react_duration: int = 20
    jitter_sigma: float = 0.03
    separation_margin: float = 0.1

    def __post_init__(self):
        if not 0.0 <= self.p_react <= 1.0:
            raise ValueError("p_react must be within [0, 1]")
        if self.react_delay < 0 or self.react_duration < 1:
            raise ValueError("react_delay must be >= 0 and react_duration >= 1")


@dataclass
class Episode:
    """One alert decision with its observed aftermath."""

    pre_alert_features: np.ndarray
    alert_issued: bool
    post_series: np.ndarray | None
    true_label: int
    critic_reward: float
    action: int


def _home_region(cfg: ScenarioConfig, person: Person):
    for region in cfg.environment.walkable:
        if region.contains(person.x, person.y, margin=-1e-9):
            return region
    return cfg.environment.walkable[0]


def _separation_targets(cfg: ScenarioConfig, people, behavior: BehaviorModel, rng) -> np.ndarray:
    """Final positions with every pair at least safe_distance + margin apart."""
    pos = np.array([[p.x, p.y] for p in people], dtype=float)
    radius = np.array([p.radius for p in people])
    regions = [_home_region(cfg, p) for p in people]
    need = cfg.safe_distance + behavior.separation_margin
    n = len(people)
    last_min = -1.0
    for _ in range(500):
        min_dist = math.inf
        moved = False
        for i in range(n):
            for j in range(i + 1, n):
                d = pos[j] - pos[i]
                dist = float(np.hypot(d[0], d[1]))
                min_dist = min(min_dist, dist)
                if dist >= need:
                    continue
                direction = d / dist if dist > 1e-9 else _random_unit(rng)
                push = 0.5 * (need - dist) + 1e-6
                pos[i] -= push * direction
                pos[j] += push * direction
                pos[i] = regions[i].clamp(pos[i][0], pos[i][1], margin=radius[i])
                pos[j] = regions[j].clamp(pos[j][0], pos[j][1], margin=radius[j])
                moved = True
        if not moved:
            break
        if abs(min_dist - last_min) < 1e-9:
            # clamped against a wall; nudge the crowd to open a path
            pos += rng.normal(0.0, 0.05, size=pos.shape)
            for k in range(n):
                pos[k] = regions[k].clamp(pos[k][0], pos[k][1], margin=radius[k])
        last_min = min_dist
    return pos


def _random_unit(rng) -> np.ndarray:
    angle = rng.uniform(0.0, 2.0 * math.pi)
    return np.array([math.cos(angle), math.sin(angle)])


def simulate_reaction(
    cfg: ScenarioConfig,
    arrangement: Arrangement,
    alert_issued: bool,
    behavior: BehaviorModel,
    rng: np.random.Generator,
    n_snapshots: int = 30,
) -> list[tuple[Person, ...]]:
    """Post-alert position trajectory, one people tuple per snapshot.

    A justified alert triggers (with probability p_react) a dispersal: the
    crowd moves linearly to separated positions over react_duration snapshots
    after react_delay.  Otherwise everyone just jitters in place.  Movement is
    clamped to each person's walkable region.
    """
    people0 = arrangement.people
    is_violation = label_of(people0, cfg.safe_distance) == LABEL_VIOLATION
    reacts = alert_issued and is_violation and (rng.random() < behavior.p_react)
    frames: list[tuple[Person, ...]] = []
    if reacts:
        start = np.array([[p.x, p.y] for p in people0], dtype=float)
        target = _separation_targets(cfg, people0, behavior, rng)
        for t in range(n_snapshots):
            progress = min(1.0, max(0.0, (t + 1 - behavior.react_delay) / behavior.react_duration))
            pos = start + progress * (target - start)
            frames.append(tuple(Person(float(x), float(y), p.radius) for (x, y), p in zip(pos, people0)))
        return frames
    regions = [_home_region(cfg, p) for p in people0]
    for _ in range(n_snapshots):
        frame = []
        for person, region in zip(people0, regions):
            dx, dy = rng.normal(0.0, behavior.jitter_sigma, size=2)
            x, y = region.clamp(person.x + dx, person.y + dy, margin=person.radius)
            frame.append(Person(float(x), float(y), person.radius))
        frames.append(tuple(frame))
    return frames


# ---------------------------------------------------------------------------
# critic
# ---------------------------------------------------------------------------


class CriticCNN:
    """Two valid 1-D convolutions over time, global average pooling, sigmoid head."""

    def __init__(
        self,
        feature_dim: int,
        series_len: int,
        channels: tuple[int, int] = (16, 32),
        kernel: int = 5,
        seed: int = 0,
    ):
        if series_len < 2 * (kernel - 1) + 1:
            raise ValueError(f"series_len {series_len} too short for two kernel-{kernel} convolutions")
        self.feature_dim = feature_dim
        self.series_len = series_len
        self.kernel = kernel
        self.channels = channels
        self.seed = seed
        c1, c2 = channels
        rng = np.random.default_rng(seed)
        self.w1 = _glorot_uniform(rng, kernel * feature_dim, kernel * c1, (kernel, feature_dim, c1))
        self.b1 = np.zeros(c1)
        self.w2 = _glorot_uniform(rng, kernel * c1, kernel * c2, (kernel, c1, c2))
        self.b2 = np.zeros(c2)
        self.w_out = _glorot_uniform(rng, c2, 1, (c2,))
        self.b_out = np.zeros(1)

    @property
    def params(self) -> list[np.ndarray]:
        return [self.w1, self.b1, self.w2, self.b2, self.w_out, self.b_out]

    def _check_input(self, series: np.ndarray) -> np.ndarray:
        series = np.asarray(series, dtype=float)
        if series.ndim == 2:
            series = series[None, :, :]
        if series.shape[1] != self.series_len or series.shape[2] != self.feature_dim:
            raise ValueError(
                f"expected series of shape ({self.series_len}, {self.feature_dim}), got {series.shape[1:]}"
            )
        return series

    def _forward_cached(self, x: np.ndarray):
        win1 = np.lib.stride_tricks.sliding_window_view(x, self.kernel, axis=1)
        z1 = np.einsum("btck,kco->bto", win1, self.w1) + self.b1
        a1 = np.maximum(z1, 0.0)
        win2 = np.lib.stride_tricks.sliding_window_view(a1, self.kernel, axis=1)
        z2 = np.einsum("btck,kco->bto", win2, self.w2) + self.b2
        a2 = np.maximum(z2, 0.0)
        pooled = a2.mean(axis=1)
        logit = pooled @ self.w_out + self.b_out[0]
        return win1, z1, a1, win2, z2, a2, pooled, logit

    def forward(self, series: np.ndarray) -> np.ndarray:
        """Reaction probabilities; accepts one series or a batch."""
        x = self._check_input(series)
        logit = self._forward_cached(x)[-1]
        return _sigmoid(logit)

    def loss_and_grads(self, series: np.ndarray, targets: np.ndarray):
        """Mean binary cross-entropy of the reaction head, with gradients."""
        x = self._check_input(series)
        y = np.asarray(targets, dtype=float).reshape(-1)
        n = x.shape[0]
        win1, z1, a1, win2, z2, a2, pooled, logit = self._forward_cached(x)
        # stable BCE on logits
        loss = float(np.mean(np.maximum(logit, 0.0) - logit * y + np.log1p(np.exp(-np.abs(logit)))))
        dlogit = (_sigmoid(logit) - y) / n
        dw_out = pooled.T @ dlogit
        db_out = np.array([dlogit.sum()])
        dpooled = np.outer(dlogit, self.w_out)
        da2 = np.repeat(dpooled[:, None, :], a2.shape[1], axis=1) / a2.shape[1]
        dz2 = da2 * (z2 > 0.0)
        dw2 = np.einsum("btck,bto->kco", win2, dz2)
        db2 = dz2.sum(axis=(0, 1))
        da1 = np.zeros_like(a1)
        for k in range(self.kernel):
            da1[:, k:k + dz2.shape[1], :] += dz2 @ self.w2[k].T
        dz1 = da1 * (z1 > 0.0)
        dw1 = np.einsum("btck,bto->kco", win1, dz1)
        db1 = dz1.sum(axis=(0, 1))
        return loss, [dw1, db1, dw2, db2, dw_out, db_out]

    def score(self, series: np.ndarray) -> float:
        return float(self.forward(series)[0])


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=float)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def critic_score(critic: CriticCNN, post_series: np.ndarray) -> float:
    """Probability that the series shows a crowd reaction."""
    return critic.score(post_series)


def alert_reward(alert_issued: bool, score: float) -> float:
    """+1 for a detected reaction, -1 for a silent aftermath, 0 without an alert."""
    if not alert_issued:
        return 0.0
    return 1.0 if score > 0.5 else -1.0


def train_critic(
    critic: CriticCNN,
    series: np.ndarray,
    targets: np.ndarray,
    epochs: int = 30,
    batch_size: int = 32,
    learning_rate: float = 0.001,
    seed: int = 0,
) -> list[float]:
    """Supervised pre-training on labeled reaction episodes; returns loss history."""
    x = np.asarray(series, dtype=float)
    y = np.asarray(targets, dtype=float).reshape(-1)
    rng = np.random.default_rng(seed)
    optimizer = Adam(critic.params, learning_rate)
    history = []
    n = x.shape[0]
    for epoch in range(epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, batch_size):
            batch = order[start:start + batch_size]
            loss, grads = critic.loss_and_grads(x[batch], y[batch])
            if not math.isfinite(loss):
                raise TrainingDiverged(f"critic loss non-finite at epoch {epoch + 1}")
            optimizer.step(critic.params, grads)
            total += loss * len(batch)
        history.append(total / n)
    return history


# ---------------------------------------------------------------------------
# episode generation and the actor training loop
# ---------------------------------------------------------------------------


@dataclass
class RLConfig:
    t_post: int = 30
    learning_rate: float = 0.001
    epsilon_start: float = 0.2
    epsilon_end: float = 0.01
    accuracy_window: int = 500
    seed: int = 0


@dataclass
class RLTrainResult:
    actor: FFNN
    episodes: int
    correct: np.ndarray  # per-episode 0/1 decision correctness
    alerts: np.ndarray  # per-episode 0/1 alert flag
    rewards: np.ndarray
    moving_accuracy: np.ndarray
    moving_alert_rate: np.ndarray


def _episode_features(cfg, people, area, standardizer, params, rng):
    raw = feature_vector(cfg, people, area.pair_indices, params, rng)
    return standardizer.apply(raw)


def _series_features(cfg, frames, area, standardizer, params, rng):
    rows = [feature_vector(cfg, frame, area.pair_indices, params, rng) for frame in frames]
    return standardizer.apply(np.asarray(rows, dtype=float))


def generate_reaction_episodes(
    cfg: ScenarioConfig,
    area: AlertArea,
    standardizer: Standardizer,
    behavior: BehaviorModel,
    params,
    n_episodes: int,
    t_post: int,
    seed: int = 0,
):
    """Balanced labeled series for critic pre-training.

    Even episodes show a forced dispersal of a violating crowd (label 1), odd
    episodes show a static aftermath (label 0), alternating between unjustified
    alerts and ignored ones.
    """
    rng = np.random.default_rng(seed)
    series = np.empty((n_episodes, t_post, len(area.pair_indices) * _block(cfg)), dtype=float)
    targets = np.empty(n_episodes, dtype=np.int8)
    forced = BehaviorModel(
        p_react=1.0,
        react_delay=behavior.react_delay,
        react_duration=behavior.react_duration,
        jitter_sigma=behavior.jitter_sigma,
        separation_margin=behavior.separation_margin,
    )
    still = BehaviorModel(
        p_react=0.0,
        react_delay=behavior.react_delay,
        react_duration=behavior.react_duration,
        jitter_sigma=behavior.jitter_sigma,
        separation_margin=behavior.separation_margin,
    )
    for i in range(n_episodes):
        reacting = i % 2 == 0
        label = LABEL_VIOLATION if reacting or i % 4 == 3 else LABEL_COMPLIANCE
        arrangement = sample_arrangement(cfg, label, int(rng.integers(2**63)))
        frames = simulate_reaction(
            cfg, arrangement, True, forced if reacting else still, rng, n_snapshots=t_post
        )
        series[i] = _series_features(cfg, frames, area, standardizer, params, rng)
        targets[i] = 1 if reacting else 0
    return series, targets


def _block(cfg: ScenarioConfig) -> int:
    return cfg.devices[0].codebook_tx.n_beams * cfg.devices[0].codebook_rx.n_beams


def rl_train(
    actor: FFNN,
    critic: CriticCNN,
    cfg: ScenarioConfig,
    behavior: BehaviorModel,
    budget: int,
    rl_cfg: RLConfig,
    standardizer: Standardizer,
    area: AlertArea,
    params,
) -> RLTrainResult:
    """Train the alert actor from critic rewards over `budget` episodes.

    Each episode samples a fresh arrangement (balanced labels), classifies one
    pre-alert snapshot with epsilon-greedy exploration, and, if an alert is
    raised, scores the post-alert series with the critic and applies one
    policy-gradient Adam step on the taken action.  No-alert episodes carry no
    reward and no update.
    """
    rng = np.random.default_rng(rl_cfg.seed)
    optimizer = Adam(actor.params, rl_cfg.learning_rate)
    correct = np.zeros(budget, dtype=np.int8)
    alerts = np.zeros(budget, dtype=np.int8)
    rewards = np.zeros(budget)
    for k in range(budget):
        frac = k / max(1, budget - 1)
        epsilon = rl_cfg.epsilon_start + frac * (rl_cfg.epsilon_end - rl_cfg.epsilon_start)
        true_label = LABEL_VIOLATION if rng.random() < 0.5 else LABEL_COMPLIANCE
        arrangement = sample_arrangement(cfg, true_label, int(rng.integers(2**63)))
        x = _episode_features(cfg, arrangement.people, area, standardizer, params, rng)
        p = actor.forward(x)
        greedy = LABEL_VIOLATION if p[LABEL_VIOLATION] >= p[LABEL_COMPLIANCE] else LABEL_COMPLIANCE
        if rng.random() < epsilon:
            action = int(rng.integers(2))
        else:
            action = greedy
        alert = action == LABEL_VIOLATION
        if alert:
            frames = simulate_reaction(cfg, arrangement, True, behavior, rng, n_snapshots=rl_cfg.t_post)
            series = _series_features(cfg, frames, area, standardizer, params, rng)
            reward = alert_reward(True, critic.score(series))
            grads = actor.grad_log_prob(x, action)
            if any(not np.all(np.isfinite(g)) for g in grads):
                raise TrainingDiverged(f"actor gradient non-finite at episode {k + 1}")
            optimizer.step(actor.params, [-reward * g for g in grads])
            rewards[k] = reward
            alerts[k] = 1
        correct[k] = 1 if action == true_label else 0
    window = max(1, rl_cfg.accuracy_window)
    moving_accuracy = _moving_average(correct, window)
    moving_alert_rate = _moving_average(alerts, window)
    return RLTrainResult(
        actor=actor,
        episodes=budget,
        correct=correct,
        alerts=alerts,
        rewards=rewards,
        moving_accuracy=moving_accuracy,
        moving_alert_rate=moving_alert_rate,
    )


def _moving_average(values: np.ndarray, window: int) -> np.ndarray:
    if len(values) == 0:
        return np.zeros(0)
    cumulative = np.cumsum(np.asarray(values, dtype=float))
    out = np.empty(len(values))
    for i in range(len(values)):
        lo = max(0, i - window + 1)
        total = cumulative[i] - (cumulative[lo - 1] if lo > 0 else 0.0)
        out[i] = total / (i - lo + 1)
    return out
