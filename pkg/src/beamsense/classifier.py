"""Single-hidden-layer softmax classifier trained from scratch with Adam.

The network is deliberately small: relu hidden layer, two-way softmax head,
cross-entropy loss, 64-bit arithmetic throughout so that runs with the same
seed reproduce bit-identical parameter trajectories.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .scene import LABEL_VIOLATION


class TrainingDiverged(RuntimeError):
    """Loss became non-finite during training."""


@dataclass
class TrainConfig:
    batch_size: int = 1000
    epochs: int = 30
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")


class Adam:
    """Standard bias-corrected Adam over a list of parameter arrays."""

    def __init__(self, params, learning_rate=0.001, beta1=0.9, beta2=0.999, epsilon=1e-8):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, params, grads) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * np.square(g)
            p -= self.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + self.epsilon)


def _glorot_uniform(rng, fan_in, fan_out, shape):
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class FFNN:
    """input -> relu hidden -> 2-way softmax, all float64."""

    def __init__(self, input_dim: int, hidden_units: int, seed: int = 0):
        if input_dim < 1 or hidden_units < 1:
            raise ValueError("input_dim and hidden_units must be >= 1")
        self.input_dim = input_dim
        self.hidden_units = hidden_units
        self.seed = seed
        rng = np.random.default_rng(seed)
        self.w1 = _glorot_uniform(rng, input_dim, hidden_units, (input_dim, hidden_units))
        self.b1 = np.zeros(hidden_units)
        self.w2 = _glorot_uniform(rng, hidden_units, 2, (hidden_units, 2))
        self.b2 = np.zeros(2)

    @property
    def params(self) -> list[np.ndarray]:
        return [self.w1, self.b1, self.w2, self.b2]

    def _logits(self, x: np.ndarray):
        z1 = x @ self.w1 + self.b1
        a1 = np.maximum(z1, 0.0)
        return z1, a1, a1 @ self.w2 + self.b2

    def forward(self, x) -> np.ndarray:
        """Class probabilities (compliance, violation); accepts one row or a batch."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        if single:
            x = x[None, :]
        if x.shape[1] != self.input_dim:
            raise ValueError(f"expected {self.input_dim} features, got {x.shape[1]}")
        _, _, z2 = self._logits(x)
        p = _softmax(z2)
        return p[0] if single else p

    def loss_and_grads(self, x: np.ndarray, y: np.ndarray):
        """Mean cross-entropy and gradients for a batch of integer labels."""
        n = x.shape[0]
        z1, a1, z2 = self._logits(x)
        logp = _log_softmax(z2)
        loss = -float(np.mean(logp[np.arange(n), y]))
        dz2 = np.exp(logp)
        dz2[np.arange(n), y] -= 1.0
        dz2 /= n
        dw2 = a1.T @ dz2
        db2 = dz2.sum(axis=0)
        da1 = dz2 @ self.w2.T
        dz1 = da1 * (z1 > 0.0)
        dw1 = x.T @ dz1
        db1 = dz1.sum(axis=0)
        return loss, [dw1, db1, dw2, db2]

    def grad_log_prob(self, x: np.ndarray, action: int) -> list[np.ndarray]:
        """Gradients of log p(action | x) for a single feature vector."""
        x = np.asarray(x, dtype=float)[None, :]
        z1, a1, z2 = self._logits(x)
        p = _softmax(z2)[0]
        dz2 = -p
        dz2[action] += 1.0
        dz2 = dz2[None, :]
        dw2 = a1.T @ dz2
        db2 = dz2.sum(axis=0)
        da1 = dz2 @ self.w2.T
        dz1 = da1 * (z1 > 0.0)
        dw1 = x.T @ dz1
        db1 = dz1.sum(axis=0)
        return [dw1, db1, dw2, db2]


def _softmax(z: np.ndarray) -> np.ndarray:
    return np.exp(_log_softmax(z))


def _log_softmax(z: np.ndarray) -> np.ndarray:
    zmax = z.max(axis=1, keepdims=True)
    shifted = z - zmax
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    val_accuracy: list[float] = field(default_factory=list)


def train(
    model: FFNN,
    x: np.ndarray,
    y: np.ndarray,
    cfg: TrainConfig,
    x_val: np.ndarray | None = None,
    y_val: np.ndarray | None = None,
) -> TrainHistory:
    """Mini-batch Adam on cross-entropy; per-epoch shuffling from cfg.seed."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    if x.shape[0] == 0:
        raise ValueError("empty training set")
    rng = np.random.default_rng(cfg.seed)
    optimizer = Adam(model.params, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon)
    history = TrainHistory()
    n = x.shape[0]
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        total_loss = 0.0
        for start in range(0, n, cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            loss, grads = model.loss_and_grads(x[batch], y[batch])
            if not math.isfinite(loss):
                raise TrainingDiverged(f"non-finite loss at epoch {epoch + 1}")
            optimizer.step(model.params, grads)
            total_loss += loss * len(batch)
        history.train_loss.append(total_loss / n)
        if x_val is not None and len(x_val):
            history.val_accuracy.append(evaluate(model, x_val, y_val).accuracy)
    return history


@dataclass(frozen=True)
class Metrics:
    """Argmax-decision metrics; prediction ties resolve to violation."""

    accuracy: float
    precision: tuple[float, float]
    recall: tuple[float, float]
    confusion: np.ndarray  # [true, predicted] counts

    @property
    def n(self) -> int:
        return int(self.confusion.sum())


def predict(model: FFNN, x: np.ndarray) -> np.ndarray:
    """Hard decisions; equal probabilities resolve to the violation class."""
    p = model.forward(np.asarray(x, dtype=float))
    if p.ndim == 1:
        p = p[None, :]
    return (p[:, LABEL_VIOLATION] >= p[:, 1 - LABEL_VIOLATION]).astype(np.int8)


def evaluate(model: FFNN, x: np.ndarray, y: np.ndarray) -> Metrics:
    y = np.asarray(y, dtype=np.int64)
    pred = predict(model, x)
    confusion = np.zeros((2, 2), dtype=np.int64)
    for t in (0, 1):
        for p in (0, 1):
            confusion[t, p] = int(np.sum((y == t) & (pred == p)))
    total = confusion.sum()
    accuracy = float(np.trace(confusion)) / total if total else 0.0
    precision = tuple(
        float(confusion[c, c]) / s if (s := confusion[:, c].sum()) else 0.0 for c in (0, 1)
    )
    recall = tuple(
        float(confusion[c, c]) / s if (s := confusion[c, :].sum()) else 0.0 for c in (0, 1)
    )
    return Metrics(accuracy=accuracy, precision=precision, recall=recall, confusion=confusion)


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

_CHECKPOINT_MAGIC = "beamsense-ffnn 1"


def save_model(path, model: FFNN, standardizer_ref: str = "") -> None:
    """Text header plus a little-endian float64 blob of w1, b1, w2, b2."""
    header = (
        f"{_CHECKPOINT_MAGIC}\n"
        f"input_dim {model.input_dim}\n"
        f"hidden {model.hidden_units}\n"
        f"seed {model.seed}\n"
        f"standardizer {standardizer_ref or 'none'}\n"
        f"end\n"
    )
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        for p in model.params:
            fh.write(np.ascontiguousarray(p, dtype="<f8").tobytes())


def load_model(path) -> tuple[FFNN, str]:
    with open(path, "rb") as fh:
        raw = fh.read()
    offset = 0
    fields = {}
    first = True
    while True:
        nl = raw.find(b"\n", offset)
        if nl < 0:
            raise ValueError(f"{path}: truncated checkpoint header")
        line = raw[offset:nl].decode("ascii")
        offset = nl + 1
        if first:
            if line != _CHECKPOINT_MAGIC:
                raise ValueError(f"{path}: not a model checkpoint (magic {line!r})")
            first = False
            continue
        if line == "end":
            break
        key, value = line.split(" ", 1)
        fields[key] = value
    input_dim = int(fields["input_dim"])
    hidden = int(fields["hidden"])
    model = FFNN(input_dim, hidden, seed=int(fields.get("seed", "0")))
    blob = np.frombuffer(raw[offset:], dtype="<f8")
    expected = input_dim * hidden + hidden + hidden * 2 + 2
    if blob.size != expected:
        raise ValueError(f"{path}: parameter blob has {blob.size} values, expected {expected}")
    pos = 0
    for p in model.params:
        p[...] = blob[pos:pos + p.size].reshape(p.shape)
        pos += p.size
    return model, fields.get("standardizer", "none")
