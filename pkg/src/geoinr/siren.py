"""Sinusoidal-activation MLP with analytic gradients and Adam training.

The network maps an encoding vector to a single output: the first layer
applies sin(omega0 * (W x + b)), later hidden layers sin(W x + b), and the
output layer is affine. Classification heads return logits; the logistic
link is applied inside the loss. Everything is plain float64 numpy, and a
(seed, config, dataset) triple determines the result bit-exactly.
"""

from __future__ import annotations

import hashlib
import math
import struct
import time
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from .encoders import LocationEncoder, make_encoder

TASKS = ("binary_classification", "regression")

CHECKPOINT_MAGIC = b"GEOINR01"


class TrainingDivergedError(RuntimeError):
    """Raised when a loss or parameter goes non-finite during training."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


@dataclass
class SirenModel:
    """Layer parameters: weights[i] has shape (fan_out, fan_in)."""

    weights: list
    biases: list
    omega0: float
    task: str

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.weights[0].shape[0]

    @property
    def n_hidden_layers(self) -> int:
        return len(self.weights) - 1

    def parameter_count(self) -> int:
        return sum(w.size for w in self.weights) + sum(b.size for b in self.biases)

    def copy(self) -> "SirenModel":
        return SirenModel(
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            omega0=self.omega0,
            task=self.task,
        )

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(w)) for w in self.weights) and all(
            np.all(np.isfinite(b)) for b in self.biases
        )

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        for w, b in zip(self.weights, self.biases):
            h.update(np.ascontiguousarray(w).tobytes())
            h.update(np.ascontiguousarray(b).tobytes())
        return h.hexdigest()


@dataclass(frozen=True)
class ModelConfig:
    hidden_dim: int = 64
    n_layers: int = 2
    omega0: float = 30.0
    task: str = "binary_classification"

    def __post_init__(self):
        if self.hidden_dim < 1 or self.n_layers < 1:
            raise ValueError("hidden_dim and n_layers must be positive")
        if not self.omega0 > 0:
            raise ValueError("omega0 must be positive")
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-4
    batch_size: int = 2048
    max_epochs: int = 500
    weight_decay: float = 0.0
    seed: int = 0
    validation_fraction: float = 0.2
    early_stop_patience: int | None = None

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1 or self.max_epochs < 1:
            raise ValueError("batch_size and max_epochs must be positive")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be nonnegative")
        if not 0.0 < self.validation_fraction < 1.0:
            raise ValueError("validation_fraction must lie in (0, 1)")
        if self.early_stop_patience is not None and self.early_stop_patience < 1:
            raise ValueError("early_stop_patience must be positive when set")


@dataclass
class TrainHistory:
    """Per-epoch curves; list lengths equal the number of completed epochs."""

    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    wall_time_s: list = field(default_factory=list)
    best_epoch: int = -1
    params_fingerprint: str = ""

    @property
    def n_epochs(self) -> int:
        return len(self.train_loss)


def siren_init(
    input_dim: int,
    hidden_dim: int,
    n_layers: int,
    omega0: float = 30.0,
    seed: int = 0,
    task: str = "binary_classification",
) -> SirenModel:
    """Initialize a model with ``n_layers`` hidden layers plus a linear head.

    First-layer weights are uniform in +-1/input_dim; every later weight
    matrix is uniform in +-sqrt(6/fan_in)/omega0. Biases start at zero.
    Deterministic for a given seed.
    """
    if input_dim < 1 or hidden_dim < 1 or n_layers < 1:
        raise ValueError("input_dim, hidden_dim and n_layers must be positive")
    if task not in TASKS:
        raise ValueError(f"unknown task {task!r}")
    rng = np.random.default_rng([seed, 0])
    dims = [input_dim] + [hidden_dim] * n_layers + [1]
    weights, biases = [], []
    for i in range(len(dims) - 1):
        fan_in, fan_out = dims[i], dims[i + 1]
        bound = 1.0 / fan_in if i == 0 else math.sqrt(6.0 / fan_in) / omega0
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return SirenModel(weights=weights, biases=biases, omega0=float(omega0), task=task)


def _forward_cached(model: SirenModel, X: np.ndarray):
    """Forward pass keeping pre-activations for backprop."""
    if X.ndim != 2 or X.shape[1] != model.input_dim:
        raise ValueError(
            f"batch width {X.shape} does not match input dim {model.input_dim}"
        )
    pre, post = [], [X]
    h = X
    for i, (w, b) in enumerate(zip(model.weights[:-1], model.biases[:-1])):
        z = h @ w.T + b
        if i == 0:
            z = model.omega0 * z
        pre.append(z)
        h = np.sin(z)
        post.append(h)
    out = h @ model.weights[-1].T + model.biases[-1]
    return out[:, 0], pre, post


def forward(model: SirenModel, X: np.ndarray) -> np.ndarray:
    """Predictions for a batch of encodings: logits for classification,
    values for regression."""
    out, _, _ = _forward_cached(model, np.asarray(X, dtype=float))
    return out


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def per_point_loss(predictions: np.ndarray, targets: np.ndarray, task: str) -> np.ndarray:
    """Unreduced loss per sample; mean of this equals :func:`loss`."""
    predictions = np.asarray(predictions, dtype=float)
    targets = np.asarray(targets, dtype=float)
    if predictions.shape != targets.shape:
        raise ValueError("predictions and targets must have equal length")
    if predictions.size == 0:
        raise ValueError("empty batch")
    if task == "regression":
        d = predictions - targets
        return d * d
    if task == "binary_classification":
        # softplus(z) - z*y, with softplus in the overflow-safe form
        z = predictions
        return np.maximum(z, 0.0) - z * targets + np.log1p(np.exp(-np.abs(z)))
    raise ValueError(f"unknown task {task!r}")


def loss(predictions: np.ndarray, targets: np.ndarray, task: str) -> float:
    """Mean squared error (regression) or mean BCE on logits."""
    return float(np.mean(per_point_loss(predictions, targets, task)))


def gradients(model: SirenModel, X: np.ndarray, targets: np.ndarray, task: str):
    """Exact analytic gradients of the mean loss w.r.t. all parameters.

    Returns (weight_grads, bias_grads) shaped like the model parameters.
    """
    if task != model.task:
        raise ValueError(f"task {task!r} does not match model task {model.task!r}")
    X = np.asarray(X, dtype=float)
    targets = np.asarray(targets, dtype=float)
    if X.shape[0] == 0:
        raise ValueError("empty batch")
    out, pre, post = _forward_cached(model, X)
    return _backprop_from_cache(model, out, pre, post, targets)


@dataclass
class AdamState:
    m_w: list
    v_w: list
    m_b: list
    v_b: list
    t: int = 0


def init_adam_state(model: SirenModel) -> AdamState:
    return AdamState(
        m_w=[np.zeros_like(w) for w in model.weights],
        v_w=[np.zeros_like(w) for w in model.weights],
        m_b=[np.zeros_like(b) for b in model.biases],
        v_b=[np.zeros_like(b) for b in model.biases],
    )


def adam_step(
    model: SirenModel,
    grads,
    state: AdamState,
    lr: float,
    weight_decay: float = 0.0,
    betas: tuple = (0.9, 0.999),
    eps: float = 1e-8,
):
    """One Adam update with bias correction, in place.

    Weight decay is decoupled: weights (not biases) shrink by a factor
    (1 - lr * weight_decay) before the moment update.
    """
    g_w, g_b = grads
    b1, b2 = betas
    state.t += 1
    c1 = 1.0 - b1**state.t
    c2 = 1.0 - b2**state.t
    if weight_decay > 0.0:
        for w in model.weights:
            w *= 1.0 - lr * weight_decay
    for p, g, m, v in zip(
        model.weights + model.biases, g_w + g_b, state.m_w + state.m_b, state.v_w + state.v_b
    ):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return model, state


def _split_validation(n: int, fraction: float, seed: int):
    rng = np.random.default_rng([seed, 2])
    order = rng.permutation(n)
    n_val = int(round(fraction * n))
    if n_val < 1 or n_val >= n:
        return np.arange(n), None
    return order[n_val:], order[:n_val]


def fit_siren(
    X: np.ndarray,
    y: np.ndarray,
    model: SirenModel,
    config: TrainConfig,
    val_X: np.ndarray | None = None,
    val_y: np.ndarray | None = None,
) -> tuple[SirenModel, TrainHistory]:
    """Train on pre-encoded features; returns the best-validation model.

    If no validation set is given, ``validation_fraction`` of the rows is
    held out with a seeded shuffle. Per-epoch train loss is the running
    mean of mini-batch losses; validation loss is computed on the full
    held-out set after each epoch. A non-finite loss or parameter aborts
    with :class:`TrainingDivergedError`.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.shape[0] != y.shape[0] or X.shape[0] == 0:
        raise ValueError("features and targets must be nonempty and aligned")
    if val_X is None:
        train_idx, val_idx = _split_validation(X.shape[0], config.validation_fraction, config.seed)
        if val_idx is None:
            val_X, val_y = X, y
        else:
            val_X, val_y = X[val_idx], y[val_idx]
        X, y = X[train_idx], y[train_idx]
    else:
        val_X = np.asarray(val_X, dtype=float)
        val_y = np.asarray(val_y, dtype=float)

    n = X.shape[0]
    rng = np.random.default_rng([config.seed, 1])
    state = init_adam_state(model)
    history = TrainHistory()
    best_loss = math.inf
    best_params = model.copy()
    best_epoch = -1
    stale = 0

    for epoch in range(config.max_epochs):
        t0 = time.perf_counter()
        order = rng.permutation(n)
        loss_sum = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            xb, yb = X[idx], y[idx]
            out, pre, post = _forward_cached(model, xb)
            batch_loss = loss(out, yb, model.task)
            if not math.isfinite(batch_loss):
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch}, batch offset {start}",
                    diagnostics=_diagnostics(model, epoch, start, batch_loss),
                )
            loss_sum += batch_loss * len(idx)
            grads = _backprop_from_cache(model, out, pre, post, yb)
            adam_step(model, grads, state, config.learning_rate, config.weight_decay)
        if not model.all_finite():
            raise TrainingDivergedError(
                f"non-finite parameter after epoch {epoch}",
                diagnostics=_diagnostics(model, epoch, -1, float("nan")),
            )
        val_loss = loss(forward(model, val_X), val_y, model.task)
        history.train_loss.append(loss_sum / n)
        history.val_loss.append(val_loss)
        history.wall_time_s.append(time.perf_counter() - t0)
        if val_loss < best_loss:
            best_loss = val_loss
            best_params = model.copy()
            best_epoch = epoch
            stale = 0
        else:
            stale += 1
            if config.early_stop_patience is not None and stale >= config.early_stop_patience:
                break

    history.best_epoch = best_epoch
    history.params_fingerprint = best_params.fingerprint()
    return best_params, history


def _backprop_from_cache(model, out, pre, post, targets):
    """Gradient reuse of an already-computed forward pass (see gradients)."""
    n = targets.shape[0]
    if model.task == "regression":
        delta = (2.0 * (out - targets) / n)[:, None]
    else:
        delta = ((_sigmoid(out) - targets) / n)[:, None]
    g_w = [None] * len(model.weights)
    g_b = [None] * len(model.biases)
    g_w[-1] = delta.T @ post[-1]
    g_b[-1] = delta.sum(axis=0)
    upstream = delta @ model.weights[-1]
    for i in range(len(model.weights) - 2, -1, -1):
        scale = model.omega0 if i == 0 else 1.0
        delta_i = upstream * np.cos(pre[i]) * scale
        g_w[i] = delta_i.T @ post[i]
        g_b[i] = delta_i.sum(axis=0)
        if i > 0:
            upstream = delta_i @ model.weights[i]
    return g_w, g_b


def _diagnostics(model, epoch, batch_offset, batch_loss):
    return {
        "epoch": epoch,
        "batch_offset": batch_offset,
        "batch_loss": batch_loss,
        "max_abs_weight": max(float(np.max(np.abs(w))) for w in model.weights),
        "finite": model.all_finite(),
    }


def evaluate(model: SirenModel, X: np.ndarray, targets: np.ndarray):
    """Per-point losses and raw predictions for a frozen model."""
    predictions = forward(model, np.asarray(X, dtype=float))
    losses = per_point_loss(predictions, np.asarray(targets, dtype=float), model.task)
    return losses, predictions


# ---------------------------------------------------------------------------
# checkpoint container: magic, task, omega0, spec fingerprint, layer shapes,
# then 64-bit little-endian parameters
# ---------------------------------------------------------------------------


def save_checkpoint(path, model: SirenModel, spec_fingerprint: str = "") -> None:
    fp = spec_fingerprint.encode("ascii")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<B", TASKS.index(model.task)))
        fh.write(struct.pack("<d", model.omega0))
        fh.write(struct.pack("<H", len(fp)))
        fh.write(fp)
        fh.write(struct.pack("<I", len(model.weights)))
        for w in model.weights:
            fh.write(struct.pack("<II", w.shape[0], w.shape[1]))
        for w, b in zip(model.weights, model.biases):
            fh.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def load_checkpoint(path) -> tuple[SirenModel, str]:
    with open(path, "rb") as fh:
        magic = fh.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise ValueError(f"{path}: not a model checkpoint (bad magic {magic!r})")
        task = TASKS[struct.unpack("<B", fh.read(1))[0]]
        omega0 = struct.unpack("<d", fh.read(8))[0]
        (fplen,) = struct.unpack("<H", fh.read(2))
        fingerprint = fh.read(fplen).decode("ascii")
        (n_layers,) = struct.unpack("<I", fh.read(4))
        shapes = [struct.unpack("<II", fh.read(8)) for _ in range(n_layers)]
        weights, biases = [], []
        for rows, cols in shapes:
            w = np.frombuffer(fh.read(rows * cols * 8), dtype="<f8").reshape(rows, cols)
            b = np.frombuffer(fh.read(rows * 8), dtype="<f8")
            weights.append(w.astype(float))
            biases.append(b.astype(float))
    return SirenModel(weights=weights, biases=biases, omega0=omega0, task=task), fingerprint


# ---------------------------------------------------------------------------
# scikit-learn estimator facade
# ---------------------------------------------------------------------------


class SirenEstimator(BaseEstimator):
    """Estimator over raw [lat_deg, lon_deg] rows.

    The location encoding runs inside ``fit``/``predict``, so the estimator
    plugs directly into pipelines and grid searches. ``encoding`` accepts a
    spec string (``"sh:L=20"``), an :class:`EncodingSpec`, or an encoder
    instance.
    """

    def __init__(
        self,
        encoding="sh:L=20",
        hidden_dim=64,
        n_layers=2,
        omega0=30.0,
        task="binary_classification",
        learning_rate=1e-4,
        batch_size=2048,
        max_epochs=500,
        weight_decay=0.0,
        seed=0,
        validation_fraction=0.2,
        early_stop_patience=None,
    ):
        self.encoding = encoding
        self.hidden_dim = hidden_dim
        self.n_layers = n_layers
        self.omega0 = omega0
        self.task = task
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.weight_decay = weight_decay
        self.seed = seed
        self.validation_fraction = validation_fraction
        self.early_stop_patience = early_stop_patience

    def _encoder(self) -> LocationEncoder:
        if isinstance(self.encoding, LocationEncoder):
            return self.encoding
        return make_encoder(self.encoding)

    def fit(self, X, y):
        encoder = self._encoder()
        features = encoder.transform(X)
        y = np.asarray(y, dtype=float)
        if self.task == "binary_classification" and not np.all(np.isin(y, (0.0, 1.0))):
            raise ValueError("binary classification targets must be 0/1")
        model = siren_init(
            input_dim=features.shape[1],
            hidden_dim=self.hidden_dim,
            n_layers=self.n_layers,
            omega0=self.omega0,
            seed=self.seed,
            task=self.task,
        )
        config = TrainConfig(
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            max_epochs=self.max_epochs,
            weight_decay=self.weight_decay,
            seed=self.seed,
            validation_fraction=self.validation_fraction,
            early_stop_patience=self.early_stop_patience,
        )
        self.model_, self.history_ = fit_siren(features, y, model, config)
        self.encoder_ = encoder
        return self

    def decision_function(self, X) -> np.ndarray:
        return forward(self.model_, self.encoder_.transform(X))

    def predict(self, X) -> np.ndarray:
        raw = self.decision_function(X)
        if self.task == "binary_classification":
            return (raw >= 0.0).astype(int)
        return raw

    def predict_proba(self, X) -> np.ndarray:
        if self.task != "binary_classification":
            raise ValueError("predict_proba requires a classification task")
        p = _sigmoid(self.decision_function(X))
        return np.stack([1.0 - p, p], axis=1)
