"""Contact-localization MLP: manual forward/backward, Adam, training loop.

Four hidden layers (64, 128, 256, 128) with ReLU and inverted dropout 0.3
after each, then either a 3-unit linear regression head or an (n+1)-way
softmax classification head. Everything runs in float64 numpy so gradient
checks against central finite differences are clean.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from prototouch.dataset import Dataset, NormalizationStats, denormalize, fit_normalization, normalize, split

HIDDEN_WIDTHS = (64, 128, 256, 128)
DROPOUT_RATE = 0.3
NO_CONTACT_RADIUS = 0.07  # meters; regression outputs inside this ball mean "no contact"

REGRESSION = "regression"
CLASSIFICATION = "classification"

MODEL_SCHEMA = "unitacnet-v1"


@dataclass
class TrainConfig:
    learning_rate: float = 2.5e-3
    epochs: int = 30
    batch_size: int = 256
    seed: int = 0
    split_ratio: float = 0.8
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    dropout_rate: float = DROPOUT_RATE

    def __post_init__(self):
        if min(self.learning_rate, self.epochs, self.batch_size, self.epsilon) <= 0:
            raise ValueError("learning_rate, epochs, batch_size, epsilon must be positive")
        if not (0.0 <= self.dropout_rate < 1.0):
            raise ValueError("dropout_rate must be in [0, 1)")


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0

    @classmethod
    def for_params(cls, params) -> "AdamState":
        return cls(m=[np.zeros_like(p) for p in params], v=[np.zeros_like(p) for p in params], t=0)


class MlpModel:
    def __init__(self, head: str, weights, biases, stats: NormalizationStats | None = None,
                 target_stats: NormalizationStats | None = None, dropout_rate: float = DROPOUT_RATE):
        if head not in (REGRESSION, CLASSIFICATION):
            raise ValueError(f"unknown head {head!r}")
        self.head = head
        self.weights = list(weights)  # each (fan_in, fan_out)
        self.biases = list(biases)
        self.stats = stats
        # Regression trains in per-dimension normalized target space; kept so
        # predictions can be mapped back to meters.
        self.target_stats = target_stats
        self.dropout_rate = dropout_rate
        widths = [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]
        for i, w in enumerate(self.weights):
            if w.shape != (widths[i], widths[i + 1]) or self.biases[i].shape != (widths[i + 1],):
                raise ValueError("inconsistent layer width chain")
        self.widths = widths

    @property
    def dof(self) -> int:
        return self.widths[0] // 2

    @property
    def n_points(self) -> int:
        if self.head != CLASSIFICATION:
            raise ValueError("n_points is defined for classification models only")
        return self.widths[-1] - 1

    def parameters(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out


def init_model(dof: int, head: str, seed, n_points: int | None = None,
               dropout_rate: float = DROPOUT_RATE) -> MlpModel:
    """Fan-in-scaled uniform weights, zero biases, deterministic per seed."""
    if dof < 1:
        raise ValueError("dof must be >= 1")
    if head == CLASSIFICATION:
        if n_points is None:
            raise ValueError("classification head needs n_points")
        out = n_points + 1
    elif head == REGRESSION:
        out = 3
    else:
        raise ValueError(f"unknown head {head!r}")
    widths = [2 * dof, *HIDDEN_WIDTHS, out]
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpModel(head, weights, biases, dropout_rate=dropout_rate)


def softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _forward_cached(model: MlpModel, x: np.ndarray, train: bool, rng):
    """Returns (output, caches); caches hold (input, pre-activation, mask) per layer."""
    if train and rng is None:
        raise ValueError("train-mode forward needs an rng for dropout")
    a = x
    caches = []
    rate = model.dropout_rate
    keep = 1.0 - rate
    for w, b in zip(model.weights[:-1], model.biases[:-1]):
        z = a @ w + b
        h = np.maximum(z, 0.0)
        if train and rate > 0.0:
            mask = (rng.random(h.shape) >= rate).astype(float)
            h = h * mask / keep
        else:
            mask = None
        caches.append((a, z, mask))
        a = h
    z_out = a @ model.weights[-1] + model.biases[-1]
    caches.append((a, z_out, None))
    out = softmax(z_out) if model.head == CLASSIFICATION else z_out
    return out, caches


def forward(model: MlpModel, x, mode: str = "eval", rng=None) -> np.ndarray:
    """Network output for a single input vector or a batch of rows.

    Eval mode is deterministic and dropout-free (inverted dropout needs no
    rescaling); train mode zeroes each hidden unit with probability 0.3.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    batch = x[None, :] if single else x
    if batch.shape[1] != model.widths[0]:
        raise ValueError(f"expected input dim {model.widths[0]}, got {batch.shape[1]}")
    out, _ = _forward_cached(model, batch, train=(mode == "train"), rng=rng)
    return out[0] if single else out


def loss(model_output, target, head: str) -> float:
    """MSE over coordinates and batch, or mean cross-entropy of the true class."""
    out = np.atleast_2d(np.asarray(model_output, dtype=float))
    if head == REGRESSION:
        tgt = np.atleast_2d(np.asarray(target, dtype=float))
        if tgt.shape != out.shape:
            raise ValueError(f"target shape {tgt.shape} does not match output {out.shape}")
        return float(np.mean((out - tgt) ** 2))
    if head == CLASSIFICATION:
        labels = np.atleast_1d(np.asarray(target))
        if labels.ndim != 1 or labels.shape[0] != out.shape[0] or not np.issubdtype(labels.dtype, np.integer):
            raise ValueError("classification targets must be one integer class per row")
        probs = out[np.arange(out.shape[0]), labels]
        return float(-np.mean(np.log(np.clip(probs, 1e-300, None))))
    raise ValueError(f"unknown head {head!r}")


def _loss_gradient(out, target, head):
    n = out.shape[0]
    if head == REGRESSION:
        return 2.0 * (out - np.atleast_2d(target)) / (n * out.shape[1])
    labels = np.atleast_1d(target)
    grad = out.copy()
    grad[np.arange(n), labels] -= 1.0
    return grad / n


def backward(model: MlpModel, x, target, mode: str = "eval", rng=None):
    """Gradients of the mean batch loss for every weight matrix and bias.

    Returns (grads, loss) where grads interleaves (dW, db) in parameter order.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[0] == 0:
        raise ValueError("empty batch")
    out, caches = _forward_cached(model, x, train=(mode == "train"), rng=rng)
    batch_loss = loss(out, target, model.head)
    delta = _loss_gradient(out, target, model.head)

    keep = 1.0 - model.dropout_rate
    grads = [None] * (2 * len(model.weights))
    for layer in range(len(model.weights) - 1, -1, -1):
        a_in, z, mask = caches[layer]
        grads[2 * layer] = a_in.T @ delta
        grads[2 * layer + 1] = delta.sum(axis=0)
        if layer > 0:
            da = delta @ model.weights[layer].T
            _, z_prev, mask_prev = caches[layer - 1]
            if mask_prev is not None:
                da = da * mask_prev / keep
            delta = da * (z_prev > 0)
    return grads, batch_loss


def adam_step(params, grads, state: AdamState, config: TrainConfig):
    """Bias-corrected Adam update, in place. Returns (params, state)."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("params/grads/state length mismatch")
    state.t += 1
    b1, b2 = config.beta1, config.beta2
    correction1 = 1.0 - b1**state.t
    correction2 = 1.0 - b2**state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise ValueError("gradient shape mismatch")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        m_hat = m / correction1
        v_hat = v / correction2
        p -= config.learning_rate * m_hat / (np.sqrt(v_hat) + config.epsilon)
    return params, state


def train(dataset: Dataset, head: str, config: TrainConfig | None = None):
    """Full training loop; returns (model, per-epoch mean train loss).

    Normalization is fitted on the train split only and baked into the model.
    Batches are reshuffled every epoch (seeded); the last partial batch is
    trained on rather than dropped.
    """
    if config is None:
        config = TrainConfig()
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    train_ds, _ = split(dataset, config.split_ratio, config.seed)
    stats = fit_normalization(train_ds)
    x = normalize(train_ds.inputs(), stats)
    target_stats = None
    if head == REGRESSION:
        raw = train_ds.targets()
        target_stats = NormalizationStats(min=raw.min(axis=0), max=raw.max(axis=0))
        targets = normalize(raw, target_stats)
    else:
        targets = train_ds.labels()
    rng = np.random.default_rng(config.seed)
    model = init_model(dataset.dof, head, rng, n_points=dataset.n_points,
                       dropout_rate=config.dropout_rate)
    params = model.parameters()
    state = AdamState.for_params(params)

    history = []
    k = x.shape[0]
    for _ in range(config.epochs):
        order = rng.permutation(k)
        epoch_losses = []
        for start in range(0, k, config.batch_size):
            idx = order[start : start + config.batch_size]
            grads, batch_loss = backward(model, x[idx], targets[idx], mode="train", rng=rng)
            adam_step(params, grads, state, config)
            epoch_losses.append(batch_loss)
        history.append(float(np.mean(epoch_losses)))
    model.stats = stats
    model.target_stats = target_stats
    return model, history


@dataclass(frozen=True)
class Prediction:
    location: np.ndarray | None  # meters; None for an undecodable classification
    distribution: np.ndarray | None  # class probabilities (classification only)
    contact: bool


def predict(model: MlpModel, q, tau, points_world=None) -> Prediction:
    """Single-sample inference with the model's embedded normalization.

    For classification, pass the current world positions of the sampled points
    (n x 3) to decode the argmax class into coordinates.
    """
    if model.stats is None:
        raise ValueError("model has no normalization stats; train or load first")
    q = np.asarray(q, dtype=float)
    tau = np.asarray(tau, dtype=float)
    if q.shape != (model.dof,) or tau.shape != (model.dof,):
        raise ValueError(f"expected q and tau of length {model.dof}")
    x = normalize(np.concatenate([q, tau]), model.stats)
    out = forward(model, x, mode="eval")
    if model.head == REGRESSION:
        location = denormalize(out, model.target_stats) if model.target_stats is not None else out
        contact = bool(np.linalg.norm(location) >= NO_CONTACT_RADIUS)
        return Prediction(location=location, distribution=None, contact=contact)
    label = int(np.argmax(out))  # ties break toward the lowest index
    contact = label != model.n_points
    location = None
    if not contact:
        location = np.zeros(3)
    elif points_world is not None:
        location = np.asarray(points_world, dtype=float)[label]
    return Prediction(location=location, distribution=out, contact=contact)


def save_model(model: MlpModel, path) -> None:
    if model.stats is None:
        raise ValueError("refusing to save a model without normalization stats")
    stats_payload = {"min": model.stats.min.tolist(), "max": model.stats.max.tolist()}
    if model.target_stats is not None:
        stats_payload["target_min"] = model.target_stats.min.tolist()
        stats_payload["target_max"] = model.target_stats.max.tolist()
    payload = {
        "schema": MODEL_SCHEMA,
        "head": model.head,
        "widths": model.widths,
        "dropout": model.dropout_rate,
        "stats": stats_payload,
        "weights": [w.tolist() for w in model.weights],
        "biases": [b.tolist() for b in model.biases],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh)
        fh.write("\n")


def load_model(path) -> MlpModel:
    with open(path) as fh:
        payload = json.load(fh)
    if payload.get("schema") != MODEL_SCHEMA:
        raise ValueError(f"unknown model schema {payload.get('schema')!r}")
    widths = payload["widths"]
    weights = [np.asarray(w, dtype=float) for w in payload["weights"]]
    biases = [np.asarray(b, dtype=float) for b in payload["biases"]]
    for i, w in enumerate(weights):
        if list(w.shape) != [widths[i], widths[i + 1]]:
            raise ValueError(f"layer {i}: weight shape {w.shape} breaks declared widths {widths}")
    stats = NormalizationStats(
        min=np.asarray(payload["stats"]["min"], dtype=float),
        max=np.asarray(payload["stats"]["max"], dtype=float),
    )
    target_stats = None
    if "target_min" in payload["stats"]:
        target_stats = NormalizationStats(
            min=np.asarray(payload["stats"]["target_min"], dtype=float),
            max=np.asarray(payload["stats"]["target_max"], dtype=float),
        )
    return MlpModel(
        payload["head"], weights, biases, stats=stats, target_stats=target_stats,
        dropout_rate=float(payload.get("dropout", DROPOUT_RATE)),
    )
