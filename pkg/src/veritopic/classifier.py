"""Two-layer softmax head over fused features, trained with Adam.

forward(x) = softmax(W2 @ relu(W1 @ x + b1) + b2), computed with the usual
max-subtraction stabilization. The loss is mean softmax cross-entropy and
gradients are exact analytic derivatives (checked against central finite
differences in the test suite).

Checkpoint container VMLP, layout (little-endian):

    magic "VMLP" (4 bytes), version u8 = 1
    input_dim u32, hidden_dim u32
    activation u8-prefixed ASCII ("relu")
    config echo: lr f64, eps f64, beta1 f64, beta2 f64,
                 epochs u32, batch_size u32, seed u64, patience i32 (-1 none)
    W1 (H*D f64), b1 (H f64), W2 (2*H f64), b2 (2 f64)

Predictions TSV: `doc_id<TAB>p_fake<TAB>p_real<TAB>label`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ._binio import Reader, Writer
from .corpus import Label
from .embeddings import FusedFeatures
from .errors import DataError, FormatError

_VMLP_MAGIC = b"VMLP"
_VMLP_VERSION = 1
_PARAM_NAMES = ("w1", "b1", "w2", "b2")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 2e-5
    adam_epsilon: float = 1e-8
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    epochs: int = 15
    batch_size: int = 32
    seed: int = 0
    early_stop_patience: int | None = None

    def __post_init__(self) -> None:
        if self.learning_rate <= 0 or self.adam_epsilon <= 0:
            raise DataError("learning_rate and adam_epsilon must be positive")
        if not (0 < self.adam_beta1 < 1 and 0 < self.adam_beta2 < 1):
            raise DataError("adam betas must lie in (0, 1)")
        if self.epochs < 1 or self.batch_size < 1:
            raise DataError("epochs and batch_size must be >= 1")


@dataclass
class MlpClassifier:
    input_dim: int
    hidden_dim: int
    w1: np.ndarray  # (H, D)
    b1: np.ndarray  # (H,)
    w2: np.ndarray  # (2, H)
    b2: np.ndarray  # (2,)
    activation: str = "relu"

    def params(self) -> dict[str, np.ndarray]:
        return {"w1": self.w1, "b1": self.b1, "w2": self.w2, "b2": self.b2}

    def replace_params(self, params: dict[str, np.ndarray]) -> "MlpClassifier":
        return MlpClassifier(
            self.input_dim, self.hidden_dim,
            params["w1"], params["b1"], params["w2"], params["b2"],
            self.activation,
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MlpClassifier):
            return NotImplemented
        return (
            self.input_dim == other.input_dim
            and self.hidden_dim == other.hidden_dim
            and self.activation == other.activation
            and all(np.array_equal(self.params()[n], other.params()[n]) for n in _PARAM_NAMES)
        )


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0


@dataclass
class Prediction:
    doc_id: str
    probabilities: np.ndarray  # (2,): [p_fake, p_real]
    label: Label

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Prediction):
            return NotImplemented
        return (
            self.doc_id == other.doc_id
            and np.array_equal(self.probabilities, other.probabilities)
            and self.label == other.label
        )


def init_classifier(input_dim: int, hidden_dim: int, seed: int) -> MlpClassifier:
    """Glorot-uniform weights, zero biases; pure function of (seed, dims)."""
    if input_dim < 1 or hidden_dim < 1:
        raise DataError("input_dim and hidden_dim must be >= 1")
    rng = np.random.default_rng(seed)
    def glorot(fan_out: int, fan_in: int) -> np.ndarray:
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-bound, bound, size=(fan_out, fan_in))
    return MlpClassifier(
        input_dim,
        hidden_dim,
        w1=glorot(hidden_dim, input_dim),
        b1=np.zeros(hidden_dim),
        w2=glorot(2, hidden_dim),
        b2=np.zeros(2),
    )


def _softmax_rows(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def _forward_batch(model: MlpClassifier, x: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Returns (pre-activation, hidden activation, logits) for a (B, D) batch."""
    if x.ndim != 2 or x.shape[1] != model.input_dim:
        raise DataError(f"expected inputs of dim {model.input_dim}, got shape {x.shape}")
    pre = x @ model.w1.T + model.b1
    hidden = np.maximum(pre, 0.0)
    logits = hidden @ model.w2.T + model.b2
    return pre, hidden, logits


def forward(model: MlpClassifier, x: np.ndarray) -> np.ndarray:
    """Class probabilities [p_fake, p_real] for one feature vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != model.input_dim:
        raise DataError(f"expected input of dim {model.input_dim}, got shape {x.shape}")
    if not np.isfinite(x).all():
        raise DataError("non-finite value in classifier input")
    _, _, logits = _forward_batch(model, x[None, :])
    return _softmax_rows(logits)[0]


def _as_arrays(batch) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(batch, tuple) and len(batch) == 2:
        x, y = batch
        return np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.int64)
    if len(batch) == 0:
        raise DataError("empty batch")
    xs = [np.asarray(x, dtype=np.float64) for x, _ in batch]
    ys = [int(label) for _, label in batch]
    return np.stack(xs), np.asarray(ys, dtype=np.int64)


def loss_and_gradients(model: MlpClassifier, batch) -> tuple[float, dict[str, np.ndarray]]:
    """Mean cross-entropy and its exact gradients for a batch.

    `batch` is a list of (x, label) pairs or a pre-stacked (X, y) tuple.
    """
    x, y = _as_arrays(batch)
    if x.size == 0:
        raise DataError("empty batch")
    pre, hidden, logits = _forward_batch(model, x)
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_prob = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    n = x.shape[0]
    loss = float(-log_prob[np.arange(n), y].mean())

    d_logits = np.exp(log_prob)
    d_logits[np.arange(n), y] -= 1.0
    d_logits /= n
    grad_w2 = d_logits.T @ hidden
    grad_b2 = d_logits.sum(axis=0)
    d_hidden = (d_logits @ model.w2) * (pre > 0)
    grad_w1 = d_hidden.T @ x
    grad_b1 = d_hidden.sum(axis=0)
    return loss, {"w1": grad_w1, "b1": grad_b1, "w2": grad_w2, "b2": grad_b2}


def init_adam_state(params: dict[str, np.ndarray]) -> AdamState:
    return AdamState(
        m={k: np.zeros_like(v) for k, v in params.items()},
        v={k: np.zeros_like(v) for k, v in params.items()},
        t=0,
    )


def adam_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AdamState,
    config: TrainConfig,
) -> tuple[dict[str, np.ndarray], AdamState]:
    """One bias-corrected Adam update; returns fresh params and state."""
    b1, b2 = config.adam_beta1, config.adam_beta2
    t = state.t + 1
    new_params: dict[str, np.ndarray] = {}
    new_m: dict[str, np.ndarray] = {}
    new_v: dict[str, np.ndarray] = {}
    for name, value in params.items():
        grad = grads[name]
        if grad.shape != value.shape:
            raise DataError(f"gradient shape {grad.shape} != param shape {value.shape} for {name}")
        m = b1 * state.m[name] + (1 - b1) * grad
        v = b2 * state.v[name] + (1 - b2) * grad * grad
        m_hat = m / (1 - b1**t)
        v_hat = v / (1 - b2**t)
        new_params[name] = value - config.learning_rate * m_hat / (np.sqrt(v_hat) + config.adam_epsilon)
        new_m[name] = m
        new_v[name] = v
    return new_params, AdamState(new_m, new_v, t)


def _features_matrix(features: Sequence[FusedFeatures]) -> np.ndarray:
    return np.stack([f.vector for f in features]).astype(np.float64)


def train_classifier(
    features: Sequence[FusedFeatures],
    labels: Sequence[Label | int],
    config: TrainConfig,
    hidden_dim: int = 128,
    val_features: Sequence[FusedFeatures] | None = None,
    val_labels: Sequence[Label | int] | None = None,
) -> tuple[MlpClassifier, list[dict]]:
    """Mini-batch Adam training with deterministic per-epoch shuffling.

    When a validation set and early_stop_patience are both given, training
    stops after `patience` epochs without a new best validation weighted F1
    and the best-epoch weights are restored.
    """
    from .evaluation import confusion_matrix, weighted_prf

    if len(features) != len(labels):
        raise DataError("features and labels must be aligned")
    if len(features) == 0:
        raise DataError("empty training set")
    y = np.asarray([int(l) for l in labels], dtype=np.int64)
    if len(set(y.tolist())) < 2:
        raise DataError("training set must contain at least one example per class")
    x = _features_matrix(features)

    model = init_classifier(x.shape[1], hidden_dim, config.seed)
    params = model.params()
    state = init_adam_state(params)
    shuffle_rng = np.random.default_rng(np.random.SeedSequence([config.seed, 1]))

    use_validation = val_features is not None and val_labels is not None
    if use_validation:
        x_val = _features_matrix(val_features)
        y_val = [int(l) for l in val_labels]

    log: list[dict] = []
    best_f1 = -1.0
    best_params = params
    epochs_since_best = 0
    for epoch in range(config.epochs):
        order = shuffle_rng.permutation(len(features))
        total_loss = 0.0
        for start in range(0, len(order), config.batch_size):
            idx = order[start : start + config.batch_size]
            loss, grads = loss_and_gradients(model.replace_params(params), (x[idx], y[idx]))
            params, state = adam_step(params, grads, state, config)
            total_loss += loss * idx.size
        entry = {"epoch": epoch, "mean_loss": total_loss / len(features)}
        if use_validation:
            current = model.replace_params(params)
            _, _, logits = _forward_batch(current, x_val)
            preds = np.argmax(_softmax_rows(logits), axis=1).tolist()
            report = weighted_prf(confusion_matrix(y_val, preds))
            entry["val_weighted_f1"] = report.f1
            if report.f1 > best_f1:
                best_f1 = report.f1
                best_params = params
                epochs_since_best = 0
            else:
                epochs_since_best += 1
            if (
                config.early_stop_patience is not None
                and epochs_since_best > config.early_stop_patience
            ):
                log.append(entry)
                break
        log.append(entry)

    final = best_params if (use_validation and config.early_stop_patience is not None) else params
    return model.replace_params(final), log


def predict(model: MlpClassifier, features: Sequence[FusedFeatures]) -> list[Prediction]:
    """Probabilities and argmax label per document; exact ties go to fake."""
    predictions = []
    for feat in features:
        probs = forward(model, feat.vector)
        label = Label(int(np.argmax(probs)))  # argmax takes index 0 (fake) on a tie
        predictions.append(Prediction(feat.doc_id, probs, label))
    return predictions


def write_classifier_file(model: MlpClassifier, config: TrainConfig, path: str | Path) -> None:
    w = Writer()
    w.raw(_VMLP_MAGIC)
    w.u8(_VMLP_VERSION)
    w.u32(model.input_dim)
    w.u32(model.hidden_dim)
    w.string(model.activation, width=8)
    w.f64(config.learning_rate)
    w.f64(config.adam_epsilon)
    w.f64(config.adam_beta1)
    w.f64(config.adam_beta2)
    w.u32(config.epochs)
    w.u32(config.batch_size)
    w.u64(config.seed)
    w.i32(-1 if config.early_stop_patience is None else config.early_stop_patience)
    w.f64_array(model.w1)
    w.f64_array(model.b1)
    w.f64_array(model.w2)
    w.f64_array(model.b2)
    Path(path).write_bytes(w.getvalue())


def read_classifier_file(path: str | Path) -> tuple[MlpClassifier, TrainConfig]:
    data = Path(path).read_bytes()
    r = Reader(data, name=str(path))
    if r.raw(4) != _VMLP_MAGIC:
        raise FormatError(f"{path}: not a classifier checkpoint (bad magic)")
    version = r.u8()
    if version != _VMLP_VERSION:
        raise FormatError(f"{path}: unsupported checkpoint version {version}")
    input_dim = r.u32()
    hidden_dim = r.u32()
    activation = r.string(width=8)
    patience_sentinel: int
    config = TrainConfig(
        learning_rate=r.f64(),
        adam_epsilon=r.f64(),
        adam_beta1=r.f64(),
        adam_beta2=r.f64(),
        epochs=r.u32(),
        batch_size=r.u32(),
        seed=r.u64(),
        early_stop_patience=(None if (patience_sentinel := r.i32()) < 0 else patience_sentinel),
    )
    w1 = r.f64_array(hidden_dim * input_dim).reshape(hidden_dim, input_dim)
    b1 = r.f64_array(hidden_dim)
    w2 = r.f64_array(2 * hidden_dim).reshape(2, hidden_dim)
    b2 = r.f64_array(2)
    r.expect_done()
    model = MlpClassifier(input_dim, hidden_dim, w1, b1, w2, b2, activation)
    if not all(np.isfinite(p).all() for p in model.params().values()):
        raise FormatError(f"{path}: non-finite parameter value")
    return model, config


def write_predictions_tsv(predictions: Sequence[Prediction], path: str | Path) -> None:
    lines = [
        f"{p.doc_id}\t{repr(float(p.probabilities[0]))}\t{repr(float(p.probabilities[1]))}\t{p.label.name.lower()}"
        for p in predictions
    ]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_predictions_tsv(path: str | Path) -> list[Prediction]:
    predictions: list[Prediction] = []
    text = Path(path).read_text(encoding="utf-8")
    for line_num, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 4:
            raise FormatError(f"{path}:{line_num}: expected 4 tab-separated fields")
        doc_id, p_fake, p_real, label_text = parts
        try:
            probs = np.array([float(p_fake), float(p_real)], dtype=np.float64)
        except ValueError as exc:
            raise FormatError(f"{path}:{line_num}: bad probability") from exc
        if label_text not in ("fake", "real"):
            raise FormatError(f"{path}:{line_num}: bad label {label_text!r}")
        predictions.append(
            Prediction(doc_id, probs, Label.FAKE if label_text == "fake" else Label.REAL)
        )
    return predictions
