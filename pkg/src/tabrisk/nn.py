"""Fully connected networks with hand-rolled backprop, Adam and k-fold training.

Everything here operates on plain float64 arrays in the scaled feature
space; dataset plumbing and scaling live one level up.  The five standard
backbones form a capacity ladder; the deepest one has eight weight layers
including the output layer.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .metrics import bce, classification_report

PROB_CLIP = 1e-7

BACKBONES: dict[str, tuple[int, ...]] = {
    "v1": (64,),
    "v2": (64, 32),
    "v3": (128, 64, 32),
    "v4": (128, 64, 64, 32, 16),
    "v5": (256, 128, 128, 64, 64, 32, 16),
}


class TrainingError(RuntimeError):
    pass


@dataclass
class MlpModel:
    """ReLU hidden layers, single sigmoid output. weights[i] is (n_in, n_out)."""

    backbone_id: str
    widths: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[0]

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def copy(self) -> "MlpModel":
        return MlpModel(self.backbone_id, self.widths,
                        [w.copy() for w in self.weights],
                        [b.copy() for b in self.biases])

    def to_json_dict(self) -> dict:
        return {
            "backbone_id": self.backbone_id,
            "widths": list(self.widths),
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "MlpModel":
        return cls(backbone_id=doc["backbone_id"], widths=tuple(doc["widths"]),
                   weights=[np.array(w, dtype=np.float64) for w in doc["weights"]],
                   biases=[np.array(b, dtype=np.float64) for b in doc["biases"]])


def save_model(path, model: MlpModel, metadata: dict | None = None) -> None:
    """Model file: architecture + parameters + free-form training metadata."""
    doc = {"model": model.to_json_dict(), "metadata": metadata or {}}
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_model(path) -> tuple[MlpModel, dict]:
    with open(path) as fh:
        doc = json.load(fh)
    return MlpModel.from_json_dict(doc["model"]), doc.get("metadata", {})


def mlp_init(backbone_id: str, input_dim: int, seed,
             widths: tuple[int, ...] | None = None) -> MlpModel:
    """Scaled uniform fan-in init, zero biases, deterministic per seed.

    ``backbone_id`` selects a width list from BACKBONES; pass "custom"
    with explicit ``widths`` for anything else.
    """
    if input_dim < 1:
        raise ValueError("input_dim must be >= 1")
    if backbone_id == "custom":
        if widths is None:
            raise ValueError("custom backbone requires explicit widths")
        hidden = tuple(widths)
    elif backbone_id in BACKBONES:
        hidden = BACKBONES[backbone_id]
    else:
        raise ValueError(f"unknown backbone {backbone_id!r}; expected one of "
                         f"{sorted(BACKBONES)} or 'custom'")
    rng = np.random.default_rng(seed)
    dims = [input_dim, *hidden, 1]
    weights, biases = [], []
    for n_in, n_out in zip(dims[:-1], dims[1:]):
        bound = 1.0 / np.sqrt(n_in)
        weights.append(rng.uniform(-bound, bound, size=(n_in, n_out)))
        biases.append(np.zeros(n_out))
    return MlpModel(backbone_id=backbone_id, widths=hidden, weights=weights, biases=biases)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def forward_batch(model: MlpModel, X: np.ndarray) -> np.ndarray:
    """Probabilities for a (n, d) batch, strictly inside (0, 1)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.input_dim:
        raise ValueError(f"expected (n, {model.input_dim}) input, got {X.shape}")
    if not np.isfinite(X).all():
        raise ValueError("non-finite values in input")
    a = X
    last = model.n_layers - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = a @ w + b
        a = _sigmoid(z) if i == last else np.maximum(z, 0.0)
    # float64 sigmoid saturates to exactly 0/1 for |z| > ~37; nudge inside
    p = a[:, 0]
    tiny = np.finfo(np.float64).tiny
    return np.clip(p, tiny, 1.0 - 1e-16)


def forward(model: MlpModel, x: np.ndarray) -> float:
    return float(forward_batch(model, np.asarray(x, dtype=np.float64).reshape(1, -1))[0])


def mlp_loss(model: MlpModel, X: np.ndarray, y: np.ndarray) -> float:
    """Clipped binary cross-entropy of the model on (X, y)."""
    return bce(y, forward_batch(model, X))


def bce_gradients(model: MlpModel, X: np.ndarray, y: np.ndarray
                  ) -> tuple[list[np.ndarray], list[np.ndarray], float]:
    """Backprop gradients of mean clipped BCE over the batch.

    Where a probability falls outside the clip interval the loss is flat,
    so those examples contribute zero gradient (keeps backprop consistent
    with finite differences of the actual loss).
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = X.shape[0]
    if n == 0:
        raise ValueError("empty batch")

    with np.errstate(over="ignore", invalid="ignore"):
        zs, acts = [], [X]
        a = X
        last = model.n_layers - 1
        for i, (w, b) in enumerate(zip(model.weights, model.biases)):
            z = a @ w + b
            zs.append(z)
            a = _sigmoid(z) if i == last else np.maximum(z, 0.0)
            acts.append(a)

        p = acts[-1][:, 0]
        if not np.isfinite(p).all():
            raise TrainingError("non-finite activations in forward pass")
        loss = bce(y, p)

        inside = (p > PROB_CLIP) & (p < 1.0 - PROB_CLIP)
        delta = ((p - y) * inside / n).reshape(-1, 1)

        grads_w: list[np.ndarray] = [None] * model.n_layers  # type: ignore[list-item]
        grads_b: list[np.ndarray] = [None] * model.n_layers  # type: ignore[list-item]
        for i in range(last, -1, -1):
            grads_w[i] = acts[i].T @ delta
            grads_b[i] = delta.sum(axis=0)
            if not (np.isfinite(grads_w[i]).all() and np.isfinite(grads_b[i]).all()):
                raise TrainingError(f"non-finite gradient in layer {i}")
            if i > 0:
                delta = (delta @ model.weights[i].T) * (zs[i - 1] > 0)
    return grads_w, grads_b, loss


@dataclass
class AdamState:
    t: int
    m_w: list[np.ndarray]
    v_w: list[np.ndarray]
    m_b: list[np.ndarray]
    v_b: list[np.ndarray]

    @classmethod
    def for_model(cls, model: MlpModel) -> "AdamState":
        return cls(t=0,
                   m_w=[np.zeros_like(w) for w in model.weights],
                   v_w=[np.zeros_like(w) for w in model.weights],
                   m_b=[np.zeros_like(b) for b in model.biases],
                   v_b=[np.zeros_like(b) for b in model.biases])


ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


def adam_update(param, grad, m, v, t, lr):
    m *= ADAM_BETA1
    m += (1 - ADAM_BETA1) * grad
    v *= ADAM_BETA2
    v += (1 - ADAM_BETA2) * grad * grad
    mhat = m / (1 - ADAM_BETA1 ** t)
    vhat = v / (1 - ADAM_BETA2 ** t)
    param -= lr * mhat / (np.sqrt(vhat) + ADAM_EPS)


def bce_grad_step(model: MlpModel, X: np.ndarray, y: np.ndarray,
                  state: AdamState, learning_rate: float) -> tuple[MlpModel, AdamState]:
    """One Adam step on mean batch BCE. Mutates model and state in place
    and returns them."""
    grads_w, grads_b, _ = bce_gradients(model, X, y)
    state.t += 1
    for i in range(model.n_layers):
        adam_update(model.weights[i], grads_w[i], state.m_w[i], state.v_w[i],
                     state.t, learning_rate)
        adam_update(model.biases[i], grads_b[i], state.m_b[i], state.v_b[i],
                     state.t, learning_rate)
        if not (np.isfinite(model.weights[i]).all() and np.isfinite(model.biases[i]).all()):
            raise TrainingError(f"non-finite parameters in layer {i} after update")
    return model, state


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-4
    max_epochs: int = 1000
    early_stop_patience: int = 20
    batch_size: int = 64
    k_folds: int = 8
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate < 0 or self.max_epochs < 0:
            raise ValueError("learning_rate and max_epochs must be >= 0")
        if self.batch_size < 1 or self.early_stop_patience < 1:
            raise ValueError("batch_size and early_stop_patience must be >= 1")
        if self.k_folds < 2:
            raise ValueError("k_folds must be >= 2")


@dataclass
class FoldResult:
    model: MlpModel
    val_macro_f1: float
    val_loss: float
    epochs_run: int
    fold_index: int


def train_with_early_stopping(model: MlpModel, train_X: np.ndarray, train_y: np.ndarray,
                              val_X: np.ndarray, val_y: np.ndarray,
                              config: TrainConfig, fold_index: int = 0,
                              shuffle_seed=None) -> FoldResult:
    """Mini-batch Adam training, keeping the best-validation-loss parameters.

    Stops once validation loss has not improved for ``early_stop_patience``
    consecutive epochs.  The initial parameters count as a candidate, so the
    returned model is never worse on validation than the one passed in.
    """
    if len(train_X) == 0 or len(val_X) == 0:
        raise ValueError("train and validation sets must be non-empty")
    rng = np.random.default_rng(config.seed if shuffle_seed is None else shuffle_seed)
    state = AdamState.for_model(model)

    best_loss = mlp_loss(model, val_X, val_y)
    best_params = model.copy()
    epochs_without_improvement = 0
    epochs_run = 0

    n = len(train_X)
    for _epoch in range(config.max_epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            bce_grad_step(model, train_X[idx], train_y[idx], state, config.learning_rate)
        epochs_run += 1
        val_loss = mlp_loss(model, val_X, val_y)
        if val_loss < best_loss:
            best_loss = val_loss
            best_params = model.copy()
            epochs_without_improvement = 0
        else:
            epochs_without_improvement += 1
            if epochs_without_improvement >= config.early_stop_patience:
                break

    report = classification_report(val_y, forward_batch(best_params, val_X), threshold=0.5)
    return FoldResult(model=best_params, val_macro_f1=report.macro_f1,
                      val_loss=best_loss, epochs_run=epochs_run, fold_index=fold_index)


def stratified_fold_indices(y: np.ndarray, k: int, seed) -> list[np.ndarray]:
    """Deterministic stratified partition: per-class shuffle, then round-robin
    dealing, so per-fold class counts differ by at most one record."""
    y = np.asarray(y)
    rng = np.random.default_rng(seed)
    assignment = np.empty(len(y), dtype=np.int64)
    for cls in np.unique(y):
        idx = np.flatnonzero(y == cls)
        if len(idx) < k:
            raise ValueError(f"class {cls} has {len(idx)} records, fewer than {k} folds")
        rng.shuffle(idx)
        assignment[idx] = np.arange(len(idx)) % k
    return [np.flatnonzero(assignment == f) for f in range(k)]


def kfold_train(X: np.ndarray, y: np.ndarray, backbone_id: str,
                config: TrainConfig) -> list[FoldResult]:
    """Train one model per stratified fold; fold i validates on fold i and
    trains on the rest."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if len(X) < config.k_folds:
        raise ValueError("dataset smaller than the number of folds")
    folds = stratified_fold_indices(y, config.k_folds, config.seed)
    results = []
    for f, val_idx in enumerate(folds):
        train_mask = np.ones(len(X), dtype=bool)
        train_mask[val_idx] = False
        model = mlp_init(backbone_id, X.shape[1], seed=[config.seed, f])
        result = train_with_early_stopping(
            model, X[train_mask], y[train_mask], X[val_idx], y[val_idx],
            config, fold_index=f, shuffle_seed=[config.seed, f, 1])
        results.append(result)
    return results
