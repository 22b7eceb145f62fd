"""Simplified conditional tabular GAN.

Both networks receive a class one-hot (width 2).  The generator emits one
pre-activation per encoded slot; numeric and binary slots pass through a
tanh head mapped to the extended range [-0.2, 1.2] (so out-of-range and
negative values can arise), categorical blocks through a per-block softmax
(argmax at sampling time).  Non-saturating objective, Adam updates on both
networks, hand-rolled backprop throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import ScalerParams, fit_minmax, inverse_minmax, transform_minmax
from .nn import MlpModel, adam_update
from .schema import CaseRecord, Dataset, FeatureSchema

TANH_CENTER = 0.5
TANH_HALF_RANGE = 0.7  # 0.5 +/- 0.7 -> [-0.2, 1.2]
COND_WIDTH = 2


class GanError(RuntimeError):
    pass


@dataclass(frozen=True)
class GanConfig:
    noise_dim: int = 32
    generator_layers: tuple[int, ...] = (64, 64)
    discriminator_layers: tuple[int, ...] = (64, 32)
    epochs: int = 300
    learning_rate: float = 1e-3
    batch_size: int = 64
    seed: int = 0

    def __post_init__(self):
        if min(self.noise_dim, self.epochs, self.batch_size) < 1:
            raise ValueError("noise_dim, epochs and batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not self.generator_layers or not self.discriminator_layers:
            raise ValueError("both networks need at least one hidden layer")


@dataclass
class GanModel:
    generator: MlpModel
    discriminator: MlpModel
    schema: FeatureSchema
    scaler: ScalerParams
    config: GanConfig
    loss_history: list[dict] = field(default_factory=list)


# --------------------------------------------------------------------------
# linear stacks (ReLU hiddens, linear output) with input gradients


def _init_stack(dims: list[int], rng) -> tuple[list[np.ndarray], list[np.ndarray]]:
    weights, biases = [], []
    for n_in, n_out in zip(dims[:-1], dims[1:]):
        bound = 1.0 / np.sqrt(n_in)
        weights.append(rng.uniform(-bound, bound, size=(n_in, n_out)))
        biases.append(np.zeros(n_out))
    return weights, biases


def _stack_forward(model: MlpModel, X: np.ndarray):
    """Linear-output forward pass; returns (output, cache for backward)."""
    zs, acts = [], [X]
    a = X
    last = len(model.weights) - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = a @ w + b
        zs.append(z)
        a = z if i == last else np.maximum(z, 0.0)
        acts.append(a)
    return a, (zs, acts)


def _stack_backward(model: MlpModel, cache, delta_out: np.ndarray):
    """Gradients of all parameters plus the gradient w.r.t. the stack input."""
    zs, acts = cache
    delta = delta_out
    grads_w = [None] * len(model.weights)
    grads_b = [None] * len(model.weights)
    for i in range(len(model.weights) - 1, -1, -1):
        grads_w[i] = acts[i].T @ delta
        grads_b[i] = delta.sum(axis=0)
        delta = delta @ model.weights[i].T
        if i > 0:
            delta = delta * (zs[i - 1] > 0)
    return grads_w, grads_b, delta


class _AdamArrays:
    def __init__(self, model: MlpModel):
        self.t = 0
        self.m_w = [np.zeros_like(w) for w in model.weights]
        self.v_w = [np.zeros_like(w) for w in model.weights]
        self.m_b = [np.zeros_like(b) for b in model.biases]
        self.v_b = [np.zeros_like(b) for b in model.biases]

    def step(self, model: MlpModel, grads_w, grads_b, lr: float) -> None:
        self.t += 1
        for i in range(len(model.weights)):
            adam_update(model.weights[i], grads_w[i], self.m_w[i], self.v_w[i], self.t, lr)
            adam_update(model.biases[i], grads_b[i], self.m_b[i], self.v_b[i], self.t, lr)


# --------------------------------------------------------------------------
# generator output head


def _head_forward(schema: FeatureSchema, U: np.ndarray):
    """Slot-wise head: tanh-affine for numeric/binary slots, per-block
    softmax for categoricals.  Returns (H, tanh cache)."""
    H = np.empty_like(U)
    noncat = ~_categorical_mask(schema)
    t = np.tanh(U[:, noncat])
    H[:, noncat] = TANH_CENTER + TANH_HALF_RANGE * t
    for lo, hi in schema.categorical_blocks():
        block = U[:, lo:hi]
        shifted = block - block.max(axis=1, keepdims=True)
        e = np.exp(shifted)
        H[:, lo:hi] = e / e.sum(axis=1, keepdims=True)
    return H, t


def _head_backward(schema: FeatureSchema, H: np.ndarray, t: np.ndarray,
                   dH: np.ndarray) -> np.ndarray:
    dU = np.empty_like(dH)
    noncat = ~_categorical_mask(schema)
    dU[:, noncat] = dH[:, noncat] * TANH_HALF_RANGE * (1.0 - t * t)
    for lo, hi in schema.categorical_blocks():
        s = H[:, lo:hi]
        g = dH[:, lo:hi]
        dU[:, lo:hi] = s * (g - (g * s).sum(axis=1, keepdims=True))
    return dU


def _categorical_mask(schema: FeatureSchema) -> np.ndarray:
    mask = np.zeros(schema.d, dtype=bool)
    for lo, hi in schema.categorical_blocks():
        mask[lo:hi] = True
    return mask


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _one_hot_classes(y: np.ndarray) -> np.ndarray:
    cond = np.zeros((len(y), COND_WIDTH))
    cond[np.arange(len(y)), y.astype(int)] = 1.0
    return cond


# --------------------------------------------------------------------------
# training


def gan_train(dataset: Dataset, gan_config: GanConfig,
              scaler: ScalerParams | None = None) -> GanModel:
    """Alternating discriminator/generator updates with the non-saturating
    objective.  The dataset is min-max scaled internally; the fitted scaler
    rides along in the model for inverse scaling at sampling time."""
    neg, pos = dataset.class_counts()
    if neg == 0 or pos == 0:
        raise GanError("GAN training needs both classes present")
    schema = dataset.schema
    scaler = scaler or fit_minmax(dataset)
    X = transform_minmax(scaler, dataset.X)
    y = dataset.y.astype(np.int64)

    rng = np.random.default_rng(gan_config.seed)
    g_dims = [gan_config.noise_dim + COND_WIDTH, *gan_config.generator_layers, schema.d]
    d_dims = [schema.d + COND_WIDTH, *gan_config.discriminator_layers, 1]
    gw, gb = _init_stack(g_dims, rng)
    dw, db = _init_stack(d_dims, rng)
    gen = MlpModel(backbone_id="custom", widths=tuple(gan_config.generator_layers),
                   weights=gw, biases=gb)
    disc = MlpModel(backbone_id="custom", widths=tuple(gan_config.discriminator_layers),
                    weights=dw, biases=db)
    g_state, d_state = _AdamArrays(gen), _AdamArrays(disc)

    n = len(X)
    history: list[dict] = []
    eps = 1e-12
    for epoch in range(gan_config.epochs):
        order = rng.permutation(n)
        d_losses, g_losses = [], []
        for start in range(0, n, gan_config.batch_size):
            idx = order[start:start + gan_config.batch_size]
            real_x, real_y = X[idx], y[idx]
            m = len(idx)
            cond = _one_hot_classes(real_y)

            # --- discriminator step: real -> 1, fake -> 0
            z = rng.standard_normal((m, gan_config.noise_dim))
            U, _ = _stack_forward(gen, np.hstack([z, cond]))
            fake_h, _ = _head_forward(schema, U)
            d_in = np.vstack([np.hstack([real_x, cond]), np.hstack([fake_h, cond])])
            logits, d_cache = _stack_forward(disc, d_in)
            p = _sigmoid(logits[:, 0])
            labels = np.concatenate([np.ones(m), np.zeros(m)])
            d_loss = float(-np.mean(labels * np.log(p + eps)
                                    + (1 - labels) * np.log(1 - p + eps)))
            delta = ((p - labels) / (2 * m)).reshape(-1, 1)
            gw_d, gb_d, _ = _stack_backward(disc, d_cache, delta)
            d_state.step(disc, gw_d, gb_d, gan_config.learning_rate)

            # --- generator step: push D(fake) toward 1 (non-saturating)
            z = rng.standard_normal((m, gan_config.noise_dim))
            g_in = np.hstack([z, cond])
            U, g_cache = _stack_forward(gen, g_in)
            fake_h, tcache = _head_forward(schema, U)
            logits, d_cache = _stack_forward(disc, np.hstack([fake_h, cond]))
            p = _sigmoid(logits[:, 0])
            g_loss = float(-np.mean(np.log(p + eps)))
            delta = ((p - 1.0) / m).reshape(-1, 1)
            _, _, d_input_grad = _stack_backward(disc, d_cache, delta)
            dH = d_input_grad[:, :schema.d]
            dU = _head_backward(schema, fake_h, tcache, dH)
            gw_g, gb_g, _ = _stack_backward(gen, g_cache, dU)
            g_state.step(gen, gw_g, gb_g, gan_config.learning_rate)

            d_losses.append(d_loss)
            g_losses.append(g_loss)

        epoch_d, epoch_g = float(np.mean(d_losses)), float(np.mean(g_losses))
        if not (np.isfinite(epoch_d) and np.isfinite(epoch_g)):
            raise GanError(f"non-finite GAN loss at epoch {epoch}")
        for arr in (*gen.weights, *gen.biases, *disc.weights, *disc.biases):
            if not np.isfinite(arr).all():
                raise GanError(f"non-finite GAN parameters at epoch {epoch}")
        history.append({"epoch": epoch, "d_loss": epoch_d, "g_loss": epoch_g})

    return GanModel(generator=gen, discriminator=disc, schema=schema,
                    scaler=scaler, config=gan_config, loss_history=history)


# --------------------------------------------------------------------------
# sampling


def gan_sample(model: GanModel, target_class: int, n: int, seed) -> list[CaseRecord]:
    """Draw ``n`` conditioned records in raw units.

    Categorical blocks decode by argmax to exact one-hots, binary slots snap
    to {0,1}; numeric slots inverse-scale without clipping, so values can
    fall outside the training range (including negatives).
    """
    if target_class not in (0, 1):
        raise GanError("target_class must be 0 or 1")
    if n == 0:
        return []
    schema = model.schema
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n, model.config.noise_dim))
    cond = _one_hot_classes(np.full(n, target_class))
    U, _ = _stack_forward(model.generator, np.hstack([z, cond]))
    H, _ = _head_forward(schema, U)

    raw = inverse_minmax(model.scaler, H)
    out = np.array(raw)
    binary = schema.binary_slots()
    out[:, binary] = (H[:, binary] >= 0.5).astype(np.float64)
    for lo, hi in schema.categorical_blocks():
        block = np.zeros((n, hi - lo))
        block[np.arange(n), np.argmax(H[:, lo:hi], axis=1)] = 1.0
        out[:, lo:hi] = block
    return [CaseRecord(x=out[i], y=target_class) for i in range(n)]


def discriminator_accuracy(model: GanModel, dataset: Dataset, n_fake: int, seed) -> float:
    """Held-out check: how well the trained discriminator separates real
    records from fresh samples (0.5 = fooled)."""
    rng = np.random.default_rng(seed)
    X = transform_minmax(model.scaler, dataset.X)
    y = dataset.y.astype(np.int64)
    cond = _one_hot_classes(y)
    logits, _ = _stack_forward(model.discriminator, np.hstack([X, cond]))
    real_correct = int((_sigmoid(logits[:, 0]) >= 0.5).sum())

    neg, pos = dataset.class_counts()
    fake_y = (rng.random(n_fake) < pos / (neg + pos)).astype(np.int64)
    z = rng.standard_normal((n_fake, model.config.noise_dim))
    U, _ = _stack_forward(model.generator, np.hstack([z, _one_hot_classes(fake_y)]))
    H, _ = _head_forward(model.schema, U)
    logits, _ = _stack_forward(model.discriminator, np.hstack([H, _one_hot_classes(fake_y)]))
    fake_correct = int((_sigmoid(logits[:, 0]) < 0.5).sum())
    return (real_correct + fake_correct) / (len(dataset) + n_fake)
