"""MSE loss, Adam, and the mini-batch training loop."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from .tensor import NonFiniteError, ShapeError

if TYPE_CHECKING:
    from .models import Model

logger = logging.getLogger(__name__)


def mse_loss(pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean squared error over every entry, and its gradient w.r.t. ``pred``."""
    if pred.shape != target.shape:
        raise ShapeError(f"mse_loss: pred {pred.shape} vs target {target.shape}")
    diff = pred - target
    return float(np.mean(diff * diff)), 2.0 * diff / diff.size


@dataclass
class AdamState:
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-7
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params: dict, grads: dict, state: AdamState) -> None:
    """One Adam update, in place on ``params`` and ``state``.

    ``params`` and ``grads`` share keys; any hashable key works. The whole
    step is rejected before touching anything if a gradient is not finite.
    """
    for key, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NonFiniteError(f"adam: non-finite gradient for parameter {key} at step {state.t + 1}")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1**state.t
    bc2 = 1.0 - b2**state.t
    for key, g in grads.items():
        if key not in state.m:
            state.m[key] = np.zeros_like(g)
            state.v[key] = np.zeros_like(g)
        m = state.m[key]
        v = state.v[key]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        if state.lr == 0.0:
            continue
        m_hat = m / bc1
        v_hat = v / bc2
        params[key] -= state.lr * m_hat / (np.sqrt(v_hat) + state.epsilon)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 20
    batch_size: int = 16
    seed: int = 0
    shuffle: bool = True
    lr: float = 0.001

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")


def n_batches(n_samples: int, batch_size: int) -> int:
    return -(-n_samples // batch_size)


def train(
    model: Model,
    inputs: np.ndarray,
    targets: np.ndarray,
    config: TrainConfig,
    state: AdamState | None = None,
) -> tuple[Model, list[float]]:
    """Fit ``model`` in place on raw-unit windows.

    ``inputs`` is ``(N, input_len)`` and ``targets`` ``(N, 5)``, both in the
    original price units; the model's scaler (if any) is applied here. The
    final short batch is kept. Returns the model and the per-epoch mean batch
    loss.
    """
    inputs = np.asarray(inputs, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if len(inputs) == 0:
        raise ValueError("train: no samples")
    if len(inputs) != len(targets):
        raise ShapeError(f"train: {len(inputs)} inputs vs {len(targets)} targets")
    if inputs.shape[1:] != (model.input_len,):
        raise ShapeError(f"train: windows {inputs.shape[1:]} do not fit model input {model.input_len}")
    if targets.shape[1:] != (model.horizon,):
        raise ShapeError(f"train: targets {targets.shape[1:]} do not fit horizon {model.horizon}")

    x_all = model.prepare(inputs)
    y_all = model.scale(targets)
    state = state if state is not None else AdamState(lr=config.lr)
    rng = np.random.default_rng(config.seed)
    n = len(x_all)
    params = model.param_dict()
    history = []
    for epoch in range(config.epochs):
        order = rng.permutation(n) if config.shuffle else np.arange(n)
        losses = []
        for bi, start in enumerate(range(0, n, config.batch_size)):
            idx = order[start : start + config.batch_size]
            pred, caches = model.forward(x_all[idx])
            loss, grad = mse_loss(pred, y_all[idx])
            if not np.isfinite(loss):
                raise NonFiniteError(f"non-finite loss at epoch {epoch + 1}, batch {bi + 1}")
            adam_step(params, model.backward(grad, caches), state)
            losses.append(loss)
        history.append(float(np.mean(losses)))
        logger.debug("epoch %d/%d loss %.6g", epoch + 1, config.epochs, history[-1])
    return model, history
