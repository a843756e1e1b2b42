"""Layers with hand-written forward and backward passes.

All layers work on a leading batch axis. ``forward(x)`` returns ``(y, cache)``
and ``backward(grad_y, cache)`` returns ``(grad_x, grads)`` where ``grads`` has
the same keys and shapes as ``layer.params``. A cache belongs to the forward
call that produced it and must not be reused for a different input.

Packed recurrent parameters use the gate order (input, forget, candidate,
output) along the last axis.
"""

from __future__ import annotations

import math
from typing import Any

import numpy as np

from .tensor import DTYPE, NonFiniteError, ShapeError, check_finite

Cache = Any
Grads = dict[str, np.ndarray]


def sigmoid(z: np.ndarray) -> np.ndarray:
    # tanh form avoids overflow warnings from exp(-z) at large |z|
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def glorot_uniform(shape, fan_in: int, fan_out: int, rng: np.random.Generator) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(DTYPE)


class Layer:
    """Base class. Parameter-free layers keep an empty ``params`` dict."""

    kind = "layer"

    def __init__(self) -> None:
        self.params: dict[str, np.ndarray] = {}

    def param_specs(self) -> dict[str, tuple[tuple[int, ...], int, int]]:
        """Map parameter name to ``(shape, fan_in, fan_out)``; fans of 0 mean bias."""
        return {}

    def init_params(self, rng: np.random.Generator) -> None:
        self.params = glorot_init(self, rng)

    def output_shape(self, input_shape: tuple[int, ...]) -> tuple[int, ...]:
        """Per-sample output shape (no batch axis)."""
        raise NotImplementedError

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, Cache]:
        raise NotImplementedError

    def backward(self, grad: np.ndarray, cache: Cache) -> tuple[np.ndarray, Grads]:
        raise NotImplementedError

    def config(self) -> dict:
        return {}

    def set_params(self, params: dict[str, np.ndarray]) -> None:
        specs = self.param_specs()
        if set(params) != set(specs):
            raise ShapeError(f"{self.kind}: expected params {sorted(specs)}, got {sorted(params)}")
        for name, (shape, _, _) in specs.items():
            if params[name].shape != shape:
                raise ShapeError(
                    f"{self.kind}.{name}: expected shape {shape}, got {params[name].shape}"
                )
        self.params = {k: np.array(v, dtype=DTYPE) for k, v in params.items()}

    def __repr__(self) -> str:
        args = ", ".join(f"{k}={v}" for k, v in self.config().items())
        return f"{type(self).__name__}({args})"


def glorot_init(layer: Layer, rng: np.random.Generator) -> dict[str, np.ndarray]:
    """Glorot-uniform weights, zero biases, drawn in declaration order."""
    params = {}
    for name, (shape, fan_in, fan_out) in layer.param_specs().items():
        if any(s <= 0 for s in shape):
            raise ShapeError(f"{layer.kind}.{name}: invalid shape {shape}")
        if fan_in == 0 and fan_out == 0:
            params[name] = np.zeros(shape, dtype=DTYPE)
        else:
            params[name] = glorot_uniform(shape, fan_in, fan_out, rng)
    return params


def _expect_rank(kind: str, x: np.ndarray, rank: int) -> None:
    if x.ndim != rank:
        raise ShapeError(f"{kind}: expected rank-{rank} batch input, got shape {x.shape}")


class Dense(Layer):
    kind = "dense"

    def __init__(self, in_features: int, out_features: int) -> None:
        super().__init__()
        self.in_features = in_features
        self.out_features = out_features

    def config(self):
        return {"in_features": self.in_features, "out_features": self.out_features}

    def param_specs(self):
        i, o = self.in_features, self.out_features
        return {"W": ((i, o), i, o), "b": ((o,), 0, 0)}

    def output_shape(self, input_shape):
        if input_shape != (self.in_features,):
            raise ShapeError(f"dense: expected input {(self.in_features,)}, got {input_shape}")
        return (self.out_features,)

    def forward(self, x):
        _expect_rank(self.kind, x, 2)
        if x.shape[1] != self.in_features:
            raise ShapeError(f"dense: input {x.shape} does not match W {self.params['W'].shape}")
        return x @ self.params["W"] + self.params["b"], x

    def backward(self, grad, cache):
        x = cache
        grads = {"W": x.T @ grad, "b": grad.sum(axis=0)}
        return grad @ self.params["W"].T, grads


class ReLU(Layer):
    kind = "relu"

    def output_shape(self, input_shape):
        return input_shape

    def forward(self, x):
        mask = x > 0
        return np.where(mask, x, 0.0), mask

    def backward(self, grad, cache):
        return np.where(cache, grad, 0.0), {}


class Conv1D(Layer):
    """Valid, stride-1 cross-correlation over the time axis.

    Kernel shape is ``(filters, width, in_channels)``.
    """

    kind = "conv1d"

    def __init__(self, in_channels: int, filters: int, width: int) -> None:
        super().__init__()
        self.in_channels = in_channels
        self.filters = filters
        self.width = width

    def config(self):
        return {"in_channels": self.in_channels, "filters": self.filters, "width": self.width}

    def param_specs(self):
        f, k, c = self.filters, self.width, self.in_channels
        return {"kernel": ((f, k, c), k * c, k * f), "bias": ((f,), 0, 0)}

    def output_shape(self, input_shape):
        t, c = input_shape
        if c != self.in_channels:
            raise ShapeError(f"conv1d: expected {self.in_channels} channels, got {c}")
        if t < self.width:
            raise ShapeError(f"conv1d: {t} timesteps is shorter than kernel width {self.width}")
        return (t - self.width + 1, self.filters)

    def forward(self, x):
        _expect_rank(self.kind, x, 3)
        b, t, c = x.shape
        self.output_shape((t, c))
        k = self.width
        n = t - k + 1
        # cols[b, t, j, c] = x[b, t + j, c]
        cols = np.stack([x[:, j : j + n, :] for j in range(k)], axis=2).reshape(b, n, k * c)
        w = self.params["kernel"].reshape(self.filters, k * c)
        y = cols @ w.T + self.params["bias"]
        return y, (x.shape, cols)

    def backward(self, grad, cache):
        x_shape, cols = cache
        b, t, c = x_shape
        k, f = self.width, self.filters
        n = t - k + 1
        w = self.params["kernel"].reshape(f, k * c)
        g2 = grad.reshape(b * n, f)
        dw = (g2.T @ cols.reshape(b * n, k * c)).reshape(f, k, c)
        dcols = (g2 @ w).reshape(b, n, k, c)
        dx = np.zeros(x_shape, dtype=DTYPE)
        for j in range(k):
            dx[:, j : j + n, :] += dcols[:, :, j, :]
        return dx, {"kernel": dw, "bias": g2.sum(axis=0)}


class MaxPool1D(Layer):
    """Non-overlapping max pooling; a trailing partial window is dropped."""

    kind = "maxpool1d"

    def __init__(self, size: int = 2) -> None:
        super().__init__()
        self.size = size

    def config(self):
        return {"size": self.size}

    def output_shape(self, input_shape):
        t, c = input_shape
        if t < self.size:
            raise ShapeError(f"maxpool1d: {t} timesteps shorter than pool size {self.size}")
        return (t // self.size, c)

    def forward(self, x):
        _expect_rank(self.kind, x, 3)
        b, t, c = x.shape
        s = self.size
        n = t // s
        if n == 0:
            raise ShapeError(f"maxpool1d: {t} timesteps shorter than pool size {s}")
        windows = x[:, : n * s, :].reshape(b, n, s, c)
        idx = windows.argmax(axis=2)  # first maximum wins ties
        y = np.take_along_axis(windows, idx[:, :, None, :], axis=2)[:, :, 0, :]
        return y, (x.shape, idx)

    def backward(self, grad, cache):
        x_shape, idx = cache
        b, t, c = x_shape
        s = self.size
        n = t // s
        dwin = np.zeros((b, n, s, c), dtype=DTYPE)
        np.put_along_axis(dwin, idx[:, :, None, :], grad[:, :, None, :], axis=2)
        dx = np.zeros(x_shape, dtype=DTYPE)
        dx[:, : n * s, :] = dwin.reshape(b, n * s, c)
        return dx, {}


class Flatten(Layer):
    kind = "flatten"

    def output_shape(self, input_shape):
        return (int(np.prod(input_shape)),)

    def forward(self, x):
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, grad, cache):
        return grad.reshape(cache), {}


class RepeatVector(Layer):
    kind = "repeat_vector"

    def __init__(self, n: int) -> None:
        super().__init__()
        self.n = n

    def config(self):
        return {"n": self.n}

    def output_shape(self, input_shape):
        if len(input_shape) != 1:
            raise ShapeError(f"repeat_vector: expected a vector, got {input_shape}")
        return (self.n, input_shape[0])

    def forward(self, x):
        _expect_rank(self.kind, x, 2)
        return np.repeat(x[:, None, :], self.n, axis=1), None

    def backward(self, grad, cache):
        return grad.sum(axis=1), {}


class TimeDistributedDense(Layer):
    """One dense transform shared across every timestep."""

    kind = "time_distributed_dense"

    def __init__(self, in_features: int, out_features: int) -> None:
        super().__init__()
        self.in_features = in_features
        self.out_features = out_features

    def config(self):
        return {"in_features": self.in_features, "out_features": self.out_features}

    def param_specs(self):
        i, o = self.in_features, self.out_features
        return {"W": ((i, o), i, o), "b": ((o,), 0, 0)}

    def output_shape(self, input_shape):
        t, i = input_shape
        if i != self.in_features:
            raise ShapeError(f"time_distributed_dense: expected {self.in_features} features, got {i}")
        return (t, self.out_features)

    def forward(self, x):
        _expect_rank(self.kind, x, 3)
        if x.shape[2] != self.in_features:
            raise ShapeError(
                f"time_distributed_dense: input {x.shape} does not match W {self.params['W'].shape}"
            )
        return x @ self.params["W"] + self.params["b"], x

    def backward(self, grad, cache):
        x = cache
        i, o = self.in_features, self.out_features
        x2 = x.reshape(-1, i)
        g2 = grad.reshape(-1, o)
        grads = {"W": x2.T @ g2, "b": g2.sum(axis=0)}
        return grad @ self.params["W"].T, grads


def _gates(z: np.ndarray, units: int):
    i = sigmoid(z[..., :units])
    f = sigmoid(z[..., units : 2 * units])
    g = np.tanh(z[..., 2 * units : 3 * units])
    o = sigmoid(z[..., 3 * units :])
    return i, f, g, o


def _gate_grads(dh, dc_next, c_prev, c, i, f, g, o):
    """Backprop one LSTM cell step. Returns (dz, dc_prev)."""
    tc = np.tanh(c)
    dc = dc_next + dh * o * (1.0 - tc * tc)
    dz = np.concatenate(
        [
            dc * g * i * (1.0 - i),
            dc * c_prev * f * (1.0 - f),
            dc * i * (1.0 - g * g),
            dh * tc * o * (1.0 - o),
        ],
        axis=-1,
    )
    return dz, dc * f


class LSTM(Layer):
    """LSTM over ``(batch, timesteps, features)`` with zero initial state.

    Parameters: ``W`` (features, 4*units) for the input path, ``U``
    (units, 4*units) for the recurrent path, ``b`` (4*units,).
    """

    kind = "lstm"

    def __init__(self, in_features: int, units: int, return_sequences: bool = False) -> None:
        super().__init__()
        self.in_features = in_features
        self.units = units
        self.return_sequences = return_sequences

    def config(self):
        return {
            "in_features": self.in_features,
            "units": self.units,
            "return_sequences": self.return_sequences,
        }

    def param_specs(self):
        f, u = self.in_features, self.units
        return {
            "W": ((f, 4 * u), f, 4 * u),
            "U": ((u, 4 * u), u, 4 * u),
            "b": ((4 * u,), 0, 0),
        }

    def output_shape(self, input_shape):
        t, f = input_shape
        if f != self.in_features:
            raise ShapeError(f"lstm: expected {self.in_features} features, got {f}")
        return (t, self.units) if self.return_sequences else (self.units,)

    def forward(self, x):
        _expect_rank(self.kind, x, 3)
        b, t, f = x.shape
        if f != self.in_features:
            raise ShapeError(f"lstm: input {x.shape} does not match W {self.params['W'].shape}")
        u = self.units
        W, U, bias = self.params["W"], self.params["U"], self.params["b"]
        # input projections for all steps at once
        zx = x @ W + bias
        hs = np.zeros((t + 1, b, u), dtype=DTYPE)
        cs = np.zeros((t + 1, b, u), dtype=DTYPE)
        acts = np.zeros((t, b, 4 * u), dtype=DTYPE)
        for s in range(t):
            z = zx[:, s, :] + hs[s] @ U
            i, f_, g, o = _gates(z, u)
            cs[s + 1] = f_ * cs[s] + i * g
            hs[s + 1] = o * np.tanh(cs[s + 1])
            acts[s] = np.concatenate([i, f_, g, o], axis=-1)
            if not np.all(np.isfinite(cs[s + 1])):
                raise NonFiniteError(f"lstm: non-finite cell state at timestep {s}")
        assert np.abs(hs).max() <= 1.0, "lstm hidden state left [-1, 1]"
        out = np.transpose(hs[1:], (1, 0, 2)).copy() if self.return_sequences else hs[t].copy()
        return out, (x, hs, cs, acts)

    def backward(self, grad, cache):
        x, hs, cs, acts = cache
        b, t, _ = x.shape
        u = self.units
        W, U = self.params["W"], self.params["U"]
        if self.return_sequences:
            g_seq = grad
        else:
            g_seq = np.zeros((b, t, u), dtype=DTYPE)
            g_seq[:, -1, :] = grad
        dzs = np.zeros((b, t, 4 * u), dtype=DTYPE)
        dU = np.zeros_like(U)
        dh_next = np.zeros((b, u), dtype=DTYPE)
        dc_next = np.zeros((b, u), dtype=DTYPE)
        for s in reversed(range(t)):
            a = acts[s]
            i, f_, g, o = a[:, :u], a[:, u : 2 * u], a[:, 2 * u : 3 * u], a[:, 3 * u :]
            dh = g_seq[:, s, :] + dh_next
            dz, dc_next = _gate_grads(dh, dc_next, cs[s], cs[s + 1], i, f_, g, o)
            dzs[:, s, :] = dz
            dU += hs[s].T @ dz
            dh_next = dz @ U.T
        dz2 = dzs.reshape(b * t, 4 * u)
        grads = {
            "W": x.reshape(b * t, -1).T @ dz2,
            "U": dU,
            "b": dz2.sum(axis=0),
        }
        return dzs @ W.T, grads


def _im2col(x: np.ndarray, kh: int, kw: int) -> np.ndarray:
    """(B, R, C, Ch) -> (B, R-kh+1, C-kw+1, kh*kw*Ch), patch order (row, col, channel)."""
    b, r, c, ch = x.shape
    ro, co = r - kh + 1, c - kw + 1
    patches = [x[:, p : p + ro, q : q + co, :] for p in range(kh) for q in range(kw)]
    return np.stack(patches, axis=3).reshape(b, ro, co, kh * kw * ch)


def _col2im(dcols: np.ndarray, x_shape, kh: int, kw: int) -> np.ndarray:
    b, r, c, ch = x_shape
    ro, co = r - kh + 1, c - kw + 1
    d = dcols.reshape(b, ro, co, kh * kw, ch)
    dx = np.zeros(x_shape, dtype=DTYPE)
    for n, (p, q) in enumerate((p, q) for p in range(kh) for q in range(kw)):
        dx[:, p : p + ro, q : q + co, :] += d[:, :, :, n, :]
    return dx


class ConvLSTM(Layer):
    """Convolutional LSTM over ``(batch, timesteps, rows, cols, channels)``.

    Input-to-state convolutions are valid; state-to-state convolutions are
    zero-padded to keep the state at ``(rows-kh+1, cols-kw+1)``. Returns the
    final hidden state ``(batch, rows', cols', filters)``.
    """

    kind = "convlstm"

    def __init__(self, in_channels: int, filters: int, kernel: tuple[int, int] = (1, 3)) -> None:
        super().__init__()
        kh, kw = kernel
        if kh % 2 == 0 or kw % 2 == 0:
            raise ShapeError(f"convlstm: kernel {kernel} must have odd sides for same padding")
        self.in_channels = in_channels
        self.filters = filters
        self.kernel = (int(kh), int(kw))

    def config(self):
        return {"in_channels": self.in_channels, "filters": self.filters, "kernel": list(self.kernel)}

    def param_specs(self):
        kh, kw = self.kernel
        c, f = self.in_channels, self.filters
        return {
            "Wx": ((kh, kw, c, 4 * f), kh * kw * c, kh * kw * 4 * f),
            "Wh": ((kh, kw, f, 4 * f), kh * kw * f, kh * kw * 4 * f),
            "b": ((4 * f,), 0, 0),
        }

    def output_shape(self, input_shape):
        t, r, c, ch = input_shape
        kh, kw = self.kernel
        if ch != self.in_channels:
            raise ShapeError(f"convlstm: expected {self.in_channels} channels, got {ch}")
        if c < kw or r < kh:
            raise ShapeError(f"convlstm: input {r}x{c} smaller than kernel {kh}x{kw}")
        return (r - kh + 1, c - kw + 1, self.filters)

    def forward(self, x):
        _expect_rank(self.kind, x, 5)
        b, t, r, c, ch = x.shape
        ro, co, f = self.output_shape((t, r, c, ch))
        kh, kw = self.kernel
        ph, pw = kh // 2, kw // 2
        wx = self.params["Wx"].reshape(-1, 4 * f)
        wh = self.params["Wh"].reshape(-1, 4 * f)
        h = np.zeros((b, ro, co, f), dtype=DTYPE)
        cell = np.zeros_like(h)
        steps = []
        for s in range(t):
            xcols = _im2col(x[:, s], kh, kw)
            hpad = np.pad(h, ((0, 0), (ph, ph), (pw, pw), (0, 0)))
            hcols = _im2col(hpad, kh, kw)
            z = xcols @ wx + hcols @ wh + self.params["b"]
            i, f_, g, o = _gates(z, f)
            c_prev = cell
            cell = f_ * c_prev + i * g
            h = o * np.tanh(cell)
            if not np.all(np.isfinite(cell)):
                raise NonFiniteError(f"convlstm: non-finite cell state at timestep {s}")
            steps.append((xcols, hcols, c_prev, cell, i, f_, g, o))
        assert np.abs(h).max() <= 1.0, "convlstm hidden state left [-1, 1]"
        return h, (x.shape, steps)

    def backward(self, grad, cache):
        x_shape, steps = cache
        b, t, r, c, ch = x_shape
        f = self.filters
        kh, kw = self.kernel
        ph, pw = kh // 2, kw // 2
        wx = self.params["Wx"].reshape(-1, 4 * f)
        wh = self.params["Wh"].reshape(-1, 4 * f)
        dwx = np.zeros_like(wx)
        dwh = np.zeros_like(wh)
        db = np.zeros(4 * f, dtype=DTYPE)
        dx = np.zeros(x_shape, dtype=DTYPE)
        dh = grad
        dc_next = np.zeros_like(grad)
        hpad_shape = (b, grad.shape[1] + 2 * ph, grad.shape[2] + 2 * pw, f)
        for s in reversed(range(t)):
            xcols, hcols, c_prev, cell, i, f_, g, o = steps[s]
            dz, dc_next = _gate_grads(dh, dc_next, c_prev, cell, i, f_, g, o)
            dz2 = dz.reshape(-1, 4 * f)
            dwx += xcols.reshape(dz2.shape[0], -1).T @ dz2
            dwh += hcols.reshape(dz2.shape[0], -1).T @ dz2
            db += dz2.sum(axis=0)
            dx[:, s] = _col2im(dz @ wx.T, (b, r, c, ch), kh, kw)
            dhpad = _col2im(dz @ wh.T, hpad_shape, kh, kw)
            dh = dhpad[:, ph : hpad_shape[1] - ph, pw : hpad_shape[2] - pw, :]
        grads = {
            "Wx": dwx.reshape(self.params["Wx"].shape),
            "Wh": dwh.reshape(self.params["Wh"].shape),
            "b": db,
        }
        return dx, grads


LAYER_TYPES: dict[str, type[Layer]] = {
    cls.kind: cls
    for cls in (Dense, ReLU, Conv1D, MaxPool1D, Flatten, RepeatVector, TimeDistributedDense, LSTM, ConvLSTM)
}


def layer_from_config(kind: str, config: dict) -> Layer:
    try:
        cls = LAYER_TYPES[kind]
    except KeyError:
        raise ValueError(f"unknown layer kind {kind!r}") from None
    if kind == "convlstm":
        config = {**config, "kernel": tuple(config["kernel"])}
    return cls(**config)


def gradient_check(layer: Layer, input_shape: tuple[int, ...], eps: float = 1e-5, seed: int = 0) -> float:
    """Max relative error between ``backward`` and central finite differences.

    Covers every parameter entry and every input entry. The scalar probed is
    ``sum(forward(x) * R)`` for a fixed random ``R``; ``input_shape`` includes
    the batch axis. Parameters are initialised from ``seed`` if the layer has none.
    """
    rng = np.random.default_rng(seed)
    if layer.param_specs() and not layer.params:
        layer.init_params(rng)
        # glorot biases are zero; random ones exercise the bias path harder
        for name, (shape, fi, fo) in layer.param_specs().items():
            if fi == 0 and fo == 0:
                layer.params[name] = rng.normal(0.0, 0.5, size=shape)
    x = rng.normal(0.0, 1.0, size=input_shape)
    y, cache = layer.forward(x)
    proj = rng.normal(0.0, 1.0, size=y.shape)
    gx, gp = layer.backward(proj, cache)

    def loss() -> float:
        return float(np.sum(layer.forward(x)[0] * proj))

    def numeric(arr: np.ndarray) -> np.ndarray:
        out = np.zeros_like(arr)
        flat = arr.reshape(-1)
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + eps
            lp = loss()
            flat[k] = orig - eps
            lm = loss()
            flat[k] = orig
            out.reshape(-1)[k] = (lp - lm) / (2 * eps)
        return out

    worst = 0.0
    pairs = [(gx, numeric(x))] + [(gp[name], numeric(p)) for name, p in layer.params.items()]
    for a, n in pairs:
        if a.shape != n.shape:
            raise ShapeError(f"gradient shape {a.shape} does not match {n.shape}")
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-8)
        worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    check_finite(np.asarray(worst), "gradient check")
    return worst
