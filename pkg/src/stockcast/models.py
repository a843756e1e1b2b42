"""The five forecasting architectures and the model container."""

from __future__ import annotations

import enum
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .layers import (
    LSTM,
    ConvLSTM,
    Conv1D,
    Dense,
    Flatten,
    Layer,
    MaxPool1D,
    ReLU,
    RepeatVector,
    TimeDistributedDense,
    layer_from_config,
)
from .optim import TrainConfig
from .serialize import load_params, save_params
from .tensor import NonFiniteError, ShapeError

HORIZON = 5


class ModelKind(str, enum.Enum):
    CNN1 = "cnn1"
    CNN2 = "cnn2"
    LSTM1 = "lstm1"
    LSTM2 = "lstm2"
    LSTM3 = "lstm3"

    @classmethod
    def parse(cls, value: "str | ModelKind") -> "ModelKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower().replace("#", ""))
        except ValueError:
            names = ", ".join(k.value for k in cls)
            raise ValueError(f"unknown model kind {value!r} (expected one of {names})") from None


INPUT_LEN = {
    ModelKind.CNN1: 5,
    ModelKind.CNN2: 10,
    ModelKind.LSTM1: 10,
    ModelKind.LSTM2: 10,
    ModelKind.LSTM3: 10,
}


@dataclass(frozen=True)
class Overrides:
    """Widths the architecture figures leave open, plus the documented defaults."""

    cnn_filters: int = 16
    cnn_dense_units: int = 10
    lstm_units: int = 200
    encoder_filters: int = 64
    convlstm_filters: int = 64
    interpreter_units: int = 100
    kernel_width: int = 3


DEFAULT_TRAIN = {
    ModelKind.CNN1: TrainConfig(epochs=20, batch_size=4),
    ModelKind.CNN2: TrainConfig(epochs=20, batch_size=4),
    ModelKind.LSTM1: TrainConfig(epochs=20, batch_size=16),
    ModelKind.LSTM2: TrainConfig(epochs=20, batch_size=16),
    ModelKind.LSTM3: TrainConfig(epochs=20, batch_size=16),
}


@dataclass
class Scaler:
    """Affine map ``(x - offset) / scale`` fitted on training opens only."""

    offset: float = 0.0
    scale: float = 1.0

    @classmethod
    def fit(cls, values) -> "Scaler":
        values = np.asarray(values, dtype=np.float64)
        sd = float(values.std())
        return cls(float(values.mean()), sd if sd > 0 else 1.0)

    def transform(self, x):
        return (np.asarray(x, dtype=np.float64) - self.offset) / self.scale

    def inverse(self, y):
        return np.asarray(y, dtype=np.float64) * self.scale + self.offset


def _stack(kind: ModelKind, ov: Overrides) -> list[Layer]:
    k = ov.kernel_width
    if kind in (ModelKind.CNN1, ModelKind.CNN2):
        n = INPUT_LEN[kind]
        pooled = (n - k + 1) // 2
        return [
            Conv1D(1, ov.cnn_filters, k),
            ReLU(),
            MaxPool1D(2),
            Flatten(),
            Dense(pooled * ov.cnn_filters, ov.cnn_dense_units),
            ReLU(),
            Dense(ov.cnn_dense_units, HORIZON),
        ]

    u = ov.lstm_units
    if kind is ModelKind.LSTM1:
        encoder: list[Layer] = [LSTM(1, u)]
        code = u
    elif kind is ModelKind.LSTM2:
        f = ov.encoder_filters
        steps = ((10 - k + 1) - k + 1) // 2
        encoder = [
            Conv1D(1, f, k),
            ReLU(),
            Conv1D(f, f, k),
            ReLU(),
            MaxPool1D(2),
            Flatten(),
        ]
        code = steps * f
    else:
        f = ov.convlstm_filters
        encoder = [ConvLSTM(1, f, (1, k)), Flatten()]
        code = (5 - k + 1) * f
    decoder = [
        RepeatVector(HORIZON),
        LSTM(code, u, return_sequences=True),
        ReLU(),
        TimeDistributedDense(u, ov.interpreter_units),
        ReLU(),
        TimeDistributedDense(ov.interpreter_units, 1),
        Flatten(),
    ]
    return encoder + decoder


def _input_shape(kind: ModelKind) -> tuple[int, ...]:
    if kind is ModelKind.LSTM3:
        # two 5-day subsequences as (time, rows, cols, channels)
        return (2, 1, 5, 1)
    return (INPUT_LEN[kind], 1)


# Shape checkpoints implied by the architecture descriptions, for the default widths.
_EXPECTED_CHAIN = {
    ModelKind.CNN1: {0: (3, 16), 1: (1, 16), 2: (16,)},
    ModelKind.CNN2: {0: (8, 16), 1: (4, 16), 2: (64,)},
    ModelKind.LSTM1: {0: (200,), 1: (5, 200), 2: (5, 200)},
    ModelKind.LSTM2: {0: (8, 64), 1: (6, 64), 2: (3, 64), 3: (192,), 4: (5, 192), 5: (5, 200)},
    ModelKind.LSTM3: {0: (1, 3, 64), 1: (192,), 2: (5, 192), 3: (5, 200)},
}


@dataclass
class Model:
    kind: ModelKind
    layers: list[Layer]
    seed: int
    overrides: Overrides = field(default_factory=Overrides)
    train_config: TrainConfig = field(default_factory=TrainConfig)
    scaler: Scaler | None = None
    shape_chain: list[tuple[int, ...]] = field(default_factory=list)

    horizon = HORIZON

    @property
    def input_len(self) -> int:
        return INPUT_LEN[self.kind]

    @property
    def input_shape(self) -> tuple[int, ...]:
        return _input_shape(self.kind)

    def scale(self, values: np.ndarray) -> np.ndarray:
        return self.scaler.transform(values) if self.scaler else np.asarray(values, dtype=np.float64)

    def unscale(self, values: np.ndarray) -> np.ndarray:
        return self.scaler.inverse(values) if self.scaler else values

    def prepare(self, windows: np.ndarray) -> np.ndarray:
        """Raw ``(N, input_len)`` windows to the scaled network input layout."""
        windows = np.asarray(windows, dtype=np.float64)
        if windows.ndim != 2 or windows.shape[1] != self.input_len:
            raise ShapeError(f"{self.kind.value}: expected windows (N, {self.input_len}), got {windows.shape}")
        return self.scale(windows).reshape((len(windows),) + self.input_shape)

    def forward(self, x: np.ndarray):
        caches = []
        for layer in self.layers:
            x, cache = layer.forward(x)
            caches.append(cache)
        return x, caches

    def backward(self, grad: np.ndarray, caches) -> dict:
        grads = {}
        for i in reversed(range(len(self.layers))):
            grad, g = self.layers[i].backward(grad, caches[i])
            for name, value in g.items():
                grads[(i, name)] = value
        return grads

    def param_dict(self) -> dict:
        return {(i, name): p for i, layer in enumerate(self.layers) for name, p in layer.params.items()}

    def predict(self, windows: np.ndarray) -> np.ndarray:
        """``(N, input_len)`` raw windows to ``(N, 5)`` raw forecasts."""
        y, _ = self.forward(self.prepare(windows))
        if not np.all(np.isfinite(y)):
            raise NonFiniteError(f"{self.kind.value}: non-finite forecast")
        return self.unscale(y)

    def save(self, path: str | Path) -> None:
        meta = {
            "kind": self.kind.value,
            "seed": self.seed,
            "overrides": asdict(self.overrides),
            "train_config": asdict(self.train_config),
            "scaler": asdict(self.scaler) if self.scaler else None,
            "layers": [{"kind": l.kind, "config": l.config()} for l in self.layers],
        }
        save_params(path, [l.params for l in self.layers], meta)

    @classmethod
    def load(cls, path: str | Path) -> "Model":
        params, meta = load_params(path)
        kind = ModelKind.parse(meta["kind"])
        layers = [layer_from_config(spec["kind"], spec["config"]) for spec in meta["layers"]]
        for layer, p in zip(layers, params):
            if layer.param_specs():
                layer.set_params(p)
        scaler = Scaler(**meta["scaler"]) if meta["scaler"] else None
        model = cls(
            kind,
            layers,
            meta["seed"],
            Overrides(**meta["overrides"]),
            TrainConfig(**meta["train_config"]),
            scaler,
        )
        model.shape_chain = _trace_shapes(layers, model.input_shape)
        return model


def _trace_shapes(layers: list[Layer], input_shape) -> list[tuple[int, ...]]:
    chain = []
    shape = tuple(input_shape)
    for layer in layers:
        shape = tuple(layer.output_shape(shape))
        chain.append(shape)
    return chain


def build(kind: "ModelKind | str", seed: int = 0, overrides: Overrides | None = None, **train_overrides) -> Model:
    """Construct and initialise one of the five architectures.

    ``train_overrides`` (``epochs``, ``batch_size``, ``lr``, ``shuffle``)
    replace the per-kind training defaults; the training seed is ``seed``.
    """
    kind = ModelKind.parse(kind)
    ov = overrides or Overrides()
    layers = _stack(kind, ov)
    chain = _trace_shapes(layers, _input_shape(kind))
    if chain[-1] != (HORIZON,):
        raise ShapeError(f"{kind.value}: stack ends in {chain[-1]}, expected ({HORIZON},)")
    if ov == Overrides():
        # ReLU layers sit between the checkpoints, so index the non-activation layers
        core = [s for layer, s in zip(layers, chain) if not isinstance(layer, ReLU)]
        for pos, expected in _EXPECTED_CHAIN[kind].items():
            if core[pos] != expected:
                raise ShapeError(f"{kind.value}: shape {core[pos]} at stage {pos}, expected {expected}")
    rng = np.random.default_rng(seed)
    for layer in layers:
        if layer.param_specs():
            layer.init_params(rng)
    cfg = replace(DEFAULT_TRAIN[kind], seed=seed, **train_overrides)
    return Model(kind, layers, seed, ov, cfg, None, chain)


def forecast(model: Model, history) -> np.ndarray:
    """Next five opens from the trailing ``input_len`` values of ``history``.

    ``history`` is a Series or any 1-D sequence of open values.
    """
    opens = history.opens if hasattr(history, "opens") else np.asarray(history, dtype=np.float64)
    if len(opens) < model.input_len:
        raise ValueError(
            f"{model.kind.value} needs {model.input_len} days of history, got {len(opens)}"
        )
    return model.predict(opens[-model.input_len :][None, :])[0]


def describe(model: Model) -> str:
    lines = [f"{model.kind.value}: input {model.input_shape}"]
    for layer, shape in zip(model.layers, model.shape_chain):
        lines.append(f"  {layer!r:60s} -> {shape}")
    return "\n".join(lines)


def model_metadata(model: Model) -> dict:
    return {
        "kind": model.kind.value,
        "overrides": asdict(model.overrides),
        "train_config": asdict(model.train_config),
        "scaler": "standard" if model.scaler else "none",
    }
