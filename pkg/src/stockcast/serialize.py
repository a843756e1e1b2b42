"""Parameter container: one ``.npz`` archive per model.

Keys are ``layer{index:03d}/{tensor name}`` holding float64 arrays, plus a
``__meta__`` entry with a JSON document describing the layer stack. Arrays are
stored raw, so a save/load round trip is bit-exact.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

META_KEY = "__meta__"


def save_params(path: str | Path, params: list[dict[str, np.ndarray]], meta: dict) -> None:
    arrays = {
        f"layer{i:03d}/{name}": np.asarray(value, dtype=np.float64)
        for i, layer_params in enumerate(params)
        for name, value in layer_params.items()
    }
    meta = {**meta, "n_layers": len(params)}
    arrays[META_KEY] = np.frombuffer(json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8)
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_params(path: str | Path) -> tuple[list[dict[str, np.ndarray]], dict]:
    with np.load(path, allow_pickle=False) as archive:
        meta = json.loads(archive[META_KEY].tobytes().decode())
        params: list[dict[str, np.ndarray]] = [{} for _ in range(meta["n_layers"])]
        for key in archive.files:
            if key == META_KEY:
                continue
            layer, name = key.split("/", 1)
            params[int(layer.removeprefix("layer"))][name] = archive[key]
    return params, meta
