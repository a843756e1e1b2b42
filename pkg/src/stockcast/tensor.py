"""Shape-checked dense array helpers.

Every numeric quantity in the engine is a ``float64`` numpy array in C
(row-major) order. The functions here are the small set of operations the
layers rely on, each validating shapes up front so that a mismatch fails with
both shapes in the message instead of an opaque broadcasting error.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

DTYPE = np.float64


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible."""


class NonFiniteError(FloatingPointError):
    """Raised when a NaN or Inf shows up in an engine-produced value."""


def as_tensor(x) -> np.ndarray:
    return np.ascontiguousarray(x, dtype=DTYPE)


def zeros(shape: Sequence[int]) -> np.ndarray:
    shape = tuple(int(s) for s in shape)
    if any(s <= 0 for s in shape):
        raise ShapeError(f"dimension sizes must be positive, got {shape}")
    return np.zeros(shape, dtype=DTYPE)


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul expects rank-2 operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul inner dimensions differ: {a.shape} @ {b.shape}")
    return a @ b


def _same_shape(op: str, a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{op} needs equal shapes, got {a.shape} and {b.shape}")


def add(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    _same_shape("add", a, b)
    return a + b


def sub(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    _same_shape("sub", a, b)
    return a - b


def hadamard(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    _same_shape("hadamard", a, b)
    return a * b


def scale(a: np.ndarray, c: float) -> np.ndarray:
    return a * float(c)


def reshape(a: np.ndarray, new_shape: Sequence[int]) -> np.ndarray:
    new_shape = tuple(int(s) for s in new_shape)
    if int(np.prod(new_shape)) != a.size:
        raise ShapeError(
            f"cannot reshape {a.shape} ({a.size} elements) to {new_shape} "
            f"({int(np.prod(new_shape))} elements)"
        )
    return np.reshape(a, new_shape, order="C")


def transpose2d(a: np.ndarray) -> np.ndarray:
    if a.ndim != 2:
        raise ShapeError(f"transpose2d expects rank 2, got {a.shape}")
    return np.ascontiguousarray(a.T)


def slice_rows(a: np.ndarray, start: int, stop: int) -> np.ndarray:
    if not 0 <= start <= stop <= a.shape[0]:
        raise ShapeError(f"row slice [{start}:{stop}) out of range for shape {a.shape}")
    return a[start:stop]


def concat(axis: int, parts: Sequence[np.ndarray]) -> np.ndarray:
    if not parts:
        raise ShapeError("concat needs at least one part")
    ref = list(parts[0].shape)
    for p in parts[1:]:
        other = list(p.shape)
        if len(other) != len(ref) or any(
            r != o for i, (r, o) in enumerate(zip(ref, other)) if i != axis
        ):
            raise ShapeError(f"concat along axis {axis}: {tuple(ref)} vs {p.shape}")
    return np.concatenate(parts, axis=axis)


def check_finite(x: np.ndarray, what: str) -> np.ndarray:
    if not np.all(np.isfinite(x)):
        raise NonFiniteError(f"non-finite values in {what}")
    return x
