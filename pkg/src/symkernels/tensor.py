"""Dense float64 arrays with fixed row-major layout.

`Tensor` is a thin owner of a C-contiguous numpy buffer.  Every
constructor copies, so a tensor never aliases memory held elsewhere.
Layer code works on plain ndarrays; ``np.asarray(tensor)`` gives the
underlying buffer without a copy.
"""

from __future__ import annotations

from math import prod
from typing import Iterable, Sequence

import numpy as np

MAX_RANK = 4


def _check_shape(shape: Sequence[int]) -> tuple[int, ...]:
    shape = tuple(int(s) for s in shape)
    if not 1 <= len(shape) <= MAX_RANK:
        raise ValueError(f"rank must be between 1 and {MAX_RANK}, got shape {shape}")
    if any(s < 1 for s in shape):
        raise ValueError(f"all extents must be >= 1, got shape {shape}")
    return shape


class Tensor:
    """Immutable-by-convention n-d array of doubles (rank 1 to 4)."""

    __slots__ = ("_data",)

    def __init__(self, data):
        arr = np.array(data, dtype=np.float64, order="C", copy=True)
        _check_shape(arr.shape)
        if not np.all(np.isfinite(arr)):
            raise ValueError("tensor values must be finite")
        arr.flags.writeable = False
        self._data = arr

    @property
    def shape(self) -> tuple[int, ...]:
        return self._data.shape

    @property
    def rank(self) -> int:
        return self._data.ndim

    @property
    def size(self) -> int:
        return self._data.size

    def values(self) -> list[float]:
        """Flat row-major copy of the data."""
        return self._data.ravel().tolist()

    def numpy(self) -> np.ndarray:
        """Writable copy of the buffer."""
        return self._data.copy()

    def __array__(self, dtype=None, copy=None):
        if dtype is not None and np.dtype(dtype) != self._data.dtype:
            return self._data.astype(dtype)
        return self._data

    def __getitem__(self, idx):
        out = self._data[idx]
        return out if np.ndim(out) == 0 else Tensor(out)

    def __eq__(self, other):
        if not isinstance(other, Tensor):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self._data, other._data))

    __hash__ = None

    def __repr__(self):
        return f"Tensor(shape={self.shape})"


def zeros(shape: Sequence[int]) -> Tensor:
    return Tensor(np.zeros(_check_shape(shape)))


def from_values(shape: Sequence[int], values: Iterable[float]) -> Tensor:
    shape = _check_shape(shape)
    flat = np.asarray(list(values), dtype=np.float64)
    if flat.size != prod(shape):
        raise ValueError(f"{flat.size} values cannot fill shape {shape} ({prod(shape)} elements)")
    return Tensor(flat.reshape(shape))


def concat_channels(a, b) -> Tensor:
    """Stack two (C, H, W) volumes along channels, ``a`` first."""
    a, b = np.asarray(a), np.asarray(b)
    if a.ndim != 3 or b.ndim != 3:
        raise ValueError(f"expected rank-3 inputs, got shapes {a.shape} and {b.shape}")
    if a.shape[1:] != b.shape[1:]:
        raise ValueError(f"spatial shapes differ: {a.shape[1:]} vs {b.shape[1:]}")
    return Tensor(np.concatenate([a, b], axis=0))


def slice_channels(t, start: int, stop: int) -> Tensor:
    arr = np.asarray(t)
    if arr.ndim != 3 or not 0 <= start < stop <= arr.shape[0]:
        raise ValueError(f"bad channel range [{start}, {stop}) for shape {arr.shape}")
    return Tensor(arr[start:stop])
