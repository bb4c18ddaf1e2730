"""Minimal dense N-dimensional float32 tensor.

Data is stored as a flat row-major (C order) numpy array. Rank is limited
to 1..6: batch, up to two channel axes (per-channel window reductions
carry both c_out and c_in), and up to three spatial axes. Seeded random
fills use numpy's PCG64 generator; the algorithm is fixed so identical
arguments replay bit-identically across releases.
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError, ShapeError

MAX_RANK = 6


def _check_shape(shape) -> tuple[int, ...]:
    shape = tuple(int(s) for s in shape)
    if len(shape) == 0:
        raise ShapeError("shape must be non-empty")
    if len(shape) > MAX_RANK:
        raise ShapeError(f"rank {len(shape)} exceeds maximum {MAX_RANK}")
    if any(s < 1 for s in shape):
        raise ShapeError(f"all extents must be >= 1, got {shape}")
    return shape


class Tensor:
    """Dense float32 array with explicit shape, outermost axis first."""

    __slots__ = ("data",)

    def __init__(self, data: np.ndarray):
        arr = np.ascontiguousarray(data, dtype=np.float32)
        _check_shape(arr.shape)
        self.data = arr

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def get(self, index) -> float:
        self._check_index(index)
        return float(self.data[index])

    def set(self, index, value: float) -> None:
        self._check_index(index)
        self.data[index] = value

    def _check_index(self, index) -> None:
        index = tuple(index) if isinstance(index, (tuple, list)) else (index,)
        if len(index) != len(self.shape):
            raise IndexError(f"index rank {len(index)} != tensor rank {len(self.shape)}")
        for i, (idx, ext) in enumerate(zip(index, self.shape)):
            if not 0 <= idx < ext:
                raise IndexError(f"index {idx} out of bounds for axis {i} with extent {ext}")

    def reshape(self, new_shape) -> "Tensor":
        new_shape = _check_shape(new_shape)
        if int(np.prod(new_shape)) != self.size:
            raise ShapeError(f"cannot reshape {self.shape} ({self.size} elements) to {new_shape}")
        return Tensor(self.data.reshape(new_shape).copy())

    def copy(self) -> "Tensor":
        return Tensor(self.data.copy())

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape})"


def zeros(shape) -> Tensor:
    return Tensor(np.zeros(_check_shape(shape), dtype=np.float32))


def uniform_fill(shape, low: float, high: float, seed: int) -> Tensor:
    """Tensor of uniform draws in [low, high), reproducible from the seed.

    Generator is PCG64 seeded directly with ``seed``. Draws are produced as
    float32 in [0, 1) and affinely mapped; the result is clamped below
    ``high`` so the half-open interval survives float32 rounding.
    """
    shape = _check_shape(shape)
    if not low < high:
        raise DomainError(f"require low < high, got [{low}, {high})")
    rng = np.random.Generator(np.random.PCG64(seed))
    unit = rng.random(size=int(np.prod(shape)), dtype=np.float32)
    span = np.float32(high) - np.float32(low)
    out = np.float32(low) + unit * span
    np.minimum(out, np.nextafter(np.float32(high), np.float32(-np.inf)), out=out)
    return Tensor(out.reshape(shape))


def from_array(arr) -> Tensor:
    """Wrap/convert an array-like into a Tensor (copies unless already f32 C-order)."""
    return Tensor(np.asarray(arr))
