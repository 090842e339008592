"""Sliding-window vectorization of image stacks into patch matrices.

A patch matrix holds one vectorized l1 x l2 window per column; rows follow the
row-major scan of the window, columns follow map order then the row-major scan
of window positions. With stride 1 and zero_same padding every p x q map
contributes exactly p*q columns, which is what the batched Gram accumulation
downstream counts on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ConfigError, ShapeError

PADDINGS = ("none", "zero_same")


@dataclass(frozen=True)
class PatchGeometry:
    l1: int
    l2: int
    stride: int = 1
    padding: str = "zero_same"

    def __post_init__(self):
        if self.l1 < 1 or self.l2 < 1:
            raise ConfigError(f"patch size {self.l1}x{self.l2} must be at least 1x1")
        if self.stride < 1:
            raise ConfigError(f"stride {self.stride} must be >= 1")
        if self.padding not in PADDINGS:
            raise ConfigError(f"padding {self.padding!r} not one of {PADDINGS}")

    @property
    def dim(self) -> int:
        return self.l1 * self.l2

    def out_shape(self, p: int, q: int) -> tuple[int, int]:
        """Window-position grid for a p x q map."""
        if self.padding == "zero_same":
            return (
                -(-p // self.stride),
                -(-q // self.stride),
            )
        if p < self.l1 or q < self.l2:
            raise ShapeError(
                f"{self.l1}x{self.l2} window does not fit a {p}x{q} map without padding"
            )
        return ((p - self.l1) // self.stride + 1, (q - self.l2) // self.stride + 1)

    def pad_amounts(self, p: int, q: int) -> tuple[int, int, int, int]:
        """(top, bottom, left, right) zero padding; all zero for padding='none'."""
        if self.padding == "none":
            return 0, 0, 0, 0
        oh, ow = self.out_shape(p, q)
        top = (self.l1 - 1) // 2
        left = (self.l2 - 1) // 2
        # Just enough padding for the last window; with stride > 1 the formula
        # can go negative (no padding needed on that side).
        bottom = max(0, (oh - 1) * self.stride + self.l1 - p - top)
        right = max(0, (ow - 1) * self.stride + self.l2 - q - left)
        return top, bottom, left, right


@dataclass(frozen=True)
class PatchMatrix:
    """dim x cols matrix of vectorized windows, plus column-origin bookkeeping."""

    values: np.ndarray
    geom: PatchGeometry
    n_maps: int
    out_shape: tuple[int, int]

    @property
    def dim(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    @property
    def cols_per_map(self) -> int:
        return self.out_shape[0] * self.out_shape[1]

    def origin(self, col: int) -> tuple[int, int, int]:
        """Column -> (map index, window row, window col)."""
        per = self.cols_per_map
        m, pos = divmod(col, per)
        i, j = divmod(pos, self.out_shape[1])
        return m, i * self.geom.stride, j * self.geom.stride


def extract_patch_stack(maps: np.ndarray, geom: PatchGeometry, center: bool) -> PatchMatrix:
    """Vectorize a stack of (N, p, q) maps into one patch matrix.

    ``center`` subtracts each column's own mean, matching the statistics the
    correlation filters are learned from.
    """
    maps = np.asarray(maps, dtype=np.float64)
    if maps.ndim == 2:
        maps = maps[None, :, :]
    if maps.ndim != 3:
        raise ShapeError(f"expected (N, p, q) map stack, got shape {maps.shape}")
    n, p, q = maps.shape
    oh, ow = geom.out_shape(p, q)
    top, bottom, left, right = geom.pad_amounts(p, q)
    if top or bottom or left or right:
        padded = np.zeros((n, p + top + bottom, q + left + right), dtype=np.float64)
        padded[:, top : top + p, left : left + q] = maps
    else:
        padded = maps

    windows = sliding_window_view(padded, (geom.l1, geom.l2), axis=(1, 2))
    windows = windows[:, :: geom.stride, :: geom.stride]
    # (N, oh, ow, l1, l2) -> (N*oh*ow, dim): one copy, ordering as documented.
    cols = windows.reshape(n * oh * ow, geom.dim)
    if center:
        cols = cols - cols.mean(axis=1, keepdims=True)
    else:
        cols = np.ascontiguousarray(cols)
    return PatchMatrix(values=cols.T, geom=geom, n_maps=n, out_shape=(oh, ow))


def extract_patches(plane: np.ndarray, geom: PatchGeometry, center: bool) -> PatchMatrix:
    """Single-map convenience wrapper around :func:`extract_patch_stack`."""
    plane = np.asarray(plane, dtype=np.float64)
    if plane.ndim != 2:
        raise ShapeError(f"expected a 2-D plane, got shape {plane.shape}")
    return extract_patch_stack(plane[None, :, :], geom, center)


@dataclass(frozen=True)
class BatchSpec:
    batch_size: int = 128

    def __post_init__(self):
        if self.batch_size < 1:
            raise ConfigError(f"batch size {self.batch_size} must be >= 1")

    def batch_count(self, n_samples: int) -> int:
        return -(-n_samples // self.batch_size)


def batch_partition(n_samples, spec: BatchSpec) -> list[range]:
    """Split sample indices into contiguous batches in manifest order.

    All batches hold exactly ``spec.batch_size`` samples except possibly the
    last. Accepts a sample count or anything with ``len()``.
    """
    m = n_samples if isinstance(n_samples, int) else len(n_samples)
    if m < 1:
        raise ConfigError("cannot partition an empty sample list")
    return [range(start, min(start + spec.batch_size, m)) for start in range(0, m, spec.batch_size)]
