"""Binary hashing pooling and information-quality block-histogram features.

The final layer's map pairs are grouped by shared first-layer lineage: the L
consecutive maps of one group are binarized by sign, combined pixelwise into
an integer code in [0, 2^L - 1], and each code map is summarized per block by
the self-information -log p(t) of its code histogram. Probabilities rather
than raw counts make features block-size invariant.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError

ZERO_BIN_POLICIES = ("zero", "floor")


@dataclass(frozen=True)
class EncoderConfig:
    block_h: int
    block_w: int
    overlap: float = 0.0
    zero_bin_policy: str = "zero"

    def __post_init__(self):
        if self.block_h < 1 or self.block_w < 1:
            raise ConfigError(f"block size {self.block_h}x{self.block_w} must be >= 1x1")
        if not 0.0 <= self.overlap < 1.0:
            raise ConfigError(f"overlap ratio {self.overlap} outside [0, 1)")
        if self.zero_bin_policy not in ZERO_BIN_POLICIES:
            raise ConfigError(
                f"zero bin policy {self.zero_bin_policy!r} not one of {ZERO_BIN_POLICIES}"
            )

    def block_starts(self, p: int, q: int) -> list[tuple[int, int]]:
        """Top-left corners in block-scan (row-major) order; partial blocks dropped."""
        step_h = max(1, int(round((1.0 - self.overlap) * self.block_h)))
        step_w = max(1, int(round((1.0 - self.overlap) * self.block_w)))
        rows = range(0, p - self.block_h + 1, step_h)
        cols = range(0, q - self.block_w + 1, step_w)
        return [(i, j) for i in rows for j in cols]

    def block_count(self, p: int, q: int) -> int:
        return len(self.block_starts(p, q))


def binarize(plane: np.ndarray) -> np.ndarray:
    """Sign map: 1 where the value is strictly positive, 0 elsewhere."""
    return (np.asarray(plane) > 0).astype(np.int64)


def hash_combine(bitmaps) -> np.ndarray:
    """Combine L bit maps pixelwise into codes sum(2^(l-1) * bit_l).

    The list order follows the filter index of the maps being combined, so the
    first map contributes the least-significant bit.
    """
    stack = np.asarray(bitmaps)
    if stack.ndim != 3:
        raise ShapeError(f"expected a list of 2-D bit maps, got shape {stack.shape}")
    n_bits = stack.shape[0]
    if not 1 <= n_bits <= 30:
        raise ConfigError(f"can combine 1..30 bit maps, got {n_bits}")
    weights = (1 << np.arange(n_bits, dtype=np.int64))
    return np.tensordot(weights, stack.astype(np.int64), axes=([0], [0]))


def iq_block_features(q_map: np.ndarray, cfg: EncoderConfig, n_bits: int) -> np.ndarray:
    """Per-block self-information features of one hashed code map.

    For each block: histogram the 2^n_bits codes, convert to empirical
    probabilities, emit -log p(t) per bin (zero-count bins emit 0 under the
    default policy, -log(1/(2*block_pixels)) under "floor"). Blocks are
    concatenated in scan order, bins in code order.
    """
    q_map = np.asarray(q_map)
    p, q = q_map.shape
    starts = cfg.block_starts(p, q)
    if not starts:
        raise ShapeError(
            f"{cfg.block_h}x{cfg.block_w} blocks do not fit a {p}x{q} map"
        )
    bins = 1 << n_bits
    bpc = cfg.block_h * cfg.block_w
    zero_value = 0.0 if cfg.zero_bin_policy == "zero" else float(np.log(2.0 * bpc))
    out = np.empty(len(starts) * bins)
    for b, (i, j) in enumerate(starts):
        block = q_map[i : i + cfg.block_h, j : j + cfg.block_w]
        counts = np.bincount(block.ravel(), minlength=bins)
        if counts.size > bins:
            raise ShapeError(f"code {counts.size - 1} exceeds {n_bits}-bit range")
        seg = np.full(bins, zero_value)
        occupied = counts > 0
        seg[occupied] = -np.log(counts[occupied] / bpc)
        out[b * bins : (b + 1) * bins] = seg
    return out


@dataclass(frozen=True)
class FeatureVector:
    """Concatenated two-view feature with the view boundary recorded."""

    values: np.ndarray
    view_boundary: int

    @property
    def view1(self) -> np.ndarray:
        return self.values[: self.view_boundary]

    @property
    def view2(self) -> np.ndarray:
        return self.values[self.view_boundary :]


def encode_view(maps: np.ndarray, n_bits: int, cfg: EncoderConfig) -> np.ndarray:
    """Encode one sample's single-view map stack (n_maps, p, q)."""
    maps = np.asarray(maps)
    if maps.ndim != 3:
        raise ShapeError(f"expected (n_maps, p, q) maps, got shape {maps.shape}")
    n_maps = maps.shape[0]
    if n_maps % n_bits:
        raise ShapeError(f"{n_maps} maps not divisible into groups of {n_bits}")
    segments = []
    for g in range(n_maps // n_bits):
        group = maps[g * n_bits : (g + 1) * n_bits]
        q_map = hash_combine(binarize(group))
        segments.append(iq_block_features(q_map, cfg, n_bits))
    return np.concatenate(segments)


def encode_sample(maps1: np.ndarray, maps2: np.ndarray, n_bits: int, cfg: EncoderConfig) -> FeatureVector:
    """Hash-pool and encode both views of one sample, views concatenated."""
    o1 = encode_view(maps1, n_bits, cfg)
    o2 = encode_view(maps2, n_bits, cfg)
    return FeatureVector(values=np.concatenate([o1, o2]), view_boundary=o1.size)


def feature_length(map_shape: tuple[int, int], maps_per_view: int, n_bits: int, cfg: EncoderConfig) -> int:
    """Closed-form length: 2 views * groups * blocks * 2^n_bits."""
    a = cfg.block_count(*map_shape)
    return 2 * (maps_per_view // n_bits) * a * (1 << n_bits)
