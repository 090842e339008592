"""Layer-wise training and batched application of the two-view filter cascade.

Each layer solves its own correlation problem on the previous layer's outputs:
the g-th map of view 1 always pairs with the g-th map of view 2 (identical
lineage), and every map pair inherits its sample's label. Convolution is
cross-correlation (no kernel flip): a filter response is the inner product of
the reshaped kernel with each patch column, so filtering reuses the exact
patch statistics the filters were learned from, including per-window
centering when the layer was trained with it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import ViewPairDataset
from .errors import ConfigError, ShapeError
from .execution import Executor
from .moments import MomentAccumulator, accumulate_batch, finalize, parallel_accumulate
from .patches import BatchSpec, PatchGeometry, batch_partition, extract_patch_stack
from .solver import FilterBank, FilterLayer, reshape_filters, solve_dcca

# Patch-matrix chunks are capped at ~this many columns to bound peak memory.
CHUNK_COLS = 1 << 17


@dataclass(frozen=True)
class LayerConfig:
    filters: int
    geom: PatchGeometry
    center: bool = True

    def __post_init__(self):
        if self.filters < 1:
            raise ConfigError(f"filter count {self.filters} must be >= 1")
        if self.filters > self.geom.dim:
            raise ConfigError(
                f"filter count {self.filters} exceeds patch dimension {self.geom.dim}"
            )


@dataclass(frozen=True)
class NetworkConfig:
    layers: tuple[LayerConfig, ...]
    batch: BatchSpec = BatchSpec()
    epsilon: float = 1e-4

    def __post_init__(self):
        if not self.layers:
            raise ConfigError("network needs at least one layer")


@dataclass
class LayerOutput:
    """Feature maps for a set of samples, both views, with lineage bookkeeping."""

    maps1: np.ndarray  # (n_samples, n_maps, p, q)
    maps2: np.ndarray
    labels: np.ndarray
    lineage: tuple[tuple[int, ...], ...]  # per map: chain of filter indices

    def __post_init__(self):
        if self.maps1.shape != self.maps2.shape:
            raise ShapeError(f"view map stacks differ: {self.maps1.shape} vs {self.maps2.shape}")
        if len(self.lineage) != self.maps1.shape[1]:
            raise ShapeError("one lineage entry per map required")

    @property
    def n_samples(self) -> int:
        return self.maps1.shape[0]

    @property
    def n_maps(self) -> int:
        return self.maps1.shape[1]

    @property
    def map_shape(self) -> tuple[int, int]:
        return self.maps1.shape[2], self.maps1.shape[3]


def layer_input(ds: ViewPairDataset) -> LayerOutput:
    """Wrap a dataset as the cascade's first-layer input (one map per view)."""
    return LayerOutput(
        maps1=ds.view_stack(1)[:, None, :, :],
        maps2=ds.view_stack(2)[:, None, :, :],
        labels=ds.labels,
        lineage=((),),
    )


def conv2d(plane: np.ndarray, kernel: np.ndarray, padding: str = "zero_same", center: bool = False) -> np.ndarray:
    """Cross-correlate one map with one kernel."""
    kernel = np.asarray(kernel, dtype=np.float64)
    if kernel.ndim != 2:
        raise ShapeError(f"kernel must be 2-D, got shape {kernel.shape}")
    geom = PatchGeometry(l1=kernel.shape[0], l2=kernel.shape[1], stride=1, padding=padding)
    pm = extract_patch_stack(np.asarray(plane, dtype=np.float64)[None, :, :], geom, center)
    return (kernel.reshape(-1) @ pm.values).reshape(pm.out_shape)


def _map_chunks(n_maps: int, cols_per_map: int) -> list[range]:
    per_chunk = max(1, CHUNK_COLS // max(cols_per_map, 1))
    return [range(i, min(i + per_chunk, n_maps)) for i in range(0, n_maps, per_chunk)]


def apply_filters(stack: np.ndarray, layer: FilterLayer, view: int) -> np.ndarray:
    """Convolve an (N, p, q) map stack with all of one view's kernels.

    Returns (N, L, p', q') with outputs ordered filter-minor, i.e. the L
    children of one input map are contiguous (lineage-major ordering).
    """
    stack = np.asarray(stack, dtype=np.float64)
    n, p, q = stack.shape
    oh, ow = layer.geom.out_shape(p, q)
    filters = layer.filters1 if view == 1 else layer.filters2
    w = filters.reshape(layer.count, layer.geom.dim)
    out = np.empty((n, layer.count, oh, ow))
    for chunk in _map_chunks(n, oh * ow):
        pm = extract_patch_stack(stack[chunk.start : chunk.stop], layer.geom, layer.center)
        prod = w @ pm.values  # (L, n_chunk * oh * ow)
        out[chunk.start : chunk.stop] = prod.reshape(
            layer.count, chunk.stop - chunk.start, oh, ow
        ).transpose(1, 0, 2, 3)
    return out


def _child_lineage(lineage: tuple[tuple[int, ...], ...], count: int) -> tuple[tuple[int, ...], ...]:
    return tuple(parent + (g,) for parent in lineage for g in range(count))


def apply_layer(inputs: LayerOutput, layer: FilterLayer, executor: Executor, batch: BatchSpec) -> LayerOutput:
    """Run one trained layer over all samples, batch by batch."""
    n, m = inputs.n_samples, inputs.n_maps
    p, q = inputs.map_shape

    def run(batch_range: range) -> tuple[np.ndarray, np.ndarray]:
        flat1 = inputs.maps1[batch_range.start : batch_range.stop].reshape(-1, p, q)
        flat2 = inputs.maps2[batch_range.start : batch_range.stop].reshape(-1, p, q)
        b = batch_range.stop - batch_range.start
        out1 = apply_filters(flat1, layer, view=1).reshape(b, m * layer.count, *layer.geom.out_shape(p, q))
        out2 = apply_filters(flat2, layer, view=2).reshape(b, m * layer.count, *layer.geom.out_shape(p, q))
        return out1, out2

    parts = executor.map_ordered(run, batch_partition(n, batch))
    return LayerOutput(
        maps1=np.concatenate([a for a, _ in parts]),
        maps2=np.concatenate([b for _, b in parts]),
        labels=inputs.labels,
        lineage=_child_lineage(inputs.lineage, layer.count),
    )


def _batch_accumulator_job(inputs: LayerOutput, batch_range: range, geom: PatchGeometry, center: bool, class_count: int):
    """Per-batch moment accumulation with fixed chunk boundaries."""
    p, q = inputs.map_shape
    m = inputs.n_maps

    def job() -> MomentAccumulator:
        flat1 = inputs.maps1[batch_range.start : batch_range.stop].reshape(-1, p, q)
        flat2 = inputs.maps2[batch_range.start : batch_range.stop].reshape(-1, p, q)
        map_labels = np.repeat(inputs.labels[batch_range.start : batch_range.stop], m)
        acc = MomentAccumulator.zeros(geom.dim, class_count)
        cols_per_map = geom.out_shape(p, q)[0] * geom.out_shape(p, q)[1]
        for chunk in _map_chunks(flat1.shape[0], cols_per_map):
            p1 = extract_patch_stack(flat1[chunk.start : chunk.stop], geom, center)
            p2 = extract_patch_stack(flat2[chunk.start : chunk.stop], geom, center)
            labels = np.repeat(map_labels[chunk.start : chunk.stop], cols_per_map)
            accumulate_batch(acc, p1, p2, labels)
        return acc

    return job


def accumulate_layer_moments(
    inputs: LayerOutput,
    geom: PatchGeometry,
    center: bool,
    class_count: int,
    batch: BatchSpec,
    executor: Executor,
) -> MomentAccumulator:
    """Accumulate the layer's patch statistics over all batches."""
    jobs = [
        _batch_accumulator_job(inputs, r, geom, center, class_count)
        for r in batch_partition(inputs.n_samples, batch)
    ]
    return parallel_accumulate(jobs, executor)


def train_layer(
    inputs: LayerOutput,
    cfg: LayerConfig,
    class_count: int,
    batch: BatchSpec,
    executor: Executor,
    epsilon: float = 1e-4,
) -> FilterLayer:
    """Learn one layer's filter pairs from its input map pairs."""
    acc = accumulate_layer_moments(inputs, cfg.geom, cfg.center, class_count, batch, executor)
    dm = finalize(acc, epsilon)
    pairs = solve_dcca(dm, cfg.filters)
    return reshape_filters(pairs, cfg.geom, cfg.center)


def train_network(
    ds: ViewPairDataset,
    cfg: NetworkConfig,
    executor: Executor,
    stage_hook=None,
) -> FilterBank:
    """Train all layers bottom-up, materializing intermediate maps between layers."""
    current = layer_input(ds)
    layers: list[FilterLayer] = []
    for i, layer_cfg in enumerate(cfg.layers):
        if stage_hook:
            stage_hook(f"layer {i + 1}: accumulating moments over {cfg.batch.batch_count(len(ds))} batches")
        layer = train_layer(current, layer_cfg, ds.class_count, cfg.batch, executor, cfg.epsilon)
        layers.append(layer)
        if i + 1 < len(cfg.layers):
            current = apply_layer(current, layer, executor, cfg.batch)
    return FilterBank(layers=tuple(layers))


def forward_stacks(view1: np.ndarray, view2: np.ndarray, bank: FilterBank) -> tuple[np.ndarray, np.ndarray]:
    """Push (B, p, q) view stacks through every layer; returns (B, n_maps, p', q')."""
    m1 = np.asarray(view1, dtype=np.float64)[:, None, :, :]
    m2 = np.asarray(view2, dtype=np.float64)[:, None, :, :]
    for layer in bank.layers:
        b, n_in, p, q = m1.shape
        oh, ow = layer.geom.out_shape(p, q)
        m1 = apply_filters(m1.reshape(-1, p, q), layer, view=1).reshape(b, n_in * layer.count, oh, ow)
        m2 = apply_filters(m2.reshape(-1, p, q), layer, view=2).reshape(b, n_in * layer.count, oh, ow)
    return m1, m2


def forward(ds: ViewPairDataset, bank: FilterBank, executor: Executor, batch: BatchSpec) -> LayerOutput:
    """Final-layer maps for a whole dataset, processed batch by batch."""
    stack1 = ds.view_stack(1)
    stack2 = ds.view_stack(2)

    def run(batch_range: range) -> tuple[np.ndarray, np.ndarray]:
        return forward_stacks(
            stack1[batch_range.start : batch_range.stop],
            stack2[batch_range.start : batch_range.stop],
            bank,
        )

    parts = executor.map_ordered(run, batch_partition(len(ds), batch))
    lineage: tuple[tuple[int, ...], ...] = ((),)
    for layer in bank.layers:
        lineage = _child_lineage(lineage, layer.count)
    return LayerOutput(
        maps1=np.concatenate([a for a, _ in parts]),
        maps2=np.concatenate([b for _, b in parts]),
        labels=ds.labels,
        lineage=lineage,
    )
