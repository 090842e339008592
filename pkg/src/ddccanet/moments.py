"""Streaming accumulation of the second-order statistics behind filter learning.

The two auto-correlation matrices and the per-class patch sums are plain sums
over patch columns, so any batch partition of the columns yields the same
result up to floating-point reassociation. That is the contract the parallel
reduction exploits: one accumulator per batch, merged either through a fixed
left-to-right binary tree (deterministic mode, bit-identical for any worker
count) or in completion order (fast mode).

Memory stays O(dim^2 + dim * classes): per-sample patches are never stored,
only class sums, which is what makes the streaming formulation worthwhile.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, NumericalError, ShapeError
from .execution import Executor
from .patches import PatchMatrix


@dataclass
class MomentAccumulator:
    """Running Gram matrices, class sums and counts; mergeable by addition."""

    c11: np.ndarray
    c22: np.ndarray
    class_sum1: np.ndarray
    class_sum2: np.ndarray
    global_sum1: np.ndarray
    global_sum2: np.ndarray
    patch_count: int
    per_class_patch_count: np.ndarray

    @classmethod
    def zeros(cls, dim: int, class_count: int) -> "MomentAccumulator":
        if dim < 1 or class_count < 1:
            raise ConfigError(f"invalid accumulator shape dim={dim} classes={class_count}")
        return cls(
            c11=np.zeros((dim, dim)),
            c22=np.zeros((dim, dim)),
            class_sum1=np.zeros((dim, class_count)),
            class_sum2=np.zeros((dim, class_count)),
            global_sum1=np.zeros(dim),
            global_sum2=np.zeros(dim),
            patch_count=0,
            per_class_patch_count=np.zeros(class_count, dtype=np.int64),
        )

    @property
    def dim(self) -> int:
        return self.c11.shape[0]

    @property
    def class_count(self) -> int:
        return self.class_sum1.shape[1]


@dataclass(frozen=True)
class DiscriminantMoments:
    """Finalized statistics feeding the correlation solver."""

    c11: np.ndarray
    c22: np.ndarray
    cw: np.ndarray
    cb: np.ndarray
    ctilde: np.ndarray
    patch_count: int

    @property
    def dim(self) -> int:
        return self.c11.shape[0]


def _columns(patches) -> np.ndarray:
    values = patches.values if isinstance(patches, PatchMatrix) else np.asarray(patches, dtype=np.float64)
    if values.ndim != 2:
        raise ShapeError(f"patch matrix must be 2-D, got shape {values.shape}")
    return values


def accumulate_batch(acc: MomentAccumulator, p1, p2, labels) -> MomentAccumulator:
    """Fold one batch of paired patch columns into the accumulator (in place)."""
    x = _columns(p1)
    y = _columns(p2)
    labels = np.asarray(labels, dtype=np.int64)
    if x.shape != y.shape:
        raise ShapeError(f"view patch matrices differ: {x.shape} vs {y.shape}")
    if x.shape[0] != acc.dim:
        raise ShapeError(f"patch dim {x.shape[0]} does not match accumulator dim {acc.dim}")
    if labels.shape != (x.shape[1],):
        raise ShapeError(f"need one label per column: {labels.shape} vs {x.shape[1]} columns")
    if labels.size and (labels.min() < 0 or labels.max() >= acc.class_count):
        raise ShapeError(f"label outside [0, {acc.class_count})")

    acc.c11 += x @ x.T
    acc.c22 += y @ y.T
    for c in np.unique(labels):
        mask = labels == c
        acc.class_sum1[:, c] += x[:, mask].sum(axis=1)
        acc.class_sum2[:, c] += y[:, mask].sum(axis=1)
        acc.per_class_patch_count[c] += int(mask.sum())
    acc.global_sum1 += x.sum(axis=1)
    acc.global_sum2 += y.sum(axis=1)
    acc.patch_count += x.shape[1]
    return acc


def merge(a: MomentAccumulator, b: MomentAccumulator) -> MomentAccumulator:
    """Componentwise sum of two accumulators (non-mutating)."""
    if a.dim != b.dim or a.class_count != b.class_count:
        raise ShapeError(
            f"cannot merge accumulators of shape (dim={a.dim}, classes={a.class_count}) "
            f"and (dim={b.dim}, classes={b.class_count})"
        )
    return MomentAccumulator(
        c11=a.c11 + b.c11,
        c22=a.c22 + b.c22,
        class_sum1=a.class_sum1 + b.class_sum1,
        class_sum2=a.class_sum2 + b.class_sum2,
        global_sum1=a.global_sum1 + b.global_sum1,
        global_sum2=a.global_sum2 + b.global_sum2,
        patch_count=a.patch_count + b.patch_count,
        per_class_patch_count=a.per_class_patch_count + b.per_class_patch_count,
    )


def pairwise_merge(accs: Sequence[MomentAccumulator]) -> MomentAccumulator:
    """Reduce with a left-to-right binary tree fixed by list order."""
    if not accs:
        raise ConfigError("nothing to merge")
    level = list(accs)
    while len(level) > 1:
        nxt = []
        for i in range(0, len(level) - 1, 2):
            nxt.append(merge(level[i], level[i + 1]))
        if len(level) % 2:
            nxt.append(level[-1])
        level = nxt
    return level[0]


def parallel_accumulate(
    batch_jobs: Sequence[Callable[[], MomentAccumulator]],
    executor: Executor,
) -> MomentAccumulator:
    """Run per-batch accumulator jobs on the worker pool and reduce them.

    Deterministic mode keeps one accumulator per batch and merges through the
    fixed tree, so the result does not depend on the worker count. Fast mode
    folds in completion order; results differ only by reassociation.
    """
    if not batch_jobs:
        raise ConfigError("no batches to accumulate")
    call = lambda job: job()
    if executor.deterministic:
        return pairwise_merge(executor.map_ordered(call, batch_jobs))
    total = None
    for acc in executor.map_completion_order(call, batch_jobs):
        total = acc if total is None else merge(total, acc)
    return total


def finalize(acc: MomentAccumulator, epsilon: float = 1e-4) -> DiscriminantMoments:
    """Close out the accumulator into solver-ready discriminant moments.

    The within-class cross-correlation comes straight from the class sums;
    the between-class part is everything else in the global outer product.
    ``epsilon`` adds a scale-free ridge epsilon * trace(C)/dim to each
    auto-correlation matrix.
    """
    if epsilon < 0:
        raise ConfigError(f"ridge coefficient {epsilon} must be >= 0")
    if acc.patch_count < 1:
        raise NumericalError("cannot finalize an empty accumulator")

    cw = acc.class_sum1 @ acc.class_sum2.T
    cb = np.outer(acc.global_sum1, acc.global_sum2) - cw
    ctilde = cw - cb

    dim = acc.dim
    eye = np.eye(dim)
    c11 = 0.5 * (acc.c11 + acc.c11.T)
    c22 = 0.5 * (acc.c22 + acc.c22.T)
    c11 = c11 + epsilon * (np.trace(c11) / dim) * eye
    c22 = c22 + epsilon * (np.trace(c22) / dim) * eye
    return DiscriminantMoments(
        c11=c11, c22=c22, cw=cw, cb=cb, ctilde=ctilde, patch_count=acc.patch_count
    )
