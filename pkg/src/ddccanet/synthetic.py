"""Synthetic blob corpora for smoke tests and benchmarks.

Classes differ in blob location and shape: even classes render a round
Gaussian bump, odd classes an elongated diagonal one, with per-sample jitter
in position, width and amplitude. Shape differences matter: the discriminant
filters learn from patch-level class statistics, so classes must differ in
local appearance, not merely position. The corpus is written as PGM files
with train/test manifests so the CLI path can be exercised end to end.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .dataset import write_pgm


def blob_image(
    size: int,
    cy: float,
    cx: float,
    sigma_u: float,
    sigma_v: float,
    amp: float,
    diagonal: bool = False,
) -> np.ndarray:
    """Render one Gaussian bump; ``diagonal`` rotates its axes by 45 degrees."""
    yy, xx = np.mgrid[0:size, 0:size]
    dy, dx = yy - cy, xx - cx
    if diagonal:
        u = (dy + dx) / np.sqrt(2.0)
        v = (dy - dx) / np.sqrt(2.0)
    else:
        u, v = dy, dx
    img = amp * np.exp(-(u * u) / (2.0 * sigma_u**2) - (v * v) / (2.0 * sigma_v**2))
    return np.clip(img, 0.0, 1.0)


def make_blob_images(
    n_samples: int,
    size: int = 16,
    classes: int = 2,
    seed: int = 0,
    noise_level: float = 0.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Render n_samples images cycling through the classes; returns (images, labels)."""
    rng = np.random.default_rng(seed)
    angles = 2.0 * np.pi * np.arange(classes) / classes + np.pi / 4.0
    radius = size / 4.0
    centers = np.stack(
        [size / 2.0 + radius * np.sin(angles), size / 2.0 + radius * np.cos(angles)], axis=1
    )
    images = np.empty((n_samples, size, size))
    labels = np.arange(n_samples) % classes
    for k in range(n_samples):
        c = labels[k]
        cy, cx = centers[c] + rng.normal(0.0, size / 32.0, size=2)
        amp = rng.uniform(0.75, 1.0)
        if c % 2 == 0:
            sigma = (size / 6.0) * rng.uniform(0.9, 1.1)
            img = blob_image(size, cy, cx, sigma, sigma, amp)
        else:
            su = (size / 4.0) * rng.uniform(0.9, 1.1)
            sv = (size / 10.0) * rng.uniform(0.9, 1.1)
            img = blob_image(size, cy, cx, su, sv, amp, diagonal=True)
        if noise_level > 0.0:
            img = np.clip(img + rng.normal(0.0, noise_level, (size, size)), 0.0, 1.0)
        images[k] = img
    return images, labels


def write_blob_corpus(
    out_dir: str | Path,
    n_train: int = 100,
    n_test: int = 100,
    size: int = 16,
    classes: int = 2,
    seed: int = 0,
    noise_level: float = 0.0,
    maxval: int = 65535,
) -> tuple[Path, Path]:
    """Write PGM images plus train/test manifests; returns the manifest paths.

    16-bit PGM by default: 8-bit quantization already perturbs sign codes
    enough to cost a test point on the easiest configurations.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    images, labels = make_blob_images(
        n_train + n_test, size=size, classes=classes, seed=seed, noise_level=noise_level
    )
    manifests = []
    for split, lo, hi in (("train", 0, n_train), ("test", n_train, n_train + n_test)):
        rows = []
        for k in range(lo, hi):
            name = f"{split}_{k - lo:05d}.pgm"
            write_pgm(out_dir / name, images[k], maxval=maxval)
            rows.append(f"{name},{labels[k]}")
        manifest = out_dir / f"{split}.csv"
        manifest.write_text("\n".join(rows) + "\n", encoding="ascii")
        manifests.append(manifest)
    return manifests[0], manifests[1]
