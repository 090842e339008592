"""Dataset types and bit-exact file ingestion (PGM images, CSV matrices, manifests).

An image plane is a plain 2-D float64 array. PGM intensities are divided by
the header maxval so planes land in [0, 1]; CSV matrices are taken verbatim
(externally produced feature matrices arrive pre-scaled).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import EmptyDatasetError, IoError, ParseError, ShapeError
from .views import ViewRecipe, apply_recipe


@dataclass(frozen=True)
class ViewPairSample:
    """One labelled sample: two equal-size views of the same object."""

    view1: np.ndarray
    view2: np.ndarray
    label: int

    def __post_init__(self):
        if self.view1.shape != self.view2.shape:
            raise ShapeError(
                f"views differ in size: {self.view1.shape} vs {self.view2.shape}"
            )
        if self.label < 0:
            raise ParseError(f"negative class label {self.label}")


@dataclass
class ViewPairDataset:
    """Ordered list of view-pair samples with contiguous class ids."""

    samples: list[ViewPairSample]
    class_count: int
    label_map: dict[int, int] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def labels(self) -> np.ndarray:
        return np.array([s.label for s in self.samples], dtype=np.int64)

    @property
    def image_shape(self) -> tuple[int, int]:
        return self.samples[0].view1.shape

    def view_stack(self, view: int) -> np.ndarray:
        """All samples' maps for one view as an (M, p, q) array."""
        attr = "view1" if view == 1 else "view2"
        return np.stack([getattr(s, attr) for s in self.samples])


def _validate_plane(values: np.ndarray, origin: str) -> np.ndarray:
    if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
        raise ShapeError(f"{origin}: expected a non-empty 2-D matrix, got {values.shape}")
    if not np.all(np.isfinite(values)):
        raise ParseError(f"{origin}: non-finite value in matrix")
    return values


def load_pgm(path: str | Path) -> np.ndarray:
    """Read a binary PGM ("P5") file into a [0, 1]-scaled float plane.

    Header comments (# ...) are honoured; payloads are one byte per pixel,
    or big-endian two bytes when maxval > 255.
    """
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise IoError(f"cannot read {path}: {e}") from e

    pos = 0

    def next_token() -> bytes:
        nonlocal pos
        while pos < len(raw):
            c = raw[pos : pos + 1]
            if c == b"#":
                while pos < len(raw) and raw[pos : pos + 1] not in (b"\n", b"\r"):
                    pos += 1
            elif c.isspace():
                pos += 1
            else:
                break
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ParseError(f"{path}: truncated PGM header")
        return raw[start:pos]

    magic = next_token()
    if magic != b"P5":
        raise ParseError(f"{path}: not a binary PGM (magic {magic!r}, only P5 supported)")
    try:
        width = int(next_token())
        height = int(next_token())
        maxval = int(next_token())
    except ValueError as e:
        raise ParseError(f"{path}: malformed PGM header") from e
    if width < 1 or height < 1:
        raise ParseError(f"{path}: invalid PGM dimensions {width}x{height}")
    if not 0 < maxval <= 65535:
        raise ParseError(f"{path}: PGM maxval {maxval} out of range")
    pos += 1  # single whitespace byte separates header from payload

    dtype = ">u2" if maxval > 255 else np.uint8
    itemsize = 2 if maxval > 255 else 1
    expected = width * height * itemsize
    payload = raw[pos : pos + expected]
    if len(payload) < expected:
        raise ParseError(f"{path}: truncated PGM payload ({len(payload)}/{expected} bytes)")
    values = np.frombuffer(payload, dtype=dtype).astype(np.float64).reshape(height, width)
    return _validate_plane(values / maxval, str(path))


def write_pgm(path: str | Path, plane: np.ndarray, maxval: int = 255) -> None:
    """Quantize a [0, 1] plane to a binary PGM file (round-to-nearest)."""
    if not 0 < maxval <= 65535:
        raise ParseError(f"maxval {maxval} out of range")
    plane = np.asarray(plane, dtype=np.float64)
    q = np.clip(np.rint(plane * maxval), 0, maxval)
    dtype = ">u2" if maxval > 255 else np.uint8
    header = f"P5\n{plane.shape[1]} {plane.shape[0]}\n{maxval}\n".encode("ascii")
    Path(path).write_bytes(header + q.astype(dtype).tobytes())


def load_matrix_csv(path: str | Path) -> np.ndarray:
    """Read a rectangular numeric CSV into a float plane, values verbatim."""
    path = Path(path)
    try:
        text = path.read_text(encoding="ascii")
    except OSError as e:
        raise IoError(f"cannot read {path}: {e}") from e

    rows = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        cells = line.split(",")
        try:
            row = [float(c) for c in cells]
        except ValueError as e:
            raise ParseError(f"{path}:{lineno}: non-numeric cell") from e
        if not all(math.isfinite(v) for v in row):
            raise ParseError(f"{path}:{lineno}: non-finite cell")
        if rows and len(row) != len(rows[0]):
            raise ParseError(
                f"{path}:{lineno}: ragged row ({len(row)} cells, expected {len(rows[0])})"
            )
        rows.append(row)
    if not rows:
        raise ParseError(f"{path}: empty CSV matrix")
    return _validate_plane(np.array(rows, dtype=np.float64), str(path))


def _load_plane(path: Path) -> np.ndarray:
    suffix = path.suffix.lower()
    if suffix == ".pgm":
        return load_pgm(path)
    if suffix == ".csv":
        return load_matrix_csv(path)
    raise ParseError(f"{path}: unsupported file type {suffix!r} (expected .pgm or .csv)")


def load_dataset(manifest: str | Path, recipe: ViewRecipe | None = None) -> ViewPairDataset:
    """Load a manifest of "path[,path...],label" lines into a dataset.

    Relative paths resolve against the manifest's directory. Class ids are
    re-indexed to a contiguous range preserving first-appearance order; the
    original ids are kept in ``label_map``. When ``recipe`` is None it is
    inferred from the column count: two paths form an external pair, a single
    path is duplicated.
    """
    manifest = Path(manifest)
    try:
        text = manifest.read_text(encoding="utf-8")
    except OSError as e:
        raise IoError(f"cannot read manifest {manifest}: {e}") from e

    base = manifest.parent
    samples: list[ViewPairSample] = []
    label_map: dict[int, int] = {}
    shape: tuple[int, int] | None = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        fields = [f.strip() for f in line.split(",")]
        if len(fields) < 2:
            raise ParseError(f"{manifest}:{lineno}: expected 'path[,path...],label'")
        try:
            raw_label = int(fields[-1])
        except ValueError as e:
            raise ParseError(f"{manifest}:{lineno}: label {fields[-1]!r} is not an integer") from e
        if raw_label < 0:
            raise ParseError(f"{manifest}:{lineno}: negative label {raw_label}")
        planes = [_load_plane((base / p).resolve()) for p in fields[:-1]]

        line_recipe = recipe
        if line_recipe is None:
            kind = "external_pair" if len(planes) >= 2 else "identity_pair"
            line_recipe = ViewRecipe(kind)
        view1, view2 = apply_recipe(planes, line_recipe)

        if raw_label not in label_map:
            label_map[raw_label] = len(label_map)
        label = label_map[raw_label]
        # Downstream batching stacks planes, so one size must hold corpus-wide.
        if shape is None:
            shape = view1.shape
        elif view1.shape != shape:
            raise ShapeError(
                f"{manifest}:{lineno}: sample size {view1.shape} differs from {shape}"
            )
        samples.append(ViewPairSample(view1=view1, view2=view2, label=label))

    if not samples:
        raise EmptyDatasetError(f"{manifest}: no samples")
    return ViewPairDataset(samples=samples, class_count=len(label_map), label_map=label_map)
