"""Versioned text model files: config snapshot, filter banks, classifier state.

The format is line-oriented and human-diffable. Floats are written with 17
significant digits, which round-trips IEEE doubles exactly, so a saved model
reloads bit-identical on any architecture. The final line carries a CRC32 of
every preceding byte.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .classify import ClassifierModel
from .errors import CorruptModelError, IoError
from .patches import PatchGeometry
from .solver import FilterBank, FilterLayer

MAGIC = "DDCCANET v1"


@dataclass
class ModelArtifact:
    snapshot: dict[str, str]
    bank: FilterBank
    classifier: ClassifierModel
    # original manifest label -> contiguous class id, in training order t
    label_map: dict[int, int] = None
    version: int = 1

    def __post_init__(self):
        if self.label_map is None:
            self.label_map = {c: c for c in range(self.classifier.class_count)}


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _fmt_row(row: np.ndarray) -> str:
    return " ".join(_fmt(v) for v in row)


def _serialize(artifact: ModelArtifact) -> str:
    lines = [MAGIC, "[config]"]
    for key in sorted(artifact.snapshot):
        lines.append(f"{key} = {artifact.snapshot[key]}")
    for i, layer in enumerate(artifact.bank.layers, start=1):
        for view, filters in ((1, layer.filters1), (2, layer.filters2)):
            lines.append(f"[layer {i} view {view}]")
            lines.append(
                f"geom {layer.geom.l1} {layer.geom.l2} {layer.geom.stride} "
                f"{layer.geom.padding} {int(layer.center)}"
            )
            lines.append(f"filters {filters.shape[0]}")
            for g in range(filters.shape[0]):
                for r in range(layer.geom.l1):
                    lines.append(_fmt_row(filters[g, r]))
    clf = artifact.classifier
    lines.append("[classifier]")
    lines.append(f"kind {clf.kind}")
    lines.append(f"classes {clf.class_count}")
    by_class = sorted(artifact.label_map, key=artifact.label_map.get)
    lines.append("labels " + " ".join(str(orig) for orig in by_class))
    if clf.kind == "nearest_neighbor":
        lines.append(f"metric {clf.metric}")
        n, d = clf.train_features.shape
        lines.append(f"train {n} {d}")
        for row, label in zip(clf.train_features, clf.train_labels):
            lines.append(f"{int(label)} {_fmt_row(row)}")
    else:
        lines.append(f"lambda {_fmt(clf.lam)}")
        c, d = clf.weights.shape
        lines.append(f"weights {c} {d}")
        for row in clf.weights:
            lines.append(_fmt_row(row))
    return "\n".join(lines) + "\n"


def save_model(artifact: ModelArtifact, path: str | Path) -> None:
    body = _serialize(artifact).encode("utf-8")
    checksum = zlib.crc32(body) & 0xFFFFFFFF
    Path(path).write_bytes(body + f"crc32 {checksum:08x}\n".encode("ascii"))


class _Reader:
    def __init__(self, lines: list[str], path: Path):
        self.lines = lines
        self.pos = 0
        self.path = path

    def next(self) -> str:
        if self.pos >= len(self.lines):
            raise CorruptModelError(f"{self.path}: unexpected end of model file")
        line = self.lines[self.pos]
        self.pos += 1
        return line

    def peek(self) -> str | None:
        return self.lines[self.pos] if self.pos < len(self.lines) else None

    def expect(self, prefix: str) -> list[str]:
        line = self.next()
        if not line.startswith(prefix):
            raise CorruptModelError(f"{self.path}: expected {prefix!r}, got {line!r}")
        return line[len(prefix) :].split()


def _parse_floats(reader: _Reader, count: int) -> np.ndarray:
    parts = reader.next().split()
    if len(parts) != count:
        raise CorruptModelError(f"{reader.path}: expected {count} numbers, got {len(parts)}")
    try:
        return np.array([float(p) for p in parts], dtype=np.float64)
    except ValueError as e:
        raise CorruptModelError(f"{reader.path}: bad number in model file") from e


def load_model(path: str | Path) -> ModelArtifact:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise IoError(f"cannot read model {path}: {e}") from e

    tail = raw.rfind(b"crc32 ")
    if tail < 0 or not raw.endswith(b"\n"):
        raise CorruptModelError(f"{path}: missing checksum line")
    body, checksum_line = raw[:tail], raw[tail:].decode("ascii").strip()
    try:
        stated = int(checksum_line.split()[1], 16)
    except (IndexError, ValueError) as e:
        raise CorruptModelError(f"{path}: malformed checksum line") from e
    actual = zlib.crc32(body) & 0xFFFFFFFF
    if stated != actual:
        raise CorruptModelError(
            f"{path}: checksum mismatch (stated {stated:08x}, computed {actual:08x})"
        )

    try:
        text = body.decode("utf-8")
    except UnicodeDecodeError as e:
        raise CorruptModelError(f"{path}: undecodable model body") from e
    reader = _Reader(text.splitlines(), path)
    if reader.next() != MAGIC:
        raise CorruptModelError(f"{path}: not a model file (bad magic)")
    if reader.next() != "[config]":
        raise CorruptModelError(f"{path}: missing config section")
    snapshot: dict[str, str] = {}
    while True:
        line = reader.peek()
        if line is None or line.startswith("["):
            break
        reader.next()
        key, sep, value = line.partition(" = ")
        if not sep:
            raise CorruptModelError(f"{path}: malformed config line {line!r}")
        snapshot[key] = value

    layers: list[FilterLayer] = []
    while True:
        line = reader.peek()
        if line is None or not line.startswith("[layer "):
            break
        header = reader.next().strip("[]").split()
        if len(header) != 4 or header[2] != "view" or header[3] != "1":
            raise CorruptModelError(f"{path}: unexpected section {line!r}")

        def read_view() -> tuple[PatchGeometry, bool, np.ndarray]:
            geom_parts = reader.expect("geom ")
            l1, l2, stride = int(geom_parts[0]), int(geom_parts[1]), int(geom_parts[2])
            padding, center = geom_parts[3], bool(int(geom_parts[4]))
            count = int(reader.expect("filters ")[0])
            filters = np.empty((count, l1, l2))
            for g in range(count):
                for r in range(l1):
                    filters[g, r] = _parse_floats(reader, l2)
            return PatchGeometry(l1=l1, l2=l2, stride=stride, padding=padding), center, filters

        geom1, center1, f1 = read_view()
        view2_header = reader.next()
        if view2_header != f"[layer {header[1]} view 2]":
            raise CorruptModelError(f"{path}: missing view 2 for layer {header[1]}")
        geom2, center2, f2 = read_view()
        if geom1 != geom2 or center1 != center2 or f1.shape != f2.shape:
            raise CorruptModelError(f"{path}: layer {header[1]} views disagree")
        layers.append(FilterLayer(filters1=f1, filters2=f2, geom=geom1, center=center1))
    if not layers:
        raise CorruptModelError(f"{path}: model holds no filter layers")

    if reader.next() != "[classifier]":
        raise CorruptModelError(f"{path}: missing classifier section")
    kind = reader.expect("kind ")[0]
    class_count = int(reader.expect("classes ")[0])
    originals = [int(v) for v in reader.expect("labels ")]
    if len(originals) != class_count:
        raise CorruptModelError(f"{path}: label map size does not match class count")
    label_map = {orig: c for c, orig in enumerate(originals)}
    if kind == "nearest_neighbor":
        metric = reader.expect("metric ")[0]
        n, d = (int(v) for v in reader.expect("train "))
        features = np.empty((n, d))
        labels = np.empty(n, dtype=np.int64)
        for r in range(n):
            row = _parse_floats(reader, d + 1)
            labels[r] = int(row[0])
            features[r] = row[1:]
        clf = ClassifierModel(
            kind=kind,
            class_count=class_count,
            metric=metric,
            train_features=features,
            train_labels=labels,
        )
    elif kind == "ridge_one_vs_all":
        lam = float(reader.expect("lambda ")[0])
        c, d = (int(v) for v in reader.expect("weights "))
        weights = np.empty((c, d))
        for r in range(c):
            weights[r] = _parse_floats(reader, d)
        clf = ClassifierModel(kind=kind, class_count=class_count, lam=lam, weights=weights)
    else:
        raise CorruptModelError(f"{path}: unknown classifier kind {kind!r}")

    return ModelArtifact(
        snapshot=snapshot,
        bank=FilterBank(layers=tuple(layers)),
        classifier=clf,
        label_map=label_map,
    )
