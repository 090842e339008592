"""Flat "key = value" pipeline configuration.

Dotted keys, one per line, '#' comments. Chosen over nested formats so the
model file can embed a bit-exact snapshot and reparse it without any
third-party parser. Per-layer patch keys (layer<i>.patch.*) fall back to the
global patch.* defaults.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .cascade import LayerConfig, NetworkConfig
from .encoder import EncoderConfig
from .errors import ConfigError
from .execution import ExecSettings
from .patches import BatchSpec, PatchGeometry
from .views import ViewRecipe

_GLOBAL_KEYS = {
    "data.train_manifest": None,
    "data.test_manifest": None,
    "view.recipe": "identity_pair",
    "view.c1": "0",
    "view.c2": "1",
    "net.layers": "1",
    "patch.l1": None,
    "patch.l2": None,
    "patch.stride": "1",
    "patch.padding": "zero_same",
    "patch.center": "true",
    "batch.size": "128",
    "moments.epsilon": "1e-4",
    "encode.block_h": None,
    "encode.block_w": None,
    "encode.overlap": "0.0",
    "encode.zero_bin_policy": "zero",
    "clf.kind": "nearest_neighbor",
    "clf.metric": "euclidean",
    "clf.lambda": "auto",
    "exec.threads": "1",
    "exec.deterministic": "true",
    "exec.seed": "0",
}

_LAYER_SUFFIXES = ("filters", "patch.l1", "patch.l2", "patch.stride", "patch.padding", "patch.center")


@dataclass
class PipelineConfig:
    """Validated settings for a full train/extract/eval run."""

    recipe: ViewRecipe
    net: NetworkConfig
    encoder: EncoderConfig
    exec: ExecSettings
    clf_kind: str
    clf_metric: str
    clf_lambda: float | None
    train_manifest: Path | None = None
    test_manifest: Path | None = None
    raw: dict[str, str] = field(default_factory=dict)

    def snapshot(self) -> dict[str, str]:
        """The normalized key/value view embedded in model files."""
        return dict(self.raw)


def _parse_bool(key: str, value: str) -> bool:
    if value.lower() in ("true", "1", "yes"):
        return True
    if value.lower() in ("false", "0", "no"):
        return False
    raise ConfigError(f"{key}: expected true/false, got {value!r}")


def _parse_int(key: str, value: str) -> int:
    try:
        return int(value)
    except ValueError as e:
        raise ConfigError(f"{key}: expected an integer, got {value!r}") from e


def _parse_float(key: str, value: str) -> float:
    try:
        return float(value)
    except ValueError as e:
        raise ConfigError(f"{key}: expected a number, got {value!r}") from e


def parse_config_text(text: str, base_dir: Path | str = ".", require_files: bool = True) -> PipelineConfig:
    """Parse config text into a validated PipelineConfig.

    ``require_files`` is dropped when reparsing a model snapshot, where the
    original manifests need not exist any more.
    """
    base_dir = Path(base_dir)
    values: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not key or not value:
            raise ConfigError(f"line {lineno}: empty key or value")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = value

    n_layers = _parse_int("net.layers", values.get("net.layers", _GLOBAL_KEYS["net.layers"]))
    if n_layers < 1:
        raise ConfigError(f"net.layers {n_layers} must be >= 1")

    known = set(_GLOBAL_KEYS)
    for i in range(1, n_layers + 1):
        for suffix in _LAYER_SUFFIXES:
            known.add(f"layer{i}.{suffix}")
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")

    def get(key: str, layer: int | None = None) -> str | None:
        if layer is not None:
            layered = values.get(f"layer{layer}.{key}")
            if layered is not None:
                return layered
        return values.get(key, _GLOBAL_KEYS.get(key))

    def require(key: str, layer: int | None = None) -> str:
        value = get(key, layer)
        if value is None:
            where = f"layer{layer}.{key} or {key}" if layer is not None else key
            raise ConfigError(f"missing required config key {where}")
        return value

    layers = []
    for i in range(1, n_layers + 1):
        geom = PatchGeometry(
            l1=_parse_int("patch.l1", require("patch.l1", i)),
            l2=_parse_int("patch.l2", require("patch.l2", i)),
            stride=_parse_int("patch.stride", require("patch.stride", i)),
            padding=require("patch.padding", i),
        )
        layers.append(
            LayerConfig(
                filters=_parse_int(f"layer{i}.filters", require("filters", i)),
                geom=geom,
                center=_parse_bool("patch.center", require("patch.center", i)),
            )
        )
    net = NetworkConfig(
        layers=tuple(layers),
        batch=BatchSpec(batch_size=_parse_int("batch.size", require("batch.size"))),
        epsilon=_parse_float("moments.epsilon", require("moments.epsilon")),
    )
    if net.epsilon < 0:
        raise ConfigError(f"moments.epsilon {net.epsilon} must be >= 0")

    enc = EncoderConfig(
        block_h=_parse_int("encode.block_h", require("encode.block_h")),
        block_w=_parse_int("encode.block_w", require("encode.block_w")),
        overlap=_parse_float("encode.overlap", require("encode.overlap")),
        zero_bin_policy=require("encode.zero_bin_policy"),
    )

    recipe = ViewRecipe(
        kind=require("view.recipe"),
        c1=_parse_int("view.c1", require("view.c1")),
        c2=_parse_int("view.c2", require("view.c2")),
    )

    exec_settings = ExecSettings(
        threads=_parse_int("exec.threads", require("exec.threads")),
        deterministic=_parse_bool("exec.deterministic", require("exec.deterministic")),
        seed=_parse_int("exec.seed", require("exec.seed")),
    )

    lam_raw = require("clf.lambda")
    clf_lambda = None if lam_raw == "auto" else _parse_float("clf.lambda", lam_raw)

    def manifest(key: str) -> Path | None:
        raw = values.get(key)
        if raw is None:
            return None
        path = (base_dir / raw).resolve()
        if require_files and not path.is_file():
            raise ConfigError(f"{key}: manifest {path} does not exist")
        return path

    raw_snapshot = {}
    for key in sorted(known):
        value = values.get(key, _GLOBAL_KEYS.get(key))
        if value is not None:
            raw_snapshot[key] = value

    return PipelineConfig(
        recipe=recipe,
        net=net,
        encoder=enc,
        exec=exec_settings,
        clf_kind=require("clf.kind"),
        clf_metric=require("clf.metric"),
        clf_lambda=clf_lambda,
        train_manifest=manifest("data.train_manifest"),
        test_manifest=manifest("data.test_manifest"),
        raw=raw_snapshot,
    )


def load_config(path: str | Path, require_files: bool = True) -> PipelineConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    return parse_config_text(text, base_dir=path.parent, require_files=require_files)
