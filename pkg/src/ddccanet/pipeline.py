"""Train / extract / eval / bench orchestration behind the CLI.

Stage wall-clock times are collected with a plain perf_counter timer and end
up in the evaluation report. The benchmark pins BLAS pools to one thread
while timing, so the measured scaling is the worker pool's, not the BLAS
library's.
"""

from __future__ import annotations

import hashlib
import statistics
import sys
import time
from contextlib import contextmanager
from dataclasses import replace
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from .cascade import (
    accumulate_layer_moments,
    forward_stacks,
    layer_input,
    train_network,
)
from .classify import EvalReport, evaluate, fit
from .config import PipelineConfig, load_config, parse_config_text
from .dataset import ViewPairDataset, load_dataset
from .encoder import encode_sample
from .errors import ConfigError, DdccanetError
from .execution import ExecSettings, Executor
from .model_io import ModelArtifact, load_model, save_model
from .patches import batch_partition
from .report import write_bench_report, write_eval_report
from .solver import FilterBank


def log(stage: str, message: str) -> None:
    print(f"[{stage}] {message}", file=sys.stderr)


class StageTimer:
    def __init__(self):
        self.seconds: dict[str, float] = {}

    @contextmanager
    def stage(self, name: str):
        start = time.perf_counter()
        try:
            yield
        except BaseException as e:
            # Stage-tagged diagnostic so aborts are attributable.
            log(name, f"failed after {time.perf_counter() - start:.3f} s: {e}")
            raise
        self.seconds[name] = self.seconds.get(name, 0.0) + time.perf_counter() - start
        log(name, f"done in {self.seconds[name]:.3f} s")


def compute_features(
    ds: ViewPairDataset,
    bank: FilterBank,
    config: PipelineConfig,
    executor: Executor,
) -> np.ndarray:
    """Forward + encode the whole dataset, one batch per work item."""
    n_bits = bank.layers[-1].count
    stack1 = ds.view_stack(1)
    stack2 = ds.view_stack(2)

    def run(batch_range: range) -> np.ndarray:
        m1, m2 = forward_stacks(
            stack1[batch_range.start : batch_range.stop],
            stack2[batch_range.start : batch_range.stop],
            bank,
        )
        return np.stack(
            [
                encode_sample(m1[i], m2[i], n_bits, config.encoder).values
                for i in range(m1.shape[0])
            ]
        )

    parts = executor.map_ordered(run, batch_partition(len(ds), config.net.batch))
    return np.vstack(parts)


def _exec_with_overrides(settings: ExecSettings, threads=None, deterministic=None, seed=None) -> ExecSettings:
    if threads is not None:
        settings = replace(settings, threads=threads)
    if deterministic is not None:
        settings = replace(settings, deterministic=deterministic)
    if seed is not None:
        settings = replace(settings, seed=seed)
    return settings


def run_train(
    config: PipelineConfig,
    model_path: str | Path,
    report_dir: str | Path | None = None,
) -> tuple[ModelArtifact, EvalReport]:
    """Full training run: view generation, layer training, features, classifier."""
    if config.train_manifest is None:
        raise ConfigError("config has no data.train_manifest")
    timer = StageTimer()
    with timer.stage("load"):
        ds = load_dataset(config.train_manifest, config.recipe)
        log("load", f"{len(ds)} samples, {ds.class_count} classes, {ds.image_shape} pixels")
    with Executor(config.exec) as executor:
        with timer.stage("filters"):
            bank = train_network(ds, config.net, executor, stage_hook=lambda m: log("filters", m))
        with timer.stage("features"):
            features = compute_features(ds, bank, config, executor)
    with timer.stage("fit"):
        clf = fit(features, ds.labels, kind=config.clf_kind, metric=config.clf_metric, lam=config.clf_lambda)
    with timer.stage("evaluate"):
        report = evaluate(
            clf,
            features,
            ds.labels,
            threads=config.exec.threads,
            deterministic=config.exec.deterministic,
        )
    report.stage_seconds = dict(timer.seconds)
    artifact = ModelArtifact(
        snapshot=config.snapshot(), bank=bank, classifier=clf, label_map=dict(ds.label_map)
    )
    save_model(artifact, model_path)
    log("train", f"model written to {model_path} (train accuracy {report.accuracy * 100:.2f}%)")
    if report_dir is not None:
        for path in write_eval_report(report, report_dir):
            log("train", f"report artifact {path}")
    return artifact, report


def _config_from_artifact(artifact: ModelArtifact) -> PipelineConfig:
    text = "\n".join(f"{k} = {v}" for k, v in artifact.snapshot.items())
    return parse_config_text(text, require_files=False)


def run_extract(
    model_path: str | Path,
    manifest: str | Path,
    out_csv: str | Path,
    threads: int | None = None,
    deterministic: bool | None = None,
) -> np.ndarray:
    """Write one CSV row per sample: index then features at 17 significant digits."""
    artifact = load_model(model_path)
    config = _config_from_artifact(artifact)
    settings = _exec_with_overrides(config.exec, threads, deterministic)
    timer = StageTimer()
    with timer.stage("load"):
        ds = load_dataset(manifest, config.recipe)
    with Executor(settings) as executor, timer.stage("features"):
        features = compute_features(ds, artifact.bank, config, executor)
    with timer.stage("write"):
        out_csv = Path(out_csv)
        out_csv.parent.mkdir(parents=True, exist_ok=True)
        with out_csv.open("w", encoding="ascii") as fh:
            for i, row in enumerate(features):
                fh.write(f"{i}," + ",".join(format(v, ".17g") for v in row) + "\n")
    log("extract", f"{features.shape[0]} rows x {features.shape[1]} features -> {out_csv}")
    return features


def _labels_in_training_ids(ds: ViewPairDataset, artifact: ModelArtifact) -> np.ndarray:
    """Map the manifest's original class ids through the training-time indexing."""
    to_original = {local: orig for orig, local in ds.label_map.items()}
    mapped = np.empty(len(ds), dtype=np.int64)
    for i, local in enumerate(ds.labels):
        original = to_original[int(local)]
        if original not in artifact.label_map:
            raise ConfigError(
                f"manifest class {original} was not present in the training set"
            )
        mapped[i] = artifact.label_map[original]
    return mapped


def run_eval(
    model_path: str | Path,
    manifest: str | Path,
    report_dir: str | Path | None = None,
    threads: int | None = None,
    deterministic: bool | None = None,
) -> EvalReport:
    """Extract features for a manifest and score them with the stored classifier."""
    artifact = load_model(model_path)
    config = _config_from_artifact(artifact)
    settings = _exec_with_overrides(config.exec, threads, deterministic)
    timer = StageTimer()
    with timer.stage("load"):
        ds = load_dataset(manifest, config.recipe)
        labels = _labels_in_training_ids(ds, artifact)
    with Executor(settings) as executor, timer.stage("features"):
        features = compute_features(ds, artifact.bank, config, executor)
    with timer.stage("predict"):
        report = evaluate(
            artifact.classifier,
            features,
            labels,
            threads=settings.threads,
            deterministic=settings.deterministic,
        )
    report.stage_seconds = dict(timer.seconds)
    if report_dir is not None:
        for path in write_eval_report(report, report_dir):
            log("eval", f"report artifact {path}")
    return report


def _digest(*arrays: np.ndarray) -> str:
    h = hashlib.sha256()
    for a in arrays:
        h.update(np.ascontiguousarray(a).tobytes())
    return h.hexdigest()


def run_bench(
    config: PipelineConfig,
    thread_list: list[int],
    out_csv: str | Path,
    report_dir: str | Path | None = None,
    repetitions: int = 3,
) -> list[dict]:
    """Time the moment-accumulation and forward stages per thread count.

    Thread count 1 is always included as the sequential reference. Outputs are
    fingerprinted and compared across thread counts: bit-identical is required
    in deterministic mode.
    """
    if config.train_manifest is None:
        raise ConfigError("config has no data.train_manifest")
    threads = sorted(set(thread_list) | {1})
    if any(t < 1 for t in threads):
        raise ConfigError(f"invalid thread list {thread_list}")

    with StageTimer().stage("load"):
        ds = load_dataset(config.train_manifest, config.recipe)
        log("load", f"{len(ds)} samples, {ds.class_count} classes")
    inputs = layer_input(ds)
    first = config.net.layers[0]

    # Filters are trained once (sequentially); bench times only the two
    # heavy stages, matching where the batched algorithm spends its time.
    with Executor(replace(config.exec, threads=1)) as executor:
        bank = train_network(ds, config.net, executor)

    stack1 = ds.view_stack(1)
    stack2 = ds.view_stack(2)
    batches = batch_partition(len(ds), config.net.batch)

    def accumulate_once(executor: Executor) -> str:
        acc = accumulate_layer_moments(
            inputs, first.geom, first.center, ds.class_count, config.net.batch, executor
        )
        return _digest(acc.c11, acc.c22, acc.class_sum1, acc.class_sum2)

    def forward_once(executor: Executor) -> str:
        # Per-batch digests keep peak memory at one batch of maps.
        def run(batch_range: range) -> str:
            m1, m2 = forward_stacks(
                stack1[batch_range.start : batch_range.stop],
                stack2[batch_range.start : batch_range.stop],
                bank,
            )
            return _digest(m1, m2)

        return hashlib.sha256("".join(executor.map_ordered(run, batches)).encode()).hexdigest()

    stages = {"accumulate": accumulate_once, "forward": forward_once}
    timings: dict[tuple[str, int], list[float]] = {}
    digests: dict[tuple[str, int], str] = {}
    for t in threads:
        settings = replace(config.exec, threads=t)
        with Executor(settings) as executor:
            for stage, fn in stages.items():
                for rep in range(repetitions):
                    with threadpool_limits(limits=1):
                        start = time.perf_counter()
                        digest = fn(executor)
                        elapsed = time.perf_counter() - start
                    timings.setdefault((stage, t), []).append(elapsed)
                    if rep == 0:
                        digests[(stage, t)] = digest
                log("bench", f"{stage} x{t} threads: {min(timings[(stage, t)]):.3f} s best of {repetitions}")

    for stage in stages:
        reference = digests[(stage, 1)]
        for t in threads:
            if digests[(stage, t)] != reference:
                if config.exec.deterministic:
                    raise DdccanetError(
                        f"bench: {stage} output at {t} threads differs from the sequential "
                        "reference in deterministic mode"
                    )
                log("bench", f"warning: {stage} at {t} threads differs (fast mode reassociation)")

    rows = []
    for stage in stages:
        base = statistics.median(timings[(stage, 1)])
        for t in threads:
            med = statistics.median(timings[(stage, t)])
            rows.append(
                {
                    "stage": stage,
                    "threads": t,
                    "reps": timings[(stage, t)],
                    "median": med,
                    "speedup": base / med if med > 0 else float("inf"),
                }
            )
    for path in write_bench_report(rows, out_csv, report_dir):
        log("bench", f"report artifact {path}")
    return rows


def load_pipeline_config(path: str | Path, threads=None, deterministic=None, seed=None) -> PipelineConfig:
    config = load_config(path)
    return replace(config, exec=_exec_with_overrides(config.exec, threads, deterministic, seed))
