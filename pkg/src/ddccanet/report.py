"""Report rendering: delimited output, human-readable text, and figures.

Every report path writes CSV next to a rendered matplotlib figure so results
can be consumed by scripts and eyeballed without re-running anything.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .classify import EvalReport


def eval_report_csv(report: EvalReport) -> str:
    lines = ["metric,class,value"]
    lines.append(f"accuracy,,{report.accuracy:.6f}")
    lines.append(f"samples,,{report.total}")
    lines.append(f"threads,,{report.threads}")
    lines.append(f"deterministic,,{int(report.deterministic)}")
    for stage, seconds in report.stage_seconds.items():
        lines.append(f"stage_seconds,{stage},{seconds:.6f}")
    for c, acc in enumerate(report.per_class_accuracy):
        value = "" if np.isnan(acc) else f"{acc:.6f}"
        lines.append(f"class_accuracy,{c},{value}")
    return "\n".join(lines) + "\n"


def confusion_csv(report: EvalReport) -> str:
    c = report.confusion.shape[0]
    lines = ["true\\pred," + ",".join(str(j) for j in range(c))]
    for i in range(c):
        lines.append(f"{i}," + ",".join(str(v) for v in report.confusion[i]))
    return "\n".join(lines) + "\n"


def eval_report_text(report: EvalReport) -> str:
    lines = [
        f"accuracy: {report.accuracy * 100:.2f}% ({int(np.trace(report.confusion))}/{report.total})",
        f"threads: {report.threads}   deterministic: {report.deterministic}",
    ]
    if report.stage_seconds:
        lines.append("stage timings:")
        for stage, seconds in report.stage_seconds.items():
            lines.append(f"  {stage:<16s} {seconds:8.3f} s")
    lines.append("per-class accuracy:")
    for c, acc in enumerate(report.per_class_accuracy):
        shown = "n/a" if np.isnan(acc) else f"{acc * 100:.2f}%"
        lines.append(f"  class {c:<4d} {shown}")
    return "\n".join(lines) + "\n"


def save_confusion_figure(report: EvalReport, path: str | Path) -> None:
    fig, ax = plt.subplots(figsize=(5, 4.2))
    im = ax.imshow(report.confusion, cmap="viridis")
    ax.set_xlabel("predicted class")
    ax.set_ylabel("true class")
    ax.set_title("confusion counts")
    fig.colorbar(im, ax=ax)
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)


def save_class_accuracy_figure(report: EvalReport, path: str | Path) -> None:
    acc = np.nan_to_num(report.per_class_accuracy, nan=0.0)
    fig, ax = plt.subplots(figsize=(6, 3.2))
    ax.bar(np.arange(acc.size), acc, color="tab:blue")
    ax.set_xlabel("class")
    ax.set_ylabel("accuracy")
    ax.set_ylim(0.0, 1.05)
    ax.set_title("per-class accuracy")
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)


def write_eval_report(report: EvalReport, report_dir: str | Path) -> list[Path]:
    """Write CSVs, text and figures; returns the created paths."""
    report_dir = Path(report_dir)
    report_dir.mkdir(parents=True, exist_ok=True)
    created = []
    for name, content in (
        ("report.csv", eval_report_csv(report)),
        ("confusion.csv", confusion_csv(report)),
        ("report.txt", eval_report_text(report)),
    ):
        path = report_dir / name
        path.write_text(content, encoding="ascii")
        created.append(path)
    fig_path = report_dir / "confusion.png"
    save_confusion_figure(report, fig_path)
    created.append(fig_path)
    acc_path = report_dir / "class_accuracy.png"
    save_class_accuracy_figure(report, acc_path)
    created.append(acc_path)
    return created


def bench_csv(rows: list[dict]) -> str:
    lines = ["stage,threads,rep1,rep2,rep3,median_seconds,speedup"]
    for row in rows:
        reps = ",".join(f"{t:.6f}" for t in row["reps"])
        lines.append(
            f"{row['stage']},{row['threads']},{reps},{row['median']:.6f},{row['speedup']:.3f}"
        )
    return "\n".join(lines) + "\n"


def bench_text(rows: list[dict]) -> str:
    lines = [f"{'stage':<14s} {'threads':>7s} {'median s':>10s} {'speedup':>8s}"]
    for row in rows:
        lines.append(
            f"{row['stage']:<14s} {row['threads']:>7d} {row['median']:>10.3f} {row['speedup']:>8.2f}"
        )
    return "\n".join(lines) + "\n"


def save_speedup_figure(rows: list[dict], path: str | Path) -> None:
    stages = sorted({row["stage"] for row in rows})
    fig, ax = plt.subplots(figsize=(5.5, 3.6))
    for stage in stages:
        pts = sorted((r["threads"], r["speedup"]) for r in rows if r["stage"] == stage)
        ax.plot([t for t, _ in pts], [s for _, s in pts], marker="o", label=stage)
    threads = sorted({row["threads"] for row in rows})
    ax.plot(threads, threads, linestyle="--", color="gray", label="ideal")
    ax.set_xlabel("threads")
    ax.set_ylabel("speedup vs 1 thread")
    ax.set_title("stage speedup")
    ax.legend()
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)


def write_bench_report(rows: list[dict], out_csv: str | Path, report_dir: str | Path | None) -> list[Path]:
    out_csv = Path(out_csv)
    out_csv.parent.mkdir(parents=True, exist_ok=True)
    out_csv.write_text(bench_csv(rows), encoding="ascii")
    created = [out_csv]
    fig_dir = Path(report_dir) if report_dir is not None else out_csv.parent
    fig_dir.mkdir(parents=True, exist_ok=True)
    fig_path = fig_dir / "bench_speedup.png"
    save_speedup_figure(rows, fig_path)
    created.append(fig_path)
    return created
