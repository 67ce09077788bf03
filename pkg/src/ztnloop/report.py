"""Render the experiment artifacts into figures and summary files.

Reads whatever artifact files exist in the input directory (dataset CSVs,
training losses, test predictions, agent trace, loop records, metrics) and
writes PNG figures alongside the delimited convergence table and a
human-readable summary.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from . import agent as qagent
from .errors import DataError
from .loop import evaluate_convergence

# Pinned so repeated runs produce byte-identical PNGs.
_SAVEFIG = {"dpi": 120, "metadata": {"Software": "ztnloop"}}


def _read_csv_columns(path: Path, required: tuple[str, ...]) -> dict[str, np.ndarray]:
    with open(path, "r", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        fields = reader.fieldnames or []
        missing = [c for c in required if c not in fields]
        if missing:
            raise DataError(f"{path}: missing columns {missing}")
        rows = list(reader)
    return {c: np.array([float(r[c]) for r in rows]) for c in required}


def _new_axes(width=7.0, height=3.2):
    fig, ax = plt.subplots(figsize=(width, height), constrained_layout=True)
    return fig, ax


def _save(fig, path: Path) -> Path:
    fig.savefig(path, **_SAVEFIG)
    plt.close(fig)
    return path


def plot_traffic_pattern(train_csv: Path, test_csv: Path | None, out_path: Path) -> Path:
    cols = _read_csv_columns(train_csv, ("time_s", "bandwidth_mbps"))
    fig, ax = _new_axes()
    ax.plot(cols["time_s"], cols["bandwidth_mbps"], lw=0.7, label="train")
    if test_csv is not None and test_csv.exists():
        tcols = _read_csv_columns(test_csv, ("time_s", "bandwidth_mbps"))
        ax.plot(tcols["time_s"], tcols["bandwidth_mbps"], lw=0.7, label="test")
    ax.set_xlabel("time (s)")
    ax.set_ylabel("observed bandwidth (Mbps)")
    ax.set_title("Generated traffic pattern")
    ax.legend(loc="upper right")
    return _save(fig, out_path)


def plot_traffic_distribution(train_csv: Path, out_path: Path) -> Path:
    cols = _read_csv_columns(train_csv, ("time_s", "bandwidth_mbps"))
    fig, ax = _new_axes(width=5.0)
    ax.hist(cols["bandwidth_mbps"], bins=30, edgecolor="black", lw=0.4)
    ax.set_xlabel("observed bandwidth (Mbps)")
    ax.set_ylabel("frequency")
    ax.set_title("Traffic distribution")
    return _save(fig, out_path)


def plot_training_loss(losses_csv: Path, out_path: Path) -> Path:
    cols = _read_csv_columns(losses_csv, ("epoch", "train_loss", "val_loss"))
    fig, ax = _new_axes(width=5.0)
    ax.plot(cols["epoch"], cols["train_loss"], label="training")
    if np.all(np.isfinite(cols["val_loss"])):
        ax.plot(cols["epoch"], cols["val_loss"], label="validation")
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss (scaled MSE)")
    ax.set_title("Forecaster fit")
    ax.legend()
    return _save(fig, out_path)


def plot_predictions(predictions_csv: Path, column: str, title: str, out_path: Path) -> Path:
    cols = _read_csv_columns(predictions_csv, ("time_s", "actual_bw", column))
    fig, ax = _new_axes()
    ax.plot(cols["time_s"], cols["actual_bw"], lw=0.8, label="actual")
    ax.plot(cols["time_s"], cols[column], lw=0.8, label="predicted")
    ax.set_xlabel("time (s)")
    ax.set_ylabel("bandwidth (Mbps)")
    ax.set_title(title)
    ax.legend(loc="upper right")
    return _save(fig, out_path)


def plot_convergence(trace_csv: Path, out_png: Path, out_csv: Path, sample_every: int = 2000):
    cols = _read_csv_columns(trace_csv, ("episode", "mae"))
    trace = qagent.TrainingTrace(
        episodes=[int(e) for e in cols["episode"]],
        total_rewards=[0.0] * len(cols["episode"]),
        epsilons=[0.0] * len(cols["episode"]),
        maes=list(cols["mae"]),
    )
    report = evaluate_convergence(trace, sample_every=sample_every)
    report.write_csv(out_csv)
    fig, ax = _new_axes(width=5.5)
    ax.plot(report.episodes, report.maes, marker="o", ms=3)
    ax.set_xlabel("episode")
    ax.set_ylabel("MAE (Mbps)")
    ax.set_title("Agent convergence")
    return _save(fig, out_png), report


def plot_loop(loop_csv: Path, out_path: Path) -> Path:
    cols = _read_csv_columns(
        loop_csv,
        ("time_s", "actual_bw", "predicted_bw", "action_actual", "action_predicted"),
    )
    fig, ax = _new_axes()
    ax.plot(cols["time_s"], cols["actual_bw"], "x--", color="tab:blue", label="actual")
    ax.plot(cols["time_s"], cols["predicted_bw"], "o-", ms=3, color="tab:green", label="predicted")
    for t, y_a, y_p, a_act, a_pred in zip(
        cols["time_s"],
        cols["actual_bw"],
        cols["predicted_bw"],
        cols["action_actual"],
        cols["action_predicted"],
    ):
        ax.annotate(f"a{int(a_act) + 1}", (t, y_a), fontsize=6, color="black",
                    textcoords="offset points", xytext=(0, -10))
        ax.annotate(f"a{int(a_pred) + 1}", (t, y_p), fontsize=6, color="red",
                    textcoords="offset points", xytext=(0, 6))
    ax.set_xlabel("time (s)")
    ax.set_ylabel("bandwidth (Mbps)")
    ax.set_title("Closed-loop action selection (actual vs predicted state)")
    ax.legend(loc="upper right")
    return _save(fig, out_path)


def render_report(artifacts_dir, out_dir) -> list[Path]:
    """Render every figure whose inputs exist; write convergence.csv and
    report.txt; return the list of written paths."""
    src = Path(artifacts_dir)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    summary: list[str] = ["closed-loop experiment report", "=" * 30]

    train_csv = src / "train.csv"
    test_csv = src / "test.csv"
    if train_csv.exists():
        written.append(plot_traffic_pattern(train_csv, test_csv, out / "traffic_pattern.png"))
        written.append(plot_traffic_distribution(train_csv, out / "traffic_distribution.png"))
        summary.append(f"dataset: {train_csv.name}" + (f" + {test_csv.name}" if test_csv.exists() else ""))

    losses_csv = src / "losses.csv"
    if losses_csv.exists():
        written.append(plot_training_loss(losses_csv, out / "training_loss.png"))

    predictions_csv = src / "predictions.csv"
    if predictions_csv.exists():
        written.append(
            plot_predictions(
                predictions_csv, "bilstm_bw", "First-stage prediction", out / "prediction_first_stage.png"
            )
        )
        written.append(
            plot_predictions(
                predictions_csv, "hybrid_bw", "Hybrid prediction", out / "prediction_hybrid.png"
            )
        )

    metrics_json = src / "metrics.json"
    if metrics_json.exists():
        with open(metrics_json, "r", encoding="utf-8") as fh:
            metrics = json.load(fh)
        summary.append(f"first-stage test MSE: {metrics['mse_bilstm']:.4f} Mbps^2")
        summary.append(f"hybrid test MSE:      {metrics['mse_hybrid']:.4f} Mbps^2")
        if metrics["mse_bilstm"] > 0:
            summary.append(
                f"hybrid/first-stage MSE ratio: {metrics['mse_hybrid'] / metrics['mse_bilstm']:.4f}"
            )

    trace_csv = src / "trace.csv"
    if trace_csv.exists():
        png, conv = plot_convergence(trace_csv, out / "agent_convergence.png", out / "convergence.csv")
        written.append(png)
        written.append(out / "convergence.csv")
        summary.append(
            f"agent MAE: first block {conv.maes[0]:.3f} -> final block {conv.maes[-1]:.3f} Mbps "
            f"(ratio {conv.final_over_initial:.4f})"
        )

    loop_csv = src / "loop.csv"
    if loop_csv.exists():
        written.append(plot_loop(loop_csv, out / "loop_actions.png"))
        cols = _read_csv_columns(loop_csv, ("match",))
        summary.append(
            f"closed-loop action-match accuracy: {float(np.mean(cols['match'])):.3f} "
            f"over {len(cols['match'])} timestamps"
        )

    if len(summary) == 2:
        raise DataError(f"no artifacts found in {src}")
    report_txt = out / "report.txt"
    with open(report_txt, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(summary) + "\n")
    written.append(report_txt)
    return written
