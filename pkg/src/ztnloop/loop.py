"""Monitor -> analyze -> decide -> act loop plus convergence reporting.

Each timestamp: predict the next bandwidth from the trailing window, observe
the actual sample, discretize both, look up the greedy action for each, apply
the predicted-state action to the live simulator (proactive mode; --reactive
applies the actual-state action instead), and record the comparison.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import agent as qagent
from .config import SEED_LOOP, ExperimentConfig, derive_seed
from .core import ActionSpace, discretize
from .errors import DataError, WarmupError
from .simulator import Simulator

LOOP_CSV_HEADER = "time_s,actual_bw,predicted_bw,action_actual,action_predicted,achieved_bw,match"


@dataclass(frozen=True)
class LoopRecord:
    timestamp_s: float
    actual_bw: float
    predicted_bw: float
    action_actual: int
    action_predicted: int
    achieved_bw: float
    match: bool


@dataclass(frozen=True)
class LoopSummary:
    timestamps: int
    accuracy: float  # fraction of timestamps where both actions agree
    mae_mbps: float  # mean |achieved(actual action) - achieved(predicted action)|
    degenerate: bool  # all-zero Q-table: every choice falls back to action 0

    def describe(self) -> str:
        lines = [
            f"timestamps: {self.timestamps}",
            f"action-match accuracy: {self.accuracy:.3f}",
            f"achieved-bandwidth MAE: {self.mae_mbps:.4f} Mbps",
        ]
        if self.degenerate:
            lines.append("warning: Q-table is all zeros; action choices are tie-breaks only")
        return "\n".join(lines)


def run_closed_loop(
    cfg: ExperimentConfig,
    predictor,
    q: qagent.QTable,
    action_space: ActionSpace,
    achieved_table: np.ndarray,
    timestamps: int | None = None,
    reactive: bool = False,
    history: list[float] | None = None,
) -> tuple[list[LoopRecord], LoopSummary]:
    """Drive the live simulator for `timestamps` control intervals.

    `predictor` needs predict_next(window) -> Mbps and window_size; if it also
    has notify_action(action), it hears every applied action. `history` may
    seed the observation window; otherwise warm-up ticks (with no actuation)
    fill it.
    """
    steps = cfg.loop_timestamps if timestamps is None else timestamps
    if steps < 1:
        raise DataError(f"timestamps must be >= 1, got {steps}")
    if achieved_table.shape != (cfg.num_bins, action_space.cardinality):
        raise DataError(
            f"achieved table shape {achieved_table.shape} does not match "
            f"{cfg.num_bins} bins x {action_space.cardinality} actions"
        )

    w = predictor.window_size
    sim = Simulator(replace(cfg.sim, rng_seed=derive_seed(cfg.seed, SEED_LOOP)))
    if history is not None:
        if len(history) < w:
            raise WarmupError(
                f"history has {len(history)} samples; need at least {w} to warm up"
            )
        window = [float(v) for v in history[-w:]]
    else:
        # Warm up until the prediction window is full and the cell has had
        # time to reach steady occupancy.
        warmup = max(w, int(round(cfg.loop_warmup_s / cfg.sim.tick_s)))
        window = [sim.step().observed_bw_mbps for _ in range(warmup)][-w:]

    notify = getattr(predictor, "notify_action", None)
    degenerate = not np.any(q.values)
    records: list[LoopRecord] = []
    for _ in range(steps):
        predicted = max(0.0, float(predictor.predict_next(np.asarray(window))))
        obs = sim.step()
        actual = obs.observed_bw_mbps

        state_actual = discretize(actual, cfg.num_bins, cfg.max_bw_mbps)
        state_predicted = discretize(
            min(predicted, cfg.max_bw_mbps), cfg.num_bins, cfg.max_bw_mbps
        )
        action_actual = qagent.best_action(q, state_actual)
        action_predicted = qagent.best_action(q, state_predicted)
        applied = action_actual if reactive else action_predicted
        sim.apply_action(action_space.action(applied))
        if notify is not None:
            notify(action_space.action(applied))

        records.append(
            LoopRecord(
                timestamp_s=obs.timestamp_s,
                actual_bw=actual,
                predicted_bw=predicted,
                action_actual=action_actual,
                action_predicted=action_predicted,
                achieved_bw=float(achieved_table[state_actual.bin_index, applied]),
                match=action_actual == action_predicted,
            )
        )
        window = window[1:] + [actual]

    matches = sum(r.match for r in records)
    gaps = [
        abs(
            achieved_table[discretize(r.actual_bw, cfg.num_bins, cfg.max_bw_mbps).bin_index, r.action_actual]
            - achieved_table[discretize(r.actual_bw, cfg.num_bins, cfg.max_bw_mbps).bin_index, r.action_predicted]
        )
        for r in records
    ]
    summary = LoopSummary(
        timestamps=len(records),
        accuracy=matches / len(records),
        mae_mbps=float(np.mean(gaps)),
        degenerate=degenerate,
    )
    return records, summary


def write_loop_csv(records: list[LoopRecord], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(LOOP_CSV_HEADER + "\n")
        for r in records:
            fh.write(
                f"{r.timestamp_s!r},{r.actual_bw!r},{r.predicted_bw!r},"
                f"{r.action_actual},{r.action_predicted},{r.achieved_bw!r},"
                f"{int(r.match)}\n"
            )


@dataclass(frozen=True)
class ConvergenceReport:
    """Trace MAE aggregated over consecutive episode blocks."""

    episodes: tuple[int, ...]  # block-end episode numbers
    maes: tuple[float, ...]  # mean trace MAE within each block

    @property
    def final_over_initial(self) -> float:
        first, last = self.maes[0], self.maes[-1]
        if first == 0.0:
            return 0.0 if last == 0.0 else float("inf")
        return last / first

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("episode,mae\n")
            for ep, mae in zip(self.episodes, self.maes):
                fh.write(f"{ep},{mae!r}\n")


def evaluate_convergence(trace: qagent.TrainingTrace, sample_every: int = 2000) -> ConvergenceReport:
    """Aggregate the per-episode MAE into one value per `sample_every` block."""
    if not trace.maes:
        raise DataError("trace has no mae column values")
    if sample_every < 1:
        raise DataError("sample_every must be >= 1")
    maes = np.asarray(trace.maes, dtype=float)
    episodes = np.asarray(trace.episodes, dtype=int)
    block_ends, block_means = [], []
    for start in range(0, len(maes), sample_every):
        block = maes[start : start + sample_every]
        block_ends.append(int(episodes[min(start + sample_every, len(maes)) - 1]))
        block_means.append(float(block.mean()))
    return ConvergenceReport(episodes=tuple(block_ends), maes=tuple(block_means))
