"""End-to-end stages: dataset generation, two-stage predictor training, the
achieved-bandwidth table, and agent training."""

from __future__ import annotations

import json
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import agent as qagent
from . import bilstm, booster
from .checkpoint import save_hybrid, save_qtable
from .config import (
    SEED_AGENT,
    SEED_DATASET,
    SEED_FORECASTER,
    ExperimentConfig,
    derive_seed,
)
from .core import ActionSpace, bin_center, build_default_action_space, discretize
from .errors import DataError, InsufficientDataError
from .scaling import MinMaxScaler, make_windows
from .simulator import Simulator, read_series_csv, run, write_series_csv


def generate_dataset(cfg: ExperimentConfig, out_dir) -> tuple[Path, Path]:
    """Run the simulator once and split the series into train/test CSVs."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    total = cfg.train_samples + cfg.test_samples
    sim_cfg = replace(
        cfg.sim,
        duration_s=total * cfg.sim.tick_s,
        rng_seed=derive_seed(cfg.seed, SEED_DATASET),
    )
    observations = run(sim_cfg)
    train_path = out / "train.csv"
    test_path = out / "test.csv"
    write_series_csv(observations[: cfg.train_samples], train_path)
    write_series_csv(observations[cfg.train_samples :], test_path)
    return train_path, test_path


def _booster_features(windows_mbps: np.ndarray, first_stage_mbps: np.ndarray) -> np.ndarray:
    """Lagged window plus the first-stage prediction as the final feature."""
    return np.column_stack([windows_mbps, first_stage_mbps])


def train_hybrid(cfg: ExperimentConfig, train_path, test_path, out_dir) -> dict:
    """Train the recurrent model, fit the residual booster on the validation
    segment, evaluate both stages on the held-out test series, and write the
    checkpoint plus metrics/plot-ready CSVs.

    Returns the metrics dictionary (also written to metrics.json).
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _, train_series = read_series_csv(train_path)
    test_times, test_series = read_series_csv(test_path)

    fc = cfg.forecaster
    w = fc.model.window_size
    if len(train_series) <= w:
        raise InsufficientDataError(
            f"training series of length {len(train_series)} too short for window {w}"
        )

    n_windows = len(train_series) - w
    n_train = int(n_windows * fc.train_fraction)
    n_val = int(n_windows * fc.val_fraction)
    if n_val < 1:
        raise InsufficientDataError("validation segment is empty; booster has nothing to fit")

    # Scale on the training segment only; windows are built over the scaled series.
    scaler = MinMaxScaler.fit(train_series[: n_train + w])
    scaled = scaler.transform(train_series)
    dataset = make_windows(scaled, w)

    seed = derive_seed(cfg.seed, SEED_FORECASTER)
    model = bilstm.BiLstmModel(fc.model, seed=seed)
    report = bilstm.train(
        model,
        dataset,
        epochs=fc.epochs,
        split=(fc.train_fraction, fc.val_fraction),
        adam=fc.adam,
        seed=seed,
        batch_size=fc.batch_size,
    )

    # Residual stage: fit on the validation segment's first-stage errors.
    val_slice = slice(n_train, n_train + n_val)
    val_inputs_mbps = scaler.inverse(dataset.inputs[val_slice])
    val_targets_mbps = scaler.inverse(dataset.targets[val_slice])
    val_first_stage = scaler.inverse(model.predict(dataset.inputs[val_slice]))
    residuals = booster.compute_residuals(val_targets_mbps, val_first_stage)
    ensemble = booster.fit(
        _booster_features(val_inputs_mbps, val_first_stage),
        residuals,
        n_estimators=cfg.booster.n_estimators,
        learning_rate=cfg.booster.learning_rate,
        max_depth=cfg.booster.max_depth,
        seed=seed,
    )

    # Held-out evaluation on the test series.
    test_dataset = make_windows(scaler.transform(test_series), w)
    test_targets = test_series[w:]
    test_first_stage = scaler.inverse(model.predict(test_dataset.inputs))
    test_windows_mbps = scaler.inverse(test_dataset.inputs)
    predicted_residuals = booster.predict_residual(
        ensemble, _booster_features(test_windows_mbps, test_first_stage)
    )
    test_hybrid = booster.hybrid_predict(test_first_stage, predicted_residuals)

    metrics = {
        "mse_bilstm": booster.mse(test_targets, test_first_stage),
        "mse_hybrid": booster.mse(test_targets, test_hybrid),
        "train_windows": n_train,
        "val_windows": n_val,
        "test_predictions": len(test_targets),
        "epochs": fc.epochs,
        "final_train_loss": report.train_loss[-1],
        "final_val_loss": report.val_loss[-1] if report.val_loss else None,
    }

    save_hybrid(out / "checkpoint.json", model, scaler, ensemble)
    with open(out / "metrics.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(metrics, fh, indent=1)
        fh.write("\n")
    with open(out / "losses.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("epoch,train_loss,val_loss\n")
        for i, tl in enumerate(report.train_loss, start=1):
            vl = report.val_loss[i - 1] if report.val_loss else float("nan")
            fh.write(f"{i},{tl!r},{vl!r}\n")
    with open(out / "predictions.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("time_s,actual_bw,bilstm_bw,hybrid_bw\n")
        for t, y, yb, yh in zip(test_times[w:], test_targets, test_first_stage, test_hybrid):
            fh.write(f"{t!r},{y!r},{yb!r},{yh!r}\n")
    return metrics


class HybridPredictor:
    """Two-stage next-sample predictor: recurrent model plus residual booster."""

    def __init__(self, model: bilstm.BiLstmModel, scaler: MinMaxScaler, ensemble):
        self.model = model
        self.scaler = scaler
        self.ensemble = ensemble

    @property
    def window_size(self) -> int:
        return self.model.config.window_size

    def predict_next(self, window_mbps) -> float:
        """Predict the next bandwidth sample from the trailing window (Mbps)."""
        window = np.asarray(window_mbps, dtype=float)
        first_stage = float(self.scaler.inverse(self.model.predict(self.scaler.transform(window))))
        features = _booster_features(window[None, :], np.array([first_stage]))
        correction = float(booster.predict_residual(self.ensemble, features)[0])
        return first_stage + correction


# App share of the bin-center load when probing actions. Uses the congested
# traffic profile (broadband-heavy), since shaping choices only matter there.
REWARD_LOAD_MIX = (0.03, 0.94, 0.03)


def build_achieved_table(cfg: ExperimentConfig, action_space: ActionSpace | None = None) -> np.ndarray:
    """Deterministic achieved-bandwidth table: for every (state bin, action),
    load the cell with the bin-center offered rate (split across app classes
    per REWARD_LOAD_MIX), apply the action, and average the observed bandwidth
    over a few ticks.
    """
    if action_space is None:
        action_space = build_default_action_space()
    mix = np.asarray(REWARD_LOAD_MIX)
    table = np.empty((cfg.num_bins, action_space.cardinality))
    base_sim = replace(cfg.sim, congestion=(), rng_seed=0)
    for s in range(cfg.num_bins):
        load = bin_center(s, cfg.num_bins, cfg.max_bw_mbps)
        offered = tuple(mix * load)
        for a_idx, action in enumerate(action_space.actions):
            sim = Simulator(base_sim)
            sim.fixed_offered_mbps = offered
            sim.apply_action(action)
            observed = [sim.step().observed_bw_mbps for _ in range(cfg.reward_eval_ticks)]
            table[s, a_idx] = float(np.mean(observed))
    return table


def train_agent_pipeline(cfg: ExperimentConfig, test_path, out_dir) -> dict:
    """Discretize the evaluation series, build the achieved-bandwidth table,
    train the Q-agent, and write the Q-table checkpoint, trace CSV, action
    list, and the table itself."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _, series = read_series_csv(test_path)
    if len(series) == 0:
        raise DataError(f"{test_path}: empty series")
    states = [discretize(v, cfg.num_bins, cfg.max_bw_mbps) for v in series]

    action_space = build_default_action_space()
    table = build_achieved_table(cfg, action_space)
    reward_model = qagent.RewardModel(
        expected_metric=cfg.expected_metric,
        achieved=lambda s, a: table[s, a],
    )
    q = qagent.QTable(cfg.num_bins, action_space.cardinality)
    trace = qagent.train(
        q, states, reward_model, cfg.agent, seed=derive_seed(cfg.seed, SEED_AGENT)
    )

    save_qtable(out / "qtable.json", q, action_space.labels())
    trace.write_csv(out / "trace.csv")
    with open(out / "actions.json", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(action_space.to_json())
    np.savetxt(
        out / "achieved_table.csv",
        table,
        delimiter=",",
        header=",".join(action_space.labels()),
        comments="",
        fmt="%r",
    )
    return {
        "episodes": cfg.agent.episodes,
        "states_per_episode": len(states),
        "final_mae": trace.maes[-1],
        "final_total_reward": trace.total_rewards[-1],
    }
