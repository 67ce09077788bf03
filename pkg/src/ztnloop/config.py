"""Experiment configuration: defaults for every knob plus INI-style loading.

The config file is flat key/value text with one section per subsystem
([core], [sim], [forecaster], [booster], [agent], [loop]); any omitted key
keeps its default.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace

import numpy as np

from .agent import AgentParams
from .bilstm import AdamParams, BiLstmConfig
from .errors import ConfigError
from .simulator import CongestionWindow, LoadPulse, SimConfig

# Seed-stream purposes, so each stage draws from an independent stream derived
# from the one experiment seed.
SEED_DATASET = 0
SEED_FORECASTER = 1
SEED_AGENT = 2
SEED_LOOP = 3


def derive_seed(experiment_seed: int, purpose: int) -> int:
    ss = np.random.SeedSequence(experiment_seed, spawn_key=(purpose,))
    return int(ss.generate_state(1)[0])


@dataclass(frozen=True)
class ForecasterConfig:
    model: BiLstmConfig = BiLstmConfig()
    epochs: int = 40
    batch_size: int = 32
    train_fraction: float = 0.8
    val_fraction: float = 0.1
    adam: AdamParams = AdamParams()

    def __post_init__(self):
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if not (
            self.train_fraction > 0
            and self.val_fraction >= 0
            and self.train_fraction + self.val_fraction <= 1.0
        ):
            raise ConfigError("need train_fraction > 0, val_fraction >= 0, sum <= 1")


@dataclass(frozen=True)
class BoosterConfig:
    n_estimators: int = 100
    learning_rate: float = 0.5
    max_depth: int = 3

    def __post_init__(self):
        if self.n_estimators < 0 or self.max_depth < 1:
            raise ConfigError("need n_estimators >= 0 and max_depth >= 1")
        if not 0 < self.learning_rate <= 1:
            raise ConfigError("booster learning_rate must be in (0, 1]")


# Recurring congestion cycles (30 s on, 30 s off, ramped) so every dataset
# segment sees many quiet->congested transitions; the first window starts
# early enough to fall inside the default 20-timestamp loop horizon.
def _default_congestion() -> tuple[CongestionWindow, ...]:
    # 30 s events every 60 s: a short ramp up, a fully loaded stretch, a short
    # ramp down, then a quiet half-cycle.
    return tuple(
        CongestionWindow(start, start + 30.0, 35.0) for start in range(20, 2500, 60)
    )


@dataclass(frozen=True)
class ExperimentConfig:
    sim: SimConfig = field(
        default_factory=lambda: SimConfig(congestion=_default_congestion())
    )
    forecaster: ForecasterConfig = ForecasterConfig()
    booster: BoosterConfig = BoosterConfig()
    agent: AgentParams = AgentParams()
    num_bins: int = 20
    max_bw_mbps: float = 100.0
    expected_metric: float = 100.0  # reward target; the error-free channel rate
    train_samples: int = 1800
    test_samples: int = 700
    loop_timestamps: int = 20
    loop_warmup_s: float = 70.0  # live warm-up before the first control step
    reward_eval_ticks: int = 5  # ticks averaged per (state, action) table entry
    seed: int = 7

    def __post_init__(self):
        if self.num_bins < 1:
            raise ConfigError("num_bins must be >= 1")
        if not self.max_bw_mbps > 0:
            raise ConfigError("max_bw_mbps must be > 0")
        if not self.expected_metric > 0:
            raise ConfigError("expected_metric must be > 0")
        if self.train_samples < 2 or self.test_samples < 1:
            raise ConfigError("need train_samples >= 2 and test_samples >= 1")
        if self.loop_timestamps < 1:
            raise ConfigError("loop_timestamps must be >= 1")
        if self.loop_warmup_s < 0:
            raise ConfigError("loop_warmup_s must be >= 0")
        if self.reward_eval_ticks < 1:
            raise ConfigError("reward_eval_ticks must be >= 1")


def _parse_congestion(text: str) -> tuple[CongestionWindow, ...]:
    """Parse 'start:end:extra[, start:end:extra...]' into windows."""
    windows = []
    text = text.strip()
    if not text:
        return ()
    for chunk in text.split(","):
        parts = chunk.strip().split(":")
        if len(parts) != 3:
            raise ConfigError(f"bad congestion window {chunk!r}, expected start:end:extra")
        try:
            windows.append(CongestionWindow(float(parts[0]), float(parts[1]), float(parts[2])))
        except ValueError as exc:
            raise ConfigError(f"bad congestion window {chunk!r}: {exc}") from exc
    return tuple(windows)


def _parse_quota(text: str) -> tuple[int, ...]:
    text = text.strip()
    if not text:
        return ()
    try:
        return tuple(int(part) for part in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"bad ue_quota {text!r}: {exc}") from exc


def _parse_pulses(text: str) -> tuple[LoadPulse, ...]:
    """Parse 'app:period:mbps[, app:period:mbps...]' into load pulses."""
    pulses = []
    text = text.strip()
    if not text:
        return ()
    for chunk in text.split(","):
        parts = chunk.strip().split(":")
        if len(parts) != 3:
            raise ConfigError(f"bad pulse {chunk!r}, expected app:period:mbps")
        try:
            pulses.append(LoadPulse(int(parts[0]), int(parts[1]), float(parts[2])))
        except ValueError as exc:
            raise ConfigError(f"bad pulse {chunk!r}: {exc}") from exc
    return tuple(pulses)


def _get(parser, section, key, cast, default):
    if not parser.has_option(section, key):
        return default
    raw = parser.get(section, key)
    try:
        if cast is bool:
            return parser.getboolean(section, key)
        return cast(raw)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key} = {raw!r}: {exc}") from exc


_KNOWN_KEYS = {
    "core": {"num_bins", "max_bw_mbps", "expected_metric", "seed"},
    "sim": {
        "capacity_mbps",
        "arrival_rate",
        "num_ues_max",
        "ue_quota",
        "tick_s",
        "duration_s",
        "mean_holding_ticks",
        "congestion",
        "congestion_ramp_s",
        "pulses",
        "pulses_gated",
        "report_quantum_mbps",
        "rate_multiplier",
        "train_samples",
        "test_samples",
    },
    "forecaster": {
        "window_size",
        "hidden_size",
        "num_layers",
        "dense_size",
        "dropout_rate",
        "epochs",
        "batch_size",
        "train_fraction",
        "val_fraction",
        "learning_rate",
        "beta1",
        "beta2",
        "epsilon",
    },
    "booster": {"n_estimators", "learning_rate", "max_depth"},
    "agent": {
        "learning_rate",
        "discount",
        "epsilon_start",
        "epsilon_end",
        "epsilon_decay",
        "episodes",
    },
    "loop": {"timestamps", "warmup_s", "reward_eval_ticks"},
}


def load_config(path=None, seed_override: int | None = None) -> ExperimentConfig:
    """Build the experiment config from defaults, an optional INI file, and an
    optional seed override (highest precedence)."""
    defaults = ExperimentConfig()
    if path is None:
        cfg = defaults
    else:
        parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        try:
            with open(path, "r", encoding="utf-8") as fh:
                parser.read_file(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except configparser.Error as exc:
            raise ConfigError(f"config {path} is not valid INI: {exc}") from exc

        for section in parser.sections():
            if section not in _KNOWN_KEYS:
                raise ConfigError(f"unknown config section [{section}]")
            unknown = set(parser.options(section)) - _KNOWN_KEYS[section]
            if unknown:
                raise ConfigError(f"unknown keys in [{section}]: {sorted(unknown)}")

        d = defaults
        sim = SimConfig(
            capacity_mbps=_get(parser, "sim", "capacity_mbps", float, d.sim.capacity_mbps),
            arrival_rate=_get(parser, "sim", "arrival_rate", float, d.sim.arrival_rate),
            num_ues_max=_get(parser, "sim", "num_ues_max", int, d.sim.num_ues_max),
            ue_quota=_get(parser, "sim", "ue_quota", _parse_quota, d.sim.ue_quota),
            tick_s=_get(parser, "sim", "tick_s", float, d.sim.tick_s),
            duration_s=_get(parser, "sim", "duration_s", float, d.sim.duration_s),
            mean_holding_ticks=_get(
                parser, "sim", "mean_holding_ticks", float, d.sim.mean_holding_ticks
            ),
            congestion=_get(parser, "sim", "congestion", _parse_congestion, d.sim.congestion),
            congestion_ramp_s=_get(
                parser, "sim", "congestion_ramp_s", float, d.sim.congestion_ramp_s
            ),
            pulses=_get(parser, "sim", "pulses", _parse_pulses, d.sim.pulses),
            pulses_gated=_get(parser, "sim", "pulses_gated", bool, d.sim.pulses_gated),
            report_quantum_mbps=_get(
                parser, "sim", "report_quantum_mbps", float, d.sim.report_quantum_mbps
            ),
            rate_multiplier=_get(
                parser, "sim", "rate_multiplier", float, d.sim.rate_multiplier
            ),
            rng_seed=d.sim.rng_seed,
        )
        model = BiLstmConfig(
            window_size=_get(parser, "forecaster", "window_size", int, d.forecaster.model.window_size),
            input_size=d.forecaster.model.input_size,
            hidden_size=_get(parser, "forecaster", "hidden_size", int, d.forecaster.model.hidden_size),
            num_layers=_get(parser, "forecaster", "num_layers", int, d.forecaster.model.num_layers),
            dense_size=_get(parser, "forecaster", "dense_size", int, d.forecaster.model.dense_size),
            dropout_rate=_get(
                parser, "forecaster", "dropout_rate", float, d.forecaster.model.dropout_rate
            ),
        )
        forecaster = ForecasterConfig(
            model=model,
            epochs=_get(parser, "forecaster", "epochs", int, d.forecaster.epochs),
            batch_size=_get(parser, "forecaster", "batch_size", int, d.forecaster.batch_size),
            train_fraction=_get(
                parser, "forecaster", "train_fraction", float, d.forecaster.train_fraction
            ),
            val_fraction=_get(
                parser, "forecaster", "val_fraction", float, d.forecaster.val_fraction
            ),
            adam=AdamParams(
                learning_rate=_get(
                    parser, "forecaster", "learning_rate", float, d.forecaster.adam.learning_rate
                ),
                beta1=_get(parser, "forecaster", "beta1", float, d.forecaster.adam.beta1),
                beta2=_get(parser, "forecaster", "beta2", float, d.forecaster.adam.beta2),
                epsilon=_get(parser, "forecaster", "epsilon", float, d.forecaster.adam.epsilon),
            ),
        )
        booster = BoosterConfig(
            n_estimators=_get(parser, "booster", "n_estimators", int, d.booster.n_estimators),
            learning_rate=_get(
                parser, "booster", "learning_rate", float, d.booster.learning_rate
            ),
            max_depth=_get(parser, "booster", "max_depth", int, d.booster.max_depth),
        )
        agent = AgentParams(
            learning_rate=_get(parser, "agent", "learning_rate", float, d.agent.learning_rate),
            discount=_get(parser, "agent", "discount", float, d.agent.discount),
            epsilon_start=_get(parser, "agent", "epsilon_start", float, d.agent.epsilon_start),
            epsilon_end=_get(parser, "agent", "epsilon_end", float, d.agent.epsilon_end),
            epsilon_decay=_get(parser, "agent", "epsilon_decay", float, d.agent.epsilon_decay),
            episodes=_get(parser, "agent", "episodes", int, d.agent.episodes),
        )
        cfg = ExperimentConfig(
            sim=sim,
            forecaster=forecaster,
            booster=booster,
            agent=agent,
            num_bins=_get(parser, "core", "num_bins", int, d.num_bins),
            max_bw_mbps=_get(parser, "core", "max_bw_mbps", float, d.max_bw_mbps),
            expected_metric=_get(parser, "core", "expected_metric", float, d.expected_metric),
            train_samples=_get(parser, "sim", "train_samples", int, d.train_samples),
            test_samples=_get(parser, "sim", "test_samples", int, d.test_samples),
            loop_timestamps=_get(parser, "loop", "timestamps", int, d.loop_timestamps),
            loop_warmup_s=_get(parser, "loop", "warmup_s", float, d.loop_warmup_s),
            reward_eval_ticks=_get(
                parser, "loop", "reward_eval_ticks", int, d.reward_eval_ticks
            ),
            seed=_get(parser, "core", "seed", int, d.seed),
        )
    if seed_override is not None:
        cfg = replace(cfg, seed=seed_override)
    return cfg
