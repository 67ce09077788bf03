"""Shared domain types: QoS observations, discretized network states, and
the traffic-shaping action space (full Cartesian product or the curated
8-action set shipped by default)."""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass

from .errors import ConfigError, DataError

PRIORITY_LEVELS = ("L", "M", "H")
QOS_MODELS = ("BE", "RTPS", "UGS")
RATE_LABEL = "GR"  # generation-rate assignment: scales that app's offered load
ASSIGNMENT_LABELS = (RATE_LABEL,) + PRIORITY_LEVELS + QOS_MODELS

APP_NAMES = ("App1", "App2", "App3")


@dataclass(frozen=True)
class QosObservation:
    """One monitored bandwidth sample."""

    bandwidth_mbps: float
    timestamp_s: float

    def __post_init__(self):
        if not math.isfinite(self.bandwidth_mbps) or self.bandwidth_mbps < 0:
            raise DataError(f"bandwidth must be finite and >= 0, got {self.bandwidth_mbps}")
        if not math.isfinite(self.timestamp_s) or self.timestamp_s < 0:
            raise DataError(f"timestamp must be finite and >= 0, got {self.timestamp_s}")


@dataclass(frozen=True)
class NetworkState:
    """Discretized QoS observation; indexes the Q-table rows."""

    bin_index: int

    def __post_init__(self):
        if self.bin_index < 0:
            raise DataError(f"bin_index must be >= 0, got {self.bin_index}")


def discretize(bandwidth_mbps: float, num_bins: int = 20, max_bw_mbps: float = 100.0) -> NetworkState:
    """Uniform-width binning over [0, max_bw]; values above clamp to the top bin."""
    if num_bins < 1:
        raise ConfigError(f"num_bins must be >= 1, got {num_bins}")
    if not max_bw_mbps > 0:
        raise ConfigError(f"max_bw_mbps must be > 0, got {max_bw_mbps}")
    if not math.isfinite(bandwidth_mbps):
        raise DataError(f"bandwidth must be finite, got {bandwidth_mbps}")
    if bandwidth_mbps < 0:
        raise DataError(f"bandwidth must be >= 0, got {bandwidth_mbps}")
    width = max_bw_mbps / num_bins
    return NetworkState(min(int(bandwidth_mbps / width), num_bins - 1))


def bin_lower_edge(bin_index: int, num_bins: int = 20, max_bw_mbps: float = 100.0) -> float:
    return bin_index * (max_bw_mbps / num_bins)


def bin_center(bin_index: int, num_bins: int = 20, max_bw_mbps: float = 100.0) -> float:
    width = max_bw_mbps / num_bins
    return (bin_index + 0.5) * width


def compose_state(bins: tuple[int, ...], bins_per_parameter: tuple[int, ...]) -> NetworkState:
    """Row-major composition of per-parameter bins into a single state index.

    The shipped configuration monitors bandwidth only (one parameter), but the
    state space generalizes to tuples of QoS parameters.
    """
    if len(bins) != len(bins_per_parameter) or not bins:
        raise ConfigError("bins and bins_per_parameter must be equal-length and non-empty")
    index = 0
    for b, n in zip(bins, bins_per_parameter):
        if not 0 <= b < n:
            raise DataError(f"bin {b} out of range [0, {n})")
        index = index * n + b
    return NetworkState(index)


@dataclass(frozen=True)
class ConfigSet:
    """One programmable configuration parameter and its allowed values."""

    name: str
    elements: tuple[str, ...]

    def __post_init__(self):
        if not self.elements:
            raise ConfigError(f"config set {self.name!r} must be non-empty")
        if len(set(self.elements)) != len(self.elements):
            raise ConfigError(f"config set {self.name!r} has duplicate elements")


@dataclass(frozen=True)
class ConfigTuple:
    """One choice from the product of config sets: one assignment per application."""

    assignments: tuple[str, ...]

    def __post_init__(self):
        if not self.assignments:
            raise ConfigError("a configuration tuple needs at least one assignment")


@dataclass(frozen=True)
class ActionSpace:
    """Ordered, densely indexed set of configuration tuples (a1, a2, ...)."""

    configs: tuple[ConfigSet, ...]
    actions: tuple[ConfigTuple, ...]

    @property
    def cardinality(self) -> int:
        return len(self.actions)

    def label(self, index: int) -> str:
        if not 0 <= index < len(self.actions):
            raise ConfigError(f"action index {index} out of range [0, {len(self.actions)})")
        return f"a{index + 1}"

    def labels(self) -> tuple[str, ...]:
        return tuple(f"a{i + 1}" for i in range(len(self.actions)))

    def action(self, index: int) -> ConfigTuple:
        if not 0 <= index < len(self.actions):
            raise ConfigError(f"action index {index} out of range [0, {len(self.actions)})")
        return self.actions[index]

    def to_json(self) -> str:
        """Structured text listing each action's per-app assignments."""
        doc = {
            "configs": [{"name": c.name, "elements": list(c.elements)} for c in self.configs],
            "actions": [
                {
                    "label": f"a{i + 1}",
                    "assignments": {
                        self.configs[j].name: value
                        for j, value in enumerate(a.assignments)
                    },
                }
                for i, a in enumerate(self.actions)
            ],
        }
        return json.dumps(doc, indent=2) + "\n"


def build_full_action_space(configs: list[ConfigSet] | tuple[ConfigSet, ...]) -> ActionSpace:
    """Cartesian product of the config sets, in lexicographic order of set indices."""
    configs = tuple(configs)
    if not configs:
        raise ConfigError("need at least one config set")
    actions = tuple(
        ConfigTuple(combo) for combo in itertools.product(*(c.elements for c in configs))
    )
    return ActionSpace(configs=configs, actions=actions)


# Curated 8-action set: per app, each action fixes exactly one of
# {generation rate, priority level, QoS model}; App1=mMTC, App2=eMBB, App3=URLLC.
_DEFAULT_ACTION_ROWS = (
    ("GR", "L", "RTPS"),
    ("GR", "RTPS", "M"),
    ("M", "BE", "GR"),
    ("L", "RTPS", "GR"),
    ("RTPS", "M", "GR"),
    ("M", "GR", "BE"),
    ("H", "UGS", "GR"),
    ("UGS", "GR", "H"),
)


def build_default_action_space() -> ActionSpace:
    """The shipped 8-action traffic-shaping space (a1..a8)."""
    configs = tuple(
        ConfigSet(name=app.lower(), elements=ASSIGNMENT_LABELS) for app in APP_NAMES
    )
    actions = tuple(ConfigTuple(row) for row in _DEFAULT_ACTION_ROWS)
    return ActionSpace(configs=configs, actions=actions)
