"""Desk-scale closed-loop congestion control testbed.

A synthetic cellular simulator generates bandwidth series, a hybrid
BiLSTM + boosted-residual model predicts the next network state, and a
tabular Q-learning agent selects the traffic-shaping action for it; the loop
applies the action, measures the result, and repeats.
"""

__version__ = "0.1.0"

from .core import (
    ActionSpace,
    ConfigSet,
    ConfigTuple,
    NetworkState,
    QosObservation,
    build_default_action_space,
    build_full_action_space,
    discretize,
)

__all__ = [
    "ActionSpace",
    "ConfigSet",
    "ConfigTuple",
    "NetworkState",
    "QosObservation",
    "build_default_action_space",
    "build_full_action_space",
    "discretize",
    "__version__",
]
