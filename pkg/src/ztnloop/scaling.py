"""Min-max normalization and sliding-window dataset construction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateScalerError, InsufficientDataError


@dataclass(frozen=True)
class MinMaxScaler:
    """Affine map taking [min_value, max_value] onto [0, 1]."""

    min_value: float
    max_value: float

    def __post_init__(self):
        if not self.max_value > self.min_value:
            raise DegenerateScalerError(
                f"scaler needs max > min, got [{self.min_value}, {self.max_value}]"
            )

    @classmethod
    def fit(cls, series) -> "MinMaxScaler":
        values = np.asarray(series, dtype=float)
        if values.size < 2:
            raise InsufficientDataError("scaler fit needs at least 2 samples")
        lo, hi = float(values.min()), float(values.max())
        if hi == lo:
            raise DegenerateScalerError("constant series: min-max scaling undefined")
        return cls(lo, hi)

    def transform(self, x):
        return (np.asarray(x, dtype=float) - self.min_value) / (self.max_value - self.min_value)

    def inverse(self, x):
        return np.asarray(x, dtype=float) * (self.max_value - self.min_value) + self.min_value


@dataclass(frozen=True)
class WindowedDataset:
    """Stride-1 sliding windows: inputs[i] = series[i : i+w], targets[i] = series[i+w]."""

    inputs: np.ndarray  # (n, window_size)
    targets: np.ndarray  # (n,)
    window_size: int

    def __len__(self) -> int:
        return len(self.targets)


def make_windows(series, window_size: int) -> WindowedDataset:
    values = np.asarray(series, dtype=float)
    if window_size < 1:
        raise InsufficientDataError(f"window_size must be >= 1, got {window_size}")
    n = values.size - window_size
    if n < 1:
        raise InsufficientDataError(
            f"series of length {values.size} too short for window_size {window_size}"
        )
    idx = np.arange(window_size)[None, :] + np.arange(n)[:, None]
    return WindowedDataset(inputs=values[idx], targets=values[window_size:], window_size=window_size)
