"""Gradient-boosted regression trees fit on forecaster residuals, plus the
residual, hybrid-correction, and MSE operations of the two-stage predictor.

Trees use axis-aligned splits with the squared-error criterion and are fit
stagewise on the running residual-of-residuals; the ensemble prediction is
base + learning_rate * sum(tree outputs).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InsufficientDataError, ShapeError


def compute_residuals(actual, predicted) -> np.ndarray:
    """Elementwise actual minus predicted."""
    y = np.asarray(actual, dtype=float)
    y_hat = np.asarray(predicted, dtype=float)
    if y.shape != y_hat.shape:
        raise ShapeError(f"length mismatch: {y.shape} vs {y_hat.shape}")
    return y - y_hat


def hybrid_predict(base_predictions, residual_predictions) -> np.ndarray:
    """Correct first-stage predictions by adding the predicted residuals.

    Pure addition; any clamping (e.g. to non-negative bandwidth) is the
    caller's business.
    """
    base = np.asarray(base_predictions, dtype=float)
    delta = np.asarray(residual_predictions, dtype=float)
    if base.shape != delta.shape:
        raise ShapeError(f"length mismatch: {base.shape} vs {delta.shape}")
    return base + delta


def mse(actual, predicted) -> float:
    y = np.asarray(actual, dtype=float)
    y_hat = np.asarray(predicted, dtype=float)
    if y.shape != y_hat.shape:
        raise ShapeError(f"length mismatch: {y.shape} vs {y_hat.shape}")
    if y.size == 0:
        raise InsufficientDataError("mse needs at least one sample")
    diff = y - y_hat
    return float(diff @ diff) / y.size


@dataclass
class TreeNode:
    """Internal node (feature/threshold/left/right) or leaf (value)."""

    feature: int = -1
    threshold: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    value: float = 0.0

    @property
    def is_leaf(self) -> bool:
        return self.left is None

    def to_dict(self) -> dict:
        if self.is_leaf:
            return {"value": self.value}
        return {
            "feature": self.feature,
            "threshold": self.threshold,
            "left": self.left.to_dict(),
            "right": self.right.to_dict(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "TreeNode":
        if "value" in doc:
            return cls(value=float(doc["value"]))
        return cls(
            feature=int(doc["feature"]),
            threshold=float(doc["threshold"]),
            left=cls.from_dict(doc["left"]),
            right=cls.from_dict(doc["right"]),
        )


def _best_split(x: np.ndarray, y: np.ndarray):
    """Exact squared-error split search; returns (feature, threshold, gain) or None."""
    n, n_features = x.shape
    total_sum = y.sum()
    best = None
    best_score = -1e-12  # require a strictly positive SSE reduction
    for j in range(n_features):
        order = np.argsort(x[:, j], kind="stable")
        xs = x[order, j]
        ys = y[order]
        prefix = np.cumsum(ys)
        # candidate boundaries between distinct consecutive values
        distinct = np.nonzero(xs[1:] > xs[:-1])[0]
        if distinct.size == 0:
            continue
        k = distinct + 1  # left side sizes
        left_sum = prefix[distinct]
        right_sum = total_sum - left_sum
        # SSE reduction = sum_l^2/n_l + sum_r^2/n_r - total^2/n
        score = left_sum**2 / k + right_sum**2 / (n - k) - total_sum**2 / n
        idx = int(np.argmax(score))
        if score[idx] > best_score:
            threshold = 0.5 * (xs[k[idx] - 1] + xs[k[idx]])
            # Midpoints of near-identical floats can round onto the right
            # value; fall back to the left value so both sides stay non-empty.
            if threshold >= xs[k[idx]]:
                threshold = xs[k[idx] - 1]
            best_score = float(score[idx])
            best = (j, float(threshold), best_score)
    return best


def fit_tree(features: np.ndarray, targets: np.ndarray, max_depth: int) -> TreeNode:
    """Fit one regression tree (splits go left when value <= threshold)."""
    x = np.asarray(features, dtype=float)
    y = np.asarray(targets, dtype=float)

    def grow(rows: np.ndarray, depth: int) -> TreeNode:
        ys = y[rows]
        if depth >= max_depth or rows.size < 2:
            return TreeNode(value=float(ys.mean()))
        split = _best_split(x[rows], ys)
        if split is None:
            return TreeNode(value=float(ys.mean()))
        j, threshold, _ = split
        mask = x[rows, j] <= threshold
        return TreeNode(
            feature=j,
            threshold=threshold,
            left=grow(rows[mask], depth + 1),
            right=grow(rows[~mask], depth + 1),
        )

    return grow(np.arange(len(y)), 0)


def predict_tree(node: TreeNode, features: np.ndarray) -> np.ndarray:
    x = np.asarray(features, dtype=float)
    out = np.empty(len(x))

    def descend(n: TreeNode, rows: np.ndarray) -> None:
        if n.is_leaf:
            out[rows] = n.value
            return
        mask = x[rows, n.feature] <= n.threshold
        descend(n.left, rows[mask])
        descend(n.right, rows[~mask])

    descend(node, np.arange(len(x)))
    return out


@dataclass
class BoostedEnsemble:
    base_prediction: float
    learning_rate: float
    n_features: int
    trees: list[TreeNode]

    def predict(self, features) -> np.ndarray:
        x = np.asarray(features, dtype=float)
        if x.ndim == 1:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != self.n_features:
            raise ShapeError(
                f"expected features of width {self.n_features}, got shape {np.asarray(features).shape}"
            )
        out = np.full(len(x), self.base_prediction)
        for tree in self.trees:
            out += self.learning_rate * predict_tree(tree, x)
        return out


def fit(
    features,
    targets,
    n_estimators: int = 100,
    learning_rate: float = 0.5,
    max_depth: int = 3,
    seed: int = 0,
) -> BoostedEnsemble:
    """Stagewise least-squares boosting: base = mean(targets), each tree fits
    the current residual-of-residuals. Deterministic; the seed is accepted for
    interface stability (no row/column subsampling is performed).
    """
    del seed
    x = np.asarray(features, dtype=float)
    y = np.asarray(targets, dtype=float)
    if x.ndim != 2:
        raise ShapeError(f"features must be 2-D, got shape {x.shape}")
    if len(x) != len(y) or len(y) == 0:
        raise InsufficientDataError(
            f"need matching non-empty features/targets, got {len(x)} rows vs {len(y)} targets"
        )
    if n_estimators < 0 or not 0 < learning_rate <= 1 or max_depth < 1:
        raise ConfigError("need n_estimators >= 0, learning_rate in (0, 1], max_depth >= 1")
    base = float(y.mean())
    residual = y - base
    trees: list[TreeNode] = []
    for _ in range(n_estimators):
        tree = fit_tree(x, residual, max_depth)
        residual = residual - learning_rate * predict_tree(tree, x)
        trees.append(tree)
    return BoostedEnsemble(
        base_prediction=base, learning_rate=learning_rate, n_features=x.shape[1], trees=trees
    )


def predict_residual(ensemble: BoostedEnsemble, features) -> np.ndarray:
    """Predicted residual corrections for the given feature rows."""
    return ensemble.predict(features)
