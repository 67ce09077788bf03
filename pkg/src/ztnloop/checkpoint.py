"""JSON checkpoints for the trained predictor stack and the Q-table.

One structured text document holds the recurrent model (architecture plus all
weight arrays, row-major), the scaler bounds, and the boosted ensemble under
its own section. Loading rejects unknown schema versions.
"""

from __future__ import annotations

import json

import numpy as np

from .agent import QTable
from .bilstm import BiLstmConfig, BiLstmModel
from .booster import BoostedEnsemble, TreeNode
from .errors import CheckpointError
from .scaling import MinMaxScaler

HYBRID_SCHEMA = "ztnloop-hybrid"
QTABLE_SCHEMA = "ztnloop-qtable"
SCHEMA_VERSION = 1


def _load_document(path, expected_schema: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if doc.get("schema") != expected_schema:
        raise CheckpointError(
            f"{path}: expected schema {expected_schema!r}, got {doc.get('schema')!r}"
        )
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise CheckpointError(
            f"{path}: unsupported schema_version {doc.get('schema_version')!r} "
            f"(expected {SCHEMA_VERSION})"
        )
    return doc


def save_hybrid(path, model: BiLstmModel, scaler: MinMaxScaler, ensemble: BoostedEnsemble) -> None:
    cfg = model.config
    doc = {
        "schema": HYBRID_SCHEMA,
        "schema_version": SCHEMA_VERSION,
        "bilstm": {
            "window_size": cfg.window_size,
            "input_size": cfg.input_size,
            "hidden_size": cfg.hidden_size,
            "num_layers": cfg.num_layers,
            "dense_size": cfg.dense_size,
            "dropout_rate": cfg.dropout_rate,
            "weights": {
                name: p.tolist()
                for name, p in zip(model.parameter_names(), model.parameters())
            },
        },
        "scaler": {"min": scaler.min_value, "max": scaler.max_value},
        "booster": {
            "base_prediction": ensemble.base_prediction,
            "learning_rate": ensemble.learning_rate,
            "n_features": ensemble.n_features,
            "trees": [t.to_dict() for t in ensemble.trees],
        },
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_hybrid(path) -> tuple[BiLstmModel, MinMaxScaler, BoostedEnsemble]:
    doc = _load_document(path, HYBRID_SCHEMA)
    try:
        b = doc["bilstm"]
        model = BiLstmModel(
            BiLstmConfig(
                window_size=b["window_size"],
                input_size=b["input_size"],
                hidden_size=b["hidden_size"],
                num_layers=b["num_layers"],
                dense_size=b["dense_size"],
                dropout_rate=b["dropout_rate"],
            )
        )
        weights = b["weights"]
        for name, param in zip(model.parameter_names(), model.parameters()):
            stored = np.asarray(weights[name], dtype=float)
            if stored.shape != param.shape:
                raise CheckpointError(
                    f"{path}: weight {name} has shape {stored.shape}, expected {param.shape}"
                )
            param[:] = stored
        scaler = MinMaxScaler(float(doc["scaler"]["min"]), float(doc["scaler"]["max"]))
        boost = doc["booster"]
        ensemble = BoostedEnsemble(
            base_prediction=float(boost["base_prediction"]),
            learning_rate=float(boost["learning_rate"]),
            n_features=int(boost["n_features"]),
            trees=[TreeNode.from_dict(t) for t in boost["trees"]],
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"{path}: malformed checkpoint: {exc}") from exc
    return model, scaler, ensemble


def save_qtable(path, q: QTable, action_labels: tuple[str, ...]) -> None:
    if len(action_labels) != q.num_actions:
        raise CheckpointError(
            f"{len(action_labels)} labels for {q.num_actions} actions"
        )
    doc = {
        "schema": QTABLE_SCHEMA,
        "schema_version": SCHEMA_VERSION,
        "num_states": q.num_states,
        "num_actions": q.num_actions,
        "action_labels": list(action_labels),
        "values": q.values.tolist(),
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_qtable(path) -> tuple[QTable, tuple[str, ...]]:
    doc = _load_document(path, QTABLE_SCHEMA)
    try:
        q = QTable(int(doc["num_states"]), int(doc["num_actions"]))
        values = np.asarray(doc["values"], dtype=float)
        if values.shape != q.values.shape:
            raise CheckpointError(f"{path}: value matrix shape {values.shape} mismatch")
        q.values[:] = values
        labels = tuple(doc["action_labels"])
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"{path}: malformed checkpoint: {exc}") from exc
    return q, labels
