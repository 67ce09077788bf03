"""Stacked bidirectional LSTM regressor, implemented from scratch on numpy.

Each layer runs one LSTM over the window and a second one over a reversed
replica, concatenating both hidden sequences per timestep. The final layer's
last-timestep concatenation feeds a dense head (one ReLU hidden layer, linear
scalar output). Training is full backpropagation through time with Adam on
mean squared error, in double precision throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DivergenceError, InsufficientDataError, ShapeError
from .scaling import MinMaxScaler, WindowedDataset, make_windows


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


@dataclass
class LstmParams:
    """One direction of one layer; gates packed [input, forget, candidate, output]."""

    w: np.ndarray  # (input_size, 4H)
    u: np.ndarray  # (H, 4H)
    b: np.ndarray  # (4H,)

    @property
    def hidden_size(self) -> int:
        return self.u.shape[0]


def _init_direction(input_size: int, hidden_size: int, rng: np.random.Generator) -> LstmParams:
    bound_w = 1.0 / math.sqrt(input_size)
    bound_u = 1.0 / math.sqrt(hidden_size)
    return LstmParams(
        w=rng.uniform(-bound_w, bound_w, size=(input_size, 4 * hidden_size)),
        u=rng.uniform(-bound_u, bound_u, size=(hidden_size, 4 * hidden_size)),
        b=np.zeros(4 * hidden_size),
    )


def _direction_forward(x: np.ndarray, p: LstmParams, keep_cache: bool):
    """Run one LSTM direction over x (B, T, F); returns (hs (B, T, H), cache)."""
    batch, steps, _ = x.shape
    hidden = p.hidden_size
    h = np.zeros((batch, hidden))
    c = np.zeros((batch, hidden))
    hs = np.empty((batch, steps, hidden))
    cache = [] if keep_cache else None
    for t in range(steps):
        gates = x[:, t] @ p.w + h @ p.u + p.b
        i = _sigmoid(gates[:, :hidden])
        f = _sigmoid(gates[:, hidden : 2 * hidden])
        g = np.tanh(gates[:, 2 * hidden : 3 * hidden])
        o = _sigmoid(gates[:, 3 * hidden :])
        c_new = f * c + i * g
        tc = np.tanh(c_new)
        h_new = o * tc
        if keep_cache:
            cache.append((x[:, t], h, c, i, f, g, o, tc))
        h, c = h_new, c_new
        hs[:, t] = h
    return hs, cache


def _direction_backward(dhs: np.ndarray, cache, p: LstmParams):
    """BPTT for one direction; dhs is the gradient w.r.t. every timestep's output."""
    batch, steps, hidden = dhs.shape
    dw = np.zeros_like(p.w)
    du = np.zeros_like(p.u)
    db = np.zeros_like(p.b)
    dx = np.empty((batch, steps, p.w.shape[0]))
    dh_next = np.zeros((batch, hidden))
    dc_next = np.zeros((batch, hidden))
    for t in range(steps - 1, -1, -1):
        x_t, h_prev, c_prev, i, f, g, o, tc = cache[t]
        dh = dhs[:, t] + dh_next
        do = dh * tc
        dc = dc_next + dh * o * (1.0 - tc * tc)
        di = dc * g
        df = dc * c_prev
        dg = dc * i
        dc_next = dc * f
        da = np.concatenate(
            [
                di * i * (1.0 - i),
                df * f * (1.0 - f),
                dg * (1.0 - g * g),
                do * o * (1.0 - o),
            ],
            axis=1,
        )
        dw += x_t.T @ da
        du += h_prev.T @ da
        db += da.sum(axis=0)
        dx[:, t] = da @ p.w.T
        dh_next = da @ p.u.T
    return dx, (dw, du, db)


@dataclass
class BiLstmLayer:
    fwd: LstmParams
    bwd: LstmParams

    def forward(self, x: np.ndarray, keep_cache: bool = False):
        """Concatenate per-timestep outputs of the forward pass and the pass
        over the reversed replica (aligned back to input order)."""
        hs_f, cache_f = _direction_forward(x, self.fwd, keep_cache)
        hs_b_raw, cache_b = _direction_forward(x[:, ::-1], self.bwd, keep_cache)
        out = np.concatenate([hs_f, hs_b_raw[:, ::-1]], axis=2)
        return out, (cache_f, cache_b)

    def backward(self, dout: np.ndarray, cache):
        hidden = self.fwd.hidden_size
        cache_f, cache_b = cache
        dx_f, grads_f = _direction_backward(dout[:, :, :hidden], cache_f, self.fwd)
        dx_b, grads_b = _direction_backward(
            np.ascontiguousarray(dout[:, ::-1, hidden:]), cache_b, self.bwd
        )
        return dx_f + dx_b[:, ::-1], list(grads_f) + list(grads_b)


@dataclass(frozen=True)
class BiLstmConfig:
    window_size: int = 9
    input_size: int = 1
    hidden_size: int = 50  # per direction, per layer
    num_layers: int = 3
    dense_size: int = 32
    dropout_rate: float = 0.2  # between recurrent layers, training only

    def __post_init__(self):
        if self.window_size < 1 or self.input_size < 1:
            raise ConfigError("window_size and input_size must be >= 1")
        if self.hidden_size < 1 or self.num_layers < 1 or self.dense_size < 1:
            raise ConfigError("hidden_size, num_layers and dense_size must be >= 1")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")


class BiLstmModel:
    """Stacked bidirectional LSTM with a dense head producing one scalar per window."""

    def __init__(self, config: BiLstmConfig = BiLstmConfig(), seed: int = 0):
        self.config = config
        rng = np.random.default_rng(seed)
        self.layers: list[BiLstmLayer] = []
        in_size = config.input_size
        for _ in range(config.num_layers):
            self.layers.append(
                BiLstmLayer(
                    fwd=_init_direction(in_size, config.hidden_size, rng),
                    bwd=_init_direction(in_size, config.hidden_size, rng),
                )
            )
            in_size = 2 * config.hidden_size
        bound1 = 1.0 / math.sqrt(in_size)
        bound2 = 1.0 / math.sqrt(config.dense_size)
        self.dense1_w = rng.uniform(-bound1, bound1, size=(in_size, config.dense_size))
        self.dense1_b = np.zeros(config.dense_size)
        self.dense2_w = rng.uniform(-bound2, bound2, size=(config.dense_size, 1))
        self.dense2_b = np.zeros(1)

    # --- parameter access -------------------------------------------------

    def parameters(self) -> list[np.ndarray]:
        params: list[np.ndarray] = []
        for layer in self.layers:
            params.extend([layer.fwd.w, layer.fwd.u, layer.fwd.b])
            params.extend([layer.bwd.w, layer.bwd.u, layer.bwd.b])
        params.extend([self.dense1_w, self.dense1_b, self.dense2_w, self.dense2_b])
        return params

    def parameter_names(self) -> list[str]:
        names: list[str] = []
        for i in range(len(self.layers)):
            for direction in ("fwd", "bwd"):
                for part in ("w", "u", "b"):
                    names.append(f"layer{i + 1}.{direction}.{part}")
        names.extend(["dense1.w", "dense1.b", "dense2.w", "dense2.b"])
        return names

    # --- forward / backward -----------------------------------------------

    def _check_windows(self, windows: np.ndarray) -> np.ndarray:
        x = np.asarray(windows, dtype=float)
        if x.ndim == 1:
            x = x[None, :]
        if x.ndim == 2:
            x = x[:, :, None]
        if x.ndim != 3 or x.shape[1] != self.config.window_size or x.shape[2] != self.config.input_size:
            raise ShapeError(
                f"expected windows of shape (*, {self.config.window_size}, {self.config.input_size}), "
                f"got {np.asarray(windows).shape}"
            )
        return x

    def forward(self, windows: np.ndarray, train: bool = False, dropout_rng=None):
        """Predictions for a batch of windows. In training mode also returns
        the cache needed by backward(); dropout applies only between recurrent
        layers and only when training."""
        x = self._check_windows(windows)
        rate = self.config.dropout_rate
        caches, masks = [], []
        for li, layer in enumerate(self.layers):
            x, cache = layer.forward(x, keep_cache=train)
            caches.append(cache)
            if li < len(self.layers) - 1:
                if train and rate > 0.0:
                    if dropout_rng is None:
                        raise ConfigError("training forward with dropout needs an rng")
                    mask = (dropout_rng.random(x.shape) >= rate) / (1.0 - rate)
                    x = x * mask
                    masks.append(mask)
                else:
                    masks.append(None)
        last = x[:, -1, :]
        z1 = last @ self.dense1_w + self.dense1_b
        r1 = np.maximum(z1, 0.0)
        preds = (r1 @ self.dense2_w + self.dense2_b).ravel()
        if not train:
            return preds
        return preds, (caches, masks, last, z1, r1)

    def backward(self, cache, dpreds: np.ndarray) -> list[np.ndarray]:
        """Gradients in parameters() order, given d(loss)/d(predictions)."""
        caches, masks, last, z1, r1 = cache
        dpreds = dpreds[:, None]
        dw2 = r1.T @ dpreds
        db2 = dpreds.sum(axis=0)
        dr1 = dpreds @ self.dense2_w.T
        dz1 = dr1 * (z1 > 0.0)
        dw1 = last.T @ dz1
        db1 = dz1.sum(axis=0)
        dlast = dz1 @ self.dense1_w.T

        batch, steps = dlast.shape[0], self.config.window_size
        grad = np.zeros((batch, steps, dlast.shape[1]))
        grad[:, -1, :] = dlast
        layer_grads: list[list[np.ndarray]] = [None] * len(self.layers)
        for li in range(len(self.layers) - 1, -1, -1):
            grad, layer_grads[li] = self.layers[li].backward(grad, caches[li])
            if li > 0 and masks[li - 1] is not None:
                grad = grad * masks[li - 1]
        flat: list[np.ndarray] = []
        for g in layer_grads:
            flat.extend(g)
        flat.extend([dw1, db1, dw2, db2])
        return flat

    def predict(self, windows: np.ndarray, chunk_size: int = 512) -> np.ndarray:
        """Deterministic inference (dropout never applies)."""
        x = self._check_windows(windows)
        outputs = [self.forward(x[i : i + chunk_size]) for i in range(0, len(x), chunk_size)]
        return np.concatenate(outputs) if outputs else np.empty(0)


# --- optimizer --------------------------------------------------------------


@dataclass(frozen=True)
class AdamParams:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ConfigError("learning rate must be > 0")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ConfigError("Adam betas must be in [0, 1)")


class Adam:
    """Adaptive-moment optimizer with bias correction; updates in place."""

    def __init__(self, params: list[np.ndarray], hyper: AdamParams = AdamParams()):
        self.params = params
        self.hyper = hyper
        self.step_count = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, grads: list[np.ndarray]) -> None:
        if len(grads) != len(self.params):
            raise ShapeError(f"expected {len(self.params)} gradients, got {len(grads)}")
        h = self.hyper
        self.step_count += 1
        t = self.step_count
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= h.beta1
            m += (1.0 - h.beta1) * g
            v *= h.beta2
            v += (1.0 - h.beta2) * g * g
            m_hat = m / (1.0 - h.beta1**t)
            v_hat = v / (1.0 - h.beta2**t)
            p -= h.learning_rate * m_hat / (np.sqrt(v_hat) + h.epsilon)


# --- training ---------------------------------------------------------------


@dataclass
class TrainingReport:
    """Per-epoch losses in scaled space."""

    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)


def train(
    model: BiLstmModel,
    dataset: WindowedDataset,
    epochs: int,
    split: tuple[float, float] = (0.8, 0.1),
    adam: AdamParams = AdamParams(),
    seed: int = 0,
    batch_size: int = 32,
) -> TrainingReport:
    """Train with Adam on MSE; deterministic given the seed.

    The dataset is split sequentially into a training segment (first fraction)
    and a validation segment (following fraction); only training batches are
    shuffled.
    """
    if epochs < 1:
        raise ConfigError(f"epochs must be >= 1, got {epochs} (untrained model)")
    f_train, f_val = split
    if not (f_train > 0 and f_val >= 0 and f_train + f_val <= 1.0 + 1e-12):
        raise ConfigError(f"bad split fractions {split}: need train > 0, val >= 0, sum <= 1")
    if batch_size < 1:
        raise ConfigError("batch_size must be >= 1")
    n = len(dataset)
    n_train = int(n * f_train)
    n_val = int(n * f_val)
    if n_train < 1:
        raise InsufficientDataError("no training windows after split")
    x_train, y_train = dataset.inputs[:n_train], dataset.targets[:n_train]
    x_val, y_val = (
        dataset.inputs[n_train : n_train + n_val],
        dataset.targets[n_train : n_train + n_val],
    )

    rng = np.random.default_rng(seed)
    optimizer = Adam(model.parameters(), adam)
    report = TrainingReport()
    for epoch in range(1, epochs + 1):
        order = rng.permutation(n_train)
        squared_error_sum = 0.0
        for start in range(0, n_train, batch_size):
            batch = order[start : start + batch_size]
            preds, cache = model.forward(x_train[batch], train=True, dropout_rng=rng)
            err = preds - y_train[batch]
            squared_error_sum += float(err @ err)
            dpreds = 2.0 * err / len(batch)
            optimizer.step(model.backward(cache, dpreds))
        train_loss = squared_error_sum / n_train
        if not math.isfinite(train_loss):
            raise DivergenceError(f"non-finite training loss at epoch {epoch}")
        report.train_loss.append(train_loss)
        if n_val:
            val_err = model.predict(x_val) - y_val
            val_loss = float(val_err @ val_err) / n_val
            if not math.isfinite(val_loss):
                raise DivergenceError(f"non-finite validation loss at epoch {epoch}")
            report.val_loss.append(val_loss)
    return report


def predict_series(model: BiLstmModel, scaler: MinMaxScaler, series) -> np.ndarray:
    """Scale, window, run the model, and map predictions back to Mbps.

    Output has length len(series) - window_size.
    """
    scaled = scaler.transform(series)
    dataset = make_windows(scaled, model.config.window_size)
    return scaler.inverse(model.predict(dataset.inputs))
