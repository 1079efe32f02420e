"""Spatiotemporal predictor on the coarsened graph.

A GRU cell whose gate inputs are graph-convolved hypernode latents:
each step applies a two-layer GCN (renormalized adjacency with self
loops) and feeds [gc(X), h] through the usual update/reset/candidate
gates. The final hidden state maps linearly to all requested horizon
steps at once (direct multi-horizon). Training minimizes Huber loss on
the occupancy channel of the decoded predictions; gradients flow
through the frozen decoders but never update them.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .arrayio import read_arrays, write_arrays
from .errors import ConfigError, NumericError, ShapeError
from .parking import F_LOW, OCCUPANCY_CHANNEL
from .tcnae import window_starts
from . import tensor as tz
from .tensor import Tensor


@dataclass
class TgcnConfig:
    hidden: int = 100
    gcn_hidden: int = 32
    window: int = 12
    horizon: int = 1
    learning_rate: float = 1e-5
    weight_decay: float = 1e-4
    batch_size: int = 64
    patience: int = 200
    max_epochs: int = 200
    huber_theta: float = 1.0
    clamp_output: bool = False

    def __post_init__(self):
        if self.horizon not in (1, 2, 4):
            raise ConfigError(f"horizon must be 1, 2, or 4, got {self.horizon}")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")


def normalize_adjacency(a_c: np.ndarray) -> np.ndarray:
    """Renormalization trick: D~^{-1/2} (A + I) D~^{-1/2}."""
    if np.any(a_c < 0):
        raise ConfigError("coarse adjacency must be nonnegative")
    a_tilde = a_c + np.eye(a_c.shape[0])
    d_inv_sqrt = 1.0 / np.sqrt(a_tilde.sum(axis=1))
    return a_tilde * d_inv_sqrt[:, None] * d_inv_sqrt[None, :]


def init_params(latent_channels: int, n_out_channels: int, config: TgcnConfig,
                rng: np.random.Generator) -> dict[str, Tensor]:
    g = config.gcn_hidden
    h = config.hidden
    gate_in = g + h

    def glorot(shape):
        scale = np.sqrt(2.0 / (shape[0] + shape[1]))
        return Tensor(rng.normal(0.0, scale, size=shape), requires_grad=True)

    return {
        "gc_w0": glorot((latent_channels, g)),
        "gc_w1": glorot((g, g)),
        "w_u": glorot((gate_in, h)),
        "b_u": Tensor(np.zeros(h), requires_grad=True),
        "w_r": glorot((gate_in, h)),
        "b_r": Tensor(np.zeros(h), requires_grad=True),
        "w_c": glorot((gate_in, h)),
        "b_c": Tensor(np.zeros(h), requires_grad=True),
        "w_y": glorot((h, config.horizon * n_out_channels)),
        "b_y": Tensor(np.zeros(config.horizon * n_out_channels), requires_grad=True),
    }


def graph_conv(x: Tensor, a_hat: Tensor, w0: Tensor, w1: Tensor) -> Tensor:
    """Two-layer GCN: A_hat relu(A_hat X W0) W1."""
    inner = tz.relu(tz.matmul(tz.matmul(a_hat, x), w0))
    return tz.matmul(tz.matmul(a_hat, inner), w1)


def gru_step(g_t: Tensor, h_prev: Tensor, params: dict[str, Tensor]) -> Tensor:
    cat = tz.concat_last_axis([g_t, h_prev])
    u = tz.sigmoid(tz.matmul(cat, params["w_u"]) + params["b_u"])
    r = tz.sigmoid(tz.matmul(cat, params["w_r"]) + params["b_r"])
    cat_c = tz.concat_last_axis([g_t, r * h_prev])
    c = tz.tanh(tz.matmul(cat_c, params["w_c"]) + params["b_c"])
    one = Tensor(1.0)
    return u * h_prev + (one - u) * c


def _forward_hidden(x: Tensor, a_hat: Tensor, params: dict[str, Tensor],
                    hidden: int) -> Tensor:
    """Run the GRU over a latent window (B, T, N_c, F) -> (B, N_c, H)."""
    b, t, n_c, f = x.shape
    h = Tensor(np.zeros((b, n_c, hidden)))
    for step in range(t):
        x_t = tz.reshape(tz.narrow(x, 1, step, step + 1), (b, n_c, f))
        g_t = graph_conv(x_t, a_hat, params["gc_w0"], params["gc_w1"])
        h = gru_step(g_t, h, params)
    return h


def forward_latent_predictions(params: dict[str, Tensor], x: Tensor, a_hat: Tensor,
                               config: TgcnConfig) -> Tensor:
    """(B, T=window, N_c, F) latents -> (B, N_c, horizon * F_out) outputs."""
    if x.shape[1] != config.window:
        raise ShapeError(f"window length {x.shape[1]} != configured {config.window}")
    h = _forward_hidden(x, a_hat, params, config.hidden)
    return tz.matmul(h, params["w_y"]) + params["b_y"]


def predict(params: dict[str, Tensor], window_latents: np.ndarray, a_c: np.ndarray,
            config: TgcnConfig) -> np.ndarray:
    """Forecast (horizon, N_c, F_out) from one latent window of length 12."""
    if window_latents.ndim != 3 or window_latents.shape[0] != config.window:
        raise ShapeError(f"expected ({config.window}, N_c, F) window, got {window_latents.shape}")
    frozen = {k: Tensor(v.data) for k, v in params.items()}
    x = Tensor(window_latents[None])
    a_hat = Tensor(normalize_adjacency(a_c))
    out = forward_latent_predictions(frozen, x, a_hat, config).data[0]
    n_c = out.shape[0]
    f_out = out.shape[1] // config.horizon
    return out.reshape(n_c, config.horizon, f_out).transpose(1, 0, 2)


@dataclass
class PredictionHead:
    """Everything needed to turn latent windows into per-lot occupancy."""

    codecs: dict
    index: list[list[int]]
    occupancy_indices: list[np.ndarray] = field(default_factory=list)
    member_order: list[int] = field(default_factory=list)

    def __post_init__(self):
        self.occupancy_indices = []
        self.member_order = []
        for members in self.index:
            mp = sorted(members)
            self.member_order.extend(mp)
            self.occupancy_indices.append(
                np.array([OCCUPANCY_CHANNEL + F_LOW * i for i in range(len(mp))], dtype=np.intp))

    def decode_occupancy(self, out: Tensor, config: TgcnConfig, clamp: bool) -> Tensor:
        """(B, N_c, horizon * F) latent outputs -> (B, horizon, N) occupancy."""
        b = out.shape[0]
        f_out = out.shape[-1] // config.horizon
        parts = []
        for p in range(len(self.index)):
            z_p = tz.reshape(tz.narrow(out, 1, p, p + 1), (b, config.horizon, f_out))
            decoded = self.codecs[p].decode(z_p, require_trained=True)
            parts.append(tz.take_last_axis(decoded, self.occupancy_indices[p]))
        y_hat = tz.concat_last_axis(parts)
        if clamp:
            y_hat = tz.sigmoid(y_hat)
        return y_hat


def _loss_for_windows(params, latents, q_ordered, starts, a_hat, head, config,
                      theta) -> Tensor:
    window = config.window
    x = Tensor(latents[starts[:, None] + np.arange(window)[None, :]])
    target_steps = starts[:, None] + window + np.arange(config.horizon)[None, :]
    y = Tensor(q_ordered[target_steps])
    out = forward_latent_predictions(params, x, a_hat, config)
    y_hat = head.decode_occupancy(out, config, config.clamp_output)
    return tz.huber_loss(y, y_hat, theta)


def train(params: dict[str, Tensor], codecs: dict, index: list[list[int]],
          a_c: np.ndarray, latents: np.ndarray, q: np.ndarray,
          train_range: range, val_range: range, config: TgcnConfig,
          seed: int) -> tuple[dict[str, Tensor], list[dict]]:
    """Fit the predictor with early stopping on validation Huber loss.

    ``latents`` is the frozen (T, N_c, F) code sequence; ``q`` the raw
    (T, N) occupancy-rate matrix. Returns the best parameters and a log
    of per-epoch train/val losses with wall-clock seconds.
    """
    head = PredictionHead(codecs=codecs, index=index)
    q_ordered = q[:, head.member_order]
    a_hat = Tensor(normalize_adjacency(a_c))
    rng = np.random.default_rng(seed)
    theta = config.huber_theta

    train_starts = window_starts(train_range, config.window, 1, config.horizon)
    val_starts = window_starts(val_range, config.window, 1, config.horizon)
    if train_starts.size == 0:
        raise ConfigError("training split shorter than window + horizon")
    if val_starts.size == 0:
        val_starts = train_starts

    state = tz.AdamState(learning_rate=config.learning_rate, weight_decay=config.weight_decay)
    log: list[dict] = []
    best_val = np.inf
    best_params = {k: v.data for k, v in params.items()}
    best_epoch = 0
    for epoch in range(config.max_epochs):
        tic = time.perf_counter()
        order = rng.permutation(train_starts.size)
        train_losses = []
        for lo in range(0, train_starts.size, config.batch_size):
            starts = train_starts[order[lo:lo + config.batch_size]]
            loss = _loss_for_windows(params, latents, q_ordered, starts, a_hat, head, config, theta)
            if not np.isfinite(loss.data):
                raise NumericError(
                    f"predictor training hit a non-finite loss at epoch {epoch}; "
                    f"last good checkpoint is epoch {best_epoch} (val={best_val})")
            tz.backward(loss)
            grads = {k: p.grad for k, p in params.items() if p.grad is not None}
            params, state = tz.adam_step(params, grads, state)
            train_losses.append(loss.item())
        val_loss = evaluate_loss(params, latents, q_ordered, val_starts, a_hat, head, config)
        seconds = time.perf_counter() - tic
        log.append({"epoch": epoch, "train_loss": float(np.mean(train_losses)),
                    "val_loss": val_loss, "seconds": seconds})
        if val_loss < best_val - 1e-12:
            best_val = val_loss
            best_params = {k: v.data for k, v in params.items()}
            best_epoch = epoch
        elif epoch - best_epoch >= config.patience:
            break
    final = {k: Tensor(v, requires_grad=True) for k, v in best_params.items()}
    return final, log


def evaluate_loss(params, latents, q_ordered, starts, a_hat, head, config) -> float:
    frozen = {k: Tensor(v.data) for k, v in params.items()}
    total = 0.0
    count = 0
    for lo in range(0, starts.size, config.batch_size):
        chunk = starts[lo:lo + config.batch_size]
        loss = _loss_for_windows(frozen, latents, q_ordered, chunk, a_hat, head, config,
                                 config.huber_theta)
        total += loss.item() * chunk.size
        count += chunk.size
    return total / max(count, 1)


def predict_occupancy(params, latents, starts: np.ndarray, a_c: np.ndarray,
                      codecs: dict, index: list[list[int]], config: TgcnConfig,
                      batch_size: int = 256) -> np.ndarray:
    """Decoded occupancy forecasts (n_windows, horizon, N) in member order."""
    head = PredictionHead(codecs=codecs, index=index)
    a_hat = Tensor(normalize_adjacency(a_c))
    frozen = {k: Tensor(v.data) for k, v in params.items()}
    chunks = []
    for lo in range(0, starts.size, batch_size):
        chunk = starts[lo:lo + batch_size]
        x = Tensor(latents[chunk[:, None] + np.arange(config.window)[None, :]])
        out = forward_latent_predictions(frozen, x, a_hat, config)
        chunks.append(head.decode_occupancy(out, config, config.clamp_output).data)
    preds = np.concatenate(chunks, axis=0)
    inverse = np.argsort(np.array(head.member_order))
    return preds[:, :, inverse]


def save_params(params: dict[str, Tensor], path) -> None:
    write_arrays(path, {k: v.data for k, v in params.items()})


def load_params(path) -> dict[str, Tensor]:
    return {k: Tensor(v, requires_grad=True) for k, v in read_arrays(path).items()}
