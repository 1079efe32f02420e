"""Per-hypernode temporal-convolutional autoencoders.

Each hypernode gets a symmetric encoder/decoder pair of residual blocks
built from dilated causal convolutions (dilations 1, 2, 4, 8, 16). The
encoder compresses the member-concatenated channels down to the fixed
latent width (one feature block, so every hypernode presents the same
width to the predictor); the decoder mirrors the stack back up to
|M_p| * F channels. A block is conv -> per-channel affine -> relu ->
dropout -> conv, added to a (projected) skip path.

Codecs are pretrained independently per hypernode on sliding windows of
the training split and frozen afterwards; training different hypernodes
is embarrassingly parallel, with per-codec seeds derived as
global_seed XOR hypernode_id so results do not depend on scheduling.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .arrayio import read_arrays, write_arrays
from .errors import ConfigError, DataValidationError, NumericError, ShapeError
from .parking import F_LOW
from . import tensor as tz
from .tensor import Tensor


@dataclass
class ResidualBlockSpec:
    kernel_size: int
    dilation: int
    in_channels: int
    out_channels: int
    dropout: float


@dataclass
class CodecConfig:
    dilations: tuple[int, ...] = (1, 2, 4, 8, 16)
    filters: int = 20
    kernel_size: int = 3
    dropout: float = 0.1
    latent_channels: int = F_LOW
    window: int = 12
    window_stride: int = 1
    learning_rate: float = 1e-4
    weight_decay: float = 1e-4
    batch_size: int = 64
    patience: int = 100
    max_epochs: int = 150

    def __post_init__(self):
        if any(d < 1 for d in self.dilations):
            raise ConfigError(f"dilations must be positive, got {self.dilations}")
        if self.kernel_size < 1 or self.filters < 1 or self.window < 1:
            raise ConfigError("kernel_size, filters, and window must be positive")


def _block_specs(channels: list[int], dilations, kernel_size, dropout) -> list[ResidualBlockSpec]:
    return [ResidualBlockSpec(kernel_size, d, channels[i], channels[i + 1], dropout)
            for i, d in enumerate(dilations)]


def encoder_specs(member_count: int, cfg: CodecConfig) -> list[ResidualBlockSpec]:
    width = member_count * F_LOW
    channels = [width] + [cfg.filters] * (len(cfg.dilations) - 1) + [cfg.latent_channels]
    return _block_specs(channels, cfg.dilations, cfg.kernel_size, cfg.dropout)


def decoder_specs(member_count: int, cfg: CodecConfig) -> list[ResidualBlockSpec]:
    width = member_count * F_LOW
    channels = [cfg.latent_channels] + [cfg.filters] * (len(cfg.dilations) - 1) + [width]
    return _block_specs(channels, tuple(reversed(cfg.dilations)), cfg.kernel_size, cfg.dropout)


def _init_block(spec: ResidualBlockSpec, prefix: str, rng: np.random.Generator) -> dict[str, Tensor]:
    """Block parameters. Filter taps past the first start at zero: taps whose
    offset exceeds the training window never receive gradient, and zero keeps
    them inert when the codec later runs over full-length series."""
    k, cin, cout = spec.kernel_size, spec.in_channels, spec.out_channels
    params: dict[str, Tensor] = {}

    def conv_weight(c_in, c_out):
        w = np.zeros((k, c_in, c_out))
        w[0] = rng.normal(0.0, np.sqrt(2.0 / c_in), size=(c_in, c_out))
        return w

    params[f"{prefix}_conv1_w"] = Tensor(conv_weight(cin, cout), requires_grad=True)
    params[f"{prefix}_conv1_b"] = Tensor(np.zeros(cout), requires_grad=True)
    params[f"{prefix}_norm_g"] = Tensor(np.ones(cout), requires_grad=True)
    params[f"{prefix}_norm_b"] = Tensor(np.zeros(cout), requires_grad=True)
    params[f"{prefix}_conv2_w"] = Tensor(conv_weight(cout, cout), requires_grad=True)
    params[f"{prefix}_conv2_b"] = Tensor(np.zeros(cout), requires_grad=True)
    if cin != cout:
        skip = rng.normal(0.0, np.sqrt(1.0 / cin), size=(1, cin, cout))
        params[f"{prefix}_skip_w"] = Tensor(skip, requires_grad=True)
    return params


def _run_block(params: dict[str, Tensor], prefix: str, spec: ResidualBlockSpec, x: Tensor,
               rng: np.random.Generator | None) -> Tensor:
    h = tz.causal_conv1d(x, params[f"{prefix}_conv1_w"], spec.dilation) + params[f"{prefix}_conv1_b"]
    h = h * params[f"{prefix}_norm_g"] + params[f"{prefix}_norm_b"]
    h = tz.relu(h)
    if rng is not None and spec.dropout > 0:
        h = tz.dropout(h, spec.dropout, rng)
    h = tz.causal_conv1d(h, params[f"{prefix}_conv2_w"], spec.dilation) + params[f"{prefix}_conv2_b"]
    skip_key = f"{prefix}_skip_w"
    skip = tz.causal_conv1d(x, params[skip_key], 1) if skip_key in params else x
    return h + skip


class HypernodeCodec:
    """Encoder/decoder parameter bundle for one hypernode.

    ``center`` holds per-channel means of the training windows; encode
    subtracts it and decode adds it back, so the conv stacks only model
    the dynamics around the mean. It starts at zero (fresh codecs are
    exact zero-to-zero maps) and is fixed during pretraining.
    """

    def __init__(self, hypernode_id: int, member_count: int, config: CodecConfig,
                 rng: np.random.Generator | None = None):
        self.hypernode_id = hypernode_id
        self.member_count = member_count
        self.config = config
        self.enc_specs = encoder_specs(member_count, config)
        self.dec_specs = decoder_specs(member_count, config)
        self.trained = False
        self.center = np.zeros(member_count * F_LOW)
        if rng is None:
            rng = np.random.default_rng(0)
        self.params: dict[str, Tensor] = {}
        for b, spec in enumerate(self.enc_specs):
            self.params.update(_init_block(spec, f"enc{b}", rng))
        for b, spec in enumerate(self.dec_specs):
            self.params.update(_init_block(spec, f"dec{b}", rng))

    @property
    def width(self) -> int:
        return self.member_count * F_LOW

    @property
    def latent_channels(self) -> int:
        return self.config.latent_channels

    def _check_width(self, x: Tensor, expected: int, what: str):
        if x.shape[-1] != expected:
            raise ShapeError(f"hypernode {self.hypernode_id}: {what} expects {expected} channels, got {x.shape[-1]}")

    def encode(self, x, rng: np.random.Generator | None = None) -> Tensor:
        x = x if isinstance(x, Tensor) else Tensor(x)
        self._check_width(x, self.width, "encode")
        if self.center.any():
            x = x - Tensor(self.center)
        for b, spec in enumerate(self.enc_specs):
            x = _run_block(self.params, f"enc{b}", spec, x, rng)
        return x

    def decode(self, z, rng: np.random.Generator | None = None,
               require_trained: bool = False) -> Tensor:
        if require_trained and not self.trained:
            raise NumericError(f"hypernode {self.hypernode_id}: decode requested on an untrained codec")
        z = z if isinstance(z, Tensor) else Tensor(z)
        self._check_width(z, self.latent_channels, "decode")
        for b, spec in enumerate(self.dec_specs):
            z = _run_block(self.params, f"dec{b}", spec, z, rng)
        if self.center.any():
            z = z + Tensor(self.center)
        return z

    def reconstruct(self, x, rng: np.random.Generator | None = None) -> Tensor:
        return self.decode(self.encode(x, rng), rng)

    def detach(self) -> None:
        """Freeze: drop gradient tracking from every parameter."""
        self.params = {k: Tensor(v.data) for k, v in self.params.items()}
        self.trained = True


class PassthroughCodec:
    """Ablation codec: zero-pad member channels to a uniform width, no learning."""

    def __init__(self, hypernode_id: int, member_count: int, padded_width: int):
        self.hypernode_id = hypernode_id
        self.member_count = member_count
        self.padded_width = padded_width
        self.trained = True
        self.params: dict[str, Tensor] = {}

    @property
    def width(self) -> int:
        return self.member_count * F_LOW

    @property
    def latent_channels(self) -> int:
        return self.padded_width

    def encode(self, x, rng=None) -> Tensor:
        x = x if isinstance(x, Tensor) else Tensor(x)
        pad = self.padded_width - x.shape[-1]
        if pad < 0:
            raise ShapeError(f"hypernode {self.hypernode_id}: width {x.shape[-1]} exceeds pad target {self.padded_width}")
        if pad == 0:
            return x
        zeros = Tensor(np.zeros(x.shape[:-1] + (pad,)))
        return tz.concat_last_axis([x, zeros])

    def decode(self, z, rng=None, require_trained: bool = False) -> Tensor:
        z = z if isinstance(z, Tensor) else Tensor(z)
        self._check(z)
        return tz.narrow(z, -1, 0, self.width)

    def _check(self, z):
        if z.shape[-1] != self.padded_width:
            raise ShapeError(f"hypernode {self.hypernode_id}: decode expects {self.padded_width} channels")

    def detach(self) -> None:
        pass


def window_starts(split: range, window: int, stride: int, horizon: int = 0) -> np.ndarray:
    """Start indices whose window (+ horizon) fits inside the split."""
    last = split.stop - window - horizon
    if last < split.start:
        return np.array([], dtype=np.int64)
    return np.arange(split.start, last + 1, stride, dtype=np.int64)


def _extract_windows(series: np.ndarray, starts: np.ndarray, window: int) -> np.ndarray:
    return series[starts[:, None] + np.arange(window)[None, :]]


def train_codec(hypernode_id: int, series: np.ndarray, train_range: range, val_range: range,
                config: CodecConfig, seed: int) -> HypernodeCodec:
    """Pretrain one codec on reconstruction of training-split windows."""
    member_count = series.shape[1] // F_LOW
    rng = np.random.default_rng(seed)
    codec = HypernodeCodec(hypernode_id, member_count, config, rng)
    starts = window_starts(train_range, config.window, config.window_stride)
    if starts.size == 0:
        raise DataValidationError(f"hypernode {hypernode_id}: training split shorter than one window")
    val_starts = window_starts(val_range, config.window, config.window_stride)
    if val_starts.size == 0:
        val_starts = starts
    windows = _extract_windows(series, starts, config.window)
    val_windows = _extract_windows(series, val_starts, config.window)
    codec.center = windows.reshape(-1, series.shape[1]).mean(axis=0)

    state = tz.AdamState(learning_rate=config.learning_rate, weight_decay=config.weight_decay)
    params = codec.params
    best_val = np.inf
    best_params = None
    best_epoch = 0
    for epoch in range(config.max_epochs):
        order = rng.permutation(starts.size)
        for lo in range(0, starts.size, config.batch_size):
            idx = order[lo:lo + config.batch_size]
            codec.params = params
            x = Tensor(windows[idx])
            x_hat = codec.reconstruct(x, rng)
            loss = tz.mse_loss(x_hat, x)
            if not np.isfinite(loss.data):
                raise NumericError(f"codec for hypernode {hypernode_id} diverged at epoch {epoch}")
            tz.backward(loss)
            grads = {k: p.grad for k, p in params.items() if p.grad is not None}
            params, state = tz.adam_step(params, grads, state)
        codec.params = params
        val = tz.mse_loss(codec.reconstruct(Tensor(val_windows)), Tensor(val_windows)).item()
        if val < best_val - 1e-12:
            best_val = val
            best_params = {k: v.data for k, v in params.items()}
            best_epoch = epoch
        elif epoch - best_epoch >= config.patience:
            break
    if best_params is not None:
        codec.params = {k: Tensor(v.copy()) for k, v in best_params.items()}
    codec.trained = True
    return codec


def _train_codec_task(args):
    hypernode_id, series, train_tuple, val_tuple, config, seed = args
    codec = train_codec(hypernode_id, series, range(*train_tuple), range(*val_tuple), config, seed)
    return hypernode_id, codec.member_count, {k: v.data for k, v in codec.params.items()}, codec.center


def worker_count(n_tasks: int) -> int:
    env = os.environ.get("PARKCOARSE_THREADS")
    if env:
        cap = max(1, int(env))
    else:
        cap = os.cpu_count() or 1
    return max(1, min(cap, n_tasks))


def pretrain_codecs(index: list[list[int]], x_low_values: np.ndarray, train_range: range,
                    val_range: range, config: CodecConfig, seed: int,
                    parallel: bool = True) -> dict[int, HypernodeCodec]:
    """Train one codec per hypernode (process-parallel, order-independent)."""
    from .coarsen import hypernode_features

    features = hypernode_features(x_low_values, index)
    tasks = [(p, features[p], (train_range.start, train_range.stop),
              (val_range.start, val_range.stop), config, seed ^ p)
             for p in range(len(index))]
    codecs: dict[int, HypernodeCodec] = {}
    workers = worker_count(len(tasks)) if parallel else 1
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_train_codec_task, tasks, chunksize=1))
    else:
        results = [_train_codec_task(t) for t in tasks]
    for hypernode_id, member_count, arrays, center in results:
        codec = HypernodeCodec(hypernode_id, member_count, config)
        codec.params = {k: Tensor(v) for k, v in arrays.items()}
        codec.center = center
        codec.trained = True
        codecs[hypernode_id] = codec
    return codecs


def encode_all(codecs: dict[int, HypernodeCodec], index: list[list[int]],
               x_low_values: np.ndarray) -> np.ndarray:
    """Latent sequence (T, N_c, latent) from one causal pass per hypernode."""
    from .coarsen import hypernode_features

    features = hypernode_features(x_low_values, index)
    t = x_low_values.shape[0]
    n_c = len(index)
    if set(codecs) != set(range(n_c)):
        missing = sorted(set(range(n_c)) - set(codecs))
        raise ConfigError(f"missing codecs for hypernodes {missing}")
    latent_width = codecs[0].latent_channels
    out = np.empty((t, n_c, latent_width))
    for p in range(n_c):
        codec = codecs[p]
        if not codec.trained:
            raise NumericError(f"hypernode {p}: encode_all requires a trained codec")
        if codec.latent_channels != latent_width:
            raise ShapeError("codecs disagree on latent width")
        out[:, p, :] = codec.encode(features[p]).data
    return out


def decode_all(codecs: dict, index: list[list[int]], latents: np.ndarray) -> np.ndarray:
    """Reassemble (T, N, F_LOW) lot features from (T, N_c, latent) codes."""
    t, n_c, _ = latents.shape
    n = sum(len(m) for m in index)
    out = np.empty((t, n, F_LOW))
    for p, members in enumerate(index):
        mp = sorted(members)
        decoded = codecs[p].decode(latents[:, p, :], require_trained=True).data
        out[:, mp, :] = decoded.reshape(t, len(mp), F_LOW)
    return out


# ---------------------------------------------------------------------------
# checkpoints

_META_KEYS = ("hypernode_id", "member_count", "trained", "filters", "kernel_size",
              "latent_channels", "dropout", "padded_width", "kind")
_KIND_TCN, _KIND_PASSTHROUGH = 0.0, 1.0


def save_codec(codec, path) -> None:
    arrays = {k: v.data for k, v in codec.params.items()}
    if isinstance(codec, PassthroughCodec):
        meta = [codec.hypernode_id, codec.member_count, 1.0, 0.0, 0.0,
                codec.padded_width, 0.0, codec.padded_width, _KIND_PASSTHROUGH]
        arrays["__meta__"] = np.array(meta)
        arrays["__dilations__"] = np.array([])
    else:
        cfg = codec.config
        meta = [codec.hypernode_id, codec.member_count, float(codec.trained), cfg.filters,
                cfg.kernel_size, cfg.latent_channels, cfg.dropout, 0.0, _KIND_TCN]
        arrays["__meta__"] = np.array(meta)
        arrays["__dilations__"] = np.array(cfg.dilations, dtype=np.float64)
        arrays["__center__"] = codec.center
    write_arrays(path, arrays)


def load_codec(path):
    arrays = read_arrays(path)
    meta = dict(zip(_META_KEYS, arrays.pop("__meta__")))
    dilations = tuple(int(d) for d in arrays.pop("__dilations__"))
    if meta["kind"] == _KIND_PASSTHROUGH:
        return PassthroughCodec(int(meta["hypernode_id"]), int(meta["member_count"]),
                                int(meta["padded_width"]))
    config = CodecConfig(dilations=dilations, filters=int(meta["filters"]),
                         kernel_size=int(meta["kernel_size"]),
                         latent_channels=int(meta["latent_channels"]), dropout=float(meta["dropout"]))
    codec = HypernodeCodec(int(meta["hypernode_id"]), int(meta["member_count"]), config)
    codec.center = arrays.pop("__center__")
    codec.params = {k: Tensor(v) for k, v in arrays.items()}
    codec.trained = bool(meta["trained"])
    return codec


def save_codecs(codecs: dict, out_dir) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {}
    for p in sorted(codecs):
        name = f"codec_{p:05d}.pkc"
        save_codec(codecs[p], out_dir / name)
        manifest[str(p)] = name
    manifest_path = out_dir / "manifest.json"
    manifest_path.write_text(json.dumps({"hypernodes": manifest}, indent=2, sort_keys=True) + "\n")
    return manifest_path


def load_codecs(out_dir) -> dict:
    out_dir = Path(out_dir)
    manifest = json.loads((out_dir / "manifest.json").read_text())
    return {int(p): load_codec(out_dir / name) for p, name in manifest["hypernodes"].items()}
