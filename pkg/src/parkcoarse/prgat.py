"""Service-capacity-aware attention adjacency.

Two ingredients are blended into one row-stochastic adjacency per time
step. The transfer matrix captures where a driver diverts when lot i is
full: it keeps q_i on the diagonal and w_ij * (1 - q_j) * PR_i off the
diagonal, so a filling destination j attracts less flow. The attention
matrix is a learned masked softmax over each lot's spatial neighborhood
using the low-dimensional features. Their sum is softmaxed row-wise to
give the combined adjacency handed to coarsening and prediction.

The attention parameters are pretrained to reconstruct the feature
tensor through the combined adjacency (squared-error objective averaged
over time steps), then frozen.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass

import numpy as np

from .arrayio import format_float
from .errors import NumericError, ShapeError
from .parking import DistanceGraph, normalize_rank
from . import tensor as tz
from .tensor import Tensor


@dataclass
class TransferMatrix:
    values: np.ndarray
    step: int


@dataclass
class CombinedAdjacency:
    values: np.ndarray
    step: int


@dataclass
class AttentionParams:
    """Per-head weight matrices W (F_re x F_low) and score vectors a (2*F_re)."""

    weights: list[Tensor]
    scores: list[Tensor]

    @property
    def head_count(self) -> int:
        return len(self.weights)

    @property
    def f_re(self) -> int:
        return self.weights[0].shape[0]

    def as_param_dict(self) -> dict[str, Tensor]:
        out = {}
        for h in range(self.head_count):
            out[f"w{h}"] = self.weights[h]
            out[f"a{h}"] = self.scores[h]
        return out

    @classmethod
    def from_param_dict(cls, params: dict[str, Tensor]) -> "AttentionParams":
        heads = sum(1 for k in params if k.startswith("w"))
        return cls(weights=[params[f"w{h}"] for h in range(heads)],
                   scores=[params[f"a{h}"] for h in range(heads)])

    def detached(self) -> "AttentionParams":
        return AttentionParams(
            weights=[Tensor(w.data) for w in self.weights],
            scores=[Tensor(a.data) for a in self.scores],
        )


@dataclass
class PretrainConfig:
    heads: int = 1
    learning_rate: float = 1e-4
    weight_decay: float = 1e-4
    batch_size: int = 64
    patience: int = 100
    max_epochs: int = 300
    seed: int = 0
    include_transfer: bool = True  # False gives the plain-attention ablation


def init_params(f_low: int, heads: int, rng: np.random.Generator) -> AttentionParams:
    # F_re = F_low so the reconstruction objective is well-typed.
    scale = np.sqrt(2.0 / (2 * f_low))
    weights = [Tensor(rng.normal(0.0, scale, size=(f_low, f_low)), requires_grad=True)
               for _ in range(heads)]
    scores = [Tensor(rng.normal(0.0, scale, size=(2 * f_low, 1)), requires_grad=True)
              for _ in range(heads)]
    return AttentionParams(weights=weights, scores=scores)


def transfer_matrix(weights: np.ndarray, q: np.ndarray, pr_norm: np.ndarray,
                    step: int = 0) -> TransferMatrix:
    """Diversion probabilities at one step; zero where no spatial edge exists."""
    n = weights.shape[0]
    if weights.shape != (n, n) or q.shape != (n,) or pr_norm.shape != (n,):
        raise ShapeError(f"inconsistent shapes: weights {weights.shape}, q {q.shape}, PR {pr_norm.shape}")
    values = weights * (1.0 - q)[None, :] * pr_norm[:, None]
    np.fill_diagonal(values, q)
    return TransferMatrix(values=values, step=step)


def _transfer_batch(weights: np.ndarray, q_batch: np.ndarray, pr_norm: np.ndarray) -> np.ndarray:
    """(B, N, N) transfer matrices for a batch of occupancy snapshots."""
    vals = weights[None, :, :] * (1.0 - q_batch)[:, None, :] * pr_norm[None, :, None]
    b, n = q_batch.shape
    idx = np.arange(n)
    vals[:, idx, idx] = q_batch
    return vals


def _head_logits(x: Tensor, w: Tensor, a: Tensor) -> tuple[Tensor, Tensor]:
    """Per-head projected features and raw pairwise scores e_ij."""
    n = x.shape[-2]
    xw = tz.matmul(x, tz.swap_last_axes(w) if w.ndim == 2 else w)  # (..., N, F_re)
    f_re = w.shape[0]
    a_src = tz.narrow(a, 0, 0, f_re)
    a_dst = tz.narrow(a, 0, f_re, 2 * f_re)
    src = tz.matmul(xw, a_src)          # (..., N, 1)
    dst = tz.matmul(xw, a_dst)          # (..., N, 1)
    ones_row = Tensor(np.ones((1, n)))
    ones_col = Tensor(np.ones((n, 1)))
    e = tz.matmul(src, ones_row) + tz.matmul(ones_col, tz.swap_last_axes(dst))
    return xw, e


def attention_scores(x_low_t: Tensor | np.ndarray, params: AttentionParams,
                     mask: np.ndarray | DistanceGraph) -> Tensor:
    """Masked attention adjacency for one step (heads averaged)."""
    x = x_low_t if isinstance(x_low_t, Tensor) else Tensor(x_low_t)
    support = mask.support if isinstance(mask, DistanceGraph) else np.asarray(mask, dtype=bool)
    heads = []
    for w, a in zip(params.weights, params.scores):
        _, e = _head_logits(x, w, a)
        heads.append(tz.softmax_rows(tz.leaky_relu(e), support))
    return _average(heads)


def combine(a_trf: TransferMatrix | np.ndarray, a_attn: Tensor | np.ndarray,
            mask: np.ndarray) -> Tensor:
    """Row softmax of the elementwise sum, confined to the masked support."""
    trf = a_trf.values if isinstance(a_trf, TransferMatrix) else np.asarray(a_trf)
    attn = a_attn if isinstance(a_attn, Tensor) else Tensor(a_attn)
    if trf.shape != attn.shape:
        raise ShapeError(f"transfer {trf.shape} and attention {attn.shape} shapes differ")
    return tz.softmax_rows(attn + Tensor(trf), np.asarray(mask, dtype=bool))


def aggregate(x_low_t: Tensor | np.ndarray, a_combined: Tensor | np.ndarray,
              params: AttentionParams) -> Tensor:
    """Feature update: sigmoid of adjacency-weighted projected neighbors."""
    x = x_low_t if isinstance(x_low_t, Tensor) else Tensor(x_low_t)
    adj = a_combined if isinstance(a_combined, Tensor) else Tensor(a_combined)
    parts = [tz.matmul(adj, tz.matmul(x, tz.swap_last_axes(w))) for w in params.weights]
    return tz.sigmoid(_average(parts))


def _average(parts: list[Tensor]) -> Tensor:
    if len(parts) == 1:
        return parts[0]
    total = parts[0]
    for p in parts[1:]:
        total = total + p
    return total * Tensor(1.0 / len(parts))


def _forward_combined(x: Tensor, trf: np.ndarray | None, params: AttentionParams,
                      support: np.ndarray) -> Tensor:
    """Combined adjacency (heads averaged) for a step batch."""
    heads = []
    for w, a in zip(params.weights, params.scores):
        _, e = _head_logits(x, w, a)
        attn = tz.softmax_rows(tz.leaky_relu(e), support)
        logits = attn + Tensor(trf) if trf is not None else attn
        heads.append(tz.softmax_rows(logits, support))
    return _average(heads)


def _forward_reconstruction(x: Tensor, combined: Tensor, params: AttentionParams) -> Tensor:
    parts = [tz.matmul(combined, tz.matmul(x, tz.swap_last_axes(w))) for w in params.weights]
    return tz.sigmoid(_average(parts))


def evaluate_adjacency(params: AttentionParams, x_low_values: np.ndarray,
                       graph: DistanceGraph, step: int,
                       include_transfer: bool = True) -> CombinedAdjacency:
    """Frozen-parameter combined adjacency at one time step."""
    frozen = params.detached()
    support = graph.support
    x_t = Tensor(x_low_values[step])
    trf = None
    if include_transfer:
        pr_norm = normalize_rank(x_low_values[0, :, 0])
        q_t = x_low_values[step, :, 1]
        trf = transfer_matrix(graph.weights, q_t, pr_norm, step=step).values
    combined = _forward_combined(x_t, trf, frozen, support)
    return CombinedAdjacency(values=combined.data.copy(), step=step)


def pretrain(x_low_values: np.ndarray, graph: DistanceGraph, config: PretrainConfig,
             train_steps: range | None = None, val_steps: range | None = None
             ) -> tuple[AttentionParams, CombinedAdjacency, dict]:
    """Fit the attention parameters by feature reconstruction.

    Trains over all steps of the training window with Adam and early
    stopping on the validation reconstruction loss, then returns the
    frozen parameters, the combined adjacency snapshot at the last
    training step, and a history dict (per-epoch losses, stop epoch).
    """
    t_total, n, f_low = x_low_values.shape
    if train_steps is None:
        cut = max(1, int(0.8 * t_total))
        train_steps = range(0, cut)
        val_steps = range(cut, t_total)
    if val_steps is None or len(val_steps) == 0:
        val_steps = train_steps
    rng = np.random.default_rng(config.seed)
    params = init_params(f_low, config.heads, rng)
    state = tz.AdamState(learning_rate=config.learning_rate, weight_decay=config.weight_decay)
    support = graph.support
    pr_norm = normalize_rank(x_low_values[0, :, 0])

    def batch_loss(step_idx: np.ndarray, live: AttentionParams) -> Tensor:
        x = Tensor(x_low_values[step_idx])
        trf = None
        if config.include_transfer:
            trf = _transfer_batch(graph.weights, x_low_values[step_idx][:, :, 1], pr_norm)
        combined = _forward_combined(x, trf, live, support)
        x_re = _forward_reconstruction(x, combined, live)
        diff = x - x_re
        return tz.sum_all(diff * diff) * Tensor(1.0 / len(step_idx))

    train_idx = np.array(list(train_steps))
    val_idx = np.array(list(val_steps))
    best_val = np.inf
    best_params = None
    best_epoch = 0
    history = {"train_loss": [], "val_loss": []}
    param_dict = params.as_param_dict()
    for epoch in range(config.max_epochs):
        order = rng.permutation(len(train_idx))
        epoch_losses = []
        for start in range(0, len(order), config.batch_size):
            batch = train_idx[order[start:start + config.batch_size]]
            live = AttentionParams.from_param_dict(param_dict)
            loss = batch_loss(batch, live)
            if not np.isfinite(loss.data):
                raise NumericError(f"attention pretraining diverged at epoch {epoch} (loss={loss.data})")
            tz.backward(loss)
            grads = {name: p.grad for name, p in live.as_param_dict().items()}
            param_dict, state = tz.adam_step(param_dict, grads, state)
            epoch_losses.append(loss.item())
        frozen = AttentionParams.from_param_dict(param_dict).detached()
        val = batch_loss(val_idx, frozen).item()
        history["train_loss"].append(float(np.mean(epoch_losses)))
        history["val_loss"].append(val)
        if val < best_val - 1e-12:
            best_val = val
            best_params = copy.deepcopy({k: v.data for k, v in param_dict.items()})
            best_epoch = epoch
        elif epoch - best_epoch >= config.patience:
            break
    if best_params is None:
        raise NumericError("attention pretraining produced no finite validation loss")
    final = AttentionParams.from_param_dict(
        {k: Tensor(v, requires_grad=True) for k, v in best_params.items()})
    history["stopped_epoch"] = best_epoch
    history["epochs_run"] = len(history["val_loss"])
    snapshot_step = train_idx[-1]
    snapshot = evaluate_adjacency(final, x_low_values, graph, int(snapshot_step),
                                  include_transfer=config.include_transfer)
    return final, snapshot, history


def export_adjacency(adj: CombinedAdjacency | np.ndarray, path) -> None:
    """Write nonzero entries as 0-based triplet lines ``i j value``."""
    values = adj.values if isinstance(adj, CombinedAdjacency) else np.asarray(adj)
    lines = []
    for i, j in zip(*np.nonzero(values)):
        lines.append(f"{i} {j} {format_float(values[i, j])}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + ("\n" if lines else ""))
