"""Dense float64 tensors with tape-based reverse-mode differentiation.

Everything trainable in the package (attention adjacency, codecs, the
recurrent predictor) is expressed in the operations below. Arrays are
double precision and treated as immutable after construction;
optimization steps produce fresh tensors rather than mutating in place.

Broadcasting is deliberately restricted: two operands are compatible
when their shapes are equal, or when one shape equals a trailing suffix
of the other (scalars included). Anything fancier raises ShapeError.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericError, ShapeError

_UNARY_KINDS = ("sigmoid", "tanh", "leaky_relu", "exp", "negate", "relu")
_BINARY_KINDS = ("add", "sub", "mul", "div")

LEAKY_RELU_SLOPE = 0.2


class Tensor:
    """A dense float64 array plus the bookkeeping for reverse mode.

    Tensors built by operations hold references to their parents and a
    closure computing parent gradients from the output gradient; leaves
    hold only data. ``requires_grad`` marks leaves whose gradient should
    be reported by :func:`backward`.
    """

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_grad_fn")

    def __init__(self, data, requires_grad: bool = False, _parents=(), _grad_fn=None):
        arr = np.asarray(data, dtype=np.float64)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._parents = _parents
        self._grad_fn = _grad_fn

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() requires a scalar tensor, got shape {self.shape}")
        return float(self.data.reshape(()))

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={tuple(self.shape)}{flag})"

    # Operator sugar; all routing goes through the module-level ops.
    def __add__(self, other):
        return apply_binary("add", self, _as_tensor(other))

    def __radd__(self, other):
        return apply_binary("add", _as_tensor(other), self)

    def __sub__(self, other):
        return apply_binary("sub", self, _as_tensor(other))

    def __rsub__(self, other):
        return apply_binary("sub", _as_tensor(other), self)

    def __mul__(self, other):
        return apply_binary("mul", self, _as_tensor(other))

    def __rmul__(self, other):
        return apply_binary("mul", _as_tensor(other), self)

    def __truediv__(self, other):
        return apply_binary("div", self, _as_tensor(other))

    def __matmul__(self, other):
        return matmul(self, _as_tensor(other))

    def __neg__(self):
        return apply_unary("negate", self)


def _as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _make(data: np.ndarray, parents, grad_fn) -> Tensor:
    """Wrap an op result, recording the node only when a parent needs grad."""
    if any(p.requires_grad or p._grad_fn is not None for p in parents):
        return Tensor(data, requires_grad=True, _parents=tuple(parents), _grad_fn=grad_fn)
    return Tensor(data)


def _suffix_broadcastable(a: tuple, b: tuple) -> bool:
    """True when shape b equals a trailing suffix of shape a."""
    if len(b) > len(a):
        return False
    return a[len(a) - len(b):] == b


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a gradient over the leading axes introduced by broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    # Axes of size 1 stretched by numpy matmul broadcasting.
    keep = tuple(i for i, (g, s) in enumerate(zip(grad.shape, shape)) if g != s)
    if keep:
        grad = grad.sum(axis=keep, keepdims=True)
    return grad.reshape(shape)


class Tape:
    """Ordered record of the operations reachable from one scalar loss.

    Construction performs the topological sort (parents before children);
    :meth:`backward` runs the reverse accumulation once and then releases
    the graph so the tape cannot be replayed accidentally.
    """

    def __init__(self, loss: Tensor):
        if loss.data.size != 1:
            raise ShapeError(f"backward() needs a scalar loss, got shape {loss.shape}")
        self.loss = loss
        self.nodes: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(loss, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                self.nodes.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in seen:
                    stack.append((parent, False))

    def backward(self) -> dict[int, np.ndarray]:
        """Reverse-topological accumulation; returns grads keyed by id(node)."""
        grads: dict[int, np.ndarray] = {id(self.loss): np.ones_like(self.loss.data)}
        for node in reversed(self.nodes):
            if node._grad_fn is None:
                continue  # leaf or constant: leave any accumulated grad in place
            gout = grads.pop(id(node), None)
            if gout is None:
                continue
            parent_grads = node._grad_fn(gout)
            for parent, pg in zip(node._parents, parent_grads):
                if pg is None:
                    continue
                slot = grads.get(id(parent))
                if slot is None:
                    grads[id(parent)] = pg
                else:
                    grads[id(parent)] = slot + pg
        leaf_grads: dict[int, np.ndarray] = {}
        for node in self.nodes:
            if node.requires_grad and node._grad_fn is None:
                g = grads.get(id(node))
                if g is None:
                    g = np.zeros_like(node.data)
                node.grad = g
                leaf_grads[id(node)] = g
        self._release()
        return leaf_grads

    def _release(self) -> None:
        for node in self.nodes:
            node._parents = ()
            node._grad_fn = None
        self.nodes = []


def backward(loss: Tensor) -> dict[int, np.ndarray]:
    """Run reverse mode from a scalar loss; leaves get ``.grad`` populated."""
    return Tape(loss).backward()


# ---------------------------------------------------------------------------
# elementwise operations


def apply_unary(kind: str, x: Tensor) -> Tensor:
    if kind == "sigmoid":
        # stable for large |x|: exp of a nonpositive argument only
        ex = np.exp(-np.abs(x.data))
        out = np.where(x.data >= 0, 1.0 / (1.0 + ex), ex / (1.0 + ex))

        def grad_fn(g, out=out):
            return (g * out * (1.0 - out),)

    elif kind == "tanh":
        out = np.tanh(x.data)

        def grad_fn(g, out=out):
            return (g * (1.0 - out * out),)

    elif kind == "leaky_relu":
        out = np.where(x.data > 0, x.data, LEAKY_RELU_SLOPE * x.data)

        def grad_fn(g, xd=x.data):
            return (g * np.where(xd > 0, 1.0, LEAKY_RELU_SLOPE),)

    elif kind == "relu":
        out = np.maximum(x.data, 0.0)

        def grad_fn(g, xd=x.data):
            return (g * (xd > 0),)

    elif kind == "exp":
        out = np.exp(x.data)

        def grad_fn(g, out=out):
            return (g * out,)

    elif kind == "negate":
        out = -x.data

        def grad_fn(g):
            return (-g,)

    else:
        raise ValueError(f"unknown unary kind {kind!r}; expected one of {_UNARY_KINDS}")
    return _make(out, (x,), grad_fn)


def sigmoid(x: Tensor) -> Tensor:
    return apply_unary("sigmoid", x)


def tanh(x: Tensor) -> Tensor:
    return apply_unary("tanh", x)


def leaky_relu(x: Tensor) -> Tensor:
    return apply_unary("leaky_relu", x)


def relu(x: Tensor) -> Tensor:
    return apply_unary("relu", x)


def apply_binary(kind: str, x: Tensor, y: Tensor) -> Tensor:
    xs, ys = x.data.shape, y.data.shape
    if not (_suffix_broadcastable(xs, ys) or _suffix_broadcastable(ys, xs)):
        raise ShapeError(f"shapes {xs} and {ys} are not trailing-axis compatible")
    if kind == "add":
        out = x.data + y.data

        def grad_fn(g):
            return _unbroadcast(g, xs), _unbroadcast(g, ys)

    elif kind == "sub":
        out = x.data - y.data

        def grad_fn(g):
            return _unbroadcast(g, xs), _unbroadcast(-g, ys)

    elif kind == "mul":
        out = x.data * y.data

        def grad_fn(g, xd=x.data, yd=y.data):
            return _unbroadcast(g * yd, xs), _unbroadcast(g * xd, ys)

    elif kind == "div":
        if np.any(y.data == 0.0):
            raise NumericError("division by exact zero")
        out = x.data / y.data

        def grad_fn(g, xd=x.data, yd=y.data):
            return _unbroadcast(g / yd, xs), _unbroadcast(-g * xd / (yd * yd), ys)

    else:
        raise ValueError(f"unknown binary kind {kind!r}; expected one of {_BINARY_KINDS}")
    return _make(out, (x, y), grad_fn)


# ---------------------------------------------------------------------------
# linear algebra


def matmul(x: Tensor, y: Tensor) -> Tensor:
    """Matrix product; either operand may carry leading batch axes."""
    if x.ndim < 2 or y.ndim < 2:
        raise ShapeError("matmul operands need at least 2 dimensions")
    if x.shape[-1] != y.shape[-2]:
        raise ShapeError(f"inner dimensions disagree: {x.shape} @ {y.shape}")
    try:
        out = np.matmul(x.data, y.data)
    except ValueError as exc:
        raise ShapeError(f"matmul batch shapes incompatible: {x.shape} @ {y.shape}") from exc

    def grad_fn(g, xd=x.data, yd=y.data):
        gx = _unbroadcast(np.matmul(g, np.swapaxes(yd, -1, -2)), xd.shape)
        gy = _unbroadcast(np.matmul(np.swapaxes(xd, -1, -2), g), yd.shape)
        return gx, gy

    return _make(out, (x, y), grad_fn)


def softmax_rows(x: Tensor, mask: np.ndarray | None = None) -> Tensor:
    """Row softmax along the last axis with exact zeros at masked entries.

    ``mask`` is boolean (True = keep) and must be trailing-axis
    broadcastable to ``x``. Stabilized by subtracting the row max over
    the kept entries; a fully masked row is an error.
    """
    xd = x.data
    if xd.ndim < 2:
        raise ShapeError("softmax_rows expects at least 2 dimensions")
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if not _suffix_broadcastable(xd.shape, mask.shape):
            raise ShapeError(f"mask shape {mask.shape} not broadcastable to {xd.shape}")
        mask = np.broadcast_to(mask, xd.shape)
        if not mask.any(axis=-1).all():
            raise NumericError("softmax_rows: some row is fully masked")
        shifted = np.where(mask, xd, -np.inf)
        shifted = shifted - shifted.max(axis=-1, keepdims=True)
        ex = np.where(mask, np.exp(shifted), 0.0)
    else:
        shifted = xd - xd.max(axis=-1, keepdims=True)
        ex = np.exp(shifted)
    out = ex / ex.sum(axis=-1, keepdims=True)

    def grad_fn(g, out=out):
        inner = (g * out).sum(axis=-1, keepdims=True)
        return (out * (g - inner),)

    return _make(out, (x,), grad_fn)


def causal_conv1d(x: Tensor, filters: Tensor, dilation: int = 1) -> Tensor:
    """Dilated causal convolution over the time axis.

    ``x`` is (T, C_in) or (B, T, C_in); ``filters`` is (k, C_in, C_out).
    The sequence is left-padded with (k-1)*dilation implicit zeros so the
    output keeps length T, and y(t) never reads x(t') for t' > t.
    """
    if dilation < 1:
        raise ValueError(f"dilation must be >= 1, got {dilation}")
    xd, fd = x.data, filters.data
    if xd.ndim not in (2, 3) or fd.ndim != 3:
        raise ShapeError(f"causal_conv1d expects (T,C) or (B,T,C) input and (k,Cin,Cout) filters, got {xd.shape}, {fd.shape}")
    if xd.shape[-1] != fd.shape[1]:
        raise ShapeError(f"input channels {xd.shape[-1]} != filter channels {fd.shape[1]}")
    k = fd.shape[0]
    T = xd.shape[-2]
    out_shape = xd.shape[:-1] + (fd.shape[2],)
    out = np.zeros(out_shape)
    for j in range(k):
        span = T - j * dilation
        if span <= 0:
            break
        out[..., j * dilation:, :] += np.matmul(xd[..., :span, :], fd[j])

    def grad_fn(g, xd=xd, fd=fd, k=k, T=T, dilation=dilation):
        gx = np.zeros_like(xd)
        gf = np.zeros_like(fd)
        cin, cout = fd.shape[1], fd.shape[2]
        for j in range(k):
            span = T - j * dilation
            if span <= 0:
                break
            g_slice = g[..., j * dilation:, :]
            gx[..., :span, :] += np.matmul(g_slice, fd[j].T)
            gf[j] += xd[..., :span, :].reshape(-1, cin).T @ g_slice.reshape(-1, cout)
        return gx, gf

    return _make(out, (x, filters), grad_fn)


def concat_last_axis(parts: list[Tensor]) -> Tensor:
    """Concatenate along the last axis; leading shapes must agree."""
    if not parts:
        raise ShapeError("concat_last_axis needs at least one part")
    lead = parts[0].shape[:-1]
    for p in parts[1:]:
        if p.shape[:-1] != lead:
            raise ShapeError(f"leading shapes disagree: {lead} vs {p.shape[:-1]}")
    out = np.concatenate([p.data for p in parts], axis=-1)
    widths = [p.shape[-1] for p in parts]
    offsets = np.cumsum([0] + widths)

    def grad_fn(g, offsets=offsets):
        return tuple(g[..., offsets[i]:offsets[i + 1]] for i in range(len(offsets) - 1))

    return _make(out, tuple(parts), grad_fn)


def narrow(x: Tensor, axis: int, start: int, stop: int) -> Tensor:
    """Contiguous slice [start:stop) along one axis."""
    axis = axis % x.ndim
    idx = tuple(slice(None) if i != axis else slice(start, stop) for i in range(x.ndim))
    out = x.data[idx]

    def grad_fn(g, shape=x.data.shape, idx=idx):
        gx = np.zeros(shape)
        gx[idx] = g
        return (gx,)

    return _make(out, (x,), grad_fn)


def reshape(x: Tensor, shape) -> Tensor:
    out = x.data.reshape(shape)

    def grad_fn(g, orig=x.data.shape):
        return (g.reshape(orig),)

    return _make(out, (x,), grad_fn)


def swap_last_axes(x: Tensor) -> Tensor:
    if x.ndim < 2:
        raise ShapeError("swap_last_axes needs at least 2 dimensions")
    out = np.swapaxes(x.data, -1, -2)

    def grad_fn(g):
        return (np.swapaxes(g, -1, -2),)

    return _make(out, (x,), grad_fn)


def take_last_axis(x: Tensor, indices) -> Tensor:
    """Gather columns of the last axis (need not be contiguous)."""
    idx = np.asarray(indices, dtype=np.intp)
    if idx.ndim != 1:
        raise ShapeError("indices must be a 1-D sequence")
    out = x.data[..., idx]

    def grad_fn(g, shape=x.data.shape, idx=idx):
        width = shape[-1]
        gt = np.zeros((width,) + g.shape[:-1])
        np.add.at(gt, idx, np.moveaxis(g, -1, 0))
        return (np.moveaxis(gt, 0, -1),)

    return _make(out, (x,), grad_fn)


def dropout(x: Tensor, rate: float, rng: np.random.Generator) -> Tensor:
    """Inverted dropout with an externally seeded generator (training only)."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if rate == 0.0:
        return x
    mask = (rng.random(x.shape) >= rate) / (1.0 - rate)
    out = x.data * mask

    def grad_fn(g, mask=mask):
        return (g * mask,)

    return _make(out, (x,), grad_fn)


def sum_all(x: Tensor) -> Tensor:
    out = np.asarray(x.data.sum())

    def grad_fn(g, shape=x.data.shape):
        return (np.broadcast_to(g, shape).copy() if shape else g,)

    return _make(out, (x,), grad_fn)


def mean_all(x: Tensor) -> Tensor:
    n = x.data.size
    out = np.asarray(x.data.mean())

    def grad_fn(g, shape=x.data.shape, n=n):
        return (np.broadcast_to(g / n, shape).copy(),)

    return _make(out, (x,), grad_fn)


# ---------------------------------------------------------------------------
# losses


def mse_loss(a: Tensor, b: Tensor) -> Tensor:
    """Mean of squared differences over all elements."""
    if a.shape != b.shape:
        raise ShapeError(f"mse_loss shapes differ: {a.shape} vs {b.shape}")
    diff = a.data - b.data
    n = diff.size
    out = np.asarray((diff * diff).sum() / n)

    def grad_fn(g, diff=diff, n=n):
        scale = 2.0 * g / n
        return scale * diff, -scale * diff

    return _make(out, (a, b), grad_fn)


def huber_loss(y: Tensor, y_hat: Tensor, theta: float) -> Tensor:
    """Mean Huber loss: 0.5*e^2 inside |e| <= theta, linear outside."""
    if theta <= 0:
        raise ValueError(f"theta must be positive, got {theta}")
    if y.shape != y_hat.shape:
        raise ShapeError(f"huber_loss shapes differ: {y.shape} vs {y_hat.shape}")
    e = y.data - y_hat.data
    abs_e = np.abs(e)
    quad = abs_e <= theta
    elems = np.where(quad, 0.5 * e * e, theta * abs_e - 0.5 * theta * theta)
    n = e.size
    out = np.asarray(elems.sum() / n)

    def grad_fn(g, e=e, quad=quad, n=n, theta=theta):
        d = np.where(quad, e, theta * np.sign(e)) * (g / n)
        return d, -d

    return _make(out, (y, y_hat), grad_fn)


def huber_elementwise(e: np.ndarray, theta: float) -> np.ndarray:
    """Plain-array Huber map, exposed for loss-shape assertions."""
    abs_e = np.abs(e)
    return np.where(abs_e <= theta, 0.5 * e * e, theta * abs_e - 0.5 * theta * theta)


# ---------------------------------------------------------------------------
# optimization


@dataclass
class AdamState:
    """Adam moments plus hyperparameters (decoupled weight decay)."""

    learning_rate: float
    weight_decay: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params: dict[str, Tensor], grads: dict[str, np.ndarray],
              state: AdamState) -> tuple[dict[str, Tensor], AdamState]:
    """One Adam update; returns fresh parameter tensors and the state.

    Weight decay is decoupled from the moment estimates. Parameters
    without a gradient entry are treated as hitting zero gradient.
    """
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    new_params: dict[str, Tensor] = {}
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(p.data)
        if g.shape != p.data.shape:
            raise ShapeError(f"gradient shape {g.shape} misaligned with parameter {name} {p.data.shape}")
        m = state.m.get(name)
        if m is None:
            m = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        v = state.v[name]
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * (g * g)
        state.m[name] = m
        state.v[name] = v
        m_hat = m / (1.0 - b1 ** t)
        v_hat = v / (1.0 - b2 ** t)
        new_data = p.data - state.learning_rate * (m_hat / (np.sqrt(v_hat) + state.epsilon))
        if state.weight_decay:
            new_data = new_data - state.learning_rate * state.weight_decay * p.data
        new_params[name] = Tensor(new_data, requires_grad=p.requires_grad)
    return new_params, state


# ---------------------------------------------------------------------------
# verification


def grad_check(f, x: Tensor, eps: float = 1e-5) -> float:
    """Max relative error between reverse-mode and central differences.

    ``f`` maps a Tensor to a scalar Tensor. The relative error per
    coordinate is |analytic - numeric| / max(1, |analytic|).
    """
    probe = Tensor(x.data.copy(), requires_grad=True)
    out = f(probe)
    if out.data.size != 1:
        raise ShapeError(f"grad_check target must be scalar, got shape {out.shape}")
    backward(out)
    if probe.grad is None:
        probe.grad = np.zeros_like(probe.data)
    analytic = probe.grad.reshape(-1)
    flat = x.data.reshape(-1)
    numeric = np.zeros_like(flat)
    for i in range(flat.size):
        bumped = flat.copy()
        bumped[i] += eps
        hi = f(Tensor(bumped.reshape(x.data.shape))).item()
        bumped[i] -= 2 * eps
        lo = f(Tensor(bumped.reshape(x.data.shape))).item()
        numeric[i] = (hi - lo) / (2 * eps)
    denom = np.maximum(1.0, np.abs(analytic))
    return float(np.max(np.abs(analytic - numeric) / denom)) if flat.size else 0.0
