"""Dense float tensors with a recorded-operation tape for reverse-mode gradients.

Forward ops build a DAG of Tensor nodes; Tensor.backward() walks it once in
reverse topological order. 64-bit floats are the default so finite-difference
checks are meaningful; 32-bit mode exists for speed.
"""

from __future__ import annotations

import numpy as np

_DEFAULT_DTYPE = np.float64
_GRAD_ENABLED = True


def set_default_dtype(dtype) -> None:
    global _DEFAULT_DTYPE
    dtype = np.dtype(dtype)
    if dtype not in (np.dtype(np.float32), np.dtype(np.float64)):
        raise ValueError("default dtype must be float32 or float64")
    _DEFAULT_DTYPE = dtype.type


def get_default_dtype():
    return _DEFAULT_DTYPE


class no_grad:
    """Context that skips tape recording; forward values are unchanged."""

    def __enter__(self):
        global _GRAD_ENABLED
        self._saved = _GRAD_ENABLED
        _GRAD_ENABLED = False
        return self

    def __exit__(self, *exc):
        global _GRAD_ENABLED
        _GRAD_ENABLED = self._saved
        return False


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        self.data = np.asarray(data, dtype=dtype or _DEFAULT_DTYPE)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, grad={self.requires_grad})"

    def item(self) -> float:
        return float(self.data)

    def backward(self) -> None:
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar tensor")
        topo: list[Tensor] = []
        state: dict[int, int] = {}  # 0 = on stack, 1 = done
        stack = [self]
        while stack:
            node = stack[-1]
            nid = id(node)
            if nid not in state:
                state[nid] = 0
                for p in node._parents:
                    if id(p) not in state:
                        stack.append(p)
            else:
                stack.pop()
                if state[nid] == 0:
                    state[nid] = 1
                    topo.append(node)
        self.grad = _accum(self.grad, np.ones_like(self.data))
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)
        # Intermediate grads are not needed once propagated into leaves.
        for node in topo:
            if node._backward is not None:
                node.grad = None

    # Operator sugar
    def __add__(self, other):
        return add(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __sub__(self, other):
        return add(self, mul(other, -1.0))

    def __matmul__(self, other):
        return matmul(self, other)


class Parameter(Tensor):
    """A named trainable tensor; gradients accumulate into .grad."""

    __slots__ = ("name",)

    def __init__(self, name: str, data, dtype=None):
        super().__init__(data, requires_grad=True, dtype=dtype)
        self.name = name

    def __repr__(self):
        return f"Parameter({self.name}, shape={self.data.shape})"


def _accum(current, contribution):
    # Always copy on first write: the contribution may alias another node's
    # grad buffer (e.g. add passes its upstream grad through unchanged), and
    # later accumulation is in place.
    if current is None:
        return np.array(contribution)
    current += contribution
    return current


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data, parents, backward) -> Tensor:
    out = Tensor(data)
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _sum_to_shape(g: np.ndarray, shape) -> np.ndarray:
    """Reduce a broadcast gradient back to the original operand shape."""
    if g.shape == tuple(shape):
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (gs, s) in enumerate(zip(g.shape, shape)) if s == 1 and gs != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def zero_grads(params) -> None:
    for p in _param_values(params):
        p.grad = None


def collect_grads(params) -> dict[str, np.ndarray]:
    return {p.name: (None if p.grad is None else p.grad.copy()) for p in _param_values(params)}


def _param_values(params):
    return params.values() if isinstance(params, dict) else params


# ---------------------------------------------------------------------------
# Elementwise and shape ops


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    data = a.data + b.data

    def backward(g):
        if a.requires_grad:
            a.grad = _accum(a.grad, _sum_to_shape(g, a.data.shape))
        if b.requires_grad:
            b.grad = _accum(b.grad, _sum_to_shape(g, b.data.shape))

    return _make(data, (a, b), backward)


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    data = a.data * b.data

    def backward(g):
        if a.requires_grad:
            a.grad = _accum(a.grad, _sum_to_shape(g * b.data, a.data.shape))
        if b.requires_grad:
            b.grad = _accum(b.grad, _sum_to_shape(g * a.data, b.data.shape))

    return _make(data, (a, b), backward)


def matmul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.shape[-1] != b.data.shape[-2 if b.data.ndim > 1 else 0]:
        raise ValueError(f"matmul shape mismatch: {a.data.shape} @ {b.data.shape}")
    data = a.data @ b.data

    def backward(g):
        if a.requires_grad:
            ga = g @ np.swapaxes(b.data, -1, -2) if b.data.ndim > 1 else np.outer(g, b.data)
            a.grad = _accum(a.grad, _sum_to_shape(ga, a.data.shape))
        if b.requires_grad:
            if a.data.ndim > 1:
                gb = np.swapaxes(a.data, -1, -2) @ g
            else:
                gb = np.outer(a.data, g)
            b.grad = _accum(b.grad, _sum_to_shape(gb, b.data.shape))

    return _make(data, (a, b), backward)


def linear(x, W, b=None) -> Tensor:
    """x @ W (+ b)."""
    out = matmul(x, W)
    return out if b is None else add(out, b)


def reshape(a, shape) -> Tensor:
    a = _as_tensor(a)
    old = a.data.shape
    data = a.data.reshape(shape)

    def backward(g):
        if a.requires_grad:
            a.grad = _accum(a.grad, g.reshape(old))

    return _make(data, (a,), backward)


def transpose(a, axes) -> Tensor:
    a = _as_tensor(a)
    data = np.transpose(a.data, axes)
    inv = np.argsort(axes)

    def backward(g):
        if a.requires_grad:
            a.grad = _accum(a.grad, np.transpose(g, inv))

    return _make(data, (a,), backward)


def broadcast_to(a, shape) -> Tensor:
    a = _as_tensor(a)
    data = np.broadcast_to(a.data, shape).copy()

    def backward(g):
        if a.requires_grad:
            a.grad = _accum(a.grad, _sum_to_shape(g, a.data.shape))

    return _make(data, (a,), backward)


def index(a, key) -> Tensor:
    """Basic slicing (ints/slices); gradient scatters into the sliced region."""
    a = _as_tensor(a)
    data = a.data[key].copy()

    def backward(g):
        if a.requires_grad:
            full = np.zeros_like(a.data)
            full[key] = g
            a.grad = _accum(a.grad, full)

    return _make(data, (a,), backward)


def concat(tensors, axis: int = -1) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    base = list(tensors[0].data.shape)
    for t in tensors[1:]:
        other = list(t.data.shape)
        if len(other) != len(base) or any(
            o != b for i, (o, b) in enumerate(zip(other, base)) if i != axis % len(base)
        ):
            raise ValueError(f"concat shape mismatch: {[t.data.shape for t in tensors]}")
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                sl = [slice(None)] * g.ndim
                sl[axis] = slice(lo, hi)
                t.grad = _accum(t.grad, g[tuple(sl)])

    return _make(data, tuple(tensors), backward)


def mean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = _as_tensor(a)
    data = a.data.mean(axis=axis, keepdims=keepdims)
    count = a.data.size if axis is None else np.prod(
        [a.data.shape[ax] for ax in (axis if isinstance(axis, tuple) else (axis,))]
    )

    def backward(g):
        if a.requires_grad:
            if axis is None:
                grad = np.full_like(a.data, g / count)
            else:
                gg = g if keepdims else np.expand_dims(g, axis)
                grad = np.broadcast_to(gg / count, a.data.shape).copy()
            a.grad = _accum(a.grad, grad)

    return _make(data, (a,), backward)


def tensor_sum(a, axis=None, keepdims: bool = False) -> Tensor:
    a = _as_tensor(a)
    data = a.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if a.requires_grad:
            if axis is None:
                grad = np.full_like(a.data, g)
            else:
                gg = g if keepdims else np.expand_dims(g, axis)
                grad = np.broadcast_to(gg, a.data.shape).copy()
            a.grad = _accum(a.grad, grad)

    return _make(data, (a,), backward)


# ---------------------------------------------------------------------------
# Nonlinearities and layers


def elu(a) -> Tensor:
    """x for x > 0, exp(x) - 1 otherwise (alpha = 1)."""
    a = _as_tensor(a)
    pos = a.data > 0
    data = np.where(pos, a.data, np.expm1(a.data))

    def backward(g):
        if a.requires_grad:
            a.grad = _accum(a.grad, g * np.where(pos, 1.0, data + 1.0))

    return _make(data, (a,), backward)


def softmax(a, axis: int = -1) -> Tensor:
    a = _as_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    data = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        if a.requires_grad:
            dot = (g * data).sum(axis=axis, keepdims=True)
            a.grad = _accum(a.grad, data * (g - dot))

    return _make(data, (a,), backward)


def dropout(a, p: float, rng: np.random.Generator | None, train_flag: bool) -> Tensor:
    """Inverted dropout: scales kept units by 1/(1-p) at train time, identity in eval."""
    if not 0 <= p < 1:
        raise ValueError("dropout p must be in [0, 1)")
    a = _as_tensor(a)
    if not train_flag or p == 0.0:
        return a
    if rng is None:
        raise ValueError("dropout in train mode requires an rng")
    keep = (rng.random(a.data.shape) >= p).astype(a.data.dtype) / (1.0 - p)
    data = a.data * keep

    def backward(g):
        if a.requires_grad:
            a.grad = _accum(a.grad, g * keep)

    return _make(data, (a,), backward)


def layer_norm(x, gain, bias, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis, then scale and shift."""
    x, gain, bias = _as_tensor(x), _as_tensor(gain), _as_tensor(bias)
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    data = gain.data * xhat + bias.data

    def backward(g):
        if bias.requires_grad:
            bias.grad = _accum(bias.grad, _sum_to_shape(g, bias.data.shape))
        if gain.requires_grad:
            gain.grad = _accum(gain.grad, _sum_to_shape(g * xhat, gain.data.shape))
        if x.requires_grad:
            dxhat = g * gain.data
            m1 = dxhat.mean(axis=-1, keepdims=True)
            m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
            x.grad = _accum(x.grad, inv * (dxhat - m1 - xhat * m2))

    return _make(data, (x, gain, bias), backward)


def embedding(table, ids) -> Tensor:
    """Row lookup table[ids]; gradient scatter-adds into the table."""
    table = _as_tensor(table)
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= table.data.shape[0]):
        raise ValueError(
            f"embedding ids out of range [0, {table.data.shape[0]}): "
            f"min={ids.min()}, max={ids.max()}"
        )
    data = table.data[ids]

    def backward(g):
        if table.requires_grad:
            full = np.zeros_like(table.data)
            np.add.at(full, ids.ravel(), g.reshape(-1, table.data.shape[-1]))
            table.grad = _accum(table.grad, full)

    return _make(data, (table,), backward)


def softmax_cross_entropy(logits, targets, mask=None) -> Tensor:
    """Mean cross-entropy of logits (..., C) against integer targets (...).

    With a {0,1} mask, the mean runs over masked-in positions only; an
    all-zero mask yields loss 0. Numerically stabilized by max subtraction.
    The gradient is (softmax - one_hot) / count at masked-in positions.
    """
    logits = _as_tensor(logits)
    targets = np.asarray(targets, dtype=np.int64)
    if targets.shape != logits.data.shape[:-1]:
        raise ValueError(
            f"targets shape {targets.shape} does not match logits {logits.data.shape}"
        )
    num_classes = logits.data.shape[-1]
    if targets.size and (targets.min() < 0 or targets.max() >= num_classes):
        raise ValueError(f"target id out of range [0, {num_classes})")
    if mask is None:
        mask_arr = np.ones(targets.shape, dtype=logits.data.dtype)
    else:
        mask_arr = np.asarray(mask, dtype=logits.data.dtype)
    count = mask_arr.sum()
    shifted = logits.data - logits.data.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    logp = shifted - lse
    picked = np.take_along_axis(logp, targets[..., None], axis=-1)[..., 0]
    denom = count if count > 0 else 1.0
    data = -(picked * mask_arr).sum() / denom

    def backward(g):
        if logits.requires_grad:
            probs = np.exp(logp)
            grad = probs
            np.subtract.at(
                grad.reshape(-1, num_classes),
                (np.arange(targets.size), targets.ravel()),
                1.0,
            )
            grad *= (mask_arr / denom * g)[..., None]
            logits.grad = _accum(logits.grad, grad)

    return _make(np.asarray(data), (logits,), backward)
