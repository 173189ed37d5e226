"""Minimal reverse-mode autodiff over numpy arrays.

The engine records primitive applications on an explicit :class:`Tape`
(entered as a context manager) and replays them backwards to accumulate
gradients. Only the primitives the network actually needs exist; there is
no general broadcasting, which keeps every backward rule small enough to
verify by finite differences.

Precision follows the inputs: float32 in production, float64 when checking
gradients. With no tape active, primitives run forward-only, which is how
evaluation and inference execute.
"""

import numpy as np

from .errors import ContractError, ShapeError
from . import kernels

_ACTIVE_TAPE = None


class DiffArray:
    """A numpy array participating in gradient computation."""

    __slots__ = ("data", "grad", "requires_grad", "name")

    def __init__(self, data, requires_grad=False, name=None):
        self.data = np.asarray(data)
        self.grad = None
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self):
        return self.data.size

    def item(self):
        return float(self.data)

    def __repr__(self):
        tag = f" {self.name!r}" if self.name else ""
        return f"<DiffArray{tag} shape={self.data.shape} grad={self.requires_grad}>"

    # Scalar-combination sugar used by the loss code.
    def __add__(self, other):
        return add(self, other)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__


class _Node:
    __slots__ = ("outputs", "parents", "vjp")

    def __init__(self, outputs, parents, vjp):
        self.outputs = outputs
        self.parents = parents
        self.vjp = vjp


class Tape:
    """Ordered record of primitive applications within one training step."""

    def __init__(self):
        self._nodes = []
        self._consumed = False

    def __enter__(self):
        global _ACTIVE_TAPE
        if _ACTIVE_TAPE is not None:
            raise ContractError("tapes do not nest")
        _ACTIVE_TAPE = self
        return self

    def __exit__(self, exc_type, exc, tb):
        global _ACTIVE_TAPE
        _ACTIVE_TAPE = None
        return False

    def __len__(self):
        return len(self._nodes)

    def backward(self, loss):
        backward(self, loss)


def tape_active():
    return _ACTIVE_TAPE is not None


def constant(data, dtype=None):
    """Wrap data as a non-differentiable leaf."""
    arr = np.asarray(data, dtype=dtype)
    return DiffArray(arr, requires_grad=False)


def _as_diff(x):
    return x if isinstance(x, DiffArray) else constant(x)


def record(outputs, parents, vjp):
    """Register a primitive application on the active tape.

    ``vjp`` maps the tuple of output gradients (entries may be None) to a
    tuple of parent gradients (None for parents that need none).
    """
    _ACTIVE_TAPE._nodes.append(_Node(tuple(outputs), tuple(parents), vjp))


def _wants_grad(*parents):
    return _ACTIVE_TAPE is not None and any(p.requires_grad for p in parents)


def backward(tape, loss):
    """Accumulate dLoss/dX into ``.grad`` of every recorded array.

    ``loss`` must be a scalar on this tape. The tape is consumed: a second
    backward through it is an error.
    """
    if not isinstance(loss, DiffArray) or loss.data.shape != ():
        raise ContractError("backward needs a scalar DiffArray loss")
    if tape._consumed:
        raise ContractError("tape already consumed by a previous backward")
    tape._consumed = True
    loss.grad = np.ones((), dtype=loss.data.dtype)
    for node in reversed(tape._nodes):
        grads_out = tuple(out.grad for out in node.outputs)
        if all(g is None for g in grads_out):
            continue
        grads_out = tuple(
            g if g is not None else np.zeros(out.data.shape, dtype=out.data.dtype)
            for g, out in zip(grads_out, node.outputs)
        )
        grads_in = node.vjp(grads_out)
        for parent, g in zip(node.parents, grads_in):
            if g is None or not parent.requires_grad:
                continue
            if parent.grad is None:
                parent.grad = g
            else:
                parent.grad = parent.grad + g
    tape._nodes.clear()


# ---------------------------------------------------------------------------
# Primitives


def matmul(a, b):
    a, b = _as_diff(a), _as_diff(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {a.data.shape} @ {b.data.shape}")
    out = DiffArray(a.data @ b.data, requires_grad=_wants_grad(a, b))
    if out.requires_grad:
        a_data, b_data = a.data, b.data

        def vjp(gs):
            (g,) = gs
            return g @ b_data.T, a_data.T @ g

        record((out,), (a, b), vjp)
    return out


def add(a, b):
    """Elementwise add; second operand may be a 1-D bias over the last axis."""
    a, b = _as_diff(a), _as_diff(b)
    bias = a.data.shape != b.data.shape
    if bias:
        ok = (
            b.data.ndim == 1 and a.data.ndim >= 1 and a.data.shape[-1] == b.data.shape[0]
        ) or (b.data.ndim == 2 and b.data.shape[0] == 1 and a.data.shape[-1] == b.data.shape[1])
        if not ok:
            raise ShapeError(f"add: incompatible shapes {a.data.shape} + {b.data.shape}")
    out = DiffArray(a.data + b.data, requires_grad=_wants_grad(a, b))
    if out.requires_grad:
        b_shape = b.data.shape

        def vjp(gs):
            (g,) = gs
            if not bias:
                return g, g
            gb = g.reshape(-1, g.shape[-1]).sum(axis=0)
            return g, gb.reshape(b_shape)

        record((out,), (a, b), vjp)
    return out


def mul(a, b):
    """Elementwise product, or scaling by a python scalar."""
    a = _as_diff(a)
    if isinstance(b, (int, float)):
        scale = float(b)
        out = DiffArray(a.data * scale, requires_grad=_wants_grad(a))
        if out.requires_grad:
            def vjp(gs):
                (g,) = gs
                return (g * scale,)

            record((out,), (a,), vjp)
        return out
    b = _as_diff(b)
    if a.data.shape != b.data.shape:
        raise ShapeError(f"mul: incompatible shapes {a.data.shape} * {b.data.shape}")
    out = DiffArray(a.data * b.data, requires_grad=_wants_grad(a, b))
    if out.requires_grad:
        a_data, b_data = a.data, b.data

        def vjp(gs):
            (g,) = gs
            return g * b_data, g * a_data

        record((out,), (a, b), vjp)
    return out


def sum_all(x):
    x = _as_diff(x)
    out = DiffArray(np.asarray(x.data.sum()), requires_grad=_wants_grad(x))
    if out.requires_grad:
        shape, dtype = x.data.shape, x.data.dtype

        def vjp(gs):
            (g,) = gs
            return (np.full(shape, g, dtype=dtype),)

        record((out,), (x,), vjp)
    return out


def concat(parts, axis):
    parts = [_as_diff(p) for p in parts]
    if axis not in (0, 1):
        raise ShapeError(f"concat: axis must be 0 or 1, got {axis}")
    out = DiffArray(
        np.concatenate([p.data for p in parts], axis=axis),
        requires_grad=_wants_grad(*parts),
    )
    if out.requires_grad:
        sizes = [p.data.shape[axis] for p in parts]
        bounds = np.cumsum([0] + sizes)

        def vjp(gs):
            (g,) = gs
            if axis == 0:
                return tuple(g[bounds[i] : bounds[i + 1]] for i in range(len(sizes)))
            return tuple(g[:, bounds[i] : bounds[i + 1]] for i in range(len(sizes)))

        record((out,), tuple(parts), vjp)
    return out


def slice_rows(x, start, stop, axis=0):
    x = _as_diff(x)
    if axis not in (0, 1):
        raise ShapeError(f"slice: axis must be 0 or 1, got {axis}")
    if axis == 0:
        data = x.data[start:stop]
    else:
        data = x.data[:, start:stop]
    out = DiffArray(data, requires_grad=_wants_grad(x))
    if out.requires_grad:
        shape, dtype = x.data.shape, x.data.dtype

        def vjp(gs):
            (g,) = gs
            gx = np.zeros(shape, dtype=dtype)
            if axis == 0:
                gx[start:stop] = g
            else:
                gx[:, start:stop] = g
            return (gx,)

        record((out,), (x,), vjp)
    return out


def reshape(x, shape):
    x = _as_diff(x)
    out = DiffArray(x.data.reshape(shape), requires_grad=_wants_grad(x))
    if out.requires_grad:
        orig = x.data.shape

        def vjp(gs):
            (g,) = gs
            return (g.reshape(orig),)

        record((out,), (x,), vjp)
    return out


def tanh(x):
    x = _as_diff(x)
    y = np.tanh(x.data)
    out = DiffArray(y, requires_grad=_wants_grad(x))
    if out.requires_grad:
        def vjp(gs):
            (g,) = gs
            return (g * (1.0 - y * y),)

        record((out,), (x,), vjp)
    return out


def sigmoid(x):
    x = _as_diff(x)
    y = np.empty_like(x.data)
    pos = x.data >= 0
    y[pos] = 1.0 / (1.0 + np.exp(-x.data[pos]))
    ez = np.exp(x.data[~pos])
    y[~pos] = ez / (1.0 + ez)
    out = DiffArray(y, requires_grad=_wants_grad(x))
    if out.requires_grad:
        def vjp(gs):
            (g,) = gs
            return (g * y * (1.0 - y),)

        record((out,), (x,), vjp)
    return out


def relu(x):
    x = _as_diff(x)
    y = np.maximum(x.data, 0)
    out = DiffArray(y, requires_grad=_wants_grad(x))
    if out.requires_grad:
        mask = x.data > 0

        def vjp(gs):
            (g,) = gs
            return (g * mask,)

        record((out,), (x,), vjp)
    return out


def softmax(x):
    """Softmax over the last axis."""
    x = _as_diff(x)
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=-1, keepdims=True)
    out = DiffArray(y, requires_grad=_wants_grad(x))
    if out.requires_grad:
        def vjp(gs):
            (g,) = gs
            dot = (g * y).sum(axis=-1, keepdims=True)
            return (y * (g - dot),)

        record((out,), (x,), vjp)
    return out


def dropout(x, p, rng):
    """Inverted dropout with a seeded mask. Callers skip it in eval mode."""
    x = _as_diff(x)
    if not 0.0 <= p < 1.0:
        raise ContractError(f"dropout probability must lie in [0, 1), got {p}")
    if p == 0.0:
        return x
    keep = (rng.random(x.data.shape) >= p).astype(x.data.dtype)
    scale = 1.0 / (1.0 - p)
    out = DiffArray(x.data * keep * scale, requires_grad=_wants_grad(x))
    if out.requires_grad:
        def vjp(gs):
            (g,) = gs
            return (g * keep * scale,)

        record((out,), (x,), vjp)
    return out


def embedding(table, ids):
    """Row lookup: (V, E) table gathered at integer ``ids`` -> (T, E)."""
    table = _as_diff(table)
    ids = np.asarray(ids, dtype=np.int64)
    if ids.ndim != 1:
        raise ShapeError(f"embedding: ids must be 1-D, got shape {ids.shape}")
    if ids.size and (ids.min() < 0 or ids.max() >= table.data.shape[0]):
        raise ShapeError("embedding: id out of range")
    out = DiffArray(table.data[ids], requires_grad=_wants_grad(table))
    if out.requires_grad:
        shape, dtype = table.data.shape, table.data.dtype

        def vjp(gs):
            (g,) = gs
            gt = np.zeros(shape, dtype=dtype)
            np.add.at(gt, ids, g)
            return (gt,)

        record((out,), (table,), vjp)
    return out


def conv1d(x, w, b=None):
    """Stride-1, zero-padded 'same' convolution over time.

    ``x`` (T, C_in), ``w`` (K, C_in, C_out) with odd K, optional bias.
    Dispatches to the selected kernel backend.
    """
    x = _as_diff(x)
    w = _as_diff(w)
    b = _as_diff(b) if b is not None else None
    kernel, c_in, c_out = w.data.shape
    if kernel % 2 != 1:
        raise ShapeError(f"conv1d: kernel size must be odd, got {kernel}")
    if x.data.ndim != 2 or x.data.shape[1] != c_in:
        raise ShapeError(f"conv1d: input {x.data.shape} does not match weight {w.data.shape}")
    parents = (x, w) if b is None else (x, w, b)
    y = kernels.conv1d_forward(x.data, w.data, None if b is None else b.data)
    out = DiffArray(y, requires_grad=_wants_grad(*parents))
    if out.requires_grad:
        x_data, w_data = x.data, w.data

        def vjp(gs):
            (g,) = gs
            dx, dw, db = kernels.conv1d_backward(x_data, w_data, g)
            if b is None:
                return dx, dw
            return dx, dw, db

        record((out,), parents, vjp)
    return out


def batchnorm1d(x, gamma, beta, running_mean, running_var, *,
                training, momentum=0.1, eps=1e-5, update_stats=True):
    """Per-channel normalization of a (T, C) sequence.

    In training mode the statistics come from the current sequence (the
    execution model is one sample at a time, so "batch" statistics are the
    time axis) and, when ``update_stats``, the running buffers are updated
    in place with the standard momentum rule. Eval mode normalizes with the
    running buffers.
    """
    x, gamma, beta = _as_diff(x), _as_diff(gamma), _as_diff(beta)
    if x.data.ndim != 2 or gamma.data.shape != (x.data.shape[1],):
        raise ShapeError(
            f"batchnorm1d: input {x.data.shape} incompatible with gamma {gamma.data.shape}"
        )
    n = x.data.shape[0]
    if training:
        mean = x.data.mean(axis=0)
        var = x.data.var(axis=0)
        if update_stats:
            unbiased = var * (n / (n - 1)) if n > 1 else var
            running_mean *= 1.0 - momentum
            running_mean += momentum * mean
            running_var *= 1.0 - momentum
            running_var += momentum * unbiased
    else:
        mean = running_mean
        var = running_var
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mean) * inv_std
    out = DiffArray(xhat * gamma.data + beta.data, requires_grad=_wants_grad(x, gamma, beta))
    if out.requires_grad:
        gamma_data = gamma.data

        def vjp(gs):
            (g,) = gs
            dgamma = (g * xhat).sum(axis=0)
            dbeta = g.sum(axis=0)
            if training:
                # Statistics depend on x, so the gradient couples all rows.
                gx = (gamma_data * inv_std) * (
                    g - g.mean(axis=0) - xhat * (g * xhat).mean(axis=0)
                )
            else:
                gx = g * gamma_data * inv_std
            return gx, dgamma, dbeta

        record((out,), (x, gamma, beta), vjp)
    return out


def lstm_cell(x, h, c, w, b):
    """One fused LSTM step.

    ``x`` (B, D_in), ``h``/``c`` (B, H), ``w`` (D_in + H, 4H) with gate
    blocks ordered i, f, g, o, ``b`` (4H,). Returns (h_new, c_new). The gate
    math runs in the selected kernel backend; the surrounding GEMMs stay in
    numpy BLAS.
    """
    x, h, c, w, b = _as_diff(x), _as_diff(h), _as_diff(c), _as_diff(w), _as_diff(b)
    d_in = x.data.shape[1]
    hidden = h.data.shape[1]
    if w.data.shape != (d_in + hidden, 4 * hidden) or b.data.shape != (4 * hidden,):
        raise ShapeError(
            f"lstm_cell: weight {w.data.shape}/bias {b.data.shape} do not match "
            f"input {x.data.shape} and hidden {h.data.shape}"
        )
    if c.data.shape != h.data.shape:
        raise ShapeError(f"lstm_cell: h {h.data.shape} and c {c.data.shape} differ")
    xh = np.concatenate([x.data, h.data], axis=1)
    z = xh @ w.data + b.data
    h_new_data, c_new_data, cache = kernels.lstm_gates_forward(z, c.data)
    needs = _wants_grad(x, h, c, w, b)
    h_new = DiffArray(h_new_data, requires_grad=needs)
    c_new = DiffArray(c_new_data, requires_grad=needs)
    if needs:
        w_data = w.data

        def vjp(gs):
            gh, gc = gs
            dz, dc_prev = kernels.lstm_gates_backward(cache, gh, gc)
            dw = xh.T @ dz
            db = dz.sum(axis=0)
            dxh = dz @ w_data.T
            return dxh[:, :d_in], dxh[:, d_in:], dc_prev, dw, db

        record((h_new, c_new), (x, h, c, w, b), vjp)
    return h_new, c_new
