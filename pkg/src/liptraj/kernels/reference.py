"""Pure numpy implementations of the hot per-timestep kernels.

These are the fallback for the compiled extension and the ground truth it is
tested against. Shapes and cache layouts must stay identical between the two
backends; the autodiff layer treats them interchangeably.
"""

import numpy as np

BACKEND_NAME = "reference"


def _sigmoid(z):
    # Split by sign to avoid overflow in exp.
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def lstm_gates_forward(z, c_prev):
    """Fused LSTM gate math on pre-activations.

    ``z`` is (B, 4H) holding the i, f, g, o blocks in that order; ``c_prev``
    is (B, H). Returns (h_new, c_new, cache).
    """
    hidden = c_prev.shape[1]
    i = _sigmoid(z[:, :hidden])
    f = _sigmoid(z[:, hidden : 2 * hidden])
    g = np.tanh(z[:, 2 * hidden : 3 * hidden])
    o = _sigmoid(z[:, 3 * hidden :])
    c_new = f * c_prev + i * g
    tc = np.tanh(c_new)
    h_new = o * tc
    return h_new, c_new, (i, f, g, o, c_prev, tc)


def lstm_gates_backward(cache, dh, dc):
    """Gradients of :func:`lstm_gates_forward` w.r.t. z and c_prev."""
    i, f, g, o, c_prev, tc = cache
    do = dh * tc
    dc_total = dc + dh * o * (1.0 - tc * tc)
    di = dc_total * g
    dg = dc_total * i
    df = dc_total * c_prev
    dc_prev = dc_total * f
    dz = np.concatenate(
        [
            di * i * (1.0 - i),
            df * f * (1.0 - f),
            dg * (1.0 - g * g),
            do * o * (1.0 - o),
        ],
        axis=1,
    )
    return dz, dc_prev


def _im2col(x, kernel):
    frames, chan = x.shape
    pad = (kernel - 1) // 2
    xp = np.zeros((frames + kernel - 1, chan), dtype=x.dtype)
    xp[pad : pad + frames] = x
    view = np.lib.stride_tricks.sliding_window_view(xp, kernel, axis=0)
    # view is (frames, chan, kernel); reorder to (frames, kernel*chan) with
    # kernel-major layout matching w.reshape(kernel*chan, out).
    return np.ascontiguousarray(view.transpose(0, 2, 1)).reshape(frames, kernel * chan)


def conv1d_forward(x, w, b=None):
    """1D convolution over time, stride 1, zero 'same' padding.

    ``x`` is (T, C_in), ``w`` is (K, C_in, C_out) with odd K, ``b`` is
    (C_out,) or None. Returns (T, C_out).
    """
    kernel, c_in, c_out = w.shape
    cols = _im2col(x, kernel)
    y = cols @ w.reshape(kernel * c_in, c_out)
    if b is not None:
        y += b
    return y


def conv1d_backward(x, w, gy):
    """Gradients of :func:`conv1d_forward`; returns (dx, dw, db)."""
    kernel, c_in, c_out = w.shape
    frames = x.shape[0]
    pad = (kernel - 1) // 2
    cols = _im2col(x, kernel)
    dw = (cols.T @ gy).reshape(kernel, c_in, c_out)
    db = gy.sum(axis=0)
    dcols = (gy @ w.reshape(kernel * c_in, c_out).T).reshape(frames, kernel, c_in)
    dxp = np.zeros((frames + kernel - 1, c_in), dtype=x.dtype)
    for k in range(kernel):
        dxp[k : k + frames] += dcols[:, k, :]
    return dxp[pad : pad + frames], dw, db
