# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled hot kernels: fused LSTM gate math and small 1D convolutions.

Mirrors liptraj.kernels.reference exactly (shapes, cache layout, gate
order); the test suite cross-checks the two backends numerically.
"""

import numpy as np

from libc.math cimport exp, expf, tanh, tanhf

BACKEND_NAME = "compiled"

ctypedef fused floating:
    float
    double


cdef inline floating _exp(floating x) noexcept nogil:
    if floating is float:
        return expf(x)
    else:
        return exp(x)


cdef inline floating _tanh(floating x) noexcept nogil:
    if floating is float:
        return tanhf(x)
    else:
        return tanh(x)


cdef inline floating _sig(floating x) noexcept nogil:
    cdef floating e
    if x >= 0:
        return 1.0 / (1.0 + _exp(-x))
    e = _exp(x)
    return e / (1.0 + e)


def _lstm_fwd(floating[:, ::1] z, floating[:, ::1] c_prev,
              floating[:, ::1] gi, floating[:, ::1] gf,
              floating[:, ::1] gg, floating[:, ::1] go,
              floating[:, ::1] c_new, floating[:, ::1] tc,
              floating[:, ::1] h_new):
    cdef Py_ssize_t batch = c_prev.shape[0]
    cdef Py_ssize_t hidden = c_prev.shape[1]
    cdef Py_ssize_t b, j
    cdef floating iv, fv, gv, ov, cn, tv
    with nogil:
        for b in range(batch):
            for j in range(hidden):
                iv = _sig(z[b, j])
                fv = _sig(z[b, hidden + j])
                gv = _tanh(z[b, 2 * hidden + j])
                ov = _sig(z[b, 3 * hidden + j])
                cn = fv * c_prev[b, j] + iv * gv
                tv = _tanh(cn)
                gi[b, j] = iv
                gf[b, j] = fv
                gg[b, j] = gv
                go[b, j] = ov
                c_new[b, j] = cn
                tc[b, j] = tv
                h_new[b, j] = ov * tv


def _lstm_bwd(floating[:, ::1] gi, floating[:, ::1] gf,
              floating[:, ::1] gg, floating[:, ::1] go,
              floating[:, ::1] c_prev, floating[:, ::1] tc,
              floating[:, ::1] dh, floating[:, ::1] dc,
              floating[:, ::1] dz, floating[:, ::1] dc_prev):
    cdef Py_ssize_t batch = c_prev.shape[0]
    cdef Py_ssize_t hidden = c_prev.shape[1]
    cdef Py_ssize_t b, j
    cdef floating iv, fv, gv, ov, tv, do_, dct, di, df, dg
    with nogil:
        for b in range(batch):
            for j in range(hidden):
                iv = gi[b, j]
                fv = gf[b, j]
                gv = gg[b, j]
                ov = go[b, j]
                tv = tc[b, j]
                do_ = dh[b, j] * tv
                dct = dc[b, j] + dh[b, j] * ov * (1.0 - tv * tv)
                di = dct * gv
                dg = dct * iv
                df = dct * c_prev[b, j]
                dc_prev[b, j] = dct * fv
                dz[b, j] = di * iv * (1.0 - iv)
                dz[b, hidden + j] = df * fv * (1.0 - fv)
                dz[b, 2 * hidden + j] = dg * (1.0 - gv * gv)
                dz[b, 3 * hidden + j] = do_ * ov * (1.0 - ov)


def _conv_fwd(floating[:, ::1] x, floating[:, :, ::1] w, floating[:, ::1] y):
    cdef Py_ssize_t frames = x.shape[0]
    cdef Py_ssize_t kernel = w.shape[0]
    cdef Py_ssize_t c_in = w.shape[1]
    cdef Py_ssize_t c_out = w.shape[2]
    cdef Py_ssize_t pad = (kernel - 1) // 2
    cdef Py_ssize_t t, k, ci, co, src
    cdef floating xv
    with nogil:
        for t in range(frames):
            for k in range(kernel):
                src = t + k - pad
                if src < 0 or src >= frames:
                    continue
                for ci in range(c_in):
                    xv = x[src, ci]
                    for co in range(c_out):
                        y[t, co] += xv * w[k, ci, co]


def _conv_bwd(floating[:, ::1] x, floating[:, :, ::1] w, floating[:, ::1] gy,
              floating[:, ::1] dx, floating[:, :, ::1] dw, floating[::1] db):
    cdef Py_ssize_t frames = x.shape[0]
    cdef Py_ssize_t kernel = w.shape[0]
    cdef Py_ssize_t c_in = w.shape[1]
    cdef Py_ssize_t c_out = w.shape[2]
    cdef Py_ssize_t pad = (kernel - 1) // 2
    cdef Py_ssize_t t, k, ci, co, src
    cdef floating gv, xv, acc
    with nogil:
        for t in range(frames):
            for co in range(c_out):
                db[co] += gy[t, co]
        for t in range(frames):
            for k in range(kernel):
                src = t + k - pad
                if src < 0 or src >= frames:
                    continue
                for ci in range(c_in):
                    xv = x[src, ci]
                    acc = 0.0
                    for co in range(c_out):
                        gv = gy[t, co]
                        dw[k, ci, co] += xv * gv
                        acc += w[k, ci, co] * gv
                    dx[src, ci] += acc


def lstm_gates_forward(z, c_prev):
    z = np.ascontiguousarray(z)
    c_prev = np.ascontiguousarray(c_prev)
    gi = np.empty_like(c_prev)
    gf = np.empty_like(c_prev)
    gg = np.empty_like(c_prev)
    go = np.empty_like(c_prev)
    c_new = np.empty_like(c_prev)
    tc = np.empty_like(c_prev)
    h_new = np.empty_like(c_prev)
    _lstm_fwd(z, c_prev, gi, gf, gg, go, c_new, tc, h_new)
    return h_new, c_new, (gi, gf, gg, go, c_prev, tc)


def lstm_gates_backward(cache, dh, dc):
    gi, gf, gg, go, c_prev, tc = cache
    dh = np.ascontiguousarray(dh)
    dc = np.ascontiguousarray(dc)
    dz = np.empty((c_prev.shape[0], 4 * c_prev.shape[1]), dtype=c_prev.dtype)
    dc_prev = np.empty_like(c_prev)
    _lstm_bwd(gi, gf, gg, go, c_prev, tc, dh, dc, dz, dc_prev)
    return dz, dc_prev


def conv1d_forward(x, w, b=None):
    x = np.ascontiguousarray(x)
    w = np.ascontiguousarray(w)
    frames = x.shape[0]
    c_out = w.shape[2]
    if b is None:
        y = np.zeros((frames, c_out), dtype=x.dtype)
    else:
        y = np.tile(np.asarray(b, dtype=x.dtype), (frames, 1))
    _conv_fwd(x, w, y)
    return y


def conv1d_backward(x, w, gy):
    x = np.ascontiguousarray(x)
    w = np.ascontiguousarray(w)
    gy = np.ascontiguousarray(gy)
    dx = np.zeros_like(x)
    dw = np.zeros_like(w)
    db = np.zeros(w.shape[2], dtype=x.dtype)
    _conv_bwd(x, w, gy, dx, dw, db)
    return dx, dw, db
