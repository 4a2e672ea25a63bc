"""Numba-jitted kernels for the 3D conv/pool hot paths.

Same contracts as numpy_backend; see there for shape conventions.
Compiled lazily on first call, cached on disk across processes.

The convolutions transpose to channel-last internally so the innermost
loops are contiguous multiply-accumulate runs over (c_in, c_out); the
kernel-tap bounds are hoisted out of the spatial loops.
"""

import numba
import numpy as np


@numba.njit(cache=True, inline="always")
def _tap_bounds(pos, tap_count, n_in, stride, pad):
    """Valid kernel-tap range [lo, hi) at output position pos."""
    x0 = pos * stride - pad
    lo = -x0 if x0 < 0 else 0
    hi = n_in - x0 if x0 + tap_count > n_in else tap_count
    return x0, lo, hi


@numba.njit(cache=True, fastmath=False)
def _conv3d_forward_t(x_t, w_t, b, stride, pad, ox, oy, oz):
    xd, yd, zd, ci = x_t.shape
    k = w_t.shape[0]
    co = w_t.shape[4]
    out_t = np.empty((ox, oy, oz, co))
    for i in range(ox):
        x0, alo, ahi = _tap_bounds(i, k, xd, stride, pad)
        for j in range(oy):
            y0, blo, bhi = _tap_bounds(j, k, yd, stride, pad)
            for l in range(oz):
                z0, clo, chi = _tap_bounds(l, k, zd, stride, pad)
                acc = b.copy()
                for a in range(alo, ahi):
                    for bb in range(blo, bhi):
                        for cc in range(clo, chi):
                            xrow = x_t[x0 + a, y0 + bb, z0 + cc]
                            wmat = w_t[a, bb, cc]
                            for c in range(ci):
                                xv = xrow[c]
                                wrow = wmat[c]
                                for o in range(co):
                                    acc[o] += xv * wrow[o]
                out_t[i, j, l] = acc
    return out_t


def conv3d_forward(x, w, b, stride, pad):
    ci, xd, yd, zd = x.shape
    k = w.shape[2]
    ox = (xd + 2 * pad - k) // stride + 1
    oy = (yd + 2 * pad - k) // stride + 1
    oz = (zd + 2 * pad - k) // stride + 1
    x_t = np.ascontiguousarray(x.transpose(1, 2, 3, 0))
    w_t = np.ascontiguousarray(w.transpose(2, 3, 4, 1, 0))
    out_t = _conv3d_forward_t(x_t, w_t, b, stride, pad, ox, oy, oz)
    return np.ascontiguousarray(out_t.transpose(3, 0, 1, 2))


@numba.njit(cache=True, fastmath=False)
def _conv3d_backward_t(x_t, w_t, dy_t, stride, pad):
    xd, yd, zd, ci = x_t.shape
    k = w_t.shape[0]
    co = w_t.shape[4]
    ox, oy, oz = dy_t.shape[0], dy_t.shape[1], dy_t.shape[2]
    dx_t = np.zeros_like(x_t)
    dw_t = np.zeros_like(w_t)
    db = np.zeros(co)
    for i in range(ox):
        x0, alo, ahi = _tap_bounds(i, k, xd, stride, pad)
        for j in range(oy):
            y0, blo, bhi = _tap_bounds(j, k, yd, stride, pad)
            for l in range(oz):
                z0, clo, chi = _tap_bounds(l, k, zd, stride, pad)
                g = dy_t[i, j, l]
                for o in range(co):
                    db[o] += g[o]
                for a in range(alo, ahi):
                    for bb in range(blo, bhi):
                        for cc in range(clo, chi):
                            xrow = x_t[x0 + a, y0 + bb, z0 + cc]
                            dxrow = dx_t[x0 + a, y0 + bb, z0 + cc]
                            wmat = w_t[a, bb, cc]
                            dwmat = dw_t[a, bb, cc]
                            for c in range(ci):
                                xv = xrow[c]
                                wrow = wmat[c]
                                dwrow = dwmat[c]
                                acc = 0.0
                                for o in range(co):
                                    gv = g[o]
                                    acc += wrow[o] * gv
                                    dwrow[o] += xv * gv
                                dxrow[c] += acc
    return dx_t, dw_t, db


def conv3d_backward(x, w, dy, stride, pad):
    x_t = np.ascontiguousarray(x.transpose(1, 2, 3, 0))
    w_t = np.ascontiguousarray(w.transpose(2, 3, 4, 1, 0))
    dy_t = np.ascontiguousarray(dy.transpose(1, 2, 3, 0))
    dx_t, dw_t, db = _conv3d_backward_t(x_t, w_t, dy_t, stride, pad)
    dx = np.ascontiguousarray(dx_t.transpose(3, 0, 1, 2))
    dw = np.ascontiguousarray(dw_t.transpose(4, 3, 0, 1, 2))
    return dx, dw, db


@numba.njit(cache=True, fastmath=False)
def maxpool3d_forward(x, k, stride, pad):
    ci, xd, yd, zd = x.shape
    ox = (xd + 2 * pad - k) // stride + 1
    oy = (yd + 2 * pad - k) // stride + 1
    oz = (zd + 2 * pad - k) // stride + 1
    out = np.empty((ci, ox, oy, oz))
    arg = np.zeros((ci, ox, oy, oz), dtype=np.int64)
    for c in range(ci):
        for i in range(ox):
            x0, alo, ahi = _tap_bounds(i, k, xd, stride, pad)
            for j in range(oy):
                y0, blo, bhi = _tap_bounds(j, k, yd, stride, pad)
                for l in range(oz):
                    z0, clo, chi = _tap_bounds(l, k, zd, stride, pad)
                    best = -np.inf
                    besti = 0
                    for a in range(alo, ahi):
                        xi = x0 + a
                        for bb in range(blo, bhi):
                            yi = y0 + bb
                            for cc in range(clo, chi):
                                zi = z0 + cc
                                v = x[c, xi, yi, zi]
                                if v > best:
                                    best = v
                                    besti = ((c * xd + xi) * yd + yi) * zd + zi
                    out[c, i, j, l] = best
                    arg[c, i, j, l] = besti
    return out, arg


@numba.njit(cache=True, fastmath=False)
def maxpool3d_backward(dy, arg, x_shape):
    n = x_shape[0] * x_shape[1] * x_shape[2] * x_shape[3]
    dx = np.zeros(n)
    df = dy.ravel()
    af = arg.ravel()
    for i in range(df.size):
        dx[af[i]] += df[i]
    return dx.reshape((x_shape[0], x_shape[1], x_shape[2], x_shape[3]))
