"""Pure-numpy kernels for the 3D conv/pool hot paths.

These are the fallback implementations used when numba is disabled
(NEUROCAM_NO_NUMBA=1) or unavailable. Convolutions loop over kernel
offsets and delegate the channel contraction to BLAS, so they stay
vectorized without materializing im2col buffers.
"""

import numpy as np


def _out_dim(n, k, stride, pad):
    return (n + 2 * pad - k) // stride + 1


def conv3d_forward(x, w, b, stride, pad):
    """Cross-correlate x (Ci,X,Y,Z) with w (Co,Ci,k,k,k), add bias.

    Returns (Co, X', Y', Z') with X' = floor((X+2p-k)/s)+1.
    """
    ci, xd, yd, zd = x.shape
    co, ci_w, k, _, _ = w.shape
    if ci_w != ci:
        raise ValueError(f"channel mismatch: input {ci}, kernel {ci_w}")
    ox, oy, oz = (_out_dim(d, k, stride, pad) for d in (xd, yd, zd))
    xp = np.pad(x, ((0, 0), (pad, pad), (pad, pad), (pad, pad))) if pad else x
    out = np.empty((co, ox, oy, oz))
    out[:] = b[:, None, None, None]
    s = stride
    for a in range(k):
        for bb in range(k):
            for c in range(k):
                patch = xp[:, a:a + s * ox:s, bb:bb + s * oy:s, c:c + s * oz:s]
                out += np.tensordot(w[:, :, a, bb, c], patch, axes=(1, 0))
    return out


def conv3d_backward(x, w, dy, stride, pad):
    """Gradients of conv3d_forward. Returns (dx, dw, db)."""
    ci, xd, yd, zd = x.shape
    co, _, k, _, _ = w.shape
    _, ox, oy, oz = dy.shape
    s = stride
    xp = np.pad(x, ((0, 0), (pad, pad), (pad, pad), (pad, pad))) if pad else x
    dxp = np.zeros_like(xp)
    dw = np.zeros_like(w)
    for a in range(k):
        for bb in range(k):
            for c in range(k):
                patch = xp[:, a:a + s * ox:s, bb:bb + s * oy:s, c:c + s * oz:s]
                dw[:, :, a, bb, c] = np.tensordot(dy, patch, axes=([1, 2, 3], [1, 2, 3]))
                dxp[:, a:a + s * ox:s, bb:bb + s * oy:s, c:c + s * oz:s] += np.tensordot(
                    w[:, :, a, bb, c], dy, axes=(0, 0))
    db = dy.sum(axis=(1, 2, 3))
    if pad:
        dx = dxp[:, pad:pad + xd, pad:pad + yd, pad:pad + zd]
    else:
        dx = dxp
    return dx, dw, db


def maxpool3d_forward(x, k, stride, pad):
    """Max pool over k^3 windows. Returns (out, argmax).

    argmax holds flat indices into the unpadded input (C*X*Y*Z space) so
    the backward pass can scatter without re-deriving window geometry.
    Padding is virtual -inf, so the argmax always lands on a real voxel.
    """
    ci, xd, yd, zd = x.shape
    ox, oy, oz = (_out_dim(d, k, stride, pad) for d in (xd, yd, zd))
    s = stride
    xp = np.full((ci, xd + 2 * pad, yd + 2 * pad, zd + 2 * pad), -np.inf)
    xp[:, pad:pad + xd, pad:pad + yd, pad:pad + zd] = x
    out = np.full((ci, ox, oy, oz), -np.inf)
    arg = np.zeros((ci, ox, oy, oz), dtype=np.int64)
    # flat index of each padded window position, mapped back to unpadded x
    for a in range(k):
        for bb in range(k):
            for c in range(k):
                patch = xp[:, a:a + s * ox:s, bb:bb + s * oy:s, c:c + s * oz:s]
                better = patch > out
                if not better.any():
                    continue
                ii, jj, kk = np.meshgrid(
                    np.arange(ox) * s + a - pad,
                    np.arange(oy) * s + bb - pad,
                    np.arange(oz) * s + c - pad,
                    indexing="ij",
                )
                flat = (ii * yd + jj) * zd + kk
                cidx = np.arange(ci)[:, None, None, None]
                full_flat = cidx * (xd * yd * zd) + flat[None]
                out = np.where(better, patch, out)
                arg = np.where(better, full_flat, arg)
    return out, arg


def maxpool3d_backward(dy, arg, x_shape):
    dx = np.zeros(int(np.prod(x_shape)))
    np.add.at(dx, arg.ravel(), dy.ravel())
    return dx.reshape(x_shape)
