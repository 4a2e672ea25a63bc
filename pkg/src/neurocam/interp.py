"""Resampling primitives.

Both resizers use the align-corners-false convention: output sample i
maps to source coordinate (i + 0.5) * in/out - 0.5, with coordinates
clamped to the valid range (border replication).
"""

import numpy as np


def _source_coords(n_in, n_out):
    return (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5


def resize_linear(vol, out_shape):
    """Separable linear resample of an N-d array (N = 1..3 in practice).

    Linear interpolation is a tensor-product spline, so applying it one
    axis at a time reproduces the full tri/bi/linear result.
    """
    out_shape = tuple(out_shape)
    if len(out_shape) != vol.ndim:
        raise ValueError(f"rank mismatch: {vol.shape} -> {out_shape}")
    if min(out_shape) < 1:
        raise ValueError(f"non-positive output shape {out_shape}")
    out = np.asarray(vol, dtype=np.float64)
    for axis, n_out in enumerate(out_shape):
        n_in = out.shape[axis]
        if n_in == n_out:
            continue
        pos = np.clip(_source_coords(n_in, n_out), 0.0, n_in - 1.0)
        lo = np.floor(pos).astype(np.intp)
        hi = np.minimum(lo + 1, n_in - 1)
        frac = pos - lo
        moved = np.moveaxis(out, axis, 0)
        shape = (-1,) + (1,) * (moved.ndim - 1)
        res = moved[lo] * (1.0 - frac.reshape(shape)) + moved[hi] * frac.reshape(shape)
        out = np.moveaxis(res, 0, axis)
    return out


def _cubic_weights(frac, a=-0.5):
    """Catmull-Rom style kernel weights for the 4 taps around a sample."""
    # taps at offsets -1, 0, 1, 2 relative to floor(pos); distance to tap
    d = np.stack([frac + 1.0, frac, 1.0 - frac, 2.0 - frac])
    w = np.empty_like(d)
    near = d <= 1.0
    w[near] = ((a + 2.0) * d[near] - (a + 3.0)) * d[near] ** 2 + 1.0
    far = ~near
    w[far] = a * (((d[far] - 5.0) * d[far] + 8.0) * d[far] - 4.0)
    return w


def resize_bicubic(img, out_shape, a=-0.5):
    """Bicubic resample of a 2-D array (separable, border-clamped)."""
    if img.ndim != 2:
        raise ValueError(f"expected 2-D input, got shape {img.shape}")
    out = np.asarray(img, dtype=np.float64)
    for axis, n_out in enumerate(out_shape):
        n_in = out.shape[axis]
        if n_in == n_out:
            continue
        pos = _source_coords(n_in, n_out)
        lo = np.floor(pos).astype(np.intp)
        frac = pos - lo
        w = _cubic_weights(frac, a)
        moved = np.moveaxis(out, axis, 0)
        res = np.zeros((n_out,) + moved.shape[1:])
        shape = (-1,) + (1,) * (moved.ndim - 1)
        for tap, off in enumerate((-1, 0, 1, 2)):
            idx = np.clip(lo + off, 0, n_in - 1)
            res += moved[idx] * w[tap].reshape(shape)
        out = np.moveaxis(res, 0, axis)
    return out
