"""Gradient-weighted class activation maps and parcel relevance values.

For the single-logit sigmoid head the two class scores are s_AD = z and
s_HC = -z, so a heatmap for HC is computed by backpropagating -1.
Per-layer maps g = ReLU(sum_k w_k a^k) use relevance weights w_k equal
to the spatial mean of d(s)/d(a^k); maps are upsampled to the input
resolution (bicubic for 2-D, trilinear for 3-D, negatives clamped) and
averaged element-wise over the tap layers.
"""

import numpy as np

from .dataio import AD
from .errors import ShapeError
from .interp import resize_bicubic, resize_linear


def class_sign(label):
    return 1.0 if label == AD else -1.0


def _weighted_map(activation, grad):
    # taps are (C, *spatial); a bare 2-D map counts as one channel
    if activation.ndim == 2:
        activation, grad = activation[None], grad[None]
    spatial_axes = tuple(range(1, activation.ndim))
    w = grad.mean(axis=spatial_axes)
    g = np.tensordot(w, activation, axes=(0, 0))
    return np.maximum(g, 0.0)


def gradcam_all_layers(model, x, label):
    """Per-tap heatmaps at native resolution from one forward/backward."""
    model.forward(x)
    _, tap_grads = model.backward(class_sign(label))
    return [_weighted_map(a, g) for a, g in zip(model._taps, tap_grads)]


def gradcam_layer(model, x, label, tap_index):
    """Heatmap of one tap layer (Eq. ReLU(sum_k w_k a^k))."""
    maps = gradcam_all_layers(model, x, label)
    if not 0 <= tap_index < len(maps):
        raise ShapeError(f"tap index {tap_index} out of range "
                         f"(model has {len(maps)} taps)")
    return maps[tap_index]


def upsample_heatmap(g, target_shape):
    """Match the input resolution: bicubic for 2-D maps, trilinear for
    3-D volumes; negative interpolation overshoot clamps to 0."""
    target_shape = tuple(target_shape)
    if g.shape == target_shape:
        return np.asarray(g, dtype=np.float64)
    if g.ndim == 2:
        out = resize_bicubic(g, target_shape)
    elif g.ndim == 3:
        out = resize_linear(g, target_shape)
    else:
        raise ShapeError(f"unsupported heatmap rank {g.ndim}")
    return np.maximum(out, 0.0)


def mean_heatmap(maps):
    """Element-wise mean over the per-layer (upsampled) heatmaps."""
    if not maps:
        raise ShapeError("no heatmaps to average")
    shapes = {m.shape for m in maps}
    if len(shapes) > 1:
        raise ShapeError(f"heatmap shapes differ: {shapes}")
    return np.mean(maps, axis=0)


def rv_volume(heatmap, mask):
    """Masked voxel mean of the heatmap over one parcel."""
    if heatmap.shape != mask.shape:
        raise ShapeError(f"heatmap {heatmap.shape} vs mask {mask.shape}")
    count = mask.sum()
    if count == 0:
        raise ShapeError("empty parcel mask")
    return float(heatmap[mask].sum() / count)


def rv_matrix(heatmap, parcel):
    """Off-diagonal mean of the heatmap row for one parcel (1-based);
    divisor N-1 (131 in production)."""
    n = heatmap.shape[0]
    if heatmap.shape != (n, n):
        raise ShapeError(f"expected a square heatmap, got {heatmap.shape}")
    row = heatmap[parcel - 1]
    return float((row.sum() - row[parcel - 1]) / (n - 1))


def session_heatmap(model, x, label):
    """Mean heatmap for one session: all taps, upsampled and averaged."""
    input_shape = x.shape[1:] if x.ndim in (3, 4) and x.shape[0] == 1 else x.shape
    maps = [upsample_heatmap(g, input_shape) for g in gradcam_all_layers(model, x, label)]
    return mean_heatmap(maps)


def relevance_from_heatmap(heatmap, atlas=None):
    """All parcel RVs from one mean heatmap. Square 2-D maps use the
    off-diagonal row mean; volumes need the atlas masks."""
    if heatmap.ndim == 2:
        n = heatmap.shape[0]
        return np.array([rv_matrix(heatmap, p) for p in range(1, n + 1)])
    if atlas is None:
        raise ShapeError("volume heatmaps need an atlas parcellation")
    return np.array([rv_volume(heatmap, atlas.mask(p))
                     for p in range(1, atlas.n_parcels + 1)])


def explain_session(model, x, label, atlas=None):
    """Mean heatmap + RV vector for one session, w.r.t. its true class."""
    heatmap = session_heatmap(model, x, label)
    return heatmap, relevance_from_heatmap(heatmap, atlas)
