"""Volume conditioning, connectivity scaling, and SMOTE balancing.

The volume chain mirrors the ingestion contract: center-crop to
148x180x144, trilinear resize to 115x144x118, then z-score over the
nonzero (brain) voxels. Connectivity matrices are max-scaled into [0,1].
SMOTE operates on vectorized upper triangles of the training matrices.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DataError, NumericError
from .interp import resize_linear

CROP_SHAPE = (148, 180, 144)
FINAL_SHAPE = (115, 144, 118)


@dataclass
class VolumeSpec:
    crop_shape: tuple = CROP_SHAPE
    final_shape: tuple = FINAL_SHAPE


def crop_volume(vol, crop_shape=CROP_SHAPE):
    """Centered crop; per-axis offset floor((in - out) / 2)."""
    if vol.ndim != len(crop_shape):
        raise DataError(f"rank mismatch: {vol.shape} vs {crop_shape}")
    if any(i < o for i, o in zip(vol.shape, crop_shape)):
        raise DataError(f"input {vol.shape} smaller than crop {crop_shape}")
    slices = tuple(slice((i - o) // 2, (i - o) // 2 + o)
                   for i, o in zip(vol.shape, crop_shape))
    return vol[slices]


def resize_volume(vol, out_shape=FINAL_SHAPE):
    return resize_linear(vol, out_shape)


def normalize_volume(vol, center=True):
    """Z-score over nonzero voxels; background stays exactly 0."""
    vol = np.asarray(vol, dtype=np.float64)
    brain = vol != 0
    if not brain.any():
        raise NumericError("no nonzero voxels to normalize")
    values = vol[brain]
    sigma = values.std()
    if sigma == 0:
        raise NumericError("zero variance over nonzero voxels")
    out = np.zeros_like(vol)
    if center:
        out[brain] = (values - values.mean()) / sigma
    else:
        out[brain] = values / sigma
    return out


def scale_matrix(values):
    """Divide by the max entry, mapping into [0, 1]; identity on zeros."""
    values = np.asarray(values, dtype=np.float64)
    top = values.max() if values.size else 0.0
    return values / top if top > 0 else values.copy()


def upper_tri_vector(mat):
    n = mat.shape[0]
    return mat[np.triu_indices(n, k=1)]


def matrix_from_upper_tri(vec, n):
    out = np.zeros((n, n))
    out[np.triu_indices(n, k=1)] = vec
    return out + out.T


def smote_augment(minority, k=5, target_count=None, seed=0):
    """Oversample by interpolating toward k-nearest neighbors.

    `minority` is a list/array of same-shape sample vectors. Emits
    target_count - len(minority) synthetic vectors, each
    x + lam * (nn - x) with lam ~ U(0,1) and nn drawn uniformly from the
    k Euclidean nearest neighbors of a uniformly drawn real sample.
    Returns the augmented set: the (unmodified) real samples first, then
    the synthetics. Deterministic under seed.
    """
    x = np.asarray([np.ravel(v) for v in minority], dtype=np.float64)
    m = x.shape[0]
    if m < k + 1:
        raise DataError(f"SMOTE needs at least k+1={k + 1} samples, got {m}")
    if target_count is None or target_count <= m:
        return [v.copy() for v in x]
    # pairwise distances, self excluded; ties resolved by index order
    d2 = ((x[:, None, :] - x[None, :, :]) ** 2).sum(axis=2)
    np.fill_diagonal(d2, np.inf)
    neighbors = np.argsort(d2, axis=1, kind="stable")[:, :k]
    rng = np.random.default_rng(seed)
    out = [v.copy() for v in x]
    for _ in range(target_count - m):
        i = int(rng.integers(m))
        j = neighbors[i, int(rng.integers(k))]
        lam = rng.random()
        out.append(x[i] + lam * (x[j] - x[i]))
    return out
