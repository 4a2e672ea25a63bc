"""Shared builders for randomized layer-kind models used by the gradient
suite and the acceptance tests.

Central differences are only a valid derivative oracle where the model is
locally smooth: a ReLU pre-activation (or a max-pool top-2 gap) inside the
+-h perturbation band turns the estimate into an O(1)-error secant. The
generator therefore probes every kink margin and redraws instances until
all margins clear KINK_MARGIN, keeping the oracle applicable. Instances
stay deterministic: the redraw sequence is a pure function of the seed.
"""

import numpy as np

from neurocam.graph import ModelGraph
from neurocam.layers import (Conv3d, EdgePool, Fc, GlobalAvgPool,
                             GraphPathConv, MaxPool3d, NodePool, Relu,
                             ResidualBlock3d, SqueezeExcite)
from neurocam.optim import bce_with_logits

KINK_MARGIN = 0.02

LAYER_KINDS = ["fc", "conv3d", "maxpool", "residual", "gap",
               "gpc", "se", "edge_pool", "node_pool"]


def randomize(model, rng, scale=0.5):
    for arr in model.named_params().values():
        arr[...] = rng.standard_normal(arr.shape) * scale
    return model


def sym_matrix(rng, n):
    a = np.abs(rng.standard_normal((n, n)))
    a = (a + a.T) / 2.0
    np.fill_diagonal(a, 0.0)
    return a


def _draw(kind, rng):
    if kind == "fc":
        layers = [Fc("fc1", 4, 3), Relu("r1"), Fc("fc_out", 3, 1)]
        x = rng.standard_normal(4)
    elif kind == "conv3d":
        stride = int(rng.integers(1, 3))
        pad = int(rng.integers(0, 2))
        layers = [Conv3d("conv", 2, 3, 3, stride, pad), Relu("r1"),
                  GlobalAvgPool("gap"), Fc("fc_out", 3, 1)]
        x = rng.standard_normal((2, 4, 4, 4))
    elif kind == "maxpool":
        layers = [Conv3d("conv", 1, 2, 3, 1, 1), MaxPool3d("pool", 3, 2, 1),
                  GlobalAvgPool("gap"), Fc("fc_out", 2, 1)]
        x = rng.standard_normal((1, 5, 5, 5))
    elif kind == "residual":
        stride = int(rng.integers(1, 3))
        layers = [ResidualBlock3d("block", 2, 3, stride),
                  GlobalAvgPool("gap"), Fc("fc_out", 3, 1)]
        x = rng.standard_normal((2, 4, 4, 4))
    elif kind == "gap":
        layers = [Conv3d("conv", 1, 2, 3, 1, 1), GlobalAvgPool("gap"),
                  Fc("fc_out", 2, 1)]
        x = rng.standard_normal((1, 4, 4, 4))
    elif kind == "gpc":
        layers = [GraphPathConv("gpc1", 1, 3), EdgePool("ep"), NodePool("np"),
                  Fc("fc_out", 3, 1)]
        x = sym_matrix(rng, 6)[None]
    elif kind == "se":
        layers = [GraphPathConv("gpc1", 1, 3), SqueezeExcite("se1", 3, 2),
                  EdgePool("ep"), NodePool("np"), Fc("fc_out", 3, 1)]
        x = sym_matrix(rng, 6)[None]
    elif kind == "edge_pool":
        layers = [GraphPathConv("gpc1", 1, 2), EdgePool("ep"), NodePool("np"),
                  Fc("fc_out", 2, 1)]
        x = sym_matrix(rng, 5)[None]
    elif kind == "node_pool":
        layers = [GraphPathConv("gpc1", 1, 2), SqueezeExcite("se1", 2, 2),
                  EdgePool("ep"), NodePool("np"), Fc("fc_out", 2, 1)]
        x = sym_matrix(rng, 5)[None]
    else:
        raise ValueError(kind)
    model = ModelGraph(layers, name=f"rand_{kind}")
    return randomize(model, rng), x


def _pool_top2_gap(x, k, stride, pad):
    ci, xd, yd, zd = x.shape
    ox = (xd + 2 * pad - k) // stride + 1
    oy = (yd + 2 * pad - k) // stride + 1
    oz = (zd + 2 * pad - k) // stride + 1
    xp = np.full((ci, xd + 2 * pad, yd + 2 * pad, zd + 2 * pad), -np.inf)
    xp[:, pad:pad + xd, pad:pad + yd, pad:pad + zd] = x
    windows = np.stack([
        xp[:, a:a + stride * ox:stride, b:b + stride * oy:stride, c:c + stride * oz:stride]
        for a in range(k) for b in range(k) for c in range(k)
    ])
    top2 = np.sort(windows, axis=0)[-2:]
    gaps = top2[1] - top2[0]
    return gaps[np.isfinite(gaps)].min() if np.isfinite(gaps).any() else np.inf


def kink_margin(model, x):
    """Smallest distance of any kinked intermediate from its kink."""
    h = np.asarray(x, dtype=float)
    base = h[0] if h.ndim == 3 and h.shape[0] == 1 else h
    margins = [np.inf]
    for layer in model.layers:
        if isinstance(layer, Relu):
            margins.append(np.abs(h).min())
        elif isinstance(layer, GraphPathConv):
            t = (h @ base + base @ h) / 2.0
            pre = np.einsum("oi,inm->onm", layer.params["theta"], t)
            pre += layer.params["b"][:, None, None]
            margins.append(np.abs(pre).min())
        elif isinstance(layer, SqueezeExcite):
            z = h.reshape(h.shape[0], -1).mean(axis=1)
            margins.append(np.abs(layer.params["w1"] @ z).min())
        elif isinstance(layer, ResidualBlock3d):
            h1 = layer.conv1.forward(h)
            margins.append(np.abs(h1).min())
            h2 = layer.conv2.forward(np.maximum(h1, 0.0))
            short = h if layer.proj is None else layer.proj.forward(h)
            margins.append(np.abs(h2 + short).min())
        elif isinstance(layer, MaxPool3d):
            margins.append(_pool_top2_gap(h, layer.kernel, layer.stride, layer.pad))
        if layer.needs_base:
            layer.base = base
        h = layer.forward(h)
    return min(margins)


def make_model(kind, rng, max_tries=200):
    """Random small model exercising one layer kind; returns (model, x).

    Redraws until every kink margin clears KINK_MARGIN so the
    finite-difference oracle is valid at h=1e-3.
    """
    for _ in range(max_tries):
        model, x = _draw(kind, rng)
        if kink_margin(model, x) > KINK_MARGIN:
            return model, x
    raise RuntimeError(f"no kink-safe {kind} instance in {max_tries} draws")


def bce_grad_check(model, x, label, weight, h=1e-3):
    """Finite-difference check of d(loss)/d(params) through the BCE head."""
    logit, _ = model.forward(x)
    _, dz = bce_with_logits(logit, label, weight)
    analytic, _ = model.backward(dz)
    params = model.named_params()
    worst = 0.0
    for key, p in params.items():
        flat = p.reshape(-1)
        a_flat = analytic[key].reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            lo_up, _ = bce_with_logits(model.forward(x)[0], label, weight)
            flat[i] = orig - h
            lo_dn, _ = bce_with_logits(model.forward(x)[0], label, weight)
            flat[i] = orig
            numeric = (lo_up - lo_dn) / (2.0 * h)
            denom = max(abs(a_flat[i]), abs(numeric), 1e-8)
            worst = max(worst, abs(a_flat[i] - numeric) / denom)
    return worst
