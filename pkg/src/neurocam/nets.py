"""Builders for the two classifiers.

- build_bcgcnse: edge-based graph network; three GraphPathConv+SE blocks,
  edge/node pooling, two ReLU FC blocks, one-logit head. Grad-CAM taps on
  the three SE outputs.
- build_resnet3d: volumetric residual CNN; 7^3/s2 stem, 3^3/s2 max pool,
  four stages of two residual blocks (stages 2-4 downsample), GAP and a
  128/32 FC head. Taps on each stage's final output.

Parameters are He-uniform initialized from the given seed, in layer
order, so identical (config, seed) builds are bit-identical.
"""

from dataclasses import dataclass, field

import numpy as np

from .graph import ModelGraph
from .layers import (Conv3d, EdgePool, Fc, GlobalAvgPool, GraphPathConv,
                     MaxPool3d, NodePool, Relu, ResidualBlock3d, SqueezeExcite)


@dataclass
class BcGcnSeConfig:
    n_nodes: int = 132
    channels: tuple = (8, 16, 32)
    se_reduction: int = 4
    fc_widths: tuple = (32, 8)


@dataclass
class Cnn3dConfig:
    input_shape: tuple = (115, 144, 118)
    stem_channels: int = 8
    stage_channels: tuple = (8, 16, 32, 64)
    fc_widths: tuple = (128, 32)


def _he_uniform(rng, shape, fan_in):
    limit = np.sqrt(6.0 / max(fan_in, 1))
    return rng.uniform(-limit, limit, size=shape)


def _init_model(model, seed, n_nodes=1):
    rng = np.random.default_rng(seed)
    for layer in model.layers:
        params = layer.named_params()
        for key in params:
            arr = params[key]
            leaf = key.rsplit(".", 1)[-1]
            if leaf == "b":
                # connectivity inputs are non-negative, so a GPC channel
                # whose weights land all-negative would be born dead
                # (zero output, zero gradient); a small positive bias
                # keeps every channel trainable
                arr[...] = 0.01 if isinstance(layer, GraphPathConv) else 0.0
            elif leaf == "theta":
                # the path rule sums ~n products per entry, so the node
                # dimension counts toward fan-in; plain per-channel He
                # makes activations grow ~n-fold per layer
                arr[...] = _he_uniform(rng, arr.shape,
                                       arr.shape[1] * n_nodes ** 2)
            elif leaf in ("w", "w1", "w2"):
                fan_in = int(np.prod(arr.shape[1:]))
                arr[...] = _he_uniform(rng, arr.shape, fan_in)
            else:
                raise ValueError(f"unknown parameter kind: {key}")
    return model


def build_bcgcnse(config=None, seed=0):
    cfg = config or BcGcnSeConfig()
    if min(cfg.channels) < 1 or min(cfg.fc_widths) < 1 or cfg.se_reduction < 1:
        raise ValueError(f"invalid widths: {cfg}")
    n = cfg.n_nodes
    layers = []
    c_in = 1
    for i, c_out in enumerate(cfg.channels, start=1):
        layers.append(GraphPathConv(f"gpc{i}", c_in, c_out))
        se = SqueezeExcite(f"se{i}", c_out, cfg.se_reduction)
        se.tap = True
        layers.append(se)
        c_in = c_out
    layers.append(EdgePool("edge_pool"))
    layers.append(NodePool("node_pool"))
    width = c_in
    for i, w in enumerate(cfg.fc_widths, start=1):
        layers.append(Fc(f"fc{i}", width, w))
        layers.append(Relu(f"fc{i}_relu"))
        width = w
    layers.append(Fc("fc_out", width, 1))
    model = ModelGraph(layers, input_shape=(1, n, n), name="bcgcnse")
    model.config = cfg
    return _init_model(model, seed, n_nodes=n)


def conv_out_shape(shape, kernel, stride, pad):
    return tuple((d + 2 * pad - kernel) // stride + 1 for d in shape)


def build_resnet3d(config=None, seed=0):
    cfg = config or Cnn3dConfig()
    if len(cfg.stage_channels) != 4:
        raise ValueError(f"expected 4 stage widths, got {cfg.stage_channels}")
    if min((cfg.stem_channels,) + tuple(cfg.stage_channels) + tuple(cfg.fc_widths)) < 1:
        raise ValueError(f"invalid widths: {cfg}")
    layers = [
        Conv3d("stem", 1, cfg.stem_channels, 7, stride=2, pad=3),
        Relu("stem_relu"),
        MaxPool3d("stem_pool", 3, stride=2, pad=1),
    ]
    c_in = cfg.stem_channels
    for s, c_out in enumerate(cfg.stage_channels, start=1):
        stride = 1 if s == 1 else 2
        layers.append(ResidualBlock3d(f"stage{s}_block1", c_in, c_out, stride))
        block2 = ResidualBlock3d(f"stage{s}_block2", c_out, c_out, 1)
        block2.tap = True
        layers.append(block2)
        c_in = c_out
    layers.append(GlobalAvgPool("gap"))
    width = c_in
    for i, w in enumerate(cfg.fc_widths, start=1):
        layers.append(Fc(f"fc{i}", width, w))
        layers.append(Relu(f"fc{i}_relu"))
        width = w
    layers.append(Fc("fc_out", width, 1))
    model = ModelGraph(layers, input_shape=(1,) + tuple(cfg.input_shape), name="resnet3d")
    model.config = cfg
    return _init_model(model, seed)


def stage_shapes(config):
    """Spatial shape after the stem, pool, and each stage (stride chain)."""
    shape = tuple(config.input_shape)
    out = {"stem": conv_out_shape(shape, 7, 2, 3)}
    out["pool"] = conv_out_shape(out["stem"], 3, 2, 1)
    prev = out["pool"]
    for s in range(1, 5):
        prev = prev if s == 1 else conv_out_shape(prev, 3, 2, 1)
        out[f"stage{s}"] = prev
    return out
