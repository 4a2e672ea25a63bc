"""Model container: ordered layer stack with a scalar-logit head,
Grad-CAM activation taps, and the on-disk checkpoint format.

Checkpoint layout (documented in docs/formats.md):
    bytes 0..7   little-endian uint64, length of the JSON index
    JSON index   {"format": "neurocam-ckpt-v1", "meta": {...},
                  "params": [{"key", "shape", "offset"}, ...]}
    blob         raw little-endian float64, C order; `offset` is the
                 byte position of each entry relative to blob start.
"""

import json
import struct

import numpy as np

from .errors import NumericError, ShapeError

CKPT_FORMAT = "neurocam-ckpt-v1"


class ModelGraph:
    """Ordered layer stack producing one pre-sigmoid logit.

    A ModelGraph instance is exclusively owned while forward/backward
    run (layers hold mutable caches); distinct instances are safe on
    distinct threads.
    """

    def __init__(self, layers, input_shape=None, name="model"):
        self.layers = list(layers)
        self.input_shape = tuple(input_shape) if input_shape is not None else None
        self.name = name
        self._has_forward = False
        names = [l.name for l in self.layers]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate layer names in {name}: {names}")

    @property
    def tap_layers(self):
        return [l for l in self.layers if l.tap]

    def named_params(self):
        """Flat mapping 'layer.param' -> the live parameter array."""
        out = {}
        for layer in self.layers:
            for k, v in layer.named_params().items():
                out[f"{layer.name}.{k}"] = v
        return out

    def named_grads(self):
        out = {}
        for layer in self.layers:
            for k, v in layer.named_grads().items():
                out[f"{layer.name}.{k}"] = v
        return out

    def param_count(self):
        return sum(v.size for v in self.named_params().values())

    def forward(self, x):
        """Run the stack. Returns (logit, taps); taps are the activation
        arrays of tap-marked layers, in layer order."""
        x = np.asarray(x, dtype=np.float64)
        if self.input_shape is not None and x.shape != self.input_shape:
            raise ShapeError(f"{self.name}: expected input {self.input_shape}, got {x.shape}")
        if not np.all(np.isfinite(x)):
            raise NumericError(f"{self.name}: non-finite values in input")
        base = x[0] if x.ndim == 3 and x.shape[0] == 1 else x
        taps = []
        h = x
        for layer in self.layers:
            if layer.needs_base:
                layer.base = base
            h = layer.forward(h)
            if layer.tap:
                taps.append(h)
        if h.size != 1:
            raise ShapeError(f"{self.name}: head produced shape {h.shape}, want a scalar")
        logit = float(h.reshape(-1)[0])
        if not np.isfinite(logit):
            raise NumericError(f"{self.name}: non-finite logit")
        self._has_forward = True
        self._out_shape = h.shape
        self._taps = taps
        return logit, taps

    def backward(self, upstream=1.0):
        """Backpropagate d(score)/d(logit)=upstream through the stack.

        Returns (param_grads, tap_grads): a flat 'layer.param' gradient
        map and d(score)/d(activation) for every tap, in tap order.
        """
        if not self._has_forward:
            raise RuntimeError(f"{self.name}: backward called before forward")
        dy = np.full(self._out_shape, float(upstream))
        tap_grads = []
        for layer in reversed(self.layers):
            if layer.tap:
                tap_grads.append(dy)
            dy = layer.backward(dy)
        tap_grads.reverse()
        return self.named_grads(), tap_grads


def save_checkpoint(model, path, meta=None):
    params = model.named_params()
    index = {"format": CKPT_FORMAT, "meta": dict(meta or {}), "params": []}
    offset = 0
    blobs = []
    for key in sorted(params):
        arr = np.ascontiguousarray(params[key], dtype="<f8")
        index["params"].append({"key": key, "shape": list(arr.shape), "offset": offset})
        blobs.append(arr.tobytes())
        offset += arr.nbytes
    payload = json.dumps(index, sort_keys=True, separators=(",", ":")).encode()
    with open(path, "wb") as f:
        f.write(struct.pack("<Q", len(payload)))
        f.write(payload)
        for b in blobs:
            f.write(b)


def read_checkpoint(path):
    """Returns (meta, {key: array}) without needing a model instance."""
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < 8:
        raise ShapeError(f"{path}: truncated checkpoint")
    (n,) = struct.unpack_from("<Q", raw, 0)
    index = json.loads(raw[8:8 + n].decode())
    if index.get("format") != CKPT_FORMAT:
        raise ShapeError(f"{path}: not a {CKPT_FORMAT} file")
    blob = raw[8 + n:]
    out = {}
    for ent in index["params"]:
        shape = tuple(ent["shape"])
        size = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(blob, dtype="<f8", count=size, offset=ent["offset"])
        out[ent["key"]] = arr.reshape(shape).astype(np.float64)
    return index["meta"], out


def load_checkpoint(model, path):
    """Load parameters into an already-built architecture, in place."""
    meta, stored = read_checkpoint(path)
    params = model.named_params()
    missing = set(params) - set(stored)
    extra = set(stored) - set(params)
    if missing or extra:
        raise ShapeError(f"{path}: checkpoint/model mismatch "
                         f"(missing {sorted(missing)}, extra {sorted(extra)})")
    for key, arr in params.items():
        if stored[key].shape != arr.shape:
            raise ShapeError(f"{path}: shape mismatch for {key}")
        arr[...] = stored[key]
    return meta
