"""Layer nodes with explicit forward/backward passes.

Every layer caches what its backward needs during forward; backward
returns the gradient w.r.t. its input and fills `grads` with parameter
gradients keyed like `params`. The layer set is closed (see graph.py),
so reverse-mode differentiation is a straight walk over the layer list
rather than a general tape.

All arrays are float64. Inputs are never mutated.
"""

import numpy as np

from . import kernels
from .errors import ShapeError


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


class Layer:
    """Base layer. Subclasses set `params` in __init__ and implement
    forward/backward."""

    tap = False
    needs_base = False

    def __init__(self, name):
        self.name = name
        self.params = {}
        self.grads = {}

    def forward(self, x):
        raise NotImplementedError

    def backward(self, dy):
        raise NotImplementedError

    def named_params(self):
        return dict(self.params)

    def named_grads(self):
        return dict(self.grads)

    def __repr__(self):
        return f"{type(self).__name__}({self.name!r})"


class Identity(Layer):
    def __init__(self, name="identity", tap=False):
        super().__init__(name)
        self.tap = tap

    def forward(self, x):
        return x

    def backward(self, dy):
        return dy


class Relu(Layer):
    def forward(self, x):
        y = np.maximum(x, 0.0)
        self._mask = y > 0
        return y

    def backward(self, dy):
        # zero gradient exactly where the forward output was zero
        return dy * self._mask


class Sum(Layer):
    """Sums all elements into a 1-vector; a trivial scalar head for tests."""

    def forward(self, x):
        self._shape = x.shape
        return np.array([x.sum()])

    def backward(self, dy):
        return np.full(self._shape, dy[0])


class Fc(Layer):
    """Dense layer on 1-D vectors: y = w @ x + b."""

    def __init__(self, name, n_in, n_out):
        super().__init__(name)
        self.n_in = n_in
        self.n_out = n_out
        self.params = {"w": np.zeros((n_out, n_in)), "b": np.zeros(n_out)}

    def forward(self, x):
        if x.shape != (self.n_in,):
            raise ShapeError(f"{self.name}: expected ({self.n_in},), got {x.shape}")
        self._x = x
        return self.params["w"] @ x + self.params["b"]

    def backward(self, dy):
        self.grads = {"w": np.outer(dy, self._x), "b": dy.copy()}
        return self.params["w"].T @ dy


class GlobalAvgPool(Layer):
    """Per-channel mean over all trailing (spatial) axes: (C, ...) -> (C,)."""

    def forward(self, x):
        self._shape = x.shape
        self._n = int(np.prod(x.shape[1:]))
        return x.reshape(x.shape[0], -1).mean(axis=1)

    def backward(self, dy):
        out = np.empty(self._shape)
        out[:] = (dy / self._n).reshape((-1,) + (1,) * (len(self._shape) - 1))
        return out


class Conv3d(Layer):
    """3D cross-correlation, zero padding, square kernel."""

    def __init__(self, name, c_in, c_out, kernel, stride=1, pad=0):
        super().__init__(name)
        self.c_in, self.c_out = c_in, c_out
        self.kernel, self.stride, self.pad = kernel, stride, pad
        self.params = {
            "w": np.zeros((c_out, c_in, kernel, kernel, kernel)),
            "b": np.zeros(c_out),
        }

    def forward(self, x):
        if x.ndim != 4 or x.shape[0] != self.c_in:
            raise ShapeError(f"{self.name}: expected ({self.c_in},X,Y,Z), got {x.shape}")
        self._x = x
        return kernels.conv3d_forward(x, self.params["w"], self.params["b"],
                                      self.stride, self.pad)

    def backward(self, dy):
        dx, dw, db = kernels.conv3d_backward(self._x, self.params["w"], dy,
                                             self.stride, self.pad)
        self.grads = {"w": dw, "b": db}
        return dx


class MaxPool3d(Layer):
    def __init__(self, name, kernel, stride, pad=0):
        super().__init__(name)
        self.kernel, self.stride, self.pad = kernel, stride, pad

    def forward(self, x):
        self._x_shape = x.shape
        y, self._arg = kernels.maxpool3d_forward(x, self.kernel, self.stride, self.pad)
        return y

    def backward(self, dy):
        return kernels.maxpool3d_backward(dy, self._arg, self._x_shape)


class ResidualBlock3d(Layer):
    """conv(3^3) -> ReLU -> conv(3^3), input added back, final ReLU.

    When stride != 1 or the channel count changes, the shortcut is a
    1^3 stride-matched projection; otherwise it is the identity.
    """

    def __init__(self, name, c_in, c_out, stride=1):
        super().__init__(name)
        self.conv1 = Conv3d(name + ".conv1", c_in, c_out, 3, stride, 1)
        self.conv2 = Conv3d(name + ".conv2", c_out, c_out, 3, 1, 1)
        if stride != 1 or c_in != c_out:
            self.proj = Conv3d(name + ".proj", c_in, c_out, 1, stride, 0)
        else:
            self.proj = None

    def _subs(self):
        subs = [("conv1", self.conv1), ("conv2", self.conv2)]
        if self.proj is not None:
            subs.append(("proj", self.proj))
        return subs

    def named_params(self):
        return {f"{tag}.{k}": v for tag, sub in self._subs()
                for k, v in sub.params.items()}

    def named_grads(self):
        return {f"{tag}.{k}": v for tag, sub in self._subs()
                for k, v in sub.grads.items()}

    def forward(self, x):
        h = self.conv1.forward(x)
        self._mask1 = h > 0
        h = np.maximum(h, 0.0)
        h = self.conv2.forward(h)
        short = x if self.proj is None else self.proj.forward(x)
        y = h + short
        self._mask_out = y > 0
        return np.maximum(y, 0.0)

    def backward(self, dy):
        d = dy * self._mask_out
        dh = self.conv2.backward(d)
        dx = self.conv1.backward(dh * self._mask1)
        if self.proj is None:
            dx = dx + d
        else:
            dx = dx + self.proj.backward(d)
        return dx


class GraphPathConv(Layer):
    """Edge-map convolution mixing one-step path composition.

    y_o = ReLU(sum_i theta[o,i] * (x_i @ A + A @ x_i) / 2 + b_o), where A
    is the session's base connectivity matrix (set by the model before
    each forward). Symmetric x and A keep every output map symmetric, and
    stacking layers composes progressively higher-order paths.

    The gradient w.r.t. A itself is not propagated: A is the raw model
    input and nothing downstream consumes d(score)/d(input).
    """

    needs_base = True

    def __init__(self, name, c_in, c_out):
        super().__init__(name)
        self.c_in, self.c_out = c_in, c_out
        self.params = {"theta": np.zeros((c_out, c_in)), "b": np.zeros(c_out)}
        self.base = None

    def forward(self, x):
        if x.ndim != 3 or x.shape[0] != self.c_in:
            raise ShapeError(f"{self.name}: expected ({self.c_in},N,N), got {x.shape}")
        a = self.base
        if a is None or a.shape != x.shape[1:]:
            raise ShapeError(f"{self.name}: base matrix missing or mismatched")
        t = (x @ a + a @ x) / 2.0
        pre = np.einsum("oi,inm->onm", self.params["theta"], t)
        pre += self.params["b"][:, None, None]
        self._x, self._t, self._a = x, t, a
        self._mask = pre > 0
        return np.maximum(pre, 0.0)

    def backward(self, dy):
        g = dy * self._mask
        self.grads = {
            "theta": np.einsum("onm,inm->oi", g, self._t),
            "b": g.sum(axis=(1, 2)),
        }
        at = self._a.T
        dt = np.einsum("oi,onm->inm", self.params["theta"], g)
        return (dt @ at + at @ dt) / 2.0


class SqueezeExcite(Layer):
    """Channel gating: squeeze by global mean, excite by a 2-layer MLP.

    y_c = sigmoid(w2 @ ReLU(w1 @ z))_c * x_c with z_c the mean of map c.
    """

    def __init__(self, name, channels, reduction=4):
        super().__init__(name)
        self.channels = channels
        m = -(-channels // reduction)  # ceil
        self.hidden = m
        self.params = {"w1": np.zeros((m, channels)), "w2": np.zeros((channels, m))}

    def forward(self, x):
        if x.shape[0] != self.channels:
            raise ShapeError(f"{self.name}: expected {self.channels} channels, got {x.shape}")
        self._x = x
        self._n = int(np.prod(x.shape[1:]))
        z = x.reshape(x.shape[0], -1).mean(axis=1)
        u1 = self.params["w1"] @ z
        h = np.maximum(u1, 0.0)
        s = _sigmoid(self.params["w2"] @ h)
        self._z, self._u1, self._h, self._s = z, u1, h, s
        return x * s.reshape((-1,) + (1,) * (x.ndim - 1))

    def backward(self, dy):
        x, s = self._x, self._s
        ds = (dy * x).reshape(x.shape[0], -1).sum(axis=1)
        du2 = ds * s * (1.0 - s)
        dh = self.params["w2"].T @ du2
        du1 = dh * (self._u1 > 0)
        dz = self.params["w1"].T @ du1
        self.grads = {"w1": np.outer(du1, self._z), "w2": np.outer(du2, self._h)}
        dx = dy * s.reshape((-1,) + (1,) * (x.ndim - 1))
        dx += (dz / self._n).reshape((-1,) + (1,) * (x.ndim - 1))
        return dx


class EdgePool(Layer):
    """Edge maps (C,N,N) -> node features (C,N) by row means."""

    def forward(self, x):
        if x.ndim != 3:
            raise ShapeError(f"{self.name}: expected (C,N,N), got {x.shape}")
        self._n = x.shape[2]
        return x.mean(axis=2)

    def backward(self, dy):
        return np.repeat(dy[:, :, None], self._n, axis=2) / self._n


class NodePool(Layer):
    """Node features (C,N) -> per-channel scalars (C,) by node means."""

    def forward(self, x):
        if x.ndim != 2:
            raise ShapeError(f"{self.name}: expected (C,N), got {x.shape}")
        self._n = x.shape[1]
        return x.mean(axis=1)

    def backward(self, dy):
        return np.repeat(dy[:, None], self._n, axis=1) / self._n
