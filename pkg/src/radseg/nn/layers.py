"""Differentiable 1D layers on (batch, channels, length) arrays.

Every layer caches what its backward pass needs during ``forward`` and
accumulates parameter gradients into ``grads`` on ``backward``. Convolutions
use the cross-correlation convention (no kernel flip).
"""

from __future__ import annotations

import numpy as np

from radseg.errors import DegenerateBatch, OddLength, ShapeMismatch
from radseg.nn.module import Module

BN_EPS = 1e-5
BN_MOMENTUM = 0.1


def glorot_uniform(rng: np.random.Generator, shape, fan_in: int, fan_out: int, dtype) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


def _check_bcl(x: np.ndarray, channels: int | None = None):
    if x.ndim != 3 or x.shape[2] == 0:
        raise ShapeMismatch(f"expected (batch, channels, length>0), got {x.shape}")
    if channels is not None and x.shape[1] != channels:
        raise ShapeMismatch(f"expected {channels} channels, got {x.shape[1]}")


# ---------------------------------------------------------------- conv1d

def _im2col(x: np.ndarray, k: int, padding: int, dilation: int) -> np.ndarray:
    b, c, n = x.shape
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding))) if padding else x
    n_out = xp.shape[2] - dilation * (k - 1)
    if n_out <= 0:
        raise ShapeMismatch("kernel extent exceeds padded input")
    cols = np.empty((b, c, k, n_out), dtype=x.dtype)
    for t in range(k):
        cols[:, :, t, :] = xp[:, :, t * dilation:t * dilation + n_out]
    return cols.reshape(b, c * k, n_out)


def conv1d_forward(x, weight, bias, padding: int, dilation: int = 1):
    """Returns (output, cols) where cols is the unfolded input kept for backward."""
    _check_bcl(x, weight.shape[1])
    c_out, c_in, k = weight.shape
    cols = x if (k == 1 and padding == 0) else _im2col(x, k, padding, dilation)
    y = np.matmul(weight.reshape(c_out, c_in * k), cols)
    if bias is not None:
        y += bias[None, :, None]
    return y, cols


def conv1d_backward(g, cols, weight, input_shape, padding: int, dilation: int = 1):
    """Returns (dx, dweight, dbias)."""
    c_out, c_in, k = weight.shape
    b, _, n = input_shape
    n_out = g.shape[2]
    dbias = g.sum(axis=(0, 2))
    dweight = np.tensordot(g, cols, axes=([0, 2], [0, 2])).reshape(c_out, c_in, k)
    dcols = np.matmul(weight.reshape(c_out, c_in * k).T, g)
    if k == 1 and padding == 0:
        return dcols, dweight, dbias
    dcols = dcols.reshape(b, c_in, k, n_out)
    dxp = np.zeros((b, c_in, n + 2 * padding), dtype=g.dtype)
    for t in range(k):
        dxp[:, :, t * dilation:t * dilation + n_out] += dcols[:, :, t, :]
    return dxp[:, :, padding:padding + n], dweight, dbias


class Conv1d(Module):
    """Length-preserving convolution, kernel 1 or 3, padding = dilation."""

    def __init__(self, in_channels: int, out_channels: int, kernel_size: int = 3, dilation: int = 1,
                 rng: np.random.Generator | None = None, dtype=np.float32):
        super().__init__()
        if kernel_size not in (1, 3):
            raise ShapeMismatch("only kernel sizes 1 and 3 are supported")
        rng = rng or np.random.default_rng(0)
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        self.dilation = dilation
        self.padding = dilation * (kernel_size - 1) // 2
        shape = (out_channels, in_channels, kernel_size)
        self.add_param("weight", glorot_uniform(rng, shape, in_channels * kernel_size,
                                                out_channels * kernel_size, dtype))
        self.add_param("bias", np.zeros(out_channels, dtype=dtype))
        self._cache = None

    def forward(self, x, train: bool = True):
        y, cols = conv1d_forward(x, self.params["weight"], self.params["bias"], self.padding, self.dilation)
        if train:
            self._cache = (cols, x.shape)
        return y

    def backward(self, g):
        cols, shape = self._cache
        dx, dw, db = conv1d_backward(g, cols, self.params["weight"], shape, self.padding, self.dilation)
        self.grads["weight"] += dw
        self.grads["bias"] += db
        return dx


# ---------------------------------------------------------------- transposed conv

class ConvTranspose1d(Module):
    """Kernel-2, stride-2 up-convolution: out[2i+t] = sum_c x[c, i] * w[c, :, t] + b."""

    def __init__(self, in_channels: int, out_channels: int, rng: np.random.Generator | None = None,
                 dtype=np.float32):
        super().__init__()
        rng = rng or np.random.default_rng(0)
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.add_param("weight", glorot_uniform(rng, (in_channels, out_channels, 2), in_channels * 2,
                                                out_channels * 2, dtype))
        self.add_param("bias", np.zeros(out_channels, dtype=dtype))
        self._x = None

    def _wmat(self):
        # (Cout*2, Cin); row o*2 + t
        w = self.params["weight"]
        return w.transpose(1, 2, 0).reshape(self.out_channels * 2, self.in_channels)

    def forward(self, x, train: bool = True):
        _check_bcl(x, self.in_channels)
        b, _, n = x.shape
        y = np.matmul(self._wmat(), x).reshape(b, self.out_channels, 2, n)
        y = y.transpose(0, 1, 3, 2).reshape(b, self.out_channels, 2 * n)
        y += self.params["bias"][None, :, None]
        if train:
            self._x = x
        return y

    def backward(self, g):
        x = self._x
        b, _, n = x.shape
        gr = g.reshape(b, self.out_channels, n, 2).transpose(0, 1, 3, 2).reshape(b, self.out_channels * 2, n)
        dwmat = np.tensordot(gr, x, axes=([0, 2], [0, 2]))  # (Cout*2, Cin)
        self.grads["weight"] += dwmat.reshape(self.out_channels, 2, self.in_channels).transpose(2, 0, 1)
        self.grads["bias"] += g.sum(axis=(0, 2))
        return np.matmul(self._wmat().T, gr)


# ---------------------------------------------------------------- pooling

class MaxPool1d(Module):
    """Window 2, stride 2; ties route the gradient to the lower index."""

    def __init__(self):
        super().__init__()
        self._cache = None

    def forward(self, x, train: bool = True):
        _check_bcl(x)
        b, c, n = x.shape
        if n % 2:
            raise OddLength(f"max pooling needs even length, got {n}")
        pairs = x.reshape(b, c, n // 2, 2)
        second = pairs[..., 1] > pairs[..., 0]
        y = np.where(second, pairs[..., 1], pairs[..., 0])
        if train:
            self._cache = (second, x.shape)
        return y

    def backward(self, g):
        second, shape = self._cache
        dx = np.zeros(shape, dtype=g.dtype).reshape(*g.shape, 2)
        dx[..., 0] = np.where(second, 0, g)
        dx[..., 1] = np.where(second, g, 0)
        return dx.reshape(shape)


# ---------------------------------------------------------------- batch norm

class BatchNorm1d(Module):
    def __init__(self, channels: int, dtype=np.float32, eps: float = BN_EPS, momentum: float = BN_MOMENTUM):
        super().__init__()
        self.channels = channels
        self.eps = eps
        self.momentum = momentum
        self.add_param("gamma", np.ones(channels, dtype=dtype))
        self.add_param("beta", np.zeros(channels, dtype=dtype))
        self.buffers["running_mean"] = np.zeros(channels, dtype=dtype)
        self.buffers["running_var"] = np.ones(channels, dtype=dtype)
        self._cache = None

    def forward(self, x, train: bool = True):
        _check_bcl(x, self.channels)
        gamma = self.params["gamma"][None, :, None]
        beta = self.params["beta"][None, :, None]
        if not train:
            mean = self.buffers["running_mean"][None, :, None]
            var = self.buffers["running_var"][None, :, None]
            return (x - mean) / np.sqrt(var + self.eps) * gamma + beta
        m = x.shape[0] * x.shape[2]
        if m < 2:
            raise DegenerateBatch("batch norm in train mode needs at least 2 values per channel")
        mean = x.mean(axis=(0, 2))
        var = x.var(axis=(0, 2))
        inv_std = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mean[None, :, None]) * inv_std[None, :, None]
        mom = self.momentum
        rm, rv = self.buffers["running_mean"], self.buffers["running_var"]
        rm[...] = (1 - mom) * rm + mom * mean
        rv[...] = (1 - mom) * rv + mom * var * (m / (m - 1))
        self._cache = (xhat, inv_std)
        return xhat * gamma + beta

    def backward(self, g):
        xhat, inv_std = self._cache
        m = g.shape[0] * g.shape[2]
        self.grads["gamma"] += (g * xhat).sum(axis=(0, 2))
        self.grads["beta"] += g.sum(axis=(0, 2))
        dxhat = g * self.params["gamma"][None, :, None]
        s1 = dxhat.sum(axis=(0, 2), keepdims=True)
        s2 = (dxhat * xhat).sum(axis=(0, 2), keepdims=True)
        return (inv_std[None, :, None] / m) * (m * dxhat - s1 - xhat * s2)


# ---------------------------------------------------------------- activations

def sigmoid(z: np.ndarray) -> np.ndarray:
    """Overflow-free logistic function."""
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


class ReLU(Module):
    def __init__(self):
        super().__init__()
        self._on = None

    def forward(self, x, train: bool = True):
        on = x > 0
        if train:
            self._on = on
        return np.where(on, x, 0).astype(x.dtype, copy=False)

    def backward(self, g):
        return np.where(self._on, g, 0).astype(g.dtype, copy=False)


class Sigmoid(Module):
    def __init__(self):
        super().__init__()
        self._y = None

    def forward(self, x, train: bool = True):
        y = sigmoid(x)
        if train:
            self._y = y
        return y

    def backward(self, g):
        return g * self._y * (1 - self._y)


def activation(x: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return np.maximum(x, 0)
    if kind == "sigmoid":
        return sigmoid(x)
    raise ValueError(f"unknown activation {kind!r}")


# ---------------------------------------------------------------- channel concat

def concat_channels(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.shape[0] != b.shape[0] or a.shape[2] != b.shape[2]:
        raise ShapeMismatch(f"cannot concatenate {a.shape} and {b.shape}")
    return np.concatenate([a, b], axis=1)


def split_channels(g: np.ndarray, channels_a: int) -> tuple[np.ndarray, np.ndarray]:
    """Backward of ``concat_channels``."""
    return g[:, :channels_a], g[:, channels_a:]


class Sequential(Module):
    def __init__(self, *layers: Module):
        super().__init__()
        self.layers = list(layers)

    def children(self):
        return [(str(i), layer) for i, layer in enumerate(self.layers)]

    def forward(self, x, train: bool = True):
        for layer in self.layers:
            x = layer.forward(x, train)
        return x

    def backward(self, g):
        for layer in reversed(self.layers):
            g = layer.backward(g)
        return g
