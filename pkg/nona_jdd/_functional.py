"""
Neural-network primitives on top of the autodiff engine.

Every op accepts an optional leading batch axis: ``C×H×W`` inputs are
promoted to ``1×C×H×W`` and demoted again on the way out.
"""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import expit

from ._exceptions import BatchNormStateError, ShapeMismatchError
from ._tensor import Function, Tensor, concat
from .settings import settings

logger = logging.getLogger(__name__)

PADDING_MODES = ("same", "valid")


def as_batched(x: Tensor, operation: str):
    if x.ndim == 3:
        return x.reshape((1,) + x.shape), True
    if x.ndim == 4:
        return x, False
    raise ShapeMismatchError(operation, f"expected C×H×W or N×C×H×W, got {x.shape}")


def _same_padding(size: int, kernel: int, stride: int):
    out = -(-size // stride)
    total = max((out - 1) * stride + kernel - size, 0)
    return out, total // 2, total - total // 2


class Conv2d(Function):
    """
    Cross-correlation with zero padding, accumulated tap by tap in a fixed
    (row, column) order so repeated runs are bitwise identical.
    """

    def forward(self, x, weight, bias=None, *, stride, padding):
        n, _, height, width = x.shape
        out_channels, _, kh, kw = weight.shape
        if padding == "same":
            out_h, top, bottom = _same_padding(height, kh, stride)
            out_w, left, right = _same_padding(width, kw, stride)
        else:
            out_h = (height - kh) // stride + 1
            out_w = (width - kw) // stride + 1
            top = bottom = left = right = 0
            if out_h < 1 or out_w < 1:
                raise ShapeMismatchError(
                    "conv2d",
                    f"kernel {kh}×{kw} larger than valid input {height}×{width}",
                )

        self.stride, self.kernel = stride, (kh, kw)
        self.out_size = (out_h, out_w)
        self.crop = (top, left, height, width)
        self.xp = np.pad(x, ((0, 0), (0, 0), (top, bottom), (left, right)))
        self.weight = weight
        self.has_bias = bias is not None

        out = np.zeros((n, out_channels, out_h, out_w), dtype=np.result_type(x, weight))
        for i in range(kh):
            for j in range(kw):
                patch = self.xp[:, :, self._rows(i), self._cols(j)]
                product = np.tensordot(weight[:, :, i, j], patch, axes=([1], [1]))
                out += product.transpose(1, 0, 2, 3)
        if bias is not None:
            out += bias[None, :, None, None]
        return out

    def _rows(self, i):
        return slice(i, i + self.stride * (self.out_size[0] - 1) + 1, self.stride)

    def _cols(self, j):
        return slice(j, j + self.stride * (self.out_size[1] - 1) + 1, self.stride)

    def backward(self, grad):
        kh, kw = self.kernel
        dxp = np.zeros_like(self.xp)
        dweight = np.zeros_like(self.weight)
        for i in range(kh):
            for j in range(kw):
                rows, cols = self._rows(i), self._cols(j)
                patch = self.xp[:, :, rows, cols]
                dweight[:, :, i, j] = np.tensordot(
                    grad, patch, axes=([0, 2, 3], [0, 2, 3])
                )
                dxp[:, :, rows, cols] += np.tensordot(
                    self.weight[:, :, i, j], grad, axes=([0], [1])
                ).transpose(1, 0, 2, 3)

        top, left, height, width = self.crop
        dx = dxp[:, :, top : top + height, left : left + width]
        if self.has_bias:
            return dx, dweight, grad.sum(axis=(0, 2, 3))
        return dx, dweight


def conv2d(
    x: Tensor,
    weight: Tensor,
    bias: Optional[Tensor] = None,
    stride: int = 1,
    padding: str = "same",
) -> Tensor:
    batched, squeeze = as_batched(x, "conv2d")
    if weight.ndim != 4:
        raise ShapeMismatchError(
            "conv2d", f"kernel must be C_out×C_in×kh×kw, got {weight.shape}"
        )
    if weight.shape[1] != batched.shape[1]:
        raise ShapeMismatchError(
            "conv2d",
            f"input has {batched.shape[1]} channels, kernel expects {weight.shape[1]}",
        )
    if min(weight.shape[2:]) < 1 or stride < 1:
        raise ShapeMismatchError("conv2d", "kernel extent and stride must be >= 1")
    if padding not in PADDING_MODES:
        raise ShapeMismatchError("conv2d", f"padding must be one of {PADDING_MODES}")
    if bias is not None and bias.shape != (weight.shape[0],):
        raise ShapeMismatchError(
            "conv2d", f"bias shape {bias.shape} != ({weight.shape[0]},)"
        )

    tensors = (batched, weight) if bias is None else (batched, weight, bias)
    out = Conv2d.apply(*tensors, stride=stride, padding=padding)
    return out.reshape(out.shape[1:]) if squeeze else out


def channel_avg(x: Tensor) -> Tensor:
    batched, squeeze = as_batched(x, "channel_avg")
    if batched.size == 0:
        raise ShapeMismatchError("channel_avg", "empty tensor")
    out = batched.mean(axis=1, keepdims=True)
    return out.reshape(out.shape[1:]) if squeeze else out


def channel_max(x: Tensor) -> Tensor:
    batched, squeeze = as_batched(x, "channel_max")
    if batched.size == 0:
        raise ShapeMismatchError("channel_max", "empty tensor")
    out = batched.max(axis=1, keepdims=True)
    return out.reshape(out.shape[1:]) if squeeze else out


def global_avg(x: Tensor) -> Tensor:
    """C×H×W -> C (or N×C×H×W -> N×C)."""
    batched, squeeze = as_batched(x, "global_avg")
    if batched.size == 0:
        raise ShapeMismatchError("global_avg", "empty tensor")
    out = batched.mean(axis=(2, 3))
    return out.reshape(out.shape[1:]) if squeeze else out


class PixelShuffle(Function):
    def forward(self, x, r):
        n, channels, height, width = x.shape
        self.shape, self.r = x.shape, r
        c = channels // (r * r)
        out = x.reshape(n, c, r, r, height, width).transpose(0, 1, 4, 2, 5, 3)
        return out.reshape(n, c, height * r, width * r)

    def backward(self, grad):
        n, channels, height, width = self.shape
        r = self.r
        c = channels // (r * r)
        out = grad.reshape(n, c, height, r, width, r).transpose(0, 1, 3, 5, 2, 4)
        return (out.reshape(self.shape),)


def pixel_shuffle(x: Tensor, r: int) -> Tensor:
    """output(c, r·y+dy, r·x+dx) = input(c·r² + dy·r + dx, y, x)."""
    batched, squeeze = as_batched(x, "pixel_shuffle")
    if r < 1 or batched.shape[1] % (r * r):
        raise ShapeMismatchError(
            "pixel_shuffle", f"{batched.shape[1]} channels not divisible by r²={r * r}"
        )
    out = PixelShuffle.apply(batched, r=r)
    return out.reshape(out.shape[1:]) if squeeze else out


class Sigmoid(Function):
    def forward(self, x):
        self.out = expit(x)
        return self.out

    def backward(self, grad):
        return (grad * self.out * (1 - self.out),)


class LeakyRelu(Function):
    def forward(self, x, slope):
        self.scale = np.where(x >= 0, 1, slope).astype(x.dtype)
        return x * self.scale

    def backward(self, grad):
        return (grad * self.scale,)

    def branch_key(self):
        return self.scale != 1


class Swish(Function):
    def forward(self, x):
        self.x, self.s = x, expit(x)
        return x * self.s

    def backward(self, grad):
        return (grad * (self.s + self.x * self.s * (1 - self.s)),)


def sigmoid(x: Tensor) -> Tensor:
    return Sigmoid.apply(x)


def leaky_relu(x: Tensor, slope: Optional[float] = None) -> Tensor:
    if slope is None:
        slope = settings.LEAKY_RELU_SLOPE
    return LeakyRelu.apply(x, slope=slope)


def swish(x: Tensor) -> Tensor:
    return Swish.apply(x)


class Linear(Function):
    def forward(self, x, weight, bias):
        self.x, self.weight = x, weight
        return x @ weight.T + bias

    def backward(self, grad):
        return grad @ self.weight, grad.T @ self.x, grad.sum(axis=0)


def linear(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """Affine map of an N-vector (or a batch of them, N×in)."""
    squeeze = x.ndim == 1
    batched = x.reshape(1, x.shape[0]) if squeeze else x
    if batched.ndim != 2 or weight.ndim != 2 or batched.shape[1] != weight.shape[1]:
        raise ShapeMismatchError(
            "linear", f"input {x.shape} incompatible with weight {weight.shape}"
        )
    if bias.shape != (weight.shape[0],):
        raise ShapeMismatchError(
            "linear", f"bias shape {bias.shape} != ({weight.shape[0]},)"
        )
    out = Linear.apply(batched, weight, bias)
    return out.reshape(weight.shape[0]) if squeeze else out


@dataclass
class BatchNormStats:
    """Running statistics of one batch-norm layer; absent until the first train pass."""

    name: str
    mean: Optional[np.ndarray] = None
    var: Optional[np.ndarray] = None

    @property
    def populated(self) -> bool:
        return self.mean is not None and self.var is not None


class BatchNormTrain(Function):
    def forward(self, x, gamma, beta, mean, var, eps):
        self.count = x.shape[0] * x.shape[2] * x.shape[3]
        self.inv_std = 1.0 / np.sqrt(var + eps)
        self.xhat = (x - mean[None, :, None, None]) * self.inv_std[None, :, None, None]
        self.gamma = gamma
        return gamma[None, :, None, None] * self.xhat + beta[None, :, None, None]

    def backward(self, grad):
        axes = (0, 2, 3)
        dxhat = grad * self.gamma[None, :, None, None]
        sum_dxhat = dxhat.sum(axis=axes, keepdims=True)
        sum_dxhat_xhat = (dxhat * self.xhat).sum(axis=axes, keepdims=True)
        dx = (
            self.inv_std[None, :, None, None]
            / self.count
            * (self.count * dxhat - sum_dxhat - self.xhat * sum_dxhat_xhat)
        )
        dgamma = (grad * self.xhat).sum(axis=axes)
        dbeta = grad.sum(axis=axes)
        return dx.astype(grad.dtype), dgamma, dbeta


def batch_norm(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    stats: BatchNormStats,
    training: bool = True,
    eps: Optional[float] = None,
    momentum: Optional[float] = None,
) -> Tensor:
    """
    Per-channel normalisation of an N×C×H×W batch. Train mode uses batch
    statistics and folds them into ``stats`` by exponential moving average;
    eval mode uses ``stats`` and fails when they were never populated.
    """
    eps = settings.BATCH_NORM_EPS if eps is None else eps
    momentum = settings.BATCH_NORM_MOMENTUM if momentum is None else momentum

    batched, squeeze = as_batched(x, "batch_norm")
    channels = batched.shape[1]
    if gamma.shape != (channels,) or beta.shape != (channels,):
        raise ShapeMismatchError(
            "batch_norm", f"gamma/beta must have shape ({channels},), got {gamma.shape}"
        )

    if training:
        axes = (0, 2, 3)
        count = batched.shape[0] * batched.shape[2] * batched.shape[3]
        batch_mean = batched.data.mean(axis=axes)
        batch_var = batched.data.var(axis=axes)
        out = BatchNormTrain.apply(
            batched, gamma, beta, mean=batch_mean, var=batch_var, eps=eps
        )
        unbiased = batch_var * (count / (count - 1)) if count > 1 else batch_var
        if stats.populated:
            stats.mean = (1 - momentum) * stats.mean + momentum * batch_mean
            stats.var = (1 - momentum) * stats.var + momentum * unbiased
        else:
            stats.mean = batch_mean.copy()
            stats.var = unbiased.copy()
    else:
        if not stats.populated:
            raise BatchNormStateError(stats.name)
        dtype = batched.dtype
        inv_std = Tensor(
            (1.0 / np.sqrt(stats.var + eps)).astype(dtype)[None, :, None, None]
        )
        mean = Tensor(stats.mean.astype(dtype)[None, :, None, None])
        scale = gamma.reshape(1, channels, 1, 1)
        shift = beta.reshape(1, channels, 1, 1)
        out = (batched - mean) * inv_std * scale + shift
    return out.reshape(out.shape[1:]) if squeeze else out


def channel_concat(tensors) -> Tensor:
    """Concatenate along the channel axis of batched or unbatched tensors."""
    axis = 1 if tensors[0].ndim == 4 else 0
    return concat(tensors, axis=axis)
