"""
Spatial-asymmetric attention.

A vertical (k×1) and a horizontal (1×k) asymmetric convolution each feed a
CBAM-style spatial branch: channel-average and channel-max maps, stacked
and squashed through a square convolution and a sigmoid. The two branch
maps are summed, multiplied by a squeeze-and-excitation channel descriptor
taken from a square "global" convolution, and passed through a leaky ReLU.
The result gates the input feature map.
"""
from dataclasses import dataclass

from ._abstract import AbstractNetwork
from ._exceptions import ConfigError, ShapeMismatchError
from ._functional import (
    as_batched,
    channel_avg,
    channel_concat,
    channel_max,
    conv2d,
    global_avg,
    leaky_relu,
    linear,
    sigmoid,
)
from ._tensor import Tensor

PARAMETER_NAMES = (
    "vertical.weight",
    "vertical.bias",
    "horizontal.weight",
    "horizontal.bias",
    "spatial_v.weight",
    "spatial_v.bias",
    "spatial_h.weight",
    "spatial_h.bias",
    "global.weight",
    "global.bias",
    "fc1.weight",
    "fc1.bias",
    "fc2.weight",
    "fc2.bias",
)


@dataclass
class SAAttentionParams:
    vertical_weight: Tensor
    vertical_bias: Tensor
    horizontal_weight: Tensor
    horizontal_bias: Tensor
    spatial_v_weight: Tensor
    spatial_v_bias: Tensor
    spatial_h_weight: Tensor
    spatial_h_bias: Tensor
    global_weight: Tensor
    global_bias: Tensor
    fc1_weight: Tensor
    fc1_bias: Tensor
    fc2_weight: Tensor
    fc2_bias: Tensor

    @classmethod
    def from_network(cls, network: AbstractNetwork, prefix: str) -> "SAAttentionParams":
        return cls(
            *(network.param(f"{prefix}.{name}") for name in PARAMETER_NAMES)
        )

    @property
    def channels(self) -> int:
        return self.vertical_weight.shape[0]


@dataclass
class AttentionComponents:
    f_v: Tensor
    f_h: Tensor
    f_c: Tensor
    f_g: Tensor
    s_a: Tensor
    output: Tensor


def register_attention(
    network: AbstractNetwork,
    prefix: str,
    channels: int,
    kernel: int,
    square: int,
    reduction: int,
) -> None:
    if reduction < 1 or channels % reduction:
        raise ConfigError(
            f"{channels} channels not divisible by SE reduction {reduction}"
        )
    hidden = channels // reduction
    network.add_conv(f"{prefix}.vertical", channels, channels, kernel, 1)
    network.add_conv(f"{prefix}.horizontal", channels, channels, 1, kernel)
    network.add_conv(f"{prefix}.spatial_v", 1, 2, square, square)
    network.add_conv(f"{prefix}.spatial_h", 1, 2, square, square)
    network.add_conv(f"{prefix}.global", channels, channels, square, square)
    network.add_linear(f"{prefix}.fc1", hidden, channels)
    network.add_linear(f"{prefix}.fc2", channels, hidden)


def _spatial_branch(features: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    pooled = channel_concat([channel_avg(features), channel_max(features)])
    return sigmoid(conv2d(pooled, weight, bias))


def components(x: Tensor, p: SAAttentionParams) -> AttentionComponents:
    """Every intermediate map of the module, batched as N×·×H×W."""
    batched, _ = as_batched(x, "spatial_asymmetric_attention")
    if batched.shape[1] != p.channels:
        raise ShapeMismatchError(
            "spatial_asymmetric_attention",
            f"input has {batched.shape[1]} channels, module expects {p.channels}",
        )
    n, channels = batched.shape[:2]

    f_v = _spatial_branch(
        conv2d(batched, p.vertical_weight, p.vertical_bias),
        p.spatial_v_weight,
        p.spatial_v_bias,
    )
    f_h = _spatial_branch(
        conv2d(batched, p.horizontal_weight, p.horizontal_bias),
        p.spatial_h_weight,
        p.spatial_h_bias,
    )
    f_c = f_v + f_h

    squeezed = global_avg(conv2d(batched, p.global_weight, p.global_bias))
    excited = linear(
        leaky_relu(linear(squeezed, p.fc1_weight, p.fc1_bias)), p.fc2_weight, p.fc2_bias
    )
    f_g = sigmoid(excited).reshape(n, channels, 1, 1)

    s_a = leaky_relu(f_c * f_g)
    return AttentionComponents(
        f_v=f_v, f_h=f_h, f_c=f_c, f_g=f_g, s_a=s_a, output=batched * s_a
    )


def spatial_asymmetric_attention(x: Tensor, p: SAAttentionParams) -> Tensor:
    """Gate ``x`` (C×H×W or N×C×H×W) by its spatial-asymmetric attention map."""
    output = components(x, p).output
    return output.reshape(output.shape[1:]) if x.ndim == 3 else output


class AttentionNetwork(AbstractNetwork):
    """A lone attention module over ``channels`` feature maps."""

    stream = 3

    def __init__(self, channels: int, config=None, seed: int = 0, dtype=None):
        self.channels = channels
        super().__init__(config, seed=seed, dtype=dtype)

    def build(self):
        register_attention(
            self,
            "attn",
            self.channels,
            self.config.attention_kernel,
            self.config.square_kernel,
            self.config.reduction,
        )

    @property
    def params(self) -> SAAttentionParams:
        return SAAttentionParams.from_network(self, "attn")

    def forward(self, x: Tensor) -> Tensor:
        return spatial_asymmetric_attention(x, self.params)
