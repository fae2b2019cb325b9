from dataclasses import dataclass

from ._abstract import AbstractNetwork
from ._exceptions import ShapeMismatchError
from ._functional import (
    as_batched,
    channel_concat,
    conv2d,
    leaky_relu,
    pixel_shuffle,
    sigmoid,
)
from ._tensor import Tensor
from .attention import (
    SAAttentionParams,
    register_attention,
    spatial_asymmetric_attention,
)


@dataclass
class ResidualParams:
    conv1_weight: Tensor
    conv1_bias: Tensor
    conv2_weight: Tensor
    conv2_bias: Tensor

    @classmethod
    def from_network(cls, network: AbstractNetwork, prefix: str) -> "ResidualParams":
        return cls(
            network.param(f"{prefix}.conv1.weight"),
            network.param(f"{prefix}.conv1.bias"),
            network.param(f"{prefix}.conv2.weight"),
            network.param(f"{prefix}.conv2.bias"),
        )


def residual_block(x: Tensor, p: ResidualParams) -> Tensor:
    """x + conv(φ(conv(x))) with 3×3 "same" convolutions."""
    channels = x.shape[-3]
    if p.conv1_weight.shape[1] != channels or p.conv2_weight.shape[0] != channels:
        raise ShapeMismatchError(
            "residual_block",
            f"input has {channels} channels, block maps "
            f"{p.conv1_weight.shape[1]} -> {p.conv2_weight.shape[0]}",
        )
    inner = leaky_relu(conv2d(x, p.conv1_weight, p.conv1_bias))
    return x + conv2d(inner, p.conv2_weight, p.conv2_bias)


class Generator(AbstractNetwork):
    """
    U-Net over a single-plane mosaic (1×H×W or N×1×H×W) returning 3×H×W
    RGB in (0, 1).

    One level per entry of ``config.widths``; each level is a residual
    block followed by a spatial-asymmetric attention block. Levels are
    joined by stride-2 convolutions on the way down and pixel-shuffle
    upsampling on the way back. Two extra blocks sit at the bottleneck
    inside one short residual connection. Encoder features reach the
    decoder through a sigmoid gate (a 1×1 convolution) and are
    concatenated with the upsampled features.
    """

    stream = 1

    def build(self):
        widths = self.config.widths
        self.add_conv("head", widths[0], 1, 3, 3)
        for level, width in enumerate(widths[:-1]):
            self._add_level(f"enc{level}", width)
            self.add_conv(f"down{level}", widths[level + 1], width, 3, 3)

        self._add_level("bottleneck", widths[-1])
        self._add_level("mid0", widths[-1])
        self._add_level("mid1", widths[-1])

        for level in reversed(range(len(widths) - 1)):
            width = widths[level]
            self.add_conv(f"up{level}", width * 4, widths[level + 1], 3, 3)
            if self.config.gated_skips:
                self.add_conv(f"skip{level}.gate", width, width, 1, 1)
            self.add_conv(f"dec{level}.fuse", width, width * 2, 3, 3)
            self._add_level(f"dec{level}", width)
        self.add_conv("tail", 3, widths[0], 1, 1)

    def _add_level(self, prefix: str, width: int) -> None:
        self.add_conv(f"{prefix}.res.conv1", width, width, 3, 3)
        self.add_conv(f"{prefix}.res.conv2", width, width, 3, 3)
        if self.config.use_attention:
            register_attention(
                self,
                f"{prefix}.attn",
                width,
                self.config.attention_kernel,
                self.config.square_kernel,
                self.config.reduction,
            )

    def _level(self, x: Tensor, prefix: str) -> Tensor:
        x = residual_block(x, ResidualParams.from_network(self, f"{prefix}.res"))
        if self.config.use_attention:
            x = spatial_asymmetric_attention(
                x, SAAttentionParams.from_network(self, f"{prefix}.attn")
            )
        return x

    def _skip(self, encoded: Tensor, level: int) -> Tensor:
        if not self.config.gated_skips:
            return encoded
        return encoded * sigmoid(self.conv(encoded, f"skip{level}.gate"))

    def forward(self, mosaic: Tensor) -> Tensor:
        batched, squeeze = as_batched(mosaic, "generator")
        multiple = self.config.size_multiple
        height, width = batched.shape[2:]
        if batched.shape[1] != 1:
            raise ShapeMismatchError(
                "generator",
                f"expected a single-plane mosaic, got {batched.shape[1]} channels",
            )
        if height % multiple or width % multiple:
            raise ShapeMismatchError(
                "generator",
                f"H and W must be multiples of {multiple}, got {height}×{width}",
            )

        levels = len(self.config.widths)
        x = leaky_relu(self.conv(batched, "head"))
        skips = []
        for level in range(levels - 1):
            x = self._level(x, f"enc{level}")
            skips.append(x)
            x = leaky_relu(self.conv(x, f"down{level}", stride=2))

        x = self._level(x, "bottleneck")
        x = x + self._level(self._level(x, "mid0"), "mid1")

        for level in reversed(range(levels - 1)):
            x = pixel_shuffle(self.conv(x, f"up{level}"), 2)
            x = channel_concat([self._skip(skips[level], level), x])
            x = leaky_relu(self.conv(x, f"dec{level}.fuse"))
            x = self._level(x, f"dec{level}")

        out = sigmoid(self.conv(x, "tail"))
        return out.reshape(out.shape[1:]) if squeeze else out
