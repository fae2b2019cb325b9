from ._abstract import AbstractNetwork
from ._exceptions import ShapeMismatchError
from ._functional import as_batched, channel_concat, sigmoid, swish
from ._tensor import Tensor
from .attention import (
    SAAttentionParams,
    register_attention,
    spatial_asymmetric_attention,
)

# layers (1-based) that halve the resolution
STRIDED_LAYERS = (1, 3, 5, 7)


class Discriminator(AbstractNetwork):
    """
    Conditional critic scoring a (candidate, reference) RGB pair.

    The pair is stacked into six channels and run through seven 3×3
    convolutions, each batch-normalised and swish-activated, halving the
    resolution at layers 1, 3, 5 and 7. One spatial-asymmetric attention
    module and a 1×1 convolution with a sigmoid give the probability map
    (H/16 × W/16).
    """

    stream = 2
    downsampling = 2 ** len(STRIDED_LAYERS)

    def build(self):
        in_channels = 6
        for layer, width in enumerate(self.config.disc_widths, start=1):
            self.add_conv(f"layer{layer}.conv", width, in_channels, 3, 3, bias=False)
            self.add_batch_norm(f"layer{layer}.bn", width)
            in_channels = width
        register_attention(
            self,
            "attn",
            in_channels,
            self.config.attention_kernel,
            self.config.square_kernel,
            self.config.reduction,
        )
        self.add_conv("score", 1, in_channels, 1, 1)

    def forward(self, candidate: Tensor, reference: Tensor) -> Tensor:
        if candidate.shape != reference.shape:
            raise ShapeMismatchError(
                "discriminator",
                f"pair shapes differ: {candidate.shape} vs {reference.shape}",
            )
        batched, squeeze = as_batched(candidate, "discriminator")
        if batched.shape[1] != 3:
            raise ShapeMismatchError(
                "discriminator", f"expected RGB inputs, got {batched.shape[1]} channels"
            )
        height, width = batched.shape[2:]
        if height % self.downsampling or width % self.downsampling:
            raise ShapeMismatchError(
                "discriminator",
                f"H and W must be multiples of {self.downsampling}, got {height}×{width}",
            )
        reference_batched, _ = as_batched(reference, "discriminator")

        x = channel_concat([batched, reference_batched])
        for layer in range(1, len(self.config.disc_widths) + 1):
            stride = 2 if layer in STRIDED_LAYERS else 1
            x = self.conv(x, f"layer{layer}.conv", stride=stride)
            x = swish(self.bn(x, f"layer{layer}.bn"))
        x = spatial_asymmetric_attention(
            x, SAAttentionParams.from_network(self, "attn")
        )
        out = sigmoid(self.conv(x, "score"))
        return out.reshape(out.shape[1:]) if squeeze else out
