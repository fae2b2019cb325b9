from ._exceptions import (
    BatchNormStateError,
    CheckpointError,
    ConfigError,
    DataError,
    EmptyDatasetError,
    GradientError,
    ImageDecodeError,
    NonaJddException,
    NonFiniteError,
    NonFiniteLossError,
    PatternNotSupportedError,
    ShapeMismatchError,
    VariantNotImplementedError,
)
from ._gradcheck import GradcheckResult, gradcheck, run_layer_suite
from ._tensor import Tensor, backward, no_grad
from .attention import AttentionNetwork, SAAttentionParams, spatial_asymmetric_attention
from .cfa import (
    CfaPattern,
    MosaicImage,
    add_noise,
    bin_nona_to_bayer,
    bin_to_bayer,
    make_pattern,
    mosaic,
    read_mosaic,
    write_mosaic,
)
from .checkpoint import dump_tensors, load_checkpoint, save_checkpoint
from .colour import LabColor, ciede2000, srgb_to_lab
from .config import ModelConfig, RunConfig, TrainConfig
from .discriminator import Discriminator
from .evaluation import evaluate, reconstruct
from .generator import Generator, residual_block
from .losses import (
    LossBreakdown,
    loss_adversarial,
    loss_pcl,
    loss_reconstruction,
    loss_total,
)
from .metrics import MetricsReport, psnr, ssim
from .optim import AdamState, adam_step
from .patches import PatchSet, extract_patches
from .training import Trainer, train
from .variants import VARIANTS, get_variant

NETWORKS = {
    Generator.name(): Generator,
    Discriminator.name(): Discriminator,
    AttentionNetwork.name(): AttentionNetwork,
}


def load_generator(path, config=None, variant="sagan", **options):
    """Build the generator a checkpoint was trained as and load its weights."""
    generator = Generator(
        get_variant(variant).model_config(config or ModelConfig()), **options
    )
    params, _ = load_checkpoint(path)
    generator.load_state_dict(params)
    return generator.eval()


__all__ = [
    "AdamState",
    "AttentionNetwork",
    "BatchNormStateError",
    "CfaPattern",
    "CheckpointError",
    "ConfigError",
    "DataError",
    "Discriminator",
    "EmptyDatasetError",
    "GradcheckResult",
    "Generator",
    "GradientError",
    "ImageDecodeError",
    "LabColor",
    "LossBreakdown",
    "MetricsReport",
    "ModelConfig",
    "MosaicImage",
    "NETWORKS",
    "NonaJddException",
    "NonFiniteError",
    "NonFiniteLossError",
    "PatchSet",
    "PatternNotSupportedError",
    "RunConfig",
    "SAAttentionParams",
    "ShapeMismatchError",
    "Tensor",
    "TrainConfig",
    "Trainer",
    "VARIANTS",
    "VariantNotImplementedError",
    "adam_step",
    "add_noise",
    "backward",
    "bin_nona_to_bayer",
    "bin_to_bayer",
    "ciede2000",
    "dump_tensors",
    "evaluate",
    "extract_patches",
    "get_variant",
    "gradcheck",
    "load_checkpoint",
    "load_generator",
    "loss_adversarial",
    "loss_pcl",
    "loss_reconstruction",
    "loss_total",
    "make_pattern",
    "mosaic",
    "no_grad",
    "psnr",
    "read_mosaic",
    "reconstruct",
    "residual_block",
    "run_layer_suite",
    "save_checkpoint",
    "spatial_asymmetric_attention",
    "srgb_to_lab",
    "ssim",
    "train",
    "write_mosaic",
]
