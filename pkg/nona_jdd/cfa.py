"""
Colour-filter-array capture: Bayer, Quad-Bayer and Nona-Bayer patterns,
mosaicing of RGB images, additive Gaussian readout noise and pixel
binning back to Bayer.

Channels are indexed 0=R, 1=G, 2=B. Quad and Nona patterns are their
Bayer base with every cell grown to a 2×2 or 3×3 homogeneous block.
"""
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Sequence

import numpy as np

from ._exceptions import (
    ConfigError,
    DataError,
    PatternNotSupportedError,
    ShapeMismatchError,
)
from ._utils import (
    PathLike,
    counter_rng,
    read_plane16,
    read_sidecar,
    write_plane16,
    write_sidecar,
)
from .config import BAYER_BASES

logger = logging.getLogger(__name__)

CHANNELS = {"R": 0, "G": 1, "B": 2}
BLOCK_SIZES = {"bayer": 1, "quad": 2, "nona": 3}


@dataclass(frozen=True)
class CfaPattern:
    kind: str
    base: str = "RGGB"
    block: int = field(init=False)
    channel_map: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in BLOCK_SIZES:
            raise PatternNotSupportedError(self.kind)
        if self.base not in BAYER_BASES:
            raise PatternNotSupportedError(f"{self.kind}/{self.base}")
        block = BLOCK_SIZES[self.kind]
        base_map = np.array([CHANNELS[c] for c in self.base], dtype=np.int64)
        base_map = base_map.reshape(2, 2)
        channel_map = np.repeat(np.repeat(base_map, block, axis=0), block, axis=1)
        channel_map.setflags(write=False)
        object.__setattr__(self, "block", block)
        object.__setattr__(self, "channel_map", channel_map)

    @property
    def period(self) -> int:
        return 2 * self.block

    def tile(self, height: int, width: int) -> np.ndarray:
        """H×W channel index of every sensor pixel."""
        reps = (-(-height // self.period), -(-width // self.period))
        return np.tile(self.channel_map, reps)[:height, :width]

    def masks(self, height: int, width: int) -> np.ndarray:
        """3×H×W boolean masks, one per colour channel."""
        tiled = self.tile(height, width)
        return np.stack([tiled == channel for channel in range(3)])


def make_pattern(kind: str, base: str = "RGGB") -> CfaPattern:
    return CfaPattern(kind=kind, base=base)


@dataclass
class MosaicImage:
    plane: np.ndarray
    pattern: CfaPattern
    sigma: float = 0.0
    seed: Optional[int] = None

    def __post_init__(self):
        if self.plane.ndim != 2:
            raise ShapeMismatchError(
                "mosaic", f"plane must be H×W, got {self.plane.shape}"
            )
        height, width = self.plane.shape
        period = self.pattern.period
        if height % period or width % period:
            raise ShapeMismatchError(
                "mosaic",
                f"{height}×{width} is not a multiple of the {self.pattern.kind} period {period}",
            )

    @property
    def shape(self):
        return self.plane.shape

    def metadata(self) -> Dict[str, Any]:
        return {
            "pattern": self.pattern.kind,
            "base": self.pattern.base,
            "sigma": self.sigma,
            "seed": self.seed,
        }


def mosaic(rgb: np.ndarray, pattern: CfaPattern) -> MosaicImage:
    """Sample an H×W×3 image through the pattern: plane(y, x) = rgb(y, x, map(y, x))."""
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ShapeMismatchError("mosaic", f"expected an H×W×3 image, got {rgb.shape}")
    height, width = rgb.shape[:2]
    if height % pattern.period or width % pattern.period:
        raise ShapeMismatchError(
            "mosaic",
            f"{height}×{width} is not a multiple of the {pattern.kind} period {pattern.period}",
        )
    index = pattern.tile(height, width)[:, :, None]
    rgb = np.asarray(rgb, dtype=np.float64)
    plane = np.take_along_axis(rgb, index, axis=2)[:, :, 0]
    return MosaicImage(np.clip(plane, 0.0, 1.0), pattern, sigma=0.0)


def add_noise(
    m: MosaicImage, sigma: float, seed: int, stream: Sequence[int] = ()
) -> MosaicImage:
    """
    Add N(0, sigma/255) to the plane and clip to [0, 1]. The draw is keyed
    by ``(seed, *stream)`` so callers pick independent streams per image.
    """
    if sigma < 0:
        raise ConfigError(f"noise sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return MosaicImage(m.plane.copy(), m.pattern, sigma=m.sigma, seed=m.seed)

    rng = counter_rng(seed, *stream)
    noise = rng.normal(0.0, sigma / 255.0, size=m.plane.shape)
    plane = np.clip(m.plane + noise, 0.0, 1.0)
    return MosaicImage(plane, m.pattern, sigma=float(sigma), seed=seed)


def bin_to_bayer(m: MosaicImage) -> MosaicImage:
    """Average every homogeneous block (2×2 quad, 3×3 nona) into one Bayer pixel."""
    block = m.pattern.block
    if block == 1:
        raise PatternNotSupportedError(
            f"{m.pattern.kind} (already Bayer, nothing to bin)"
        )
    height, width = m.plane.shape
    binned = m.plane.reshape(height // block, block, width // block, block).mean(
        axis=(1, 3)
    )
    return MosaicImage(
        binned, make_pattern("bayer", m.pattern.base), sigma=m.sigma, seed=m.seed
    )


def bin_nona_to_bayer(m: MosaicImage) -> MosaicImage:
    if m.pattern.kind != "nona":
        raise PatternNotSupportedError(f"{m.pattern.kind} (binning expects nona)")
    return bin_to_bayer(m)


def downsample_rgb(rgb: np.ndarray, block: int) -> np.ndarray:
    """Area-average an H×W×3 image by ``block``; the ground truth for binned mosaics."""
    height, width = rgb.shape[:2]
    if height % block or width % block:
        raise ShapeMismatchError(
            "downsample_rgb", f"{height}×{width} is not a multiple of {block}"
        )
    blocks = rgb.reshape(height // block, block, width // block, block, 3)
    return blocks.mean(axis=(1, 3))


def write_mosaic(path: PathLike, m: MosaicImage) -> None:
    write_plane16(path, m.plane)
    write_sidecar(path, m.metadata())
    logger.debug(f"wrote {m.pattern.kind} mosaic {m.plane.shape} to {path}")


def read_mosaic(path: PathLike) -> MosaicImage:
    plane = read_plane16(path)
    metadata = read_sidecar(path)
    try:
        pattern = make_pattern(metadata["pattern"], metadata.get("base", "RGGB"))
        sigma = float(metadata.get("sigma") or 0.0)
    except (KeyError, TypeError, ValueError) as e:
        raise DataError(f"sidecar for {path} is malformed: {e}")
    except PatternNotSupportedError as e:
        raise DataError(f"sidecar for {path}: {e.message}")
    return MosaicImage(plane, pattern, sigma=sigma, seed=metadata.get("seed"))
