import logging
import math
from pathlib import Path
from typing import Callable, Iterable, Union

import numpy as np

from ._exceptions import ConfigError, DataError, EmptyDatasetError, ImageDecodeError
from ._tensor import Tensor, no_grad
from ._utils import PathLike, list_images, read_rgb
from .cfa import (
    MosaicImage,
    add_noise,
    bin_nona_to_bayer,
    downsample_rgb,
    make_pattern,
    mosaic,
)
from .colour import COLOUR_SPACES, srgb_to_linear
from .generator import Generator
from .metrics import ImageMetrics, MetricsReport, delta_e_image, psnr, ssim
from .settings import settings

logging.basicConfig()
logger = logging.getLogger(__name__)

Reconstructor = Callable[[MosaicImage, np.ndarray], np.ndarray]


def pad_mosaic(plane: np.ndarray, multiple: int, period: int) -> np.ndarray:
    """
    Grow an H×W plane at the bottom and right to multiples of ``multiple``
    by repeating its last CFA period, which keeps the pattern phase.
    """
    height, width = plane.shape
    target_h = -(-height // multiple) * multiple
    target_w = -(-width // multiple) * multiple

    def extend(array, needed, axis):
        if needed == 0:
            return array
        tail = np.take(
            array, range(array.shape[axis] - period, array.shape[axis]), axis=axis
        )
        repeats = -(-needed // period)
        filler = np.concatenate([tail] * repeats, axis=axis)
        filler = np.take(filler, range(needed), axis=axis)
        return np.concatenate([array, filler], axis=axis)

    return extend(extend(plane, target_h - height, 0), target_w - width, 1)


def reconstruct(generator: Generator, m: MosaicImage) -> np.ndarray:
    """Run the generator on a mosaic of any valid size; returns H×W×3 in (0, 1)."""
    height, width = m.plane.shape
    plane = pad_mosaic(m.plane, generator.config.size_multiple, m.pattern.period)
    was_training = generator.training
    generator.eval()
    try:
        with no_grad():
            out = generator(Tensor(plane[None].astype(generator.dtype)))
    finally:
        generator.train(was_training)
    return np.transpose(out.data, (1, 2, 0))[:height, :width].astype(np.float64)


def linearize(rgb: np.ndarray) -> np.ndarray:
    with no_grad():
        return srgb_to_linear(Tensor(rgb)).data


def _crop(rgb: np.ndarray, multiple: int, source: Path) -> np.ndarray:
    height, width = rgb.shape[:2]
    crop_h, crop_w = height - height % multiple, width - width % multiple
    if crop_h == 0 or crop_w == 0:
        raise DataError(f"{source} is smaller than one {multiple}×{multiple} tile")
    if (crop_h, crop_w) != (height, width):
        logger.warning(
            f"{source}: discarding edge pixels, evaluating {crop_h}×{crop_w} of {height}×{width}"
        )
    return rgb[:crop_h, :crop_w]


def _as_reconstructor(model: Union[Generator, Reconstructor]) -> Reconstructor:
    if isinstance(model, Generator):
        return lambda m, reference: reconstruct(model, m)
    return model


def evaluate(
    model: Union[Generator, Reconstructor],
    dataset_dir: PathLike,
    sigmas: Iterable[float],
    pattern: str = "nona",
    base: str = "RGGB",
    seed: int = 0,
    colour_space: str = "srgb",
    binned: bool = False,
) -> MetricsReport:
    """
    Mosaic every image at every sigma, reconstruct it, and score the result
    with PSNR, SSIM and ΔE2000 against the ground truth.

    ``model`` is a generator or any callable taking (mosaic, ground truth)
    and returning the H×W×3 reconstruction. Noise is keyed by
    (seed, sigma, image index), so reports are reproducible. With
    ``colour_space="linear"`` images are linearised before simulation and
    scored in linear RGB. With ``binned=True`` a Nona capture is binned to
    Bayer and scored against the 3×3 area-averaged ground truth.
    """
    logger.setLevel(settings.LOG_LEVEL)
    sigmas = [float(s) for s in sigmas]
    if not sigmas:
        raise ConfigError("evaluate needs at least one sigma")
    if colour_space not in COLOUR_SPACES:
        raise ConfigError(
            f"colour_space must be one of {COLOUR_SPACES}, got {colour_space!r}"
        )
    cfa = make_pattern(pattern, base)
    if binned and cfa.kind != "nona":
        raise ConfigError("binned evaluation needs the nona pattern")

    reconstructor = _as_reconstructor(model)
    multiple = cfa.period
    if isinstance(model, Generator):
        # binned captures shrink by 3, and must still tile the generator
        size_multiple = model.config.size_multiple * (cfa.block if binned else 1)
        multiple = multiple * size_multiple // math.gcd(multiple, size_multiple)

    directory = Path(dataset_dir)
    if not directory.is_dir():
        raise DataError(f"dataset directory {directory} does not exist")

    images = []
    for index, path in enumerate(list_images(directory)):
        try:
            rgb = read_rgb(path)
        except ImageDecodeError as e:
            logger.warning(f"skipping {path}: {e.message}")
            continue
        rgb = _crop(rgb, multiple, path)
        if colour_space == "linear":
            rgb = linearize(rgb)

        for sigma in sigmas:
            noisy = add_noise(
                mosaic(rgb, cfa), sigma, seed, stream=(int(round(sigma * 100)), index)
            )
            reference = rgb
            if binned:
                noisy = bin_nona_to_bayer(noisy)
                reference = downsample_rgb(rgb, cfa.block)
            output = reconstructor(noisy, reference)
            images.append(
                ImageMetrics(
                    source=path.name,
                    sigma=sigma,
                    psnr=psnr(output, reference),
                    ssim=ssim(output, reference),
                    delta_e=delta_e_image(output, reference, colour_space),
                )
            )

    if not images:
        raise EmptyDatasetError(directory)

    report = MetricsReport.from_images(
        images,
        sigmas=sigmas,
        pattern=cfa.kind,
        base=cfa.base,
        seed=seed,
        colour_space=colour_space,
        binned=binned,
    )
    for row in report.summaries:
        logger.info(
            f"sigma {row.sigma:g}: PSNR {row.psnr:.3f} dB, SSIM {row.ssim:.4f}, "
            f"DeltaE {row.delta_e:.3f} over {row.count} images"
        )
    return report


__all__ = ["evaluate", "reconstruct", "pad_mosaic", "linearize", "Reconstructor"]
