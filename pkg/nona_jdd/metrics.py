"""
Image-quality metrics and the per-sigma report they feed.

Images are channels-last ``H×W×3`` arrays in [0, 1], as decoded from disk.
"""
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Union

import numpy as np
from scipy.ndimage import gaussian_filter

from ._exceptions import ShapeMismatchError
from ._tensor import Tensor, no_grad
from .colour import delta_e_map
from .settings import settings

LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])

ArrayLike = Union[np.ndarray, Tensor]


def _array(image: ArrayLike) -> np.ndarray:
    data = image.data if isinstance(image, Tensor) else image
    return np.asarray(data, dtype=np.float64)


def _check_pair(operation: str, first: np.ndarray, second: np.ndarray) -> None:
    if first.shape != second.shape:
        raise ShapeMismatchError(
            operation, f"shapes differ: {first.shape} vs {second.shape}"
        )


def psnr(reconstruction: ArrayLike, target: ArrayLike, peak: float = 1.0) -> float:
    """10·log10(peak² / MSE) in dB; a perfect match reports settings.PSNR_CAP_DB."""
    first, second = _array(reconstruction), _array(target)
    _check_pair("psnr", first, second)
    mse = float(np.mean((first - second) ** 2))
    if mse == 0.0:
        return float(settings.PSNR_CAP_DB)
    return min(10.0 * math.log10(peak * peak / mse), float(settings.PSNR_CAP_DB))


def luminance(rgb: np.ndarray) -> np.ndarray:
    return rgb @ LUMA_WEIGHTS


def ssim(reconstruction: ArrayLike, target: ArrayLike, peak: float = 1.0) -> float:
    """
    Mean local SSIM of the luminance planes, Gaussian window (11 taps,
    sigma 1.5), averaged over the positions where the window fits.
    """
    first, second = _array(reconstruction), _array(target)
    _check_pair("ssim", first, second)
    if first.ndim == 3:
        first, second = luminance(first), luminance(second)

    window = settings.SSIM_WINDOW
    radius = window // 2
    if min(first.shape) < window:
        raise ShapeMismatchError(
            "ssim", f"image {first.shape} is smaller than the {window}×{window} window"
        )

    sigma = settings.SSIM_SIGMA
    # truncate so the kernel radius is exactly window // 2
    truncate = (radius + 0.25) / sigma

    def blur(plane):
        return gaussian_filter(plane, sigma=sigma, truncate=truncate)[
            radius:-radius, radius:-radius
        ]

    c1 = (settings.SSIM_K1 * peak) ** 2
    c2 = (settings.SSIM_K2 * peak) ** 2
    mu1, mu2 = blur(first), blur(second)
    var1 = blur(first * first) - mu1 * mu1
    var2 = blur(second * second) - mu2 * mu2
    covariance = blur(first * second) - mu1 * mu2

    ssim_map = ((2 * mu1 * mu2 + c1) * (2 * covariance + c2)) / (
        (mu1 * mu1 + mu2 * mu2 + c1) * (var1 + var2 + c2)
    )
    return float(np.mean(ssim_map))


def delta_e_image(
    reconstruction: ArrayLike, target: ArrayLike, colour_space: str = "srgb"
) -> float:
    """Mean per-pixel CIEDE2000, the same pipeline as the colour loss."""
    first, second = _array(reconstruction), _array(target)
    _check_pair("delta_e_image", first, second)
    with no_grad():
        out = delta_e_map(
            Tensor(np.transpose(first, (2, 0, 1))),
            Tensor(np.transpose(second, (2, 0, 1))),
            colour_space,
        )
    return float(np.mean(out.data))


@dataclass
class ImageMetrics:
    source: str
    sigma: float
    psnr: float
    ssim: float
    delta_e: float


@dataclass
class SigmaSummary:
    sigma: float
    psnr: float
    ssim: float
    delta_e: float
    count: int


@dataclass
class MetricsReport:
    images: List[ImageMetrics]
    summaries: List[SigmaSummary]
    meta: Dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_images(
        cls,
        images: Iterable[ImageMetrics],
        sigmas: Optional[Iterable[float]] = None,
        **meta: Any,
    ) -> "MetricsReport":
        images = list(images)
        order = [float(s) for s in sigmas] if sigmas is not None else []
        for item in images:
            if item.sigma not in order:
                order.append(item.sigma)
        summaries = []
        for sigma in order:
            rows = [item for item in images if item.sigma == sigma]
            if not rows:
                continue
            summaries.append(
                SigmaSummary(
                    sigma=sigma,
                    psnr=float(np.mean([r.psnr for r in rows])),
                    ssim=float(np.mean([r.ssim for r in rows])),
                    delta_e=float(np.mean([r.delta_e for r in rows])),
                    count=len(rows),
                )
            )
        return cls(images=images, summaries=summaries, meta=dict(meta))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "meta": dict(self.meta),
            "summaries": [asdict(s) for s in self.summaries],
            "images": [asdict(i) for i in self.images],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "MetricsReport":
        document = json.loads(text)
        return cls(
            images=[ImageMetrics(**item) for item in document["images"]],
            summaries=[SigmaSummary(**item) for item in document["summaries"]],
            meta=document.get("meta", {}),
        )

    def to_table(self) -> str:
        """One row per sigma: PSNR ↑, SSIM ↑, DeltaE ↓ means over the images."""
        header = f"{'sigma':>7} {'PSNR':>9} {'SSIM':>8} {'DeltaE':>8} {'images':>7}"
        lines = [header, "-" * len(header)]
        for row in self.summaries:
            lines.append(
                f"{row.sigma:>7g} {row.psnr:>9.4f} {row.ssim:>8.4f} "
                f"{row.delta_e:>8.4f} {row.count:>7d}"
            )
        return "\n".join(lines)
