"""
sRGB / linear RGB -> CIE XYZ (D65) -> CIELAB, and the CIEDE2000 colour
difference, written with autodiff tensors so the perceptual colour loss
trains end to end.

Images are channel-first (3×H×W or N×3×H×W). Hue angles are in radians.
Branch selections (hue wrap-around, zero-chroma cases) are constant masks
taken from the forward values, so backward treats them as piecewise
constant.
"""
import logging
import math
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from ._exceptions import ConfigError
from ._functional import as_batched, conv2d
from ._tensor import Tensor, atan2, no_grad, where

logger = logging.getLogger(__name__)

COLOUR_SPACES = ("srgb", "linear")

SRGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
D65_WHITE = np.array([0.95047, 1.00000, 1.08883])

# rows give L, a, b from (f(X/Xn), f(Y/Yn), f(Z/Zn))
F_TO_LAB = np.array([[0.0, 116.0, 0.0], [500.0, -500.0, 0.0], [0.0, 200.0, -200.0]])
LAB_OFFSET = np.array([-16.0, 0.0, 0.0])

LAB_DELTA = 6.0 / 29.0
POW25_7 = 25.0 ** 7


@dataclass(frozen=True)
class LabColor:
    L: float
    a: float
    b: float

    def as_array(self) -> np.ndarray:
        return np.array([self.L, self.a, self.b], dtype=np.float64)


def _constant(values: np.ndarray, like: Tensor) -> Tensor:
    return Tensor(np.asarray(values, dtype=like.dtype))


def clamp_unit(rgb: Tensor) -> Tensor:
    if rgb.size and (rgb.data.min() < 0.0 or rgb.data.max() > 1.0):
        logger.warning(
            f"colour input outside [0, 1] (min {rgb.data.min():.4g}, "
            f"max {rgb.data.max():.4g}); clamping"
        )
        return rgb.clip(0.0, 1.0)
    return rgb


def srgb_to_linear(rgb: Tensor) -> Tensor:
    """Inverse sRGB transfer curve."""
    curve = ((rgb + 0.055) / 1.055) ** 2.4
    return where(rgb.data > 0.04045, curve, rgb / 12.92)


def _lab_f(t: Tensor) -> Tensor:
    # the cube-root branch is evaluated on a clamped copy so its slope stays finite
    cube_root = t.clip(LAB_DELTA ** 3, None) ** (1.0 / 3.0)
    linear_part = t / (3.0 * LAB_DELTA ** 2) + 4.0 / 29.0
    return where(t.data > LAB_DELTA ** 3, cube_root, linear_part)


def rgb_to_lab(rgb: Tensor, colour_space: str = "srgb") -> Tensor:
    """Channel-first RGB in [0, 1] -> channel-first (L, a, b)."""
    if colour_space not in COLOUR_SPACES:
        raise ConfigError(
            f"colour_space must be one of {COLOUR_SPACES}, got {colour_space!r}"
        )
    batched, squeeze = as_batched(rgb, "rgb_to_lab")
    batched = clamp_unit(batched)
    linear = srgb_to_linear(batched) if colour_space == "srgb" else batched

    to_xyz = SRGB_TO_XYZ / D65_WHITE[:, None]
    normalised_xyz = conv2d(linear, _constant(to_xyz[:, :, None, None], linear))
    f = _lab_f(normalised_xyz)
    lab = conv2d(
        f, _constant(F_TO_LAB[:, :, None, None], f), _constant(LAB_OFFSET, f)
    )
    return lab.reshape(lab.shape[1:]) if squeeze else lab


def srgb_to_lab(rgb: Sequence[float]) -> LabColor:
    """One sRGB colour in [0, 1]^3 -> LabColor (double precision)."""
    pixel = Tensor(np.asarray(rgb, dtype=np.float64).reshape(3, 1, 1))
    with no_grad():
        lab = rgb_to_lab(pixel).data.reshape(3)
    return LabColor(*(float(v) for v in lab))


def _hue(a: Tensor, b: Tensor) -> Tensor:
    """atan2 mapped to [0, 2π), and 0 for the achromatic point."""
    angle = atan2(b, a)
    angle = where(angle.data < 0, angle + 2 * math.pi, angle)
    achromatic = (a.data == 0) & (b.data == 0)
    return where(achromatic, angle * 0.0, angle)


def ciede2000_tensor(
    lab1: Tuple[Tensor, Tensor, Tensor], lab2: Tuple[Tensor, Tensor, Tensor]
) -> Tensor:
    """Elementwise ΔE2000 between two (L, a, b) tensor triples, k_L = k_C = k_H = 1."""
    L1, a1, b1 = lab1
    L2, a2, b2 = lab2

    C1 = (a1 * a1 + b1 * b1).sqrt()
    C2 = (a2 * a2 + b2 * b2).sqrt()
    C_bar7 = ((C1 + C2) * 0.5) ** 7
    G = 0.5 * (1 - (C_bar7 / (C_bar7 + POW25_7)).sqrt())

    a1p = (1 + G) * a1
    a2p = (1 + G) * a2
    C1p = (a1p * a1p + b1 * b1).sqrt()
    C2p = (a2p * a2p + b2 * b2).sqrt()
    h1p = _hue(a1p, b1)
    h2p = _hue(a2p, b2)

    chroma_product = C1p * C2p
    achromatic = chroma_product.data == 0

    dL = L2 - L1
    dC = C2p - C1p
    dh = h2p - h1p
    dh = where(dh.data > math.pi, dh - 2 * math.pi, dh)
    dh = where(dh.data < -math.pi, dh + 2 * math.pi, dh)
    dh = where(achromatic, dh * 0.0, dh)
    dH = 2 * chroma_product.sqrt() * (dh * 0.5).sin()

    L_bar = (L1 + L2) * 0.5
    C_bar_p = (C1p + C2p) * 0.5

    h_sum = h1p + h2p
    far_apart = np.abs(h1p.data - h2p.data) > math.pi
    h_bar = h_sum * 0.5
    h_bar = where(far_apart & (h_sum.data < 2 * math.pi), h_bar + math.pi, h_bar)
    h_bar = where(far_apart & (h_sum.data >= 2 * math.pi), h_bar - math.pi, h_bar)
    h_bar = where(achromatic, h_sum, h_bar)

    T = (
        1
        - 0.17 * (h_bar - math.radians(30)).cos()
        + 0.24 * (2 * h_bar).cos()
        + 0.32 * (3 * h_bar + math.radians(6)).cos()
        - 0.20 * (4 * h_bar - math.radians(63)).cos()
    )
    d_theta = math.radians(30) * (
        -(((h_bar - math.radians(275)) / math.radians(25)) ** 2)
    ).exp()
    C_bar_p7 = C_bar_p ** 7
    R_C = 2 * (C_bar_p7 / (C_bar_p7 + POW25_7)).sqrt()
    L_offset = (L_bar - 50) ** 2
    S_L = 1 + 0.015 * L_offset / (20 + L_offset).sqrt()
    S_C = 1 + 0.045 * C_bar_p
    S_H = 1 + 0.015 * C_bar_p * T
    R_T = -(2 * d_theta).sin() * R_C

    f_L = dL / S_L
    f_C = dC / S_C
    f_H = dH / S_H
    inner = f_L * f_L + f_C * f_C + f_H * f_H + R_T * f_C * f_H
    return inner.clip(0.0, None).sqrt()


def delta_e_map(
    reconstruction: Tensor, reference: Tensor, colour_space: str = "srgb"
) -> Tensor:
    """Per-pixel ΔE2000 map (N×1×H×W or 1×H×W) between two RGB images."""
    lab1 = rgb_to_lab(reconstruction, colour_space)
    lab2 = rgb_to_lab(reference, colour_space)
    if lab1.ndim == 3:
        lab1 = lab1.reshape((1,) + lab1.shape)
        lab2 = lab2.reshape((1,) + lab2.shape)
    split1 = tuple(lab1[:, c : c + 1] for c in range(3))
    split2 = tuple(lab2[:, c : c + 1] for c in range(3))
    out = ciede2000_tensor(split1, split2)
    return out.reshape(out.shape[1:]) if reconstruction.ndim == 3 else out


def delta_e2000(lab1: np.ndarray, lab2: np.ndarray) -> np.ndarray:
    """Vectorised ΔE2000 of (..., 3) Lab arrays, in double precision."""
    first = np.asarray(lab1, dtype=np.float64)
    second = np.asarray(lab2, dtype=np.float64)
    with no_grad():
        out = ciede2000_tensor(
            tuple(Tensor(first[..., i]) for i in range(3)),
            tuple(Tensor(second[..., i]) for i in range(3)),
        )
    return out.data


def ciede2000(x: LabColor, y: LabColor) -> float:
    return float(delta_e2000(x.as_array(), y.as_array()))
