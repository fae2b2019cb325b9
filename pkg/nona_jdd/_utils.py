import json
from pathlib import Path
from typing import Any, Dict, List, Union

import numpy as np
from PIL import Image, UnidentifiedImageError

from ._exceptions import ImageDecodeError

PathLike = Union[str, Path]

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff")

MOSAIC_SCALE = 65535


def counter_rng(seed: int, *stream: int) -> np.random.Generator:
    """
    Counter-based generator keyed by ``(seed, *stream)``. The same key
    always yields the same draws, whatever order callers ask in.
    """
    key = [int(seed)] + [int(s) for s in stream]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(key)))


def list_images(directory: PathLike) -> List[Path]:
    return sorted(
        path
        for path in Path(directory).iterdir()
        if path.is_file() and path.suffix.lower() in IMAGE_SUFFIXES
    )


def read_rgb(path: PathLike) -> np.ndarray:
    """8-bit RGB file -> H×W×3 float64 array in [0, 1]."""
    try:
        with Image.open(path) as image:
            data = np.asarray(image.convert("RGB"), dtype=np.uint8)
    except (OSError, UnidentifiedImageError, ValueError) as e:
        raise ImageDecodeError(path, str(e))
    return data.astype(np.float64) / 255.0


def to_uint8(rgb: np.ndarray) -> np.ndarray:
    return np.round(np.clip(rgb, 0.0, 1.0) * 255.0).astype(np.uint8)


def write_rgb(path: PathLike, rgb: np.ndarray) -> None:
    if rgb.ndim == 3 and rgb.shape[0] == 3 and rgb.shape[-1] != 3:
        rgb = np.transpose(rgb, (1, 2, 0))
    Image.fromarray(to_uint8(rgb)).save(path, format="PNG")


def read_plane16(path: PathLike) -> np.ndarray:
    """Single-channel 16-bit PNG -> H×W float64 plane in [0, 1]."""
    try:
        with Image.open(path) as image:
            if image.mode not in ("I;16", "I;16B", "I;16L", "I", "L"):
                raise ImageDecodeError(
                    path, f"expected a single-channel image, got {image.mode}"
                )
            data = np.asarray(image)
            scale = 255.0 if image.mode == "L" else float(MOSAIC_SCALE)
    except (OSError, UnidentifiedImageError, ValueError) as e:
        raise ImageDecodeError(path, str(e))
    return data.astype(np.float64) / scale


def write_plane16(path: PathLike, plane: np.ndarray) -> None:
    values = np.round(np.clip(plane, 0.0, 1.0) * MOSAIC_SCALE).astype(np.uint16)
    Image.fromarray(values).save(path, format="PNG")


def sidecar_path(path: PathLike) -> Path:
    return Path(path).with_suffix(".json")


def write_sidecar(path: PathLike, metadata: Dict[str, Any]) -> None:
    with open(sidecar_path(path), "w", encoding="utf-8") as f:
        json.dump(metadata, f, sort_keys=True)
        f.write("\n")


def read_sidecar(path: PathLike) -> Dict[str, Any]:
    location = sidecar_path(path)
    try:
        with open(location, "r", encoding="utf-8") as f:
            return json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ImageDecodeError(location, f"unreadable sidecar: {e}")
