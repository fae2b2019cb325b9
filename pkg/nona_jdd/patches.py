import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, List, Optional, Tuple

import numpy as np

from ._exceptions import ConfigError, DataError, EmptyDatasetError, ImageDecodeError
from ._utils import PathLike, list_images, read_rgb, write_rgb
from .settings import settings

logging.basicConfig()
logger = logging.getLogger(__name__)


@dataclass
class Patch:
    rgb: np.ndarray
    source: Path
    offset: Tuple[int, int]


@dataclass
class PatchSet:
    size: int
    stride: int
    patches: List[Patch] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.patches)

    def __iter__(self) -> Iterator[Patch]:
        return iter(self.patches)

    def __getitem__(self, index: int) -> Patch:
        return self.patches[index]

    def stack(self) -> np.ndarray:
        """N×size×size×3 array of every patch."""
        return np.stack([patch.rgb for patch in self.patches])


def _read(path: Path) -> Optional[np.ndarray]:
    try:
        return read_rgb(path)
    except ImageDecodeError as e:
        logger.warning(f"skipping {path}: {e.message}")
        return None


def _cut(rgb: np.ndarray, source: Path, size: int, stride: int) -> List[Patch]:
    height, width = rgb.shape[:2]
    return [
        Patch(rgb[y : y + size, x : x + size].copy(), source, (y, x))
        for y in range(0, height - size + 1, stride)
        for x in range(0, width - size + 1, stride)
    ]


def extract_patches(
    image_dir: PathLike,
    size: int,
    stride: Optional[int] = None,
    workers: Optional[int] = None,
) -> PatchSet:
    """
    Cut every full ``size``×``size`` patch from the images in ``image_dir``.

    Files are taken in sorted path order and patches in raster order of
    their offsets; partial patches at the right and bottom edges are
    dropped. Unreadable files are skipped with a warning.
    """
    stride = size if stride is None else stride
    if size < 1 or stride < 1:
        raise ConfigError(f"patch size and stride must be >= 1, got {size}, {stride}")
    directory = Path(image_dir)
    if not directory.is_dir():
        raise DataError(f"image directory {directory} does not exist")

    logger.setLevel(settings.LOG_LEVEL)
    paths = list_images(directory)
    workers = workers or settings.PATCH_READ_WORKERS
    with ThreadPoolExecutor(max_workers=workers) as pool:
        images = list(pool.map(_read, paths))

    patch_set = PatchSet(size=size, stride=stride)
    for path, rgb in zip(paths, images):
        if rgb is None:
            continue
        patch_set.patches.extend(_cut(rgb, path, size, stride))

    if not patch_set.patches:
        raise EmptyDatasetError(directory)
    logger.info(
        f"extracted {len(patch_set)} patches of {size}×{size} from {len(paths)} files"
    )
    return patch_set


def save_patches(patch_set: PatchSet, out_dir: PathLike) -> List[Path]:
    """Write each patch as ``<source stem>_<y>_<x>.png``."""
    directory = Path(out_dir)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for patch in patch_set:
        y, x = patch.offset
        path = directory / f"{patch.source.stem}_{y:05d}_{x:05d}.png"
        write_rgb(path, patch.rgb)
        written.append(path)
    return written
