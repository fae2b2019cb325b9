"""
Binary checkpoint files.

Layout, all little-endian::

    b"SAGN"                 magic
    u32                     version (1)
    u32                     tensor count
    per tensor:
        u16                 name length in bytes
        bytes               UTF-8 name
        u8                  dtype code (0 = float32)
        u8                  rank
        u32 * rank          dims
        float32 * prod(dims) row-major data
    u32                     CRC32 of every preceding byte
"""
import logging
import os
import struct
import zlib
from collections import OrderedDict
from pathlib import Path
from typing import Mapping, Optional, Tuple, Union

import numpy as np

from ._exceptions import CheckpointError
from ._tensor import Tensor
from ._utils import PathLike
from .optim import STEP_KEY, AdamState

logger = logging.getLogger(__name__)

MAGIC = b"SAGN"
VERSION = 1
DTYPE_CODES = {0: np.dtype("<f4")}
FLOAT32 = 0


def encode(tensors: Mapping[str, np.ndarray]) -> bytes:
    chunks = [MAGIC, struct.pack("<II", VERSION, len(tensors))]
    for name, value in tensors.items():
        encoded_name = name.encode("utf-8")
        array = np.asarray(value, dtype=DTYPE_CODES[FLOAT32], order="C")
        chunks.append(struct.pack("<H", len(encoded_name)))
        chunks.append(encoded_name)
        chunks.append(struct.pack("<BB", FLOAT32, array.ndim))
        chunks.append(struct.pack(f"<{array.ndim}I", *array.shape))
        chunks.append(array.tobytes(order="C"))
    body = b"".join(chunks)
    return body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)


class _Reader:
    def __init__(self, blob: bytes, end: int, path):
        self.blob, self.end, self.path = blob, end, path
        self.offset = 0

    def take(self, count: int) -> bytes:
        if self.offset + count > self.end:
            raise CheckpointError(self.path, "file is truncated")
        chunk = self.blob[self.offset : self.offset + count]
        self.offset += count
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def decode(blob: bytes, path="<bytes>") -> "OrderedDict[str, np.ndarray]":
    if len(blob) < len(MAGIC) + 12:
        raise CheckpointError(path, "file is truncated")
    if blob[: len(MAGIC)] != MAGIC:
        raise CheckpointError(
            path, f"bad magic {blob[:len(MAGIC)]!r}, expected {MAGIC!r}"
        )

    reader = _Reader(blob, len(blob) - 4, path)
    reader.take(len(MAGIC))
    version, count = reader.unpack("<II")
    if version != VERSION:
        raise CheckpointError(
            path, f"unsupported version {version}, expected {VERSION}"
        )

    tensors = OrderedDict()
    for _ in range(count):
        (name_length,) = reader.unpack("<H")
        try:
            name = reader.take(name_length).decode("utf-8")
        except UnicodeDecodeError:
            raise CheckpointError(path, "tensor name is not valid UTF-8")
        dtype_code, rank = reader.unpack("<BB")
        if dtype_code not in DTYPE_CODES:
            raise CheckpointError(path, f"unknown dtype code {dtype_code} for {name}")
        shape = reader.unpack(f"<{rank}I") if rank else ()
        dtype = DTYPE_CODES[dtype_code]
        size = int(np.prod(shape, dtype=np.int64))
        data = np.frombuffer(reader.take(size * dtype.itemsize), dtype=dtype)
        tensors[name] = data.reshape(shape).astype(np.float32)

    if reader.offset != reader.end:
        raise CheckpointError(
            path, f"{reader.end - reader.offset} unexpected trailing bytes"
        )
    (stored_crc,) = struct.unpack("<I", blob[-4:])
    if zlib.crc32(blob[:-4]) & 0xFFFFFFFF != stored_crc:
        raise CheckpointError(path, "CRC32 mismatch, file is corrupt")
    return tensors


def save_checkpoint(
    path: PathLike,
    params: Mapping[str, np.ndarray],
    state: Optional[AdamState] = None,
) -> Path:
    """Write parameters (and optimizer moments) atomically to ``path``."""
    tensors = OrderedDict(params)
    if state is not None:
        tensors.update(state.state_dict())
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    partial = path.with_name(path.name + ".partial")
    with open(partial, "wb") as f:
        f.write(encode(tensors))
    os.replace(partial, path)
    logger.info(f"checkpoint with {len(tensors)} tensors written to {path}")
    return path


def load_checkpoint(
    path: PathLike,
) -> Tuple["OrderedDict[str, np.ndarray]", Optional[AdamState]]:
    """Read a checkpoint back into (parameters, optimizer state or None)."""
    try:
        with open(path, "rb") as f:
            blob = f.read()
    except OSError as e:
        raise CheckpointError(path, e.strerror or str(e))
    tensors = decode(blob, path)

    params = OrderedDict(
        (name, value) for name, value in tensors.items() if not name.startswith("adam/")
    )
    state = None
    if STEP_KEY in tensors:
        state = AdamState()
        state.load_state_dict(
            OrderedDict((k, v) for k, v in tensors.items() if k.startswith("adam/"))
        )
    return params, state


def dump_tensors(
    path: PathLike, tensors: Mapping[str, Union[Tensor, np.ndarray]]
) -> Path:
    """Debug dump of named tensors in the checkpoint record format."""
    arrays = OrderedDict(
        (name, value.data if isinstance(value, Tensor) else value)
        for name, value in tensors.items()
    )
    return save_checkpoint(path, arrays)
