"""
IDX container reader/writer (the MNIST file format).

Layout, all header fields big-endian u32:

    images: 0x00000803 | count | rows | cols | u8 pixels, row-wise
    labels: 0x00000801 | count | u8 labels

Files ending in .gz are decompressed transparently.
"""
import gzip
import logging
import os
import struct
import time
from typing import Tuple, Union

import numpy as np

from errors import IdxCountMismatchError, IdxMagicError, IdxTruncatedError, ImageSizeError
from tensorcore.layers import DEFAULT_DTYPE

logger = logging.getLogger(__name__)

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801
IMAGE_SIDE = 28

PathLike = Union[str, os.PathLike]


def _read_bytes(path: PathLike) -> bytes:
    if not os.path.exists(path):
        raise FileNotFoundError(f"IDX file not found: {path}")
    opener = gzip.open if str(path).endswith(".gz") else open
    with opener(path, "rb") as f:
        return f.read()


def _header(raw: bytes, path: PathLike, expected_magic: int, dims: int) -> Tuple[int, ...]:
    if len(raw) < 4:
        raise IdxTruncatedError(f"{path}: file too short for an IDX magic number")
    (magic,) = struct.unpack(">I", raw[:4])
    if magic != expected_magic:
        raise IdxMagicError(
            f"{path}: bad magic 0x{magic:08x}, expected 0x{expected_magic:08x}"
        )
    size = 4 * (1 + dims)
    if len(raw) < size:
        raise IdxTruncatedError(f"{path}: header truncated ({len(raw)} of {size} bytes)")
    return struct.unpack(f">{dims}I", raw[4:size])


def read_idx_images(path: PathLike) -> np.ndarray:
    """Raw u8 pixels, shape (N, rows, cols)."""
    raw = _read_bytes(path)
    count, rows, cols = _header(raw, path, IMAGE_MAGIC, 3)
    expected = count * rows * cols
    payload = raw[16:]
    if len(payload) < expected:
        raise IdxTruncatedError(f"{path}: {len(payload)} pixel bytes, header promises {expected}")
    return np.frombuffer(payload, dtype=np.uint8, count=expected).reshape(count, rows, cols)


def read_idx_labels(path: PathLike) -> np.ndarray:
    raw = _read_bytes(path)
    (count,) = _header(raw, path, LABEL_MAGIC, 1)
    payload = raw[8:]
    if len(payload) < count:
        raise IdxTruncatedError(f"{path}: {len(payload)} label bytes, header promises {count}")
    return np.frombuffer(payload, dtype=np.uint8, count=count)


def normalize_pixels(pixels: np.ndarray, dtype=DEFAULT_DTYPE) -> np.ndarray:
    """u8 (N, 28, 28) -> (N, 1, 28, 28) in [0, 1], value = byte / 255."""
    return (pixels.astype(dtype) / np.asarray(255.0, dtype=dtype))[:, None, :, :]


def read_idx(images_path: PathLike, labels_path: PathLike, dtype=DEFAULT_DTYPE) -> Tuple[np.ndarray, np.ndarray]:
    t0 = time.perf_counter()
    pixels = read_idx_images(images_path)
    labels = read_idx_labels(labels_path)
    if pixels.shape[0] != labels.shape[0]:
        raise IdxCountMismatchError(
            f"{images_path} holds {pixels.shape[0]} images but {labels_path} holds {labels.shape[0]} labels"
        )
    if pixels.shape[1:] != (IMAGE_SIDE, IMAGE_SIDE):
        raise ImageSizeError(
            f"{images_path}: images are {pixels.shape[1]}x{pixels.shape[2]}, only 28x28 is supported"
        )
    images = normalize_pixels(pixels, dtype)
    t1 = time.perf_counter()
    logger.info("[IDX] read %d items from %s took %.1f ms", len(labels), images_path, (t1 - t0) * 1000)
    return images, labels.astype(np.int64)


def write_idx(pixels: np.ndarray, labels: np.ndarray, images_path: PathLike, labels_path: PathLike) -> None:
    """Write u8 pixels (N, rows, cols) and u8 labels (N,) as an IDX pair."""
    pixels = np.asarray(pixels, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    if pixels.ndim != 3:
        raise ValueError(f"pixels must be (N, rows, cols), got shape {pixels.shape}")
    image_bytes = struct.pack(">4I", IMAGE_MAGIC, *pixels.shape) + pixels.tobytes()
    label_bytes = struct.pack(">2I", LABEL_MAGIC, labels.shape[0]) + labels.tobytes()
    for path, payload in ((images_path, image_bytes), (labels_path, label_bytes)):
        opener = gzip.open if str(path).endswith(".gz") else open
        with opener(path, "wb") as f:
            f.write(payload)
