"""
Binary checkpoint format (little-endian):

    b"MTLG" | version u32 | rows u32 | cols u32 | objective u8
    then per parameter, in architectural order:
    rank u32 | extents u32 * rank | float64 values
"""
import logging
import os
import struct

import numpy as np

from errors import (
    CheckpointError,
    CheckpointMagicError,
    CheckpointShapeError,
    CheckpointTruncatedError,
    CheckpointVersionError,
)
from tasks.grid import GridTaskSpec, parse_spec
from tensorcore.layers import DEFAULT_DTYPE

from .model import MtlModel, build_model

logger = logging.getLogger(__name__)

MAGIC = b"MTLG"
FORMAT_VERSION = 1
OBJECTIVE_TAGS = {"base": 0, "wloss": 1, "new": 2, "single": 3}
TAG_OBJECTIVES = {tag: name for name, tag in OBJECTIVE_TAGS.items()}
_HEADER = struct.Struct("<4sIIIB")


def save_checkpoint(model: MtlModel, path: str) -> None:
    chunks = [_HEADER.pack(MAGIC, FORMAT_VERSION, model.spec.rows, model.spec.cols,
                           OBJECTIVE_TAGS[model.objective])]
    for value in model.parameters().values():
        chunks.append(struct.pack(f"<I{value.ndim}I", value.ndim, *value.shape))
        chunks.append(np.ascontiguousarray(value, dtype="<f8").tobytes())
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(path, "wb") as f:
        f.write(b"".join(chunks))
    logger.debug("Saved checkpoint %s (%d parameters)", path, model.parameter_count())


class _Reader:
    def __init__(self, raw: bytes, path: str):
        self.raw = raw
        self.path = path
        self.offset = 0

    def take(self, size: int, what: str) -> bytes:
        end = self.offset + size
        if end > len(self.raw):
            raise CheckpointTruncatedError(
                f"{self.path}: truncated while reading {what} (need {end} bytes, file has {len(self.raw)})"
            )
        chunk = self.raw[self.offset:end]
        self.offset = end
        return chunk


def load_checkpoint(path: str, spec: GridTaskSpec = None, dtype=DEFAULT_DTYPE) -> MtlModel:
    """Rebuild a model from a checkpoint. spec supplies script names when known."""
    with open(path, "rb") as f:
        reader = _Reader(f.read(), path)

    if reader.take(4, "magic") != MAGIC:
        raise CheckpointMagicError(f"{path}: not a checkpoint (bad magic)")
    (version,) = struct.unpack("<I", reader.take(4, "version"))
    if version != FORMAT_VERSION:
        raise CheckpointVersionError(f"{path}: format version {version}, this build reads {FORMAT_VERSION}")
    rows, cols = struct.unpack("<II", reader.take(8, "grid"))
    (tag,) = struct.unpack("<B", reader.take(1, "objective"))
    if tag not in TAG_OBJECTIVES:
        raise CheckpointError(f"{path}: unknown objective tag {tag}")

    if spec is None or (spec.rows, spec.cols) != (rows, cols):
        spec = parse_spec(f"{rows}x{cols}")
    model = build_model(spec, TAG_OBJECTIVES[tag], seed=0, dtype=dtype)

    for name, target in model.parameters().items():
        (rank,) = struct.unpack("<I", reader.take(4, f"{name} rank"))
        shape = struct.unpack(f"<{rank}I", reader.take(4 * rank, f"{name} extents"))
        if tuple(shape) != target.shape:
            raise CheckpointShapeError(f"{path}: {name} has shape {tuple(shape)}, expected {target.shape}")
        values = np.frombuffer(reader.take(8 * target.size, f"{name} values"), dtype="<f8")
        target[...] = values.reshape(target.shape)
    if reader.offset != len(reader.raw):
        raise CheckpointError(f"{path}: {len(reader.raw) - reader.offset} trailing bytes")
    return model
