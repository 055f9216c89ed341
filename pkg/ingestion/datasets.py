import logging
import os
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np
from dotenv import dotenv_values

from errors import GridMetaError, LabelRangeError
from tasks.grid import GridTaskSpec
from tasks.labels import compose_label

from .idx_reader import PathLike, read_idx

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Dataset:
    images: np.ndarray  # (N, 1, 28, 28), values in [0, 1]
    labels: np.ndarray  # (N,) main labels, int64
    spec: GridTaskSpec

    def __post_init__(self):
        self.images.setflags(write=False)
        self.labels.setflags(write=False)

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    def subset(self, indices: Sequence[int]) -> "Dataset":
        indices = np.asarray(indices, dtype=np.int64)
        return Dataset(self.images[indices], self.labels[indices], self.spec)

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.spec.num_classes)


def _check_range(labels: np.ndarray, bound: int, source: str) -> None:
    bad = np.flatnonzero((labels < 0) | (labels >= bound))
    if bad.size:
        index = int(bad[0])
        raise LabelRangeError(
            f"{source}: label {int(labels[index])} at index {index} is outside 0..{bound - 1}",
            index=index,
        )


def assemble_multiscript(per_script: List[Dataset], spec: GridTaskSpec) -> Dataset:
    """Stack single-script digit datasets into one grid dataset (label = script * C + digit)."""
    if len(per_script) != spec.rows:
        raise ValueError(f"Expected {spec.rows} script datasets, got {len(per_script)}")
    images, labels = [], []
    for script, ds in enumerate(per_script):
        _check_range(ds.labels, spec.cols, f"script {spec.script_names[script]}")
        images.append(ds.images)
        labels.append(np.array([compose_label(script, d, spec.cols) for d in range(spec.cols)],
                               dtype=np.int64)[ds.labels])
    combined = Dataset(np.concatenate(images), np.concatenate(labels), spec)
    logger.info("Assembled %d samples over %s grid", len(combined), spec.tag)
    return combined


def parse_grid_meta(meta_path: PathLike) -> GridTaskSpec:
    """Read the key=value grid description: rows=, cols=, names= (comma separated)."""
    if not os.path.exists(meta_path):
        raise FileNotFoundError(f"Grid metadata not found: {meta_path}")
    values = {key: value for key, value in dotenv_values(meta_path).items() if value is not None}
    unknown = set(values) - {"rows", "cols", "names"}
    if unknown:
        raise GridMetaError(f"{meta_path}: unknown keys {', '.join(sorted(unknown))}")
    try:
        rows, cols = int(values["rows"]), int(values["cols"])
    except KeyError as e:
        raise GridMetaError(f"{meta_path}: missing key {e.args[0]}") from e
    except ValueError as e:
        raise GridMetaError(f"{meta_path}: rows/cols must be integers") from e
    names = tuple(n.strip() for n in values["names"].split(",")) if values.get("names") else ()
    try:
        return GridTaskSpec(rows, cols, names)
    except ValueError as e:
        raise GridMetaError(f"{meta_path}: {e}") from e


def load_grid_dataset(images_path: PathLike, labels_path: PathLike, meta_path: PathLike) -> Dataset:
    spec = parse_grid_meta(meta_path)
    images, labels = read_idx(images_path, labels_path)
    _check_range(labels, spec.num_classes, str(labels_path))
    return Dataset(images, labels, spec)


def load_script_dataset(images_path: PathLike, labels_path: PathLike, spec: GridTaskSpec) -> Dataset:
    """One script's digits with labels 0..C-1 (a 1 x C grid)."""
    images, labels = read_idx(images_path, labels_path)
    _check_range(labels, spec.cols, str(labels_path))
    return Dataset(images, labels, spec)
