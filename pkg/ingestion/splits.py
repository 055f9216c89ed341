import math
from dataclasses import dataclass

import numpy as np

from errors import EmptyClassError

from .datasets import Dataset


@dataclass(frozen=True)
class SplitIndices:
    train: np.ndarray
    val: np.ndarray


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def stratified_split(dataset: Dataset, val_fraction: float = 0.16, seed: int = 0) -> SplitIndices:
    """Per class, round_half_up(val_fraction * n) seeded-shuffled indices go to validation."""
    if not 0.0 < val_fraction < 1.0:
        raise ValueError(f"val_fraction must lie in (0, 1), got {val_fraction}")
    rng = np.random.default_rng(seed)
    train, val = [], []
    for label in range(dataset.spec.num_classes):
        members = np.flatnonzero(dataset.labels == label)
        if members.size == 0:
            raise EmptyClassError(f"Class {label} has no samples; cannot stratify")
        shuffled = rng.permutation(members)
        n_val = round_half_up(val_fraction * members.size)
        val.append(shuffled[:n_val])
        train.append(shuffled[n_val:])
    return SplitIndices(np.sort(np.concatenate(train)), np.sort(np.concatenate(val)))


def stratified_subsample(dataset: Dataset, limit: int, seed: int = 0) -> Dataset:
    """Seeded subset of at most `limit` samples, spread evenly over the present classes."""
    if limit >= len(dataset):
        return dataset
    rng = np.random.default_rng(seed)
    classes = np.unique(dataset.labels)
    per_class, remainder = divmod(limit, len(classes))
    chosen = []
    for i, label in enumerate(classes):
        members = rng.permutation(np.flatnonzero(dataset.labels == label))
        chosen.append(members[:per_class + (1 if i < remainder else 0)])
    return dataset.subset(np.sort(np.concatenate(chosen)))
