from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from tasks.labels import decompose_labels

from .datasets import Dataset


@dataclass(frozen=True)
class Batch:
    images: np.ndarray
    labels: np.ndarray
    rows: np.ndarray  # script targets, label div C
    cols: np.ndarray  # digit targets, label mod C
    indices: np.ndarray  # positions in the source dataset

    def __len__(self) -> int:
        return int(self.labels.shape[0])


def make_batch(dataset: Dataset, indices: np.ndarray) -> Batch:
    indices = np.asarray(indices, dtype=np.int64)
    labels = dataset.labels[indices]
    rows, cols = decompose_labels(labels, dataset.spec.cols)
    return Batch(dataset.images[indices], labels, rows, cols, indices)


def batch_iterator(
    dataset: Dataset,
    indices: Sequence[int],
    batch_size: int = 32,
    seed: int = 0,
    epoch: int = 0,
    shuffle: bool = True,
) -> Iterator[Batch]:
    """Full batches plus a final partial one; the shuffle is keyed on (seed, epoch)."""
    if batch_size < 1:
        raise ValueError(f"batch_size must be positive, got {batch_size}")
    order = np.asarray(indices, dtype=np.int64)
    if shuffle:
        order = np.random.default_rng([seed, epoch]).permutation(order)
    for start in range(0, order.size, batch_size):
        yield make_batch(dataset, order[start:start + batch_size])
