import logging
import math
import time
from typing import Dict, List, Optional, Sequence

import numpy as np

from errors import NonFiniteLossError
from ingestion.batches import batch_iterator
from ingestion.datasets import Dataset
from reporting.scores import accuracy_by_script
from tensorcore.functional import argmax_rows

from .losses import LossBundle, compute_objective
from .model import MtlModel
from .optimizer import Adam
from .records import EpochMetrics
from .run_config import RunConfig

logger = logging.getLogger(__name__)


class _Accumulator:
    """Sample-weighted running means over the batches of one pass."""

    def __init__(self):
        self.samples = 0
        self.loss_sums: Dict[str, float] = {}
        self.total_sum = 0.0
        self.factor_sum = 0.0
        self.has_factor = False
        self.predictions: List[np.ndarray] = []
        self.labels: List[np.ndarray] = []

    def add(self, bundle: LossBundle, main_logits: np.ndarray, labels: np.ndarray) -> None:
        n = len(labels)
        self.samples += n
        for name, value in bundle.components.items():
            self.loss_sums[name] = self.loss_sums.get(name, 0.0) + value * n
        self.total_sum += bundle.total * n
        if bundle.factor is not None:
            self.has_factor = True
            self.factor_sum += bundle.factor * n
        self.predictions.append(argmax_rows(main_logits))
        self.labels.append(labels)

    def result(self, model: MtlModel) -> EpochMetrics:
        n = max(self.samples, 1)
        predictions = np.concatenate(self.predictions) if self.predictions else np.zeros(0, np.int64)
        labels = np.concatenate(self.labels) if self.labels else np.zeros(0, np.int64)
        accuracy = accuracy_by_script(predictions, labels, model.spec)
        return EpochMetrics(
            losses={name: total / n for name, total in self.loss_sums.items()},
            loss_total=self.total_sum / n,
            factor_mean=self.factor_sum / n if self.has_factor else None,
            acc_overall=accuracy.overall,
            acc_scripts=accuracy.per_script,
            samples=self.samples,
        )


def _objective_loss(model: MtlModel, logits, labels, config: RunConfig) -> LossBundle:
    sigma1, sigma2 = config.sigmas
    return compute_objective(
        model.objective, logits, labels, model.spec.cols,
        sigma1=sigma1, sigma2=sigma2, factor_mode=config.factor_mode,
    )


def _check_finite(bundle: LossBundle, epoch: int, batch: int) -> None:
    for name, value in {**bundle.components, "total": bundle.total}.items():
        if not math.isfinite(value):
            raise NonFiniteLossError(epoch, batch, name, value)


def train_epoch(
    model: MtlModel,
    optimizer: Adam,
    dataset: Dataset,
    indices: Sequence[int],
    config: RunConfig,
    epoch: int,
    seed: int,
) -> EpochMetrics:
    """One pass over `indices`: forward, objective, backward and an Adam step per batch."""
    t0 = time.perf_counter()
    acc = _Accumulator()
    for batch_no, batch in enumerate(batch_iterator(dataset, indices, config.batch_size, seed, epoch)):
        logits, cache = model.forward(batch.images)
        bundle = _objective_loss(model, logits, batch.labels, config)
        _check_finite(bundle, epoch, batch_no)
        grads = model.backward(cache, bundle.grads)
        optimizer.step(grads)
        acc.add(bundle, logits["main"], batch.labels)
    metrics = acc.result(model)
    t1 = time.perf_counter()
    logger.info("[Train] epoch %d loss=%.4f acc=%.2f%% took %.1f ms",
                epoch, metrics.loss_total, metrics.acc_overall, (t1 - t0) * 1000)
    return metrics


def evaluate(
    model: MtlModel,
    dataset: Dataset,
    config: RunConfig,
    indices: Optional[Sequence[int]] = None,
    epoch: int = 0,
) -> EpochMetrics:
    """Losses and accuracies without parameter updates, in index order."""
    if indices is None:
        indices = np.arange(len(dataset))
    acc = _Accumulator()
    for batch_no, batch in enumerate(batch_iterator(dataset, indices, config.batch_size, shuffle=False)):
        logits, _ = model.forward(batch.images)
        bundle = _objective_loss(model, logits, batch.labels, config)
        _check_finite(bundle, epoch, batch_no)
        acc.add(bundle, logits["main"], batch.labels)
    return acc.result(model)
