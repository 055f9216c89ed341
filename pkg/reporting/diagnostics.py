import numpy as np

from ingestion.batches import batch_iterator
from ingestion.datasets import Dataset
from training.model import MtlModel, predict

from .scores import aux_confusion


def aux_head_report(model: MtlModel, dataset: Dataset, batch_size: int = 256) -> np.ndarray:
    """Confusion of the aux head's 4-class belief against the realized correctness code."""
    if "aux" not in model.heads:
        raise ValueError(f"Model with objective {model.objective!r} has no aux head")
    confusion = np.zeros((4, 4), dtype=np.int64)
    for batch in batch_iterator(dataset, np.arange(len(dataset)), batch_size, shuffle=False):
        prediction = predict(model, batch.images)
        confusion += aux_confusion(prediction.aux, prediction.main, batch.labels, model.spec.cols)
    return confusion
