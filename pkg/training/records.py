from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

SPLIT_ORDER = {"train": 0, "val": 1, "test": 2}


@dataclass
class EpochMetrics:
    losses: Dict[str, float]  # main / digit / script / aux, absent when the objective has none
    loss_total: float
    factor_mean: Optional[float]
    acc_overall: float
    acc_scripts: List[Optional[float]]  # one per grid row of the model
    samples: int


@dataclass
class MetricRow:
    run_id: str
    model: str
    seed: int
    repeat: int
    epoch: int
    split: str
    metrics: EpochMetrics
    acc_columns: List[Optional[float]]  # per-script columns as written to the CSV

    def sort_key(self):
        return (self.repeat, self.epoch, SPLIT_ORDER[self.split])


@dataclass
class RunRecord:
    run_id: str
    model: str
    grid: str
    script_names: List[str]
    report_columns: int
    rows: List[MetricRow] = field(default_factory=list)
    best_epochs: Dict[int, int] = field(default_factory=dict)
    checkpoints: List[str] = field(default_factory=list)
    aux_confusion: Optional[np.ndarray] = None

    def ordered_rows(self) -> List[MetricRow]:
        return sorted(self.rows, key=MetricRow.sort_key)

    def test_rows(self) -> List[MetricRow]:
        return [r for r in self.ordered_rows() if r.split == "test"]
