"""
Score arithmetic for the results table: per-script accuracy, the average over
scripts and the range (max - min) as a balance indicator.
"""
import csv
import io
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from tasks.grid import GridTaskSpec
from tasks.labels import AUX_CLASSES, derive_aux_labels

MISSING = "-"


@dataclass
class ScriptAccuracy:
    per_script: List[Optional[float]]
    overall: float
    counts: List[int]


def accuracy_by_script(predictions: Sequence[int], labels: Sequence[int], spec: GridTaskSpec) -> ScriptAccuracy:
    """Main-task accuracy (%) per script row, keyed on the true label's row."""
    predictions = np.asarray(predictions, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    if predictions.shape != labels.shape:
        raise ValueError(f"{len(predictions)} predictions for {len(labels)} labels")
    correct = predictions == labels
    scripts = labels // spec.cols
    per_script, counts = [], []
    for row in range(spec.rows):
        mask = scripts == row
        n = int(mask.sum())
        counts.append(n)
        per_script.append(100.0 * float(correct[mask].sum()) / n if n else None)
    overall = 100.0 * float(correct.sum()) / len(labels) if len(labels) else 0.0
    return ScriptAccuracy(per_script, overall, counts)


def summarize(per_script: Sequence[float]) -> Tuple[float, float]:
    """(average, range) of per-script accuracies."""
    values = [float(v) for v in per_script]
    if not values:
        raise ValueError("summarize needs at least one accuracy")
    return sum(values) / len(values), max(values) - min(values)


def round2(value: float) -> Decimal:
    """Two decimals, round half up (97.7167 -> 97.72)."""
    return Decimal(repr(float(value))).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP)


def format_score(value: Optional[float]) -> str:
    return MISSING if value is None else f"{round2(value):.2f}"


def aux_confusion(aux_predictions: Sequence[int], main_predictions: Sequence[int],
                  labels: Sequence[int], cols: int) -> np.ndarray:
    """4x4 counts: row = aux-head prediction, column = realized aux label."""
    realized = derive_aux_labels(main_predictions, labels, cols)
    confusion = np.zeros((AUX_CLASSES, AUX_CLASSES), dtype=np.int64)
    np.add.at(confusion, (np.asarray(aux_predictions, dtype=np.int64), realized), 1)
    return confusion


@dataclass
class ScoreRow:
    model: str
    scripts: List[Optional[float]]
    grid_accuracy: Optional[float] = None

    @property
    def average(self) -> Optional[float]:
        if any(v is None for v in self.scripts):
            return None
        return summarize(self.scripts)[0]

    @property
    def range(self) -> Optional[float]:
        if any(v is None for v in self.scripts):
            return None
        return summarize(self.scripts)[1]


@dataclass
class ScoreTable:
    script_names: List[str]
    grid_name: str = "Amharic"
    rows: List[ScoreRow] = field(default_factory=list)

    @property
    def header(self) -> List[str]:
        return ["Model", *self.script_names, "Average", "Range", self.grid_name]

    def cells(self) -> List[List[str]]:
        return [
            [row.model, *(format_score(v) for v in row.scripts), format_score(row.average),
             format_score(row.range), format_score(row.grid_accuracy)]
            for row in self.rows
        ]

    def render_text(self) -> str:
        table = [self.header, *self.cells()]
        widths = [max(len(r[i]) for r in table) for i in range(len(self.header))]
        lines = []
        for i, r in enumerate(table):
            lines.append("  ".join(c.ljust(w) if j == 0 else c.rjust(w) for j, (c, w) in enumerate(zip(r, widths))))
            if i == 0:
                lines.append("  ".join("-" * w for w in widths))
        return "\n".join(lines) + "\n"

    def render_csv(self) -> str:
        """Same table as CSV; missing cells are empty rather than '-'."""
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(self.header)
        for cells in self.cells():
            writer.writerow(["" if c == MISSING else c for c in cells])
        return buffer.getvalue()

    def as_dict(self) -> Dict[str, Dict[str, Optional[str]]]:
        return {cells[0]: dict(zip(self.header[1:], cells[1:])) for cells in self.cells()}
