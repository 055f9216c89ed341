import csv
import io
import os
from typing import Dict, List, Optional

from errors import ArtifactError, MissingMetricsError
from training.records import MetricRow, RunRecord

BASE_COLUMNS = [
    "run_id", "model", "seed", "repeat", "epoch", "split",
    "loss_main", "loss_digit", "loss_script", "loss_aux", "loss_total",
    "factor_mean", "acc_overall",
]
LOSS_COMPONENTS = ("main", "digit", "script", "aux")


def metrics_header(script_columns: int = 3) -> List[str]:
    return BASE_COLUMNS + [f"acc_script_{i}" for i in range(script_columns)]


def _fmt(value: Optional[float]) -> str:
    return "" if value is None else f"{value:.6f}"


def _row_cells(row: MetricRow) -> List[str]:
    m = row.metrics
    return [
        row.run_id, row.model, str(row.seed), str(row.repeat), str(row.epoch), row.split,
        *(_fmt(m.losses.get(name)) for name in LOSS_COMPONENTS),
        _fmt(m.loss_total), _fmt(m.factor_mean), _fmt(m.acc_overall),
        *(_fmt(v) for v in row.acc_columns),
    ]


def render_curves(record: RunRecord) -> str:
    if not record.rows:
        raise ValueError(f"Run {record.run_id} has no metric rows to emit")
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(metrics_header(record.report_columns))
    for row in record.ordered_rows():
        writer.writerow(_row_cells(row))
    return buffer.getvalue()


def emit_curves(record: RunRecord, path: str) -> str:
    """Write one CSV row per (repeat, epoch, split), ordered by that key."""
    text = render_curves(record)
    try:
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(text)
    except OSError as e:
        raise ArtifactError(f"Cannot write metrics to {path}: {e}") from e
    return path


def read_metrics(path: str) -> List[Dict[str, str]]:
    if not os.path.exists(path):
        raise MissingMetricsError(f"Metrics file not found: {path}")
    with open(path, "r", encoding="utf-8", newline="") as f:
        return list(csv.DictReader(f))
