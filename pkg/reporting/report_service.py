import json
import logging
import os
from typing import Any, Dict, List, Optional

from errors import MissingMetricsError, MtlError
from tasks.grid import MULTISCRIPT

from .curves import read_metrics
from .scores import ScoreRow, ScoreTable

logger = logging.getLogger(__name__)

DISPLAY_NAMES = {
    "lat": "Lat", "single:latin": "Lat",
    "arab": "Arab", "single:arabic": "Arab",
    "kan": "Kan", "single:kannada": "Kan",
    "base": "Base", "wloss": "Wloss", "new": "New",
}
ROW_ORDER = ["Lat", "Arab", "Kan", "Base", "Wloss", "New"]


def _mean(values: List[float]) -> Optional[float]:
    return sum(values) / len(values) if values else None


def load_run(run_dir: str) -> Dict[str, Any]:
    """run.json plus the test rows of metrics.csv for one run directory."""
    run_path = os.path.join(run_dir, "run.json")
    metrics_path = os.path.join(run_dir, "metrics.csv")
    if not os.path.exists(run_path):
        raise MissingMetricsError(f"Run summary not found: {run_path}")
    with open(run_path, "r", encoding="utf-8") as f:
        run = json.load(f)
    run["test_rows"] = [row for row in read_metrics(metrics_path) if row["split"] == "test"]
    if not run["test_rows"]:
        raise MissingMetricsError(f"No test rows in {metrics_path}")
    return run


def run_scores(run: Dict[str, Any]) -> ScoreRow:
    """Average a run's test rows over repeats into one table row."""
    name = DISPLAY_NAMES.get(run["model"], run["model"])
    rows = run["test_rows"]
    multiscript = run["grid"] == MULTISCRIPT.tag or run["grid"].startswith("1x")
    if not multiscript:
        overall = _mean([float(r["acc_overall"]) for r in rows])
        return ScoreRow(name, [None] * MULTISCRIPT.rows, grid_accuracy=overall)
    scripts = []
    for i in range(MULTISCRIPT.rows):
        cells = [float(r[f"acc_script_{i}"]) for r in rows if r.get(f"acc_script_{i}")]
        scripts.append(_mean(cells))
    return ScoreRow(name, scripts)


def build_score_table(run_dirs: List[str]) -> ScoreTable:
    """One row per model; multi-script and grid runs of the same model share a row."""
    merged: Dict[str, ScoreRow] = {}
    for run_dir in run_dirs:
        row = run_scores(load_run(run_dir))
        existing = merged.get(row.model)
        if existing is None:
            merged[row.model] = row
            continue
        existing.scripts = [a if b is None else b for a, b in zip(existing.scripts, row.scripts)]
        if row.grid_accuracy is not None:
            existing.grid_accuracy = row.grid_accuracy
    ordered = sorted(merged.values(),
                     key=lambda r: (ROW_ORDER.index(r.model) if r.model in ROW_ORDER else len(ROW_ORDER), r.model))
    return ScoreTable(script_names=[f"{n} digits" for n in MULTISCRIPT.script_names],
                      grid_name="Amharic characters", rows=ordered)


class ReportService:
    def report(self, run_dirs: List[str], out_dir: Optional[str] = None) -> Dict[str, Any]:
        if not run_dirs:
            return {"status": "error", "message": "report needs at least one run directory",
                    "error_category": "config"}
        try:
            table = build_score_table(run_dirs)
            result = {"status": "success", "table": table.render_text(), "rows": table.as_dict()}
            if out_dir:
                os.makedirs(out_dir, exist_ok=True)
                for name, text in (("scores.txt", table.render_text()), ("scores.csv", table.render_csv())):
                    with open(os.path.join(out_dir, name), "w", encoding="utf-8", newline="") as f:
                        f.write(text)
                result["out_dir"] = out_dir
            logger.info("[Report] %d run(s) -> %d row(s)", len(run_dirs), len(table.rows))
            return result
        except (MtlError, OSError, ValueError, KeyError) as e:
            return {"status": "error", "message": str(e), "error_type": type(e).__name__,
                    "error_category": getattr(e, "category", "artifact")}
