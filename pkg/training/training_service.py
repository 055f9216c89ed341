import glob
import json
import logging
import os
import time
from typing import Any, Dict, Optional

import numpy as np

from config import add_log_file
from errors import ArtifactError, ConfigError, MtlError
from ingestion.ingestion_service import ExperimentData, IngestionService
from ingestion.splits import stratified_split
from reporting.curves import emit_curves
from reporting.diagnostics import aux_head_report

from .checkpoint import save_checkpoint
from .model import build_model
from .optimizer import Adam
from .records import EpochMetrics, MetricRow, RunRecord
from .run_config import RunConfig
from .trainer import evaluate, train_epoch

logger = logging.getLogger(__name__)

METRICS_FILE = "metrics.csv"
RUN_FILE = "run.json"
AUX_FILE = "aux_confusion.csv"
LOG_FILE = "train.log"


def _acc_columns(metrics: EpochMetrics, config: RunConfig):
    columns = [None] * config.report_columns
    for i, value in enumerate(metrics.acc_scripts):
        columns[config.script_offset + i] = value
    return columns


def run_experiment(config: RunConfig, data: Optional[ExperimentData] = None,
                   write_artifacts: bool = True) -> RunRecord:
    """
    Train `config.repeats` independent models and evaluate each on the test set.

    Repeat r uses seed base + r for its validation split, initialization and
    batch order. Each repeat keeps the weights of its best validation epoch
    (earliest on ties); those weights produce the test row and the checkpoint.
    """
    if data is None:
        data = IngestionService(config.data_dirs()).load_experiment_data(
            config.data_source, config.grid, config.train_limit, config.test_limit, config.seed
        )
    grid = data.train.spec
    if (grid.rows, grid.cols) != (config.grid.rows, config.grid.cols):
        raise ConfigError(f"Data grid {grid.tag} does not match configured spec {config.grid.tag}")

    run_dir = os.path.join(config.out, config.run_id)
    if write_artifacts:
        _clear_checkpoints(run_dir)
    record = RunRecord(run_id=config.run_id, model=config.model.lower(), grid=grid.tag,
                       script_names=list(grid.script_names), report_columns=config.report_columns)
    t_run = time.perf_counter()

    for repeat in range(1, config.repeats + 1):
        seed = config.seed + repeat
        split = stratified_split(data.train, config.val_fraction, seed)
        model = build_model(grid, config.objective, seed)
        optimizer = Adam(model.parameters(), lr=config.lr)
        best_acc, best_epoch, best_params = -1.0, 0, None

        def add_row(epoch: int, split_name: str, metrics: EpochMetrics) -> None:
            record.rows.append(MetricRow(config.run_id, record.model, config.seed, repeat, epoch,
                                         split_name, metrics, _acc_columns(metrics, config)))

        for epoch in range(1, config.epochs + 1):
            train_metrics = train_epoch(model, optimizer, data.train, split.train, config, epoch, seed)
            val_metrics = evaluate(model, data.train, config, split.val, epoch)
            add_row(epoch, "train", train_metrics)
            add_row(epoch, "val", val_metrics)
            logger.info("[Run %s] repeat %d epoch %d val acc %.2f%%",
                        config.run_id, repeat, epoch, val_metrics.acc_overall)
            if val_metrics.acc_overall > best_acc:
                best_acc, best_epoch, best_params = val_metrics.acc_overall, epoch, model.copy_parameters()

        model.load_parameters(best_params)
        test_metrics = evaluate(model, data.test, config, epoch=best_epoch)
        add_row(best_epoch, "test", test_metrics)
        record.best_epochs[repeat] = best_epoch
        logger.info("[Run %s] repeat %d: best epoch %d, test acc %.2f%%",
                    config.run_id, repeat, best_epoch, test_metrics.acc_overall)

        if "aux" in model.heads:
            confusion = aux_head_report(model, data.test, config.batch_size)
            record.aux_confusion = confusion if record.aux_confusion is None else record.aux_confusion + confusion

        if write_artifacts:
            path = os.path.join(run_dir, "checkpoints", f"repeat{repeat}.mtlg")
            try:
                save_checkpoint(model, path)
            except OSError as e:
                raise ArtifactError(f"Cannot write checkpoint {path}: {e}") from e
            record.checkpoints.append(path)

    if write_artifacts:
        write_run_artifacts(record, config, run_dir)
    logger.info("[Run %s] finished in %.1f ms", config.run_id, (time.perf_counter() - t_run) * 1000)
    return record


def _clear_checkpoints(run_dir: str) -> None:
    # a rerun with fewer repeats must not leave older repeats behind
    for path in glob.glob(os.path.join(run_dir, "checkpoints", "repeat*.mtlg")):
        try:
            os.remove(path)
        except OSError as e:
            raise ArtifactError(f"Cannot remove stale checkpoint {path}: {e}") from e


def write_run_artifacts(record: RunRecord, config: RunConfig, run_dir: str) -> None:
    os.makedirs(run_dir, exist_ok=True)
    emit_curves(record, os.path.join(run_dir, METRICS_FILE))
    summary = {
        "run_id": record.run_id,
        "model": record.model,
        "objective": config.objective,
        "grid": record.grid,
        "script_names": record.script_names,
        "script_offset": config.script_offset,
        "sigmas": list(config.sigmas) if config.objective == "wloss" else None,
        "best_epochs": {str(k): v for k, v in sorted(record.best_epochs.items())},
        "config": config.model_dump(),
    }
    with open(os.path.join(run_dir, RUN_FILE), "w", encoding="utf-8") as f:
        json.dump(summary, f, indent=2, sort_keys=True)
        f.write("\n")
    if record.aux_confusion is not None:
        lines = ["aux_pred,realized_0,realized_1,realized_2,realized_3"]
        lines += [f"{i}," + ",".join(str(int(c)) for c in row) for i, row in enumerate(record.aux_confusion)]
        with open(os.path.join(run_dir, AUX_FILE), "w", encoding="utf-8") as f:
            f.write("\n".join(lines) + "\n")


class TrainingService:
    def __init__(self, config: RunConfig):
        self.config = config
        self.ingestion = IngestionService(config.data_dirs())

    def validate_paths(self) -> Dict[str, Any]:
        try:
            files = self.ingestion.required_files(self.config.data_source)
            return {"status": "success", "files": files}
        except FileNotFoundError as e:
            return {"status": "error", "message": str(e), "error_category": "config"}

    def train(self, data: Optional[ExperimentData] = None) -> Dict[str, Any]:
        """Validate inputs, run the experiment and write artifacts under the run directory."""
        if data is None:
            check = self.validate_paths()
            if check["status"] != "success":
                return check

        run_dir = os.path.join(self.config.out, self.config.run_id)
        handler = None
        try:
            os.makedirs(run_dir, exist_ok=True)
            handler = add_log_file(os.path.join(run_dir, LOG_FILE))
            record = run_experiment(self.config, data)
            test_acc = [row.metrics.acc_overall for row in record.test_rows()]
            return {
                "status": "success",
                "message": f"Trained {self.config.repeats} repeat(s) of {self.config.model}",
                "run_dir": run_dir,
                "metrics": os.path.join(run_dir, METRICS_FILE),
                "checkpoints": record.checkpoints,
                "test_accuracy_mean": float(np.mean(test_acc)) if test_acc else None,
            }
        except MtlError as e:
            logger.error("[Run %s] %s", self.config.run_id, e)
            return {"status": "error", "message": str(e), "error_type": type(e).__name__,
                    "error_category": e.category}
        except OSError as e:
            return {"status": "error", "message": str(e), "error_type": type(e).__name__,
                    "error_category": "artifact"}
        finally:
            if handler is not None:
                logging.getLogger().removeHandler(handler)
                handler.close()
