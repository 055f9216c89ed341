import argparse
import json
import logging
import sys
from typing import Any, Dict, List, Optional

from dotenv import dotenv_values
from pydantic import ValidationError

from config import Config, setup_logging
from errors import EXIT_CONFIG, EXIT_OK, ConfigError, exit_code_for
from ingestion.ingestion_service import GRID_KEY, SCRIPT_KEYS, IngestionService
from reporting.report_service import ReportService
from tasks.grid import MULTISCRIPT, parse_spec
from training.run_config import RunConfig
from training.training_service import TrainingService

logger = logging.getLogger(__name__)

config = Config()

# flag dest -> RunConfig field
RUN_FLAGS = {
    "model": "model", "spec": "spec", "epochs": "epochs", "batch_size": "batch_size",
    "lr": "lr", "seed": "seed", "repeats": "repeats", "sigma1": "sigma1", "sigma2": "sigma2",
    "factor_mode": "factor_mode", "val_fraction": "val_fraction", "train_limit": "train_limit",
    "test_limit": "test_limit", "out": "out", "latin_dir": "latin_dir", "arabic_dir": "arabic_dir",
    "kannada_dir": "kannada_dir", "grid_dir": "grid_dir",
}


class CliConfig(RunConfig):
    """RunConfig assembled from built-in defaults < config file < command-line flags."""

    @classmethod
    def from_sources(cls, config_path: Optional[str], flags: Dict[str, Any]) -> "CliConfig":
        values: Dict[str, Any] = {"out": config.MTL_OUTPUT_DIR}
        if config_path:
            try:
                file_values = dotenv_values(config_path)
            except OSError as e:
                raise ConfigError(f"Cannot read config file {config_path}: {e}") from e
            unknown = sorted(set(file_values) - set(cls.model_fields))
            if unknown:
                raise ConfigError(f"{config_path}: unknown config key(s) {', '.join(unknown)}")
            values.update({k: v for k, v in file_values.items() if v not in (None, "")})
        values.update({RUN_FLAGS[k]: v for k, v in flags.items() if k in RUN_FLAGS and v is not None})
        try:
            return cls(**values)
        except ValidationError as e:
            raise ConfigError(_validation_message(e)) from e


def _validation_message(e: ValidationError) -> str:
    parts = []
    for err in e.errors():
        where = ".".join(str(p) for p in err["loc"]) or "config"
        parts.append(f"{where}: {err['msg']}")
    return "Invalid configuration: " + "; ".join(parts)


def _add_data_flags(parser: argparse.ArgumentParser) -> None:
    for key in (*SCRIPT_KEYS, GRID_KEY):
        parser.add_argument(f"--{key}-dir", dest=f"{key}_dir", default=None,
                            help=f"IDX directory for {key} (default $MTL_DATA_DIR/{key})")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mtl-grid",
        description="Multi-task training on grid-structured handwritten character tasks",
    )
    parser.add_argument("--log-level", default=config.LOG_LEVEL, help="Logging level")
    sub = parser.add_subparsers(dest="command", required=True)

    inspect = sub.add_parser("inspect", help="Summarize IDX datasets")
    inspect.add_argument("--images", help="IDX image file to inspect")
    inspect.add_argument("--labels", help="IDX label file to inspect")
    inspect.add_argument("--meta", help="Grid metadata for --images/--labels")
    inspect.add_argument("--spec", default=MULTISCRIPT.tag, help="Which configured sources to inspect")
    inspect.add_argument("--json", action="store_true", help="Print the summary as JSON")
    _add_data_flags(inspect)

    train = sub.add_parser("train", help="Run an experiment")
    train.add_argument("--config", help="key=value config file")
    train.add_argument("--model", help="base, wloss, new, lat, arab, kan or single:<script>")
    train.add_argument("--spec", help="Grid as RxC, e.g. 3x10 or 11x7")
    train.add_argument("--epochs", type=int)
    train.add_argument("--batch-size", dest="batch_size", type=int)
    train.add_argument("--lr", type=float)
    train.add_argument("--seed", type=int)
    train.add_argument("--repeats", type=int)
    train.add_argument("--sigma1", type=float)
    train.add_argument("--sigma2", type=float)
    train.add_argument("--factor-mode", dest="factor_mode", choices=["normalized", "mean", "raw_sum"])
    train.add_argument("--val-fraction", dest="val_fraction", type=float)
    train.add_argument("--train-limit", dest="train_limit", type=int, help="Seeded subset size per script")
    train.add_argument("--test-limit", dest="test_limit", type=int, help="Seeded subset size per script")
    train.add_argument("--out", help="Output directory (default $MTL_OUTPUT_DIR)")
    _add_data_flags(train)

    report = sub.add_parser("report", help="Combine finished runs into a score table")
    report.add_argument("run_dirs", nargs="+", help="Run directories containing metrics.csv")
    report.add_argument("--out", help="Also write scores.txt and scores.csv here")
    return parser


def _print_inspect(result: Dict[str, Any]) -> None:
    for source, summary in result["sources"].items():
        print(f"{source}: {summary['count']} items, shape {summary['shape']}, grid {summary['grid']}, "
              f"{summary['classes']} classes")
        print(f"  pixel range [{summary['pixel_min']}, {summary['pixel_max']}]")
        for name, n in summary["per_script"].items():
            print(f"  {name}: {n}")
        print("  per class: " + " ".join(f"{i}:{c}" for i, c in enumerate(summary["class_counts"])))


def cmd_inspect(args: argparse.Namespace) -> int:
    service = IngestionService({k: getattr(args, f"{k}_dir") for k in (*SCRIPT_KEYS, GRID_KEY)})
    if args.images or args.labels:
        if not (args.images and args.labels):
            print("error: --images and --labels must be given together", file=sys.stderr)
            return EXIT_CONFIG
        result = service.inspect_files(args.images, args.labels, args.meta)
    else:
        spec = parse_spec(args.spec)
        sources = list(SCRIPT_KEYS) if spec.tag == MULTISCRIPT.tag else [GRID_KEY]
        result = service.inspect_sources(sources)
    if result["status"] != "success":
        print(f"error: {result['message']}", file=sys.stderr)
        return exit_code_for(result.get("error_category"))
    if args.json:
        print(json.dumps(result["sources"], indent=2, sort_keys=True))
    else:
        _print_inspect(result)
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    run_config = CliConfig.from_sources(args.config, vars(args))
    result = TrainingService(run_config).train()
    if result["status"] != "success":
        print(f"error: {result['message']}", file=sys.stderr)
        return exit_code_for(result.get("error_category"))
    print(f"{result['message']}; artifacts in {result['run_dir']}")
    if result.get("test_accuracy_mean") is not None:
        print(f"mean test accuracy: {result['test_accuracy_mean']:.2f}%")
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    result = ReportService().report(args.run_dirs, args.out)
    if result["status"] != "success":
        print(f"error: {result['message']}", file=sys.stderr)
        return exit_code_for(result.get("error_category"))
    print(result["table"], end="")
    return EXIT_OK


COMMANDS = {"inspect": cmd_inspect, "train": cmd_train, "report": cmd_report}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level.upper())
    try:
        return COMMANDS[args.command](args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
