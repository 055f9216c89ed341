import logging
import os
import time
from dataclasses import dataclass
from typing import Any, Dict, List, Mapping, Optional

import numpy as np

from config import Config
from errors import MtlError
from tasks.grid import MULTISCRIPT_NAMES, SCRIPT_KEYS, GridTaskSpec, single_script_spec

from .datasets import Dataset, assemble_multiscript, load_grid_dataset, load_script_dataset
from .splits import stratified_subsample

logger = logging.getLogger(__name__)

GRID_KEY = "grid"
SPLIT_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}
GRID_META = "grid.meta"


@dataclass(frozen=True)
class ExperimentData:
    train: Dataset
    test: Dataset


def resolve_idx_file(directory: str, name: str) -> str:
    """Find `name` or `name.gz` inside `directory`."""
    for candidate in (name, name + ".gz"):
        path = os.path.join(directory, candidate)
        if os.path.exists(path):
            return path
    raise FileNotFoundError(f"Missing IDX file {name}(.gz) in {directory}")


class IngestionService:
    def __init__(self, data_dirs: Optional[Mapping[str, Optional[str]]] = None):
        self.config = Config()
        data_dirs = dict(data_dirs or {})
        self.data_dirs: Dict[str, str] = {
            key: data_dirs.get(key) or self.config.data_dir(key)
            for key in (*SCRIPT_KEYS, GRID_KEY)
        }

    def required_files(self, source: str) -> List[str]:
        """Every file `source` needs; raises FileNotFoundError naming the first missing one."""
        keys = SCRIPT_KEYS if source == "multiscript" else (source,)
        paths = []
        for key in keys:
            directory = self.data_dirs[key]
            for split in ("train", "test"):
                paths.extend(resolve_idx_file(directory, name) for name in SPLIT_FILES[split])
            if key == GRID_KEY:
                meta = os.path.join(directory, GRID_META)
                if not os.path.exists(meta):
                    raise FileNotFoundError(f"Missing grid metadata {meta}")
                paths.append(meta)
        return paths

    def load_script(self, key: str, split: str) -> Dataset:
        directory = self.data_dirs[key]
        images, labels = (resolve_idx_file(directory, n) for n in SPLIT_FILES[split])
        name = MULTISCRIPT_NAMES[SCRIPT_KEYS.index(key)]
        return load_script_dataset(images, labels, single_script_spec(name))

    def load_grid(self, split: str) -> Dataset:
        directory = self.data_dirs[GRID_KEY]
        images, labels = (resolve_idx_file(directory, n) for n in SPLIT_FILES[split])
        return load_grid_dataset(images, labels, os.path.join(directory, GRID_META))

    def load_experiment_data(
        self,
        source: str,
        spec: GridTaskSpec,
        train_limit: Optional[int] = None,
        test_limit: Optional[int] = None,
        seed: int = 0,
    ) -> ExperimentData:
        """
        Load train and test sets for one experiment.

        source is "multiscript" (three scripts stacked into spec), "grid"
        (the grid directory, spec taken from its metadata) or one script key
        for single-script models. Limits subsample each script separately.
        """
        t0 = time.perf_counter()
        splits = {}
        for split, limit in (("train", train_limit), ("test", test_limit)):
            if source == "multiscript":
                parts = [self._limit(self.load_script(key, split), limit, seed) for key in SCRIPT_KEYS]
                splits[split] = assemble_multiscript(parts, spec)
            elif source == GRID_KEY:
                splits[split] = self._limit(self.load_grid(split), limit, seed)
            else:
                splits[split] = self._limit(self.load_script(source, split), limit, seed)
        t1 = time.perf_counter()
        logger.info("[Ingestion] %s: %d train / %d test samples took %.1f ms",
                    source, len(splits["train"]), len(splits["test"]), (t1 - t0) * 1000)
        return ExperimentData(splits["train"], splits["test"])

    @staticmethod
    def _limit(ds: Dataset, limit: Optional[int], seed: int) -> Dataset:
        return ds if limit is None else stratified_subsample(ds, limit, seed)

    @staticmethod
    def summarize(ds: Dataset) -> Dict[str, Any]:
        counts = ds.class_counts()
        per_row = counts.reshape(ds.spec.rows, ds.spec.cols).sum(axis=1)
        return {
            "count": len(ds),
            "shape": list(ds.images.shape),
            "grid": ds.spec.tag,
            "classes": int(np.count_nonzero(counts)),
            "class_counts": [int(c) for c in counts],
            "per_script": {name: int(n) for name, n in zip(ds.spec.script_names, per_row)},
            "pixel_min": float(ds.images.min()) if len(ds) else None,
            "pixel_max": float(ds.images.max()) if len(ds) else None,
        }

    def inspect_files(self, images_path: str, labels_path: str, meta_path: Optional[str] = None) -> Dict[str, Any]:
        """Summarize one IDX pair (with grid metadata if given)."""
        try:
            if meta_path:
                ds = load_grid_dataset(images_path, labels_path, meta_path)
            else:
                ds = load_script_dataset(images_path, labels_path, _digit_spec_for(labels_path))
            return {"status": "success", "sources": {images_path: self.summarize(ds)}}
        except (MtlError, OSError) as e:
            return _error(e)

    def inspect_sources(self, sources: List[str]) -> Dict[str, Any]:
        """Summarize the train and test splits of configured data directories."""
        try:
            summaries = {}
            for source in sources:
                for split in ("train", "test"):
                    ds = self.load_grid(split) if source == GRID_KEY else self.load_script(source, split)
                    summaries[f"{source}/{split}"] = self.summarize(ds)
            return {"status": "success", "sources": summaries}
        except (MtlError, OSError) as e:
            return _error(e)


def _digit_spec_for(labels_path: str) -> GridTaskSpec:
    # A bare IDX pair is read as one 10-digit row; labels >= 10 are rejected.
    return single_script_spec(os.path.basename(labels_path))


def _error(e: Exception) -> Dict[str, Any]:
    category = getattr(e, "category", "data")
    return {"status": "error", "message": str(e), "error_type": type(e).__name__,
            "error_category": category}
