import logging
import os
from typing import Dict

import numpy as np
import pytest

from ingestion.idx_reader import write_idx
from ingestion.ingestion_service import GRID_META, SCRIPT_KEYS, SPLIT_FILES


def _class_templates(seed: int, classes: int) -> np.ndarray:
    # sparse bright strokes, distinct per class
    return (np.random.default_rng(seed).random((classes, 28, 28)) > 0.75).astype(np.float64)


def _render(templates: np.ndarray, labels: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    noise = rng.normal(0.0, 20.0, size=(len(labels), 28, 28))
    return np.clip(templates[labels] * 200.0 + 30.0 + noise, 0, 255).astype(np.uint8)


def write_labelled_split(directory: str, split: str, templates: np.ndarray, per_class: int, seed: int) -> None:
    rng = np.random.default_rng(seed)
    labels = np.repeat(np.arange(len(templates)), per_class)
    labels = labels[rng.permutation(len(labels))]
    images_name, labels_name = SPLIT_FILES[split]
    write_idx(_render(templates, labels, rng), labels,
              os.path.join(directory, images_name), os.path.join(directory, labels_name))


def write_script_corpus(root: str, train_per_digit: int = 10, test_per_digit: int = 2) -> Dict[str, str]:
    """latin/arabic/kannada directories of synthetic 10-digit IDX pairs."""
    dirs = {}
    for index, key in enumerate(SCRIPT_KEYS):
        directory = os.path.join(root, key)
        os.makedirs(directory, exist_ok=True)
        templates = _class_templates(100 + index, 10)
        write_labelled_split(directory, "train", templates, train_per_digit, seed=10 * index + 1)
        write_labelled_split(directory, "test", templates, test_per_digit, seed=10 * index + 2)
        dirs[key] = directory
    return dirs


def write_grid_corpus(root: str, rows: int, cols: int, train_per_class: int = 6, test_per_class: int = 2) -> str:
    directory = os.path.join(root, "grid")
    os.makedirs(directory, exist_ok=True)
    templates = _class_templates(7, rows * cols)
    write_labelled_split(directory, "train", templates, train_per_class, seed=1)
    write_labelled_split(directory, "test", templates, test_per_class, seed=2)
    with open(os.path.join(directory, GRID_META), "w", encoding="utf-8") as f:
        f.write(f"rows={rows}\ncols={cols}\n")
    return directory


@pytest.fixture(autouse=True)
def _detach_console_logging():
    # the console handler binds whatever stderr capsys installed for the test
    yield
    root = logging.getLogger()
    for handler in [h for h in root.handlers if getattr(h, "_mtl_console", False)]:
        root.removeHandler(handler)


@pytest.fixture
def script_corpus(tmp_path):
    return write_script_corpus(str(tmp_path / "data"))


@pytest.fixture
def grid_corpus(tmp_path):
    return write_grid_corpus(str(tmp_path / "data"), rows=2, cols=3)
