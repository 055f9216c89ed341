# Ingestion module: IDX decoding, dataset assembly, splits and batching
from tasks.grid import GridTaskSpec  # noqa: F401

from .batches import Batch, batch_iterator, make_batch
from .datasets import Dataset, assemble_multiscript, load_grid_dataset, load_script_dataset, parse_grid_meta
from .idx_reader import IMAGE_MAGIC, LABEL_MAGIC, read_idx, write_idx
from .splits import SplitIndices, stratified_split, stratified_subsample
