# Grid label algebra for the main and auxiliary tasks
from .grid import AMHARIC, MULTISCRIPT, MULTISCRIPT_NAMES, SCRIPT_KEYS, GridTaskSpec, parse_spec, single_script_spec
from .labels import (
    AUX_BOTH,
    AUX_CLASSES,
    AUX_DIGIT_ONLY,
    AUX_NONE,
    AUX_SCRIPT_ONLY,
    FACTOR_MODES,
    FactorStat,
    batch_aux_labels,
    compose_label,
    compute_factor,
    decompose_label,
    decompose_labels,
    derive_aux_label,
    derive_aux_labels,
)
