"""
Training objectives over the head logits.

    base:   main
    wloss:  main + sigma1 * digit + sigma2 * script
    new:    factor * main + aux, with aux targets and factor derived from the
            main head's current predictions

Every l(.) is batch-mean cross entropy. Each bundle carries the gradient of
its total with respect to every head's logits.
"""
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from errors import LabelRangeError, ShapeMismatchError
from tasks.labels import batch_aux_labels, compute_factor, decompose_labels
from tensorcore.functional import log_softmax, softmax

OBJECTIVES = ("base", "wloss", "new", "single")


@dataclass
class LossBundle:
    total: float
    components: Dict[str, float]
    grads: Dict[str, np.ndarray] = field(default_factory=dict)
    factor: Optional[float] = None
    aux_targets: Optional[np.ndarray] = None


def cross_entropy(logits: np.ndarray, targets: Sequence[int]) -> Tuple[float, np.ndarray]:
    """Mean of -log softmax(logits)[target]; gradient (softmax - onehot) / B."""
    logits = np.asarray(logits)
    targets = np.asarray(targets, dtype=np.int64)
    if logits.ndim != 2 or targets.shape != (logits.shape[0],):
        raise ShapeMismatchError(
            f"cross_entropy: logits {logits.shape} do not match targets {targets.shape}"
        )
    batch, classes = logits.shape
    if targets.size and (targets.min() < 0 or targets.max() >= classes):
        raise LabelRangeError(f"cross_entropy: targets must lie in 0..{classes - 1}")
    rows = np.arange(batch)
    value = -float(np.mean(log_softmax(logits)[rows, targets]))
    grad = softmax(logits)
    grad[rows, targets] -= 1.0
    grad /= batch
    return value, grad


def loss_base(main_logits: np.ndarray, labels: Sequence[int]) -> LossBundle:
    main, grad = cross_entropy(main_logits, labels)
    return LossBundle(total=main, components={"main": main}, grads={"main": grad})


def loss_wloss(
    main_logits: np.ndarray,
    digit_logits: np.ndarray,
    script_logits: np.ndarray,
    labels: Sequence[int],
    cols: int,
    sigma1: float,
    sigma2: float,
) -> LossBundle:
    if sigma1 < 0 or sigma2 < 0:
        raise ValueError(f"Loss weights must be non-negative, got {sigma1}, {sigma2}")
    script_targets, digit_targets = decompose_labels(labels, cols)
    main, g_main = cross_entropy(main_logits, labels)
    digit, g_digit = cross_entropy(digit_logits, digit_targets)
    script, g_script = cross_entropy(script_logits, script_targets)
    # sigma = 0 still yields (zero) gradients so every head sees the same step sequence
    return LossBundle(
        total=main + sigma1 * digit + sigma2 * script,
        components={"main": main, "digit": digit, "script": script},
        grads={"main": g_main, "digit": sigma1 * g_digit, "script": sigma2 * g_script},
    )


def loss_new(
    main_logits: np.ndarray,
    aux_logits: np.ndarray,
    labels: Sequence[int],
    cols: int,
    factor_mode: str = "normalized",
) -> LossBundle:
    aux_targets = batch_aux_labels(main_logits, labels, cols)
    stat = compute_factor(aux_targets, factor_mode)
    main, g_main = cross_entropy(main_logits, labels)
    aux, g_aux = cross_entropy(aux_logits, aux_targets)
    return LossBundle(
        total=stat.factor * main + aux,
        components={"main": main, "aux": aux},
        grads={"main": stat.factor * g_main, "aux": g_aux},
        factor=stat.factor,
        aux_targets=aux_targets,
    )


def compute_objective(
    objective: str,
    logits: Dict[str, np.ndarray],
    labels: Sequence[int],
    cols: int,
    sigma1: float = 0.0,
    sigma2: float = 0.0,
    factor_mode: str = "normalized",
) -> LossBundle:
    if objective in ("base", "single"):
        return loss_base(logits["main"], labels)
    if objective == "wloss":
        return loss_wloss(logits["main"], logits["digit"], logits["script"], labels, cols, sigma1, sigma2)
    if objective == "new":
        return loss_new(logits["main"], logits["aux"], labels, cols, factor_mode)
    raise ValueError(f"Unknown objective {objective!r}; expected one of {', '.join(OBJECTIVES)}")
