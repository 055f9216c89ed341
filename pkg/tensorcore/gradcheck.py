"""
Central finite-difference verification of analytic gradients.

A "network" is anything exposing parameters() -> {name: array}. The arrays
must be the live buffers the loss function reads, since entries are perturbed
in place. loss_fn(network, input) returns (loss, {name: gradient}).
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from .layers import Layer, Tensor, layer_backward, layer_forward

logger = logging.getLogger(__name__)

LossFn = Callable[[object, Tensor], Tuple[float, Dict[str, Tensor]]]

REL_FLOOR = 1e-8


@dataclass
class ParamCheck:
    name: str
    checked: int
    max_rel_error: float
    max_abs_analytic: float
    max_abs_numeric: float


@dataclass
class GradCheckReport:
    tolerance: float
    params: Dict[str, ParamCheck] = field(default_factory=dict)

    @property
    def max_rel_error(self) -> float:
        return max((p.max_rel_error for p in self.params.values()), default=0.0)

    @property
    def passed(self) -> bool:
        return self.max_rel_error <= self.tolerance

    def failures(self) -> Dict[str, float]:
        return {n: p.max_rel_error for n, p in self.params.items() if p.max_rel_error > self.tolerance}


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = REL_FLOOR) -> np.ndarray:
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return np.abs(analytic - numeric) / denom


def grad_check(
    network,
    input: Tensor,
    loss_fn: LossFn,
    tolerance: float = 1e-3,
    eps: float = 1e-5,
    max_entries: Optional[int] = None,
    seed: int = 0,
    floor: float = REL_FLOOR,
) -> GradCheckReport:
    """
    Compare analytic gradients against central differences for every parameter.

    Run it on float64 parameters. max_entries samples that many entries per
    parameter (seeded) instead of sweeping all of them, which keeps checks of
    the full model tractable. Magnitudes below floor are compared absolutely.
    """
    params = network.parameters()
    for name, value in params.items():
        if value.dtype != np.float64:
            logger.warning("grad_check: parameter %s is %s, not float64", name, value.dtype)

    _, analytic = loss_fn(network, input)
    rng = np.random.default_rng(seed)
    report = GradCheckReport(tolerance=tolerance)

    for name, value in params.items():
        flat = value.reshape(-1)
        if max_entries is not None and flat.size > max_entries:
            entries = np.sort(rng.choice(flat.size, size=max_entries, replace=False))
        else:
            entries = np.arange(flat.size)

        numeric = np.empty(len(entries), dtype=np.float64)
        for i, j in enumerate(entries):
            original = flat[j]
            flat[j] = original + eps
            plus, _ = loss_fn(network, input)
            flat[j] = original - eps
            minus, _ = loss_fn(network, input)
            flat[j] = original
            numeric[i] = (plus - minus) / (2.0 * eps)

        got = np.asarray(analytic[name], dtype=np.float64).reshape(-1)[entries]
        errors = relative_error(got, numeric, floor)
        report.params[name] = ParamCheck(
            name=name,
            checked=len(entries),
            max_rel_error=float(errors.max()) if len(errors) else 0.0,
            max_abs_analytic=float(np.abs(got).max()) if len(got) else 0.0,
            max_abs_numeric=float(np.abs(numeric).max()) if len(numeric) else 0.0,
        )

    logger.debug("grad_check: max relative error %.3e over %d parameters",
                 report.max_rel_error, len(report.params))
    return report


class LayerProbe:
    """Wraps one layer plus its input as a checkable network.

    The scalar loss is sum(output * probe), with a fixed random probe, so the
    gradient reaching the layer is dense and non-trivial.
    """

    def __init__(self, layer: Layer, x: Tensor, rng: np.random.Generator):
        self.layer = layer
        self.x = x
        y, _ = layer_forward(layer, x)
        self.probe = rng.standard_normal(y.shape)

    def parameters(self) -> Dict[str, Tensor]:
        return {**self.layer.params, "input": self.x}

    @staticmethod
    def loss(network: "LayerProbe", _input: Tensor = None) -> Tuple[float, Dict[str, Tensor]]:
        y, ctx = layer_forward(network.layer, network.x)
        grad = layer_backward(network.layer, ctx, network.probe)
        return float(np.sum(y * network.probe)), {**grad.params, "input": grad.input}


class ArrayProbe:
    """A bag of named arrays treated as parameters, e.g. logits fed to a loss."""

    def __init__(self, arrays: Dict[str, Tensor]):
        self.arrays = arrays

    def parameters(self) -> Dict[str, Tensor]:
        return self.arrays
