"""
Hard-parameter-sharing network: one convolutional trunk feeding linear task heads.

    trunk: conv(1->16) relu pool conv(16->32) relu pool flatten linear(1568->128) relu
    heads: main (R*C), digit (C), script (R), aux (4)

Which heads exist depends on the objective.
"""
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from errors import ShapeMismatchError
from tasks.grid import GridTaskSpec
from tasks.labels import AUX_CLASSES
from tensorcore.functional import argmax_rows
from tensorcore.layers import (
    DEFAULT_DTYPE,
    Conv2d,
    Layer,
    LayerContext,
    Linear,
    MaxPool2,
    ReLU,
    layer_backward,
    layer_forward,
)

IMAGE_SHAPE = (1, 28, 28)
EMBED_DIM = 128
FLAT_FEATURES = 32 * 7 * 7
# flatten sits between these trunk positions
FLATTEN_AFTER = 5

HEADS_BY_OBJECTIVE = {
    "base": ("main",),
    "single": ("main",),
    "wloss": ("main", "digit", "script"),
    "new": ("main", "aux"),
}
HEAD_ORDER = ("main", "digit", "script", "aux")


@dataclass
class ForwardCache:
    trunk: List[LayerContext]
    pooled_shape: Tuple[int, ...]
    heads: Dict[str, LayerContext]


class MtlModel:
    def __init__(self, spec: GridTaskSpec, objective: str, trunk: List[Layer], heads: Dict[str, Linear]):
        self.spec = spec
        self.objective = objective
        self.trunk = trunk
        self.heads = heads
        # instrumentation: number of trunk evaluations so far
        self.trunk_passes = 0

    @property
    def active_heads(self) -> Tuple[str, ...]:
        return tuple(h for h in HEAD_ORDER if h in self.heads)

    def named_layers(self):
        for i, layer in enumerate(self.trunk):
            if layer.params:
                yield f"trunk.{i}", layer
        for name in self.active_heads:
            yield f"head.{name}", self.heads[name]

    def parameters(self) -> Dict[str, np.ndarray]:
        """Live parameter buffers in fixed architectural order."""
        return {
            f"{prefix}.{key}": value
            for prefix, layer in self.named_layers()
            for key, value in layer.params.items()
        }

    def parameter_count(self) -> int:
        return int(sum(p.size for p in self.parameters().values()))

    def astype(self, dtype) -> "MtlModel":
        return MtlModel(
            self.spec,
            self.objective,
            [layer.astype(dtype) for layer in self.trunk],
            {name: head.astype(dtype) for name, head in self.heads.items()},
        )

    def load_parameters(self, values: Dict[str, np.ndarray]) -> None:
        params = self.parameters()
        for name, target in params.items():
            source = values[name]
            if source.shape != target.shape:
                raise ShapeMismatchError(f"{name}: expected shape {target.shape}, got {source.shape}")
            target[...] = source

    def copy_parameters(self) -> Dict[str, np.ndarray]:
        return {name: value.copy() for name, value in self.parameters().items()}

    def forward(self, images: np.ndarray) -> Tuple[Dict[str, np.ndarray], ForwardCache]:
        if images.ndim != 4 or images.shape[1:] != IMAGE_SHAPE:
            raise ShapeMismatchError(f"Expected images of shape (B, 1, 28, 28), got {images.shape}")
        self.trunk_passes += 1
        x = images
        contexts = []
        pooled_shape = None
        for i, layer in enumerate(self.trunk):
            if i == FLATTEN_AFTER + 1:
                pooled_shape = x.shape
                x = x.reshape(x.shape[0], -1)
            x, ctx = layer_forward(layer, x)
            contexts.append(ctx)
        logits, head_contexts = {}, {}
        for name in self.active_heads:
            logits[name], head_contexts[name] = layer_forward(self.heads[name], x)
        return logits, ForwardCache(contexts, pooled_shape, head_contexts)

    def backward(self, cache: ForwardCache, head_grads: Dict[str, np.ndarray]) -> Dict[str, np.ndarray]:
        """Gradients of every parameter, keyed like parameters()."""
        grads: Dict[str, np.ndarray] = {}
        embedding_grad = None
        for name in self.active_heads:
            g = layer_backward(self.heads[name], cache.heads[name], head_grads[name])
            for key, value in g.params.items():
                grads[f"head.{name}.{key}"] = value
            embedding_grad = g.input if embedding_grad is None else embedding_grad + g.input

        x_grad = embedding_grad
        for i in range(len(self.trunk) - 1, -1, -1):
            if i == FLATTEN_AFTER:
                x_grad = x_grad.reshape(cache.pooled_shape)
            g = layer_backward(self.trunk[i], cache.trunk[i], x_grad)
            for key, value in g.params.items():
                grads[f"trunk.{i}.{key}"] = value
            x_grad = g.input
        return {name: grads[name] for name in self.parameters()}


def build_trunk(rng: np.random.Generator, dtype=DEFAULT_DTYPE) -> List[Layer]:
    return [
        Conv2d(1, 16, rng, dtype),
        ReLU(),
        MaxPool2(),
        Conv2d(16, 32, rng, dtype),
        ReLU(),
        MaxPool2(),
        Linear(FLAT_FEATURES, EMBED_DIM, rng, dtype),
        ReLU(),
    ]


def build_model(spec: GridTaskSpec, objective: str, seed: int = 0, dtype=DEFAULT_DTYPE) -> MtlModel:
    if objective not in HEADS_BY_OBJECTIVE:
        raise ValueError(f"Unknown objective {objective!r}")
    if objective == "single" and spec.rows != 1:
        spec = GridTaskSpec(1, spec.cols, spec.script_names[:1])
    rng = np.random.default_rng(seed)
    trunk = build_trunk(rng, dtype)
    widths = spec.head_widths()
    widths["aux"] = AUX_CLASSES
    wanted = HEADS_BY_OBJECTIVE[objective]
    # heads are always created in HEAD_ORDER so shared parts draw identical values
    heads = {name: Linear(EMBED_DIM, widths[name], rng, dtype) for name in HEAD_ORDER if name in wanted}
    return MtlModel(spec, objective, trunk, heads)


def model_forward(model: MtlModel, images: np.ndarray) -> Dict[str, np.ndarray]:
    logits, _ = model.forward(images)
    return logits


@dataclass
class Prediction:
    main: np.ndarray
    aux: Optional[np.ndarray] = None


def predict(model: MtlModel, images: np.ndarray) -> Prediction:
    logits = model_forward(model, images)
    aux = argmax_rows(logits["aux"]) if "aux" in logits else None
    return Prediction(argmax_rows(logits["main"]), aux)
