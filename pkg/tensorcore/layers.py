"""
Closed layer set for the compact CNN: conv2d (3x3, pad 1, stride 1), relu,
maxpool2 (2x2, stride 2) and linear.

Tensors are plain numpy arrays in row-major order. Every forward returns the
output together with a LayerContext holding what backward needs; backward is
a pure function of (parameters, context, grad_output).
"""
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from errors import ShapeMismatchError, StaleContextError

Tensor = np.ndarray

# Training precision; gradient checks cast to float64.
DEFAULT_DTYPE = np.float32

KERNEL = 3
PADDING = 1


@dataclass
class LayerContext:
    layer_id: int
    kind: str
    input: Tensor
    output_shape: Tuple[int, ...]
    extra: Dict[str, Tensor] = field(default_factory=dict)


@dataclass
class LayerGrad:
    params: Dict[str, Tensor]
    input: Tensor


def glorot_uniform(rng: np.random.Generator, shape, fan_in: int, fan_out: int, dtype=DEFAULT_DTYPE) -> Tensor:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


class Layer:
    kind = "layer"

    def __init__(self):
        self.params: Dict[str, Tensor] = {}

    def forward(self, x: Tensor) -> Tuple[Tensor, LayerContext]:
        raise NotImplementedError

    def backward(self, ctx: LayerContext, grad_output: Tensor) -> LayerGrad:
        raise NotImplementedError

    def astype(self, dtype) -> "Layer":
        clone = self.__class__.__new__(self.__class__)
        clone.__dict__.update(self.__dict__)
        clone.params = {k: v.astype(dtype) for k, v in self.params.items()}
        return clone

    def _context(self, x: Tensor, y: Tensor, **extra) -> LayerContext:
        return LayerContext(id(self), self.kind, x, y.shape, dict(extra))

    def _check_context(self, ctx: Optional[LayerContext], grad_output: Tensor) -> None:
        if ctx is None:
            raise StaleContextError(f"{self.kind}: backward called without a forward context")
        if ctx.layer_id != id(self) or ctx.kind != self.kind:
            raise StaleContextError(
                f"{self.kind}: context was produced by a different layer ({ctx.kind})"
            )
        if grad_output.shape != ctx.output_shape:
            raise ShapeMismatchError(
                f"{self.kind}: grad_output shape {grad_output.shape}, expected {ctx.output_shape}"
            )

    def __repr__(self) -> str:
        shapes = ", ".join(f"{k}={v.shape}" for k, v in self.params.items())
        return f"{self.__class__.__name__}({shapes})"


def _expect_rank(kind: str, x: Tensor, rank: int) -> None:
    if x.ndim != rank:
        raise ShapeMismatchError(f"{kind}: expected rank-{rank} input, got shape {x.shape}")


class Conv2d(Layer):
    kind = "conv2d"

    def __init__(self, in_channels: int, out_channels: int, rng: Optional[np.random.Generator] = None,
                 dtype=DEFAULT_DTYPE):
        super().__init__()
        self.in_channels = in_channels
        self.out_channels = out_channels
        shape = (out_channels, in_channels, KERNEL, KERNEL)
        rng = rng if rng is not None else np.random.default_rng(0)
        self.params = {
            "weight": glorot_uniform(rng, shape, in_channels * KERNEL * KERNEL,
                                     out_channels * KERNEL * KERNEL, dtype),
            "bias": np.zeros(out_channels, dtype=dtype),
        }

    def forward(self, x: Tensor) -> Tuple[Tensor, LayerContext]:
        _expect_rank(self.kind, x, 4)
        if x.shape[1] != self.in_channels:
            raise ShapeMismatchError(
                f"conv2d: expected {self.in_channels} input channels, got shape {x.shape}"
            )
        B, _, H, W = x.shape
        cols = _im2col(x)
        w_mat = self.params["weight"].reshape(self.out_channels, -1)
        out = np.matmul(w_mat, cols) + self.params["bias"][None, :, None]
        y = out.reshape(B, self.out_channels, H, W)
        return y, self._context(x, y, cols=cols)

    def backward(self, ctx: LayerContext, grad_output: Tensor) -> LayerGrad:
        self._check_context(ctx, grad_output)
        B, _, H, W = ctx.input.shape
        cols = ctx.extra["cols"]
        weight = self.params["weight"]
        gy = grad_output.reshape(B, self.out_channels, H * W)

        grad_weight = np.einsum("bon,bkn->ok", gy, cols).reshape(weight.shape)
        grad_bias = gy.sum(axis=(0, 2))
        grad_cols = np.matmul(weight.reshape(self.out_channels, -1).T, gy)
        grad_input = _col2im(grad_cols, ctx.input.shape)
        return LayerGrad({"weight": grad_weight, "bias": grad_bias}, grad_input)


def _im2col(x: Tensor) -> Tensor:
    """(B, C, H, W) -> (B, C*9, H*W) patches of the zero-padded input."""
    B, C, H, W = x.shape
    padded = np.pad(x, ((0, 0), (0, 0), (PADDING, PADDING), (PADDING, PADDING)))
    sB, sC, sH, sW = padded.strides
    patches = np.lib.stride_tricks.as_strided(
        padded,
        shape=(B, C, KERNEL, KERNEL, H, W),
        strides=(sB, sC, sH, sW, sH, sW),
        writeable=False,
    )
    return patches.reshape(B, C * KERNEL * KERNEL, H * W)


def _col2im(cols: Tensor, x_shape: Tuple[int, ...]) -> Tensor:
    B, C, H, W = x_shape
    padded = np.zeros((B, C, H + 2 * PADDING, W + 2 * PADDING), dtype=cols.dtype)
    cols = cols.reshape(B, C, KERNEL, KERNEL, H, W)
    for kh in range(KERNEL):
        for kw in range(KERNEL):
            padded[:, :, kh:kh + H, kw:kw + W] += cols[:, :, kh, kw]
    return padded[:, :, PADDING:PADDING + H, PADDING:PADDING + W]


class ReLU(Layer):
    kind = "relu"

    def forward(self, x: Tensor) -> Tuple[Tensor, LayerContext]:
        y = np.maximum(x, 0)
        return y, self._context(x, y)

    def backward(self, ctx: LayerContext, grad_output: Tensor) -> LayerGrad:
        self._check_context(ctx, grad_output)
        return LayerGrad({}, np.where(ctx.input > 0, grad_output, 0).astype(grad_output.dtype))


class MaxPool2(Layer):
    kind = "maxpool2"

    def forward(self, x: Tensor) -> Tuple[Tensor, LayerContext]:
        _expect_rank(self.kind, x, 4)
        B, C, H, W = x.shape
        if H % 2 or W % 2:
            raise ShapeMismatchError(f"maxpool2: spatial extents must be even, got shape {x.shape}")
        windows = (
            x.reshape(B, C, H // 2, 2, W // 2, 2)
            .transpose(0, 1, 2, 4, 3, 5)
            .reshape(B, C, H // 2, W // 2, 4)
        )
        # argmax keeps the first maximum so ties route gradient to one cell
        winner = np.argmax(windows, axis=-1)
        y = np.take_along_axis(windows, winner[..., None], axis=-1)[..., 0]
        return y, self._context(x, y, winner=winner)

    def backward(self, ctx: LayerContext, grad_output: Tensor) -> LayerGrad:
        self._check_context(ctx, grad_output)
        B, C, H, W = ctx.input.shape
        grad_windows = np.zeros((B, C, H // 2, W // 2, 4), dtype=grad_output.dtype)
        np.put_along_axis(grad_windows, ctx.extra["winner"][..., None], grad_output[..., None], axis=-1)
        grad_input = (
            grad_windows.reshape(B, C, H // 2, W // 2, 2, 2)
            .transpose(0, 1, 2, 4, 3, 5)
            .reshape(B, C, H, W)
        )
        return LayerGrad({}, grad_input)


class Linear(Layer):
    kind = "linear"

    def __init__(self, in_features: int, out_features: int, rng: Optional[np.random.Generator] = None,
                 dtype=DEFAULT_DTYPE):
        super().__init__()
        self.in_features = in_features
        self.out_features = out_features
        rng = rng if rng is not None else np.random.default_rng(0)
        self.params = {
            "weight": glorot_uniform(rng, (out_features, in_features), in_features, out_features, dtype),
            "bias": np.zeros(out_features, dtype=dtype),
        }

    def forward(self, x: Tensor) -> Tuple[Tensor, LayerContext]:
        _expect_rank(self.kind, x, 2)
        if x.shape[1] != self.in_features:
            raise ShapeMismatchError(
                f"linear: expected (batch, {self.in_features}) input, got shape {x.shape}"
            )
        y = x @ self.params["weight"].T + self.params["bias"]
        return y, self._context(x, y)

    def backward(self, ctx: LayerContext, grad_output: Tensor) -> LayerGrad:
        self._check_context(ctx, grad_output)
        grads = {
            "weight": grad_output.T @ ctx.input,
            "bias": grad_output.sum(axis=0),
        }
        return LayerGrad(grads, grad_output @ self.params["weight"])


def layer_forward(layer: Layer, x: Tensor) -> Tuple[Tensor, LayerContext]:
    return layer.forward(x)


def layer_backward(layer: Layer, ctx: LayerContext, grad_output: Tensor) -> LayerGrad:
    return layer.backward(ctx, grad_output)
