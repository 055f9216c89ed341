# Tensor kernels: layers, softmax, gradient checking
from .functional import argmax_rows, log_softmax, softmax
from .gradcheck import ArrayProbe, GradCheckReport, LayerProbe, grad_check
from .layers import (
    DEFAULT_DTYPE,
    Conv2d,
    Layer,
    LayerContext,
    LayerGrad,
    Linear,
    MaxPool2,
    ReLU,
    Tensor,
    layer_backward,
    layer_forward,
)
