import numpy as np

from .layers import Tensor


def softmax(logits: Tensor, axis: int = -1) -> Tensor:
    """Max-shifted softmax; finite for any finite input, including very large logits."""
    logits = np.asarray(logits)
    shifted = logits - np.max(logits, axis=axis, keepdims=True)
    exp = np.exp(shifted)
    return exp / np.sum(exp, axis=axis, keepdims=True)


def log_softmax(logits: Tensor, axis: int = -1) -> Tensor:
    logits = np.asarray(logits)
    shifted = logits - np.max(logits, axis=axis, keepdims=True)
    return shifted - np.log(np.sum(np.exp(shifted), axis=axis, keepdims=True))


def argmax_rows(logits: Tensor) -> np.ndarray:
    # np.argmax returns the first maximum, which is the tie rule everywhere
    return np.argmax(np.asarray(logits), axis=-1).astype(np.int64)
