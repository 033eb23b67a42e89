"""
Dense float32 tensors and the numeric kernels MobileNetV2 is assembled from.

Tensors are plain ``numpy.ndarray`` objects of dtype float32 in NCHW layout
(OIHW for convolution weights). Every kernel here is a pure function; given
identical inputs it returns bit-identical outputs.
"""
from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from .errors import ShapeError

Tensor = np.ndarray

MAX_RANK = 4
BN_EPS = 1e-5


def as_tensor(data, dims: Optional[Sequence[int]] = None) -> Tensor:
    """Return `data` as a C-contiguous float32 array, optionally reshaped to `dims`."""
    arr = np.ascontiguousarray(data, dtype=np.float32)
    if dims is not None:
        dims = tuple(int(d) for d in dims)
        if int(np.prod(dims, dtype=np.int64)) != arr.size:
            raise ShapeError(f"cannot view {arr.size} values as dims {dims}")
        arr = arr.reshape(dims)
    if arr.ndim > MAX_RANK:
        raise ShapeError(f"rank {arr.ndim} exceeds the maximum rank {MAX_RANK}")
    if any(d < 1 for d in arr.shape):
        raise ShapeError(f"all extents must be >= 1, got {arr.shape}")
    return arr


def _require_rank(x: Tensor, rank: int, what: str) -> None:
    if x.ndim != rank:
        raise ShapeError(f"{what}: expected rank {rank}, got shape {x.shape}")


def conv2d(
    x: Tensor,
    weight: Tensor,
    bias: Optional[Tensor] = None,
    stride: int = 1,
    padding: int = 0,
    groups: int = 1,
) -> Tensor:
    """
    Grouped 2-D cross-correlation with zero padding.

    Parameters
    ----------
    x : Tensor[N, C, H, W]
    weight : Tensor[O, C/groups, Kh, Kw]
    bias : Tensor[O], optional
    stride, padding, groups : int

    Returns
    -------
    Tensor[N, O, H', W'] with H' = (H + 2*padding - Kh) // stride + 1.

    Kernel taps are visited in a fixed (Kh, Kw) order and each tap's channel
    reduction is a single matmul, so repeated calls are bit-identical.
    """
    x = np.asarray(x, dtype=np.float32)
    weight = np.asarray(weight, dtype=np.float32)
    _require_rank(x, 4, "conv2d input")
    _require_rank(weight, 4, "conv2d weight")
    if stride < 1:
        raise ShapeError(f"conv2d stride must be positive, got {stride}")
    if padding < 0:
        raise ShapeError(f"conv2d padding must be non-negative, got {padding}")
    if groups < 1:
        raise ShapeError(f"conv2d groups must be positive, got {groups}")

    n, c, h, w = x.shape
    o, cg, kh, kw = weight.shape
    if c % groups:
        raise ShapeError(f"conv2d channel axis: C={c} not divisible by groups={groups}")
    if o % groups:
        raise ShapeError(f"conv2d output-channel axis: O={o} not divisible by groups={groups}")
    if cg != c // groups:
        raise ShapeError(
            f"conv2d weight input-channel axis: expected {c // groups}, got {cg}"
        )
    if h + 2 * padding < kh:
        raise ShapeError(f"conv2d height axis: padded H={h + 2 * padding} < Kh={kh}")
    if w + 2 * padding < kw:
        raise ShapeError(f"conv2d width axis: padded W={w + 2 * padding} < Kw={kw}")
    if bias is not None:
        bias = np.asarray(bias, dtype=np.float32)
        if bias.shape != (o,):
            raise ShapeError(f"conv2d bias: expected shape ({o},), got {bias.shape}")

    ho = (h + 2 * padding - kh) // stride + 1
    wo = (w + 2 * padding - kw) // stride + 1
    if padding:
        xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    else:
        xp = x
    out = np.zeros((n, o, ho, wo), dtype=np.float32)
    h_stop = stride * (ho - 1) + 1
    w_stop = stride * (wo - 1) + 1

    if cg == 1 and o == groups:
        # depthwise: one filter per input channel, elementwise multiply-add
        for i in range(kh):
            for j in range(kw):
                tap = xp[:, :, i:i + h_stop:stride, j:j + w_stop:stride]
                out += tap * weight[:, 0, i, j][None, :, None, None]
    else:
        og = o // groups
        wg = weight.reshape(groups, og, cg, kh, kw)
        acc = out.reshape(n, groups, og, ho * wo)
        for i in range(kh):
            for j in range(kw):
                tap = xp[:, :, i:i + h_stop:stride, j:j + w_stop:stride]
                tap = np.ascontiguousarray(tap).reshape(n, groups, cg, ho * wo)
                acc += np.matmul(np.ascontiguousarray(wg[:, :, :, i, j]), tap)
    if bias is not None:
        out += bias[None, :, None, None]
    return out


def batchnorm_infer(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    running_mean: Tensor,
    running_var: Tensor,
    eps: float = BN_EPS,
) -> Tensor:
    """Inference-mode batch normalization over channel axis 1."""
    x = np.asarray(x, dtype=np.float32)
    if x.ndim < 2:
        raise ShapeError(f"batchnorm input needs a channel axis, got shape {x.shape}")
    c = x.shape[1]
    vecs = {"gamma": gamma, "beta": beta, "running_mean": running_mean, "running_var": running_var}
    vecs = {k: np.asarray(v, dtype=np.float32) for k, v in vecs.items()}
    for k, v in vecs.items():
        if v.shape != (c,):
            raise ShapeError(f"batchnorm {k}: expected shape ({c},), got {v.shape}")
    if eps < 0:
        raise ValueError(f"batchnorm eps must be non-negative, got {eps}")
    bshape = (1, c) + (1,) * (x.ndim - 2)
    scale = vecs["gamma"] / np.sqrt(vecs["running_var"] + np.float32(eps))
    y = (x - vecs["running_mean"].reshape(bshape)) * scale.reshape(bshape)
    return y + vecs["beta"].reshape(bshape)


def relu6(x: Tensor) -> Tensor:
    return np.clip(np.asarray(x, dtype=np.float32), 0.0, 6.0)


def global_avg_pool(x: Tensor) -> Tensor:
    """Mean over the spatial axes: [N, C, H, W] -> [N, C]."""
    x = np.asarray(x, dtype=np.float32)
    _require_rank(x, 4, "global_avg_pool input")
    return x.mean(axis=(2, 3), dtype=np.float32)


def linear(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """y = x @ weight.T + bias for x [N, F], weight [K, F], bias [K]."""
    x = np.asarray(x, dtype=np.float32)
    weight = np.asarray(weight, dtype=np.float32)
    _require_rank(x, 2, "linear input")
    _require_rank(weight, 2, "linear weight")
    if x.shape[1] != weight.shape[1]:
        raise ShapeError(
            f"linear feature axis: input has {x.shape[1]}, weight expects {weight.shape[1]}"
        )
    y = x @ weight.T
    if bias is not None:
        bias = np.asarray(bias, dtype=np.float32)
        if bias.shape != (weight.shape[0],):
            raise ShapeError(f"linear bias: expected ({weight.shape[0]},), got {bias.shape}")
        y = y + bias
    return y


def softmax(logits: Tensor) -> Tensor:
    z = np.asarray(logits, dtype=np.float32)
    _require_rank(z, 2, "softmax input")
    e = np.exp(z - z.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def log_softmax(logits: Tensor) -> Tensor:
    z = np.asarray(logits, dtype=np.float32)
    _require_rank(z, 2, "log_softmax input")
    shifted = z - z.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def cross_entropy(logits: Tensor, labels: Sequence[int]) -> tuple[float, Tensor]:
    """
    Mean softmax cross-entropy and its gradient with respect to the logits.

    Returns ``(loss, grad)`` where ``grad = (softmax(logits) - onehot) / N``.
    """
    z = np.asarray(logits, dtype=np.float32)
    _require_rank(z, 2, "cross_entropy logits")
    n, k = z.shape
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if labels.shape[0] != n:
        raise ShapeError(f"cross_entropy: {labels.shape[0]} labels for {n} rows")
    bad = np.flatnonzero((labels < 0) | (labels >= k))
    if bad.size:
        raise IndexError(
            f"cross_entropy: label {int(labels[bad[0]])} at row {int(bad[0])} outside [0, {k})"
        )
    logp = log_softmax(z)
    rows = np.arange(n)
    loss = float(-logp[rows, labels].mean(dtype=np.float64))
    grad = np.exp(logp)
    grad[rows, labels] -= 1.0
    grad /= np.float32(n)
    return loss, grad
