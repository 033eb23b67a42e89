"""
MobileNetV2 as an ordered list of layers plus a flat parameter table.

The graph is interpreted layer by layer; residual connections are expressed
as an ``add`` layer pointing back at the layer whose *input* it reuses.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import tensor as T
from .errors import ShapeError, StateError

CONV = "conv"
DEPTHWISE = "depthwise-conv"
BATCHNORM = "batchnorm"
RELU6 = "relu6"
ADD = "add"
POOL = "global-pool"
LINEAR = "linear"

LAYER_KINDS = (CONV, DEPTHWISE, BATCHNORM, RELU6, ADD, POOL, LINEAR)
BN_FIELDS = ("gamma", "beta", "running_mean", "running_var")
BN_STAT_FIELDS = ("running_mean", "running_var")

# (expansion t, output channels c, repeats n, first stride s)
INVERTED_RESIDUAL_SETTINGS = (
    (1, 16, 1, 1),
    (6, 24, 2, 2),
    (6, 32, 3, 2),
    (6, 64, 4, 2),
    (6, 96, 3, 1),
    (6, 160, 3, 2),
    (6, 320, 1, 1),
)
STEM_CHANNELS = 32
LAST_CHANNELS = 1280
INPUT_SHAPE = (3, 224, 224)
HEAD = "head"


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    name: str
    in_channels: int = 0
    out_channels: int = 0
    kernel_size: int = 1
    stride: int = 1
    padding: int = 0
    groups: int = 1
    # ADD only: index of the layer whose input is added back
    source: Optional[int] = None
    param_names: tuple[str, ...] = ()

    def param_shapes(self) -> dict[str, tuple[int, ...]]:
        if self.kind in (CONV, DEPTHWISE):
            k = self.kernel_size
            return {
                self.param_names[0]: (self.out_channels, self.in_channels // self.groups, k, k)
            }
        if self.kind == BATCHNORM:
            return {n: (self.out_channels,) for n in self.param_names}
        if self.kind == LINEAR:
            w, b = self.param_names
            return {w: (self.out_channels, self.in_channels), b: (self.out_channels,)}
        return {}


@dataclass
class ModelGraph:
    layers: list[LayerSpec]
    params: dict[str, np.ndarray]
    num_classes: int
    input_shape: tuple[int, int, int] = INPUT_SHAPE
    width_mult: float = 1.0
    bound: bool = False

    def param_shapes(self) -> dict[str, tuple[int, ...]]:
        shapes: dict[str, tuple[int, ...]] = {}
        for layer in self.layers:
            shapes.update(layer.param_shapes())
        return shapes

    @property
    def head(self) -> LayerSpec:
        if not self.layers or self.layers[-1].kind != LINEAR:
            raise StateError("model has no terminal linear layer")
        return self.layers[-1]

    @property
    def feature_dim(self) -> int:
        return self.head.in_channels

    def validate(self) -> None:
        """Check the structural invariants; raise ShapeError on the first violation."""
        seen: set[str] = set()
        for layer in self.layers:
            if layer.kind not in LAYER_KINDS:
                raise ShapeError(f"{layer.name}: unknown layer kind {layer.kind!r}")
            if layer.kind == DEPTHWISE and layer.groups != layer.in_channels:
                raise ShapeError(f"{layer.name}: depthwise conv needs groups == in_channels")
            for pname in layer.param_names:
                if pname in seen:
                    raise ShapeError(f"parameter name {pname!r} is not unique")
                seen.add(pname)
        for pname, shape in self.param_shapes().items():
            if pname not in self.params:
                raise ShapeError(f"parameter {pname!r} missing")
            if self.params[pname].shape != shape:
                raise ShapeError(
                    f"parameter {pname!r} has shape {self.params[pname].shape}, expected {shape}"
                )
        if self.layers and self.head.out_channels != self.num_classes:
            raise ShapeError(
                f"head produces {self.head.out_channels} outputs, num_classes={self.num_classes}"
            )


@dataclass(frozen=True)
class ParamCount:
    trainable: int
    bn_running_stats: int
    total: int = field(init=False)

    def __post_init__(self):
        if self.trainable < 0 or self.bn_running_stats < 0:
            raise ValueError("parameter counts must be non-negative")
        object.__setattr__(self, "total", self.trainable + self.bn_running_stats)


def make_divisible(value: float, divisor: int = 8, min_value: Optional[int] = None) -> int:
    """Round a channel count to a multiple of `divisor`, never dropping more than 10%."""
    min_value = divisor if min_value is None else min_value
    rounded = max(min_value, int(value + divisor / 2) // divisor * divisor)
    if rounded < 0.9 * value:
        rounded += divisor
    return rounded


class _Builder:
    def __init__(self):
        self.layers: list[LayerSpec] = []

    def conv(self, name, cin, cout, k, stride, depthwise=False):
        self.layers.append(LayerSpec(
            kind=DEPTHWISE if depthwise else CONV,
            name=name,
            in_channels=cin,
            out_channels=cout,
            kernel_size=k,
            stride=stride,
            padding=(k - 1) // 2,
            groups=cin if depthwise else 1,
            param_names=(f"{name}.weight",),
        ))

    def bn(self, name, channels):
        self.layers.append(LayerSpec(
            kind=BATCHNORM, name=name, in_channels=channels, out_channels=channels,
            param_names=tuple(f"{name}.{f}" for f in BN_FIELDS),
        ))

    def relu6(self, name):
        self.layers.append(LayerSpec(kind=RELU6, name=name))


def build_mobilenet_v2(num_classes: int, width_mult: float = 1.0, seed: int = 0) -> ModelGraph:
    """
    Build an unbound MobileNetV2 graph for 3x224x224 inputs.

    Convolution weights get a seeded fan-out normal initialization, batch norm
    layers start as the identity, and the head is uniform in +-1/sqrt(fan_in).
    The model must still go through ``weights.bind_weights`` before ``forward``.
    """
    if int(num_classes) != num_classes or num_classes < 2:
        raise ValueError(f"num_classes must be an integer >= 2, got {num_classes!r}")
    if not width_mult > 0:
        raise ValueError(f"width_mult must be positive, got {width_mult!r}")
    num_classes = int(num_classes)

    b = _Builder()
    cin = make_divisible(STEM_CHANNELS * width_mult)
    last = make_divisible(LAST_CHANNELS * max(1.0, width_mult))

    b.conv("stem.conv", 3, cin, 3, 2)
    b.bn("stem.bn", cin)
    b.relu6("stem.relu")

    idx = 0
    for t, c, n, s in INVERTED_RESIDUAL_SETTINGS:
        cout = make_divisible(c * width_mult)
        for r in range(n):
            stride = s if r == 0 else 1
            hidden = cin * t
            prefix = f"block{idx}"
            start = len(b.layers)
            bn_i = 1
            if t != 1:
                b.conv(f"{prefix}.conv", cin, hidden, 1, 1)
                b.bn(f"{prefix}.bn{bn_i}", hidden)
                b.relu6(f"{prefix}.relu{bn_i}")
                bn_i += 1
            b.conv(f"{prefix}.dw", hidden, hidden, 3, stride, depthwise=True)
            b.bn(f"{prefix}.bn{bn_i}", hidden)
            b.relu6(f"{prefix}.relu{bn_i}")
            bn_i += 1
            b.conv(f"{prefix}.pw", hidden, cout, 1, 1)
            b.bn(f"{prefix}.bn{bn_i}", cout)
            if stride == 1 and cin == cout:
                b.layers.append(LayerSpec(
                    kind=ADD, name=f"{prefix}.add", in_channels=cout, out_channels=cout,
                    source=start,
                ))
            cin = cout
            idx += 1

    b.conv("last.conv", cin, last, 1, 1)
    b.bn("last.bn", last)
    b.relu6("last.relu")
    b.layers.append(LayerSpec(kind=POOL, name="pool", in_channels=last, out_channels=last))
    b.layers.append(LayerSpec(
        kind=LINEAR, name=HEAD, in_channels=last, out_channels=num_classes,
        param_names=(f"{HEAD}.weight", f"{HEAD}.bias"),
    ))

    model = ModelGraph(layers=b.layers, params={}, num_classes=num_classes, width_mult=width_mult)
    model.params = _init_params(model, np.random.default_rng(seed))
    _check_residuals(model)
    model.validate()
    return model


def _init_params(model: ModelGraph, rng: np.random.Generator) -> dict[str, np.ndarray]:
    params: dict[str, np.ndarray] = {}
    for layer in model.layers:
        shapes = layer.param_shapes()
        if layer.kind in (CONV, DEPTHWISE):
            (pname, shape), = shapes.items()
            fan_out = shape[0] * shape[2] * shape[3] // layer.groups
            params[pname] = rng.normal(0.0, math.sqrt(2.0 / fan_out), shape).astype(np.float32)
        elif layer.kind == BATCHNORM:
            for pname, shape in shapes.items():
                fill = 1.0 if pname.endswith((".gamma", ".running_var")) else 0.0
                params[pname] = np.full(shape, fill, dtype=np.float32)
        elif layer.kind == LINEAR:
            params.update(_init_linear(layer, rng))
    return params


def _init_linear(layer: LayerSpec, rng: np.random.Generator) -> dict[str, np.ndarray]:
    bound = 1.0 / math.sqrt(layer.in_channels)
    wname, bname = layer.param_names
    return {
        wname: rng.uniform(-bound, bound, (layer.out_channels, layer.in_channels)).astype(np.float32),
        bname: rng.uniform(-bound, bound, (layer.out_channels,)).astype(np.float32),
    }


def _check_residuals(model: ModelGraph) -> None:
    c, h, w = model.input_shape
    shapes = []
    for layer in model.layers:
        shapes.append((c, h, w))
        if layer.kind in (CONV, DEPTHWISE):
            k, s, p = layer.kernel_size, layer.stride, layer.padding
            c = layer.out_channels
            h = (h + 2 * p - k) // s + 1
            w = (w + 2 * p - k) // s + 1
        elif layer.kind == POOL:
            h = w = 1
        elif layer.kind == ADD:
            if shapes[layer.source] != (c, h, w):
                raise ShapeError(
                    f"{layer.name}: residual input {shapes[layer.source]} != output {(c, h, w)}"
                )
            strides = [l.stride for l in model.layers[layer.source:len(shapes)]]
            if any(s != 1 for s in strides):
                raise ShapeError(f"{layer.name}: residual spans a strided layer")


def replace_head(model: ModelGraph, new_num_classes: int, seed: int = 0) -> ModelGraph:
    """Return a copy of `model` with a freshly initialized classifier head."""
    old = model.head
    if int(new_num_classes) != new_num_classes or new_num_classes < 1:
        raise ValueError(f"new_num_classes must be a positive integer, got {new_num_classes!r}")
    new_layer = replace(old, out_channels=int(new_num_classes))
    params = {k: v for k, v in model.params.items() if k not in old.param_names}
    fresh = _init_linear(new_layer, np.random.default_rng(seed))
    if model.bound:
        for v in fresh.values():
            v.flags.writeable = False
    params.update(fresh)
    return replace(
        model,
        layers=model.layers[:-1] + [new_layer],
        params=params,
        num_classes=int(new_num_classes),
    )


def count_params(model: ModelGraph) -> ParamCount:
    trainable = stats = 0
    for pname, shape in model.param_shapes().items():
        size = int(np.prod(shape, dtype=np.int64))
        if pname.rsplit(".", 1)[-1] in BN_STAT_FIELDS:
            stats += size
        else:
            trainable += size
    return ParamCount(trainable=trainable, bn_running_stats=stats)


def footprint_bytes(count, bytes_per_param: int = 4) -> int:
    """Storage needed for `count` parameters (a ParamCount or a plain integer)."""
    if bytes_per_param < 1:
        raise ValueError(f"bytes_per_param must be positive, got {bytes_per_param}")
    total = count.total if isinstance(count, ParamCount) else int(count)
    return total * int(bytes_per_param)


def _run(model: ModelGraph, batch: np.ndarray, stop_before_head: bool) -> np.ndarray:
    if not model.bound:
        raise StateError("model weights are not bound; call bind_weights first")
    x = np.asarray(batch, dtype=np.float32)
    if x.ndim != 4 or x.shape[1:] != tuple(model.input_shape):
        raise ShapeError(
            f"forward input: expected [N, {', '.join(map(str, model.input_shape))}], got {x.shape}"
        )
    skips = {l.source for l in model.layers if l.kind == ADD}
    saved: dict[int, np.ndarray] = {}
    p = model.params
    for i, layer in enumerate(model.layers):
        if i in skips:
            saved[i] = x
        kind = layer.kind
        if kind in (CONV, DEPTHWISE):
            x = T.conv2d(x, p[layer.param_names[0]], None, layer.stride, layer.padding, layer.groups)
        elif kind == BATCHNORM:
            x = T.batchnorm_infer(x, *(p[n] for n in layer.param_names))
        elif kind == RELU6:
            x = T.relu6(x)
        elif kind == ADD:
            x = x + saved.pop(layer.source)
        elif kind == POOL:
            x = T.global_avg_pool(x)
        elif kind == LINEAR:
            if stop_before_head:
                return x
            x = T.linear(x, p[layer.param_names[0]], p[layer.param_names[1]])
    return x


def features(model: ModelGraph, batch: np.ndarray) -> np.ndarray:
    """Pooled backbone features [N, feature_dim] (everything before the head)."""
    return _run(model, batch, stop_before_head=True)


def forward(model: ModelGraph, batch: np.ndarray) -> np.ndarray:
    """Logits [N, num_classes] for a batch [N, 3, 224, 224]."""
    return _run(model, batch, stop_before_head=False)


def classify(model: ModelGraph, batch: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(argmax labels, softmax probabilities)``."""
    probs = T.softmax(forward(model, batch))
    return probs.argmax(axis=1), probs
