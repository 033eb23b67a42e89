"""lungline: MobileNetV2 inference, head fine-tuning and diagnostic metrics for chest X-rays."""
from .arch import (
    ModelGraph,
    ParamCount,
    build_mobilenet_v2,
    classify,
    count_params,
    features,
    footprint_bytes,
    forward,
    replace_head,
)
from .errors import ConfigError, LunglineError, ShapeError, StateError
from .weights import WeightContainer, bind_weights, load_lwt, model_weights, save_lwt

__all__ = [
    "ConfigError",
    "LunglineError",
    "ModelGraph",
    "ParamCount",
    "ShapeError",
    "StateError",
    "WeightContainer",
    "bind_weights",
    "build_mobilenet_v2",
    "classify",
    "count_params",
    "features",
    "footprint_bytes",
    "forward",
    "load_lwt",
    "model_weights",
    "replace_head",
    "save_lwt",
]
__version__ = "0.1.0"
