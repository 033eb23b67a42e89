#!/usr/bin/env python3
"""Regenerate tests/data/golden_logits.lwt. Only rerun after an intended numeric change."""
from pathlib import Path

import numpy as np

from lungline import arch
from lungline.weights import bind_weights, model_weights, save_lwt

GOLDEN_SEED = 2024


def golden_input() -> np.ndarray:
    # closed-form input: no RNG involved
    idx = np.arange(3 * 224 * 224, dtype=np.float64).reshape(1, 3, 224, 224)
    return (np.sin(idx * 0.001) * 2.0).astype(np.float32)


def golden_model():
    model = arch.build_mobilenet_v2(3, seed=GOLDEN_SEED)
    return bind_weights(model, model_weights(model))


if __name__ == "__main__":
    out = Path(__file__).resolve().parents[1] / "tests" / "data" / "golden_logits.lwt"
    logits = arch.forward(golden_model(), golden_input())
    save_lwt({"logits": logits}, out)
    print(out, logits)
