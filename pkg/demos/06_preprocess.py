"""
From PNG to model input
=======================

Radiographs are single-channel; they are resized to 224x224, replicated to
three channels and normalized with dataset statistics. Training draws a
random crop and a small rotation per image and epoch.
"""

from pathlib import Path

import numpy as np
from lungline.preprocess import AugmentConfig, augment, decode_image, to_model_input

path = Path(__file__).resolve().parents[1] / "tests" / "data" / "images" / "sample_b.png"
img = decode_image(path)
print("decoded", img.pixels.shape, img.pixels.dtype)

x = to_model_input(img)
print("model input", x.shape, x.dtype, f"range [{x.min():.3f}, {x.max():.3f}]")
print("channels identical:", np.array_equal(x[0], x[1]) and np.array_equal(x[1], x[2]))

cfg = AugmentConfig(seed=3)
views = [augment(img, cfg, draw_index=i).pixels for i in range(4)]
print("augmented views", [v.shape for v in views])
print("same draw twice is identical:", np.array_equal(views[0], augment(img, cfg, 0).pixels))
