"""
Depthwise and pointwise convolution
===================================

A depthwise 3x3 followed by a 1x1 pointwise conv covers the same receptive
field as a dense 3x3 at a fraction of the multiply-adds.
"""

import numpy as np
from lungline import tensor as T

rng = np.random.default_rng(0)
x = rng.standard_normal((1, 32, 56, 56)).astype(np.float32)

# dense 3x3, 32 -> 64 channels
dense_w = rng.standard_normal((64, 32, 3, 3)).astype(np.float32)
dense = T.conv2d(x, dense_w, padding=1)

# depthwise 3x3 (one filter per channel), then pointwise 1x1
dw_w = rng.standard_normal((32, 1, 3, 3)).astype(np.float32)
pw_w = rng.standard_normal((64, 32, 1, 1)).astype(np.float32)
separable = T.conv2d(T.conv2d(x, dw_w, padding=1, groups=32), pw_w)

print("dense output    ", dense.shape)
print("separable output", separable.shape)

macs_dense = 56 * 56 * 64 * 32 * 9
macs_sep = 56 * 56 * 32 * 9 + 56 * 56 * 64 * 32
print(f"multiply-adds: dense {macs_dense:,}  separable {macs_sep:,}  ratio {macs_dense / macs_sep:.1f}x")

# the stride-2 stem halves the resolution: 224 -> 112
stem = T.conv2d(rng.standard_normal((1, 3, 224, 224)).astype(np.float32),
                rng.standard_normal((32, 3, 3, 3)).astype(np.float32), stride=2, padding=1)
print("stem output", stem.shape)

# batch norm in inference mode followed by the clipped activation
y = T.relu6(T.batchnorm_infer(stem, np.ones(32), np.zeros(32), np.zeros(32), np.ones(32)))
print("relu6 range", float(y.min()), float(y.max()))
