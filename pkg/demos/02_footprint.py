"""
Parameter count and memory footprint
====================================

Counts every tensor of MobileNetV2 (including batch-norm running statistics)
and sets it against a few larger backbones.
"""

from lungline import arch
from lungline.reported import REPORTED_MODELS

model = arch.build_mobilenet_v2(num_classes=1000)
count = arch.count_params(model)
print(f"trainable          {count.trainable:>12,}")
print(f"bn running stats   {count.bn_running_stats:>12,}")
print(f"total              {count.total:>12,}")
print(f"float32 footprint  {arch.footprint_bytes(count):>12,} bytes")

# swapping the 1000-way head for a 3-way one removes most of the classifier
small = arch.replace_head(model, 3)
print(f"3-class total      {arch.count_params(small).total:>12,}")

print()
print(f"{'model':<22}{'params':>14}{'MB (fp32)':>12}")
seen = set()
for row in REPORTED_MODELS:
    if row.model in seen:
        continue
    seen.add(row.model)
    print(f"{row.model:<22}{row.params:>14,}{arch.footprint_bytes(row.params) / 1e6:>12.1f}")
