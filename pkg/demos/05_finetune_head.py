"""
Training only the classifier head
=================================

With the backbone frozen, fine-tuning reduces to multinomial logistic
regression on 1280-dimensional features. Two noisy clusters stand in for
real backbone features here.
"""

import numpy as np
from lungline.finetune import TrainConfig, one_cycle_lr, train_head

rng = np.random.default_rng(0)
n, dim = 64, 1280
labels = np.arange(n) % 2
features = (np.where(labels[:, None] == 0, -0.5, 0.5) + rng.standard_normal((n, dim))).astype(np.float32)

w0 = (rng.uniform(-1, 1, (2, dim)) / np.sqrt(dim)).astype(np.float32)
cfg = TrainConfig()
w, b, history = train_head(features, labels, w0, np.zeros(2, np.float32), cfg)

for e in history.epochs[::5] + history.epochs[-1:]:
    print(f"epoch {e.epoch:>2}  loss {e.train_loss:.4f}  acc {e.train_acc:.3f}  lr {e.lr:.2e}")

# the learning rate rises for 30% of the steps, then anneals
total = len(history.lr_trace)
for step in (0, int(0.3 * total), total - 1):
    print(f"step {step:>3}: lr {one_cycle_lr(step, total, cfg.max_lr):.2e}")
