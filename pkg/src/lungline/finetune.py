"""
Head-only transfer learning: the backbone is frozen, only the final linear
layer is trained with Adam (coupled L2 weight decay) under a one-cycle
learning-rate schedule.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from . import arch
from . import tensor as T
from .data import DatasetManifest, batches
from .errors import ConfigError, ShapeError, StateError
from .preprocess import AugmentConfig, XRAY_NORM, NormalizationSpec, load_model_input


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    max_lr: float = 1e-4
    weight_decay: float = 1e-4
    batch_size: int = 32
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    seed: int = 0
    # one-cycle shape
    pct_start: float = 0.3
    div_factor: float = 25.0
    final_div_factor: float = 1e4
    dropout: float = 0.0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if min(self.max_lr, self.weight_decay, self.eps) < 0:
            raise ValueError("learning rate, weight decay and eps must be non-negative")
        if not 0 <= self.dropout < 1:
            raise ValueError(f"dropout must be in [0, 1), got {self.dropout}")
        if not 0 < self.pct_start < 1:
            raise ValueError(f"pct_start must be in (0, 1), got {self.pct_start}")


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    train_acc: float
    val_loss: Optional[float]
    val_acc: Optional[float]
    lr: float


@dataclass
class TrainHistory:
    epochs: list[EpochRecord] = field(default_factory=list)
    lr_trace: list[float] = field(default_factory=list)

    def __len__(self):
        return len(self.epochs)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epoch", "train_loss", "train_acc", "val_loss", "val_acc", "lr"])
            for e in self.epochs:
                w.writerow([
                    e.epoch, repr(e.train_loss), repr(e.train_acc),
                    "" if e.val_loss is None else repr(e.val_loss),
                    "" if e.val_acc is None else repr(e.val_acc),
                    repr(e.lr),
                ])


@dataclass
class AdamState:
    t: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def head_gradients(features, weight, bias, labels) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean cross-entropy of ``linear(features, weight, bias)`` and its (dW, db)."""
    features = np.asarray(features, dtype=np.float32)
    weight = np.asarray(weight, dtype=np.float32)
    if features.ndim != 2 or weight.ndim != 2 or features.shape[1] != weight.shape[1]:
        raise ShapeError(f"head_gradients: features {features.shape} vs weight {np.shape(weight)}")
    logits = T.linear(features, weight, bias)
    loss, g = T.cross_entropy(logits, labels)
    return loss, g.T @ features, g.sum(axis=0)


def adam_step(
    params: Mapping[str, np.ndarray],
    grads: Mapping[str, np.ndarray],
    state: AdamState,
    lr: float,
    cfg: TrainConfig,
) -> tuple[dict[str, np.ndarray], AdamState]:
    """One Adam update with L2 weight decay added to the gradient; returns new params and state."""
    b1, b2 = cfg.betas
    t = state.t + 1
    new_params, m_out, v_out = {}, {}, {}
    bc1 = 1.0 - b1 ** t
    bc2 = 1.0 - b2 ** t
    for name, p in params.items():
        p = np.asarray(p, dtype=np.float32)
        g = np.asarray(grads[name], dtype=np.float32)
        if g.shape != p.shape:
            raise ShapeError(f"adam_step {name}: grad {g.shape} vs param {p.shape}")
        if cfg.weight_decay:
            g = g + np.float32(cfg.weight_decay) * p
        m = state.m.get(name, np.zeros_like(p))
        v = state.v.get(name, np.zeros_like(p))
        m = np.float32(b1) * m + np.float32(1 - b1) * g
        v = np.float32(b2) * v + np.float32(1 - b2) * g * g
        denom = np.sqrt(v) / np.float32(math.sqrt(bc2)) + np.float32(cfg.eps)
        new_params[name] = p - np.float32(lr / bc1) * m / denom
        m_out[name], v_out[name] = m, v
    return new_params, AdamState(t=t, m=m_out, v=v_out)


def one_cycle_lr(
    step: int,
    total_steps: int,
    max_lr: float,
    pct_start: float = 0.3,
    div_factor: float = 25.0,
    final_div_factor: float = 1e4,
) -> float:
    """
    Cosine one-cycle schedule.

    Rises from ``max_lr / div_factor`` at step 0 to ``max_lr`` at step
    ``pct_start * total_steps``, then anneals to ``max_lr / final_div_factor``
    at the last step ``total_steps - 1``.
    """
    if total_steps < 1:
        raise ValueError(f"total_steps must be >= 1, got {total_steps}")
    if not 0 <= step < total_steps:
        raise ValueError(f"step {step} outside [0, {total_steps})")
    start = max_lr / div_factor
    end = max_lr / final_div_factor
    peak = pct_start * total_steps
    last = total_steps - 1
    if step <= peak or last <= peak:
        frac = step / peak if peak > 0 else 1.0
        return _cos_anneal(start, max_lr, min(frac, 1.0))
    return _cos_anneal(max_lr, end, (step - peak) / (last - peak))


def _cos_anneal(a: float, b: float, frac: float) -> float:
    if frac <= 0.0:
        return a
    if frac >= 1.0:
        return b
    return b + (a - b) * (1.0 + math.cos(math.pi * frac)) / 2.0


def _evaluate(features, labels, weight, bias) -> tuple[float, float]:
    logits = T.linear(features, weight, bias)
    loss, _ = T.cross_entropy(logits, labels)
    acc = float(np.mean(logits.argmax(axis=1) == np.asarray(labels)))
    return loss, acc


def train_head(
    train_features: np.ndarray,
    train_labels: Sequence[int],
    weight: np.ndarray,
    bias: np.ndarray,
    cfg: TrainConfig,
    val_features: Optional[np.ndarray] = None,
    val_labels: Optional[Sequence[int]] = None,
    feature_source: Optional[Callable[[int], np.ndarray]] = None,
) -> tuple[np.ndarray, np.ndarray, TrainHistory]:
    """
    Train a linear head on precomputed features.

    `feature_source`, when given, is called with the epoch index and returns
    that epoch's training features (used for per-epoch augmentation); otherwise
    `train_features` is reused every epoch.
    """
    train_labels = np.asarray(train_labels, dtype=np.int64)
    n = len(train_labels)
    if n == 0:
        raise ConfigError("no training samples")
    k = weight.shape[0]
    if train_labels.max() >= k or train_labels.min() < 0:
        raise ConfigError(f"training labels outside [0, {k}) for a {k}-class head")
    steps_per_epoch = math.ceil(n / cfg.batch_size)
    total_steps = cfg.epochs * steps_per_epoch

    params = {"weight": np.array(weight, dtype=np.float32), "bias": np.array(bias, dtype=np.float32)}
    state = AdamState()
    history = TrainHistory()
    drop_rng = np.random.default_rng(np.random.SeedSequence([cfg.seed & (2**64 - 1), 0xD209]))
    step = 0
    for epoch in range(cfg.epochs):
        feats = train_features if feature_source is None else feature_source(epoch)
        feats = np.asarray(feats, dtype=np.float32)
        loss_sum = 0.0
        correct = 0
        epoch_seed = (cfg.seed + epoch * 0x9E3779B97F4A7C15) & (2**64 - 1)
        for idx in batches(range(n), cfg.batch_size, shuffle=True, seed=epoch_seed):
            x = feats[idx]
            y = train_labels[idx]
            if cfg.dropout:
                keep = drop_rng.random(x.shape) >= cfg.dropout
                x = x * keep / np.float32(1 - cfg.dropout)
            loss, dw, db = head_gradients(x, params["weight"], params["bias"], y)
            logits = T.linear(x, params["weight"], params["bias"])
            loss_sum += loss * len(idx)
            correct += int(np.sum(logits.argmax(axis=1) == y))
            lr = one_cycle_lr(step, total_steps, cfg.max_lr, cfg.pct_start, cfg.div_factor,
                              cfg.final_div_factor)
            params, state = adam_step(params, {"weight": dw, "bias": db}, state, lr, cfg)
            history.lr_trace.append(lr)
            step += 1
        val_loss = val_acc = None
        if val_features is not None and val_labels is not None and len(val_labels):
            val_loss, val_acc = _evaluate(val_features, val_labels, params["weight"], params["bias"])
        history.epochs.append(EpochRecord(
            epoch=epoch + 1,
            train_loss=loss_sum / n,
            train_acc=correct / n,
            val_loss=val_loss,
            val_acc=val_acc,
            lr=history.lr_trace[-1],
        ))
    return params["weight"], params["bias"], history


def extract_features(
    model: arch.ModelGraph,
    paths: Sequence,
    norm: NormalizationSpec = XRAY_NORM,
    augment_cfg: Optional[AugmentConfig] = None,
    draw_offset: int = 0,
    chunk: int = 8,
    threads: int = 1,
) -> np.ndarray:
    """Backbone features [len(paths), feature_dim] for a list of PNG paths, in order."""
    if not model.bound:
        raise StateError("model weights are not bound; call bind_weights first")
    out = np.zeros((len(paths), model.feature_dim), dtype=np.float32)

    def load(i):
        return load_model_input(paths[i], norm, augment_cfg, draw_offset + i)

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        for start in range(0, len(paths), chunk):
            idx = range(start, min(start + chunk, len(paths)))
            batch = np.stack(list(pool.map(load, idx)))
            out[start:start + len(batch)] = arch.features(model, batch)
    return out


def _resolve(root: Optional[Path], manifest: DatasetManifest) -> list[Path]:
    return [Path(r.path) if root is None else Path(root) / r.path for r in manifest.records]


def finetune_head(
    model: arch.ModelGraph,
    train: DatasetManifest,
    val: Optional[DatasetManifest],
    cfg: TrainConfig = TrainConfig(),
    root=None,
    augment_cfg: Optional[AugmentConfig] = None,
    norm: NormalizationSpec = XRAY_NORM,
    threads: int = 1,
) -> tuple[arch.ModelGraph, TrainHistory]:
    """
    Fine-tune only the classifier head of a bound model on image manifests.

    Without augmentation the frozen backbone's features are computed once and
    cached; with augmentation they are recomputed every epoch. All non-head
    parameters of the returned model are the very same arrays as the input's.
    """
    if not model.bound:
        raise StateError("model weights are not bound; call bind_weights first")
    k = len(train.class_names)
    if model.num_classes != k:
        raise ConfigError(
            f"model head has {model.num_classes} classes but the training manifest has {k}; "
            "call replace_head first"
        )
    if val is not None and tuple(val.class_names) != tuple(train.class_names):
        raise ConfigError(f"validation classes {val.class_names} differ from training {train.class_names}")

    train_paths = _resolve(root, train)
    def augmented(epoch):
        return extract_features(model, train_paths, norm, augment_cfg,
                                draw_offset=epoch * len(train_paths), threads=threads)

    if augment_cfg is not None and augment_cfg.enabled:
        feature_source, train_feats = augmented, None
    else:
        feature_source = None
        train_feats = extract_features(model, train_paths, norm, threads=threads)
    val_feats = val_labels = None
    if val is not None and len(val):
        val_feats = extract_features(model, _resolve(root, val), norm, threads=threads)
        val_labels = val.labels

    wname, bname = model.head.param_names
    weight, bias, history = train_head(
        train_feats, train.labels, model.params[wname], model.params[bname], cfg,
        val_feats, val_labels, feature_source=feature_source,
    )
    weight.flags.writeable = False
    bias.flags.writeable = False
    params = dict(model.params)
    params[wname], params[bname] = weight, bias
    return replace(model, params=params), history
