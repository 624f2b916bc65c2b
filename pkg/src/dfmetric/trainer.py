"""Training loop: combined objective, AdamW, layer-wise decay, warmup-cosine, best-val checkpoint."""

from __future__ import annotations

import dataclasses
import logging
import zlib
from dataclasses import dataclass

import numpy as np

from .checkpoint import Checkpoint
from .ingest import Manifest
from .losses import combined_loss
from .model import Network
from .optim import adamw_step, layer_lr_scale, lr_at
from .types import EmbeddingBatch, LabelSpace, TrainConfig, assign_class, make_label_space

log = logging.getLogger(__name__)


class NumericError(RuntimeError):
    """Training diverged (non-finite loss or gradient)."""


def sub_rng(seed: int, name: str) -> np.random.Generator:
    """Independent generator derived from the run seed and a stream name."""
    return np.random.default_rng(np.random.SeedSequence([seed, zlib.crc32(name.encode())]))


def label_space_for(manifest: Manifest, mode: str) -> LabelSpace:
    return make_label_space(mode, manifest.datasets(fake_only=True))


def manifest_arrays(manifest: Manifest, space: LabelSpace) -> tuple[np.ndarray, np.ndarray]:
    if not len(manifest):
        raise ValueError("manifest is empty")
    if not manifest.has_features:
        raise ValueError("training needs a feature-based manifest")
    x = np.array([r.features for r in manifest.records], dtype=np.float64)
    y = np.array([assign_class(r, space) for r in manifest.records], dtype=np.int64)
    return x, y


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    val_loss: float
    lr: float
    active_triplets_mean: float


@dataclass
class TrainResult:
    checkpoint: Checkpoint
    history: list[EpochStats]
    label_space: LabelSpace


def config_to_dict(config: TrainConfig) -> dict:
    d = dataclasses.asdict(config)
    d["hidden_dims"] = list(config.hidden_dims)
    return d


def _checked_forward(net: Network, x: np.ndarray):
    h, z = net.forward(x)
    if not (np.all(np.isfinite(h)) and np.all(np.isfinite(z))):
        raise NumericError("network produced non-finite embeddings or logits")
    return h, z


def batch_objective(net: Network, x: np.ndarray, y: np.ndarray, config: TrainConfig):
    """Loss and parameter gradients for one batch."""
    h, z = _checked_forward(net, x)
    out = combined_loss(EmbeddingBatch(h, y), z, y, config.loss)
    grads = net.backward(x, out.grad_embeddings, out.grad_logits)
    return out, grads


def evaluate_loss(net: Network, x: np.ndarray, y: np.ndarray, config: TrainConfig) -> float:
    """Sample-weighted mean of the objective over fixed-order batches."""
    total = 0.0
    for start in range(0, len(x), config.batch_size):
        xb, yb = x[start : start + config.batch_size], y[start : start + config.batch_size]
        h, z = _checked_forward(net, xb)
        total += combined_loss(EmbeddingBatch(h, yb), z, yb, config.loss).value * len(xb)
    return total / len(x)


def train(train_manifest: Manifest, val_manifest: Manifest, config: TrainConfig, activation: str = "tanh") -> TrainResult:
    space = label_space_for(train_manifest, config.label_mode)
    x_tr, y_tr = manifest_arrays(train_manifest, space)
    x_va, y_va = manifest_arrays(val_manifest, space)
    if x_va.shape[1] != x_tr.shape[1]:
        raise ValueError("train and validation feature dimensions differ")

    net = Network.init(x_tr.shape[1], config.hidden_dims, config.embed_dim, space.num_classes,
                       sub_rng(config.seed, "init"), activation)
    shuffle_rng = sub_rng(config.seed, "shuffle")
    jitter_rng = sub_rng(config.seed, "jitter")
    m = {k: np.zeros_like(v) for k, v in net.params.items()}
    v = {k: np.zeros_like(p) for k, p in net.params.items()}
    L = net.num_encoder_layers
    scales = {k: layer_lr_scale(net.layer_index(k), L, config.layer_decay) for k in net.params}

    n = len(x_tr)
    steps_per_epoch = -(-n // config.batch_size)
    step = 0
    cfg = config_to_dict(config)

    def snapshot(epoch: int, val_loss: float) -> Checkpoint:
        return Checkpoint(net.copy(), {k: a.copy() for k, a in m.items()}, {k: a.copy() for k, a in v.items()},
                          epoch, step, float(val_loss), cfg, space.class_names)

    init_val = evaluate_loss(net, x_va, y_va, config)
    best = snapshot(0, init_val)
    history = [EpochStats(0, float("nan"), init_val, 0.0, float("nan"))]
    log.info("epoch 0 val_loss %.6f", init_val)

    for epoch in range(config.epochs):
        order = shuffle_rng.permutation(n)
        losses, actives, sizes = [], [], []
        lr = 0.0
        for b in range(steps_per_epoch):
            idx = order[b * config.batch_size : (b + 1) * config.batch_size]
            xb, yb = x_tr[idx], y_tr[idx]
            if config.feature_jitter > 0:
                xb = xb + jitter_rng.normal(0.0, config.feature_jitter, size=xb.shape)
            out, grads = batch_objective(net, xb, yb, config)
            if not np.isfinite(out.value) or not all(np.all(np.isfinite(g)) for g in grads.values()):
                raise NumericError(f"non-finite loss/gradient at epoch {epoch + 1}, batch {b}")
            step += 1
            lr = lr_at(epoch + b / steps_per_epoch, config.base_lr, config.epochs, config.warmup_epochs)
            for k in net.params:
                # biases are excluded from weight decay
                wd = config.weight_decay if k.endswith(".W") else 0.0
                net.params[k], m[k], v[k] = adamw_step(net.params[k], grads[k], m[k], v[k],
                                                       lr * scales[k], wd, step)
            losses.append(out.value)
            actives.append(out.active_triplet_count)
            sizes.append(len(idx))
        train_loss = float(np.dot(losses, sizes) / n)
        val_loss = evaluate_loss(net, x_va, y_va, config)
        if not np.isfinite(val_loss):
            raise NumericError(f"non-finite validation loss at epoch {epoch + 1}")
        history.append(EpochStats(epoch + 1, train_loss, val_loss, lr, float(np.mean(actives))))
        log.info("epoch %d train_loss %.6f val_loss %.6f lr %.3g", epoch + 1, train_loss, val_loss, lr)
        if val_loss < best.val_loss:
            best = snapshot(epoch + 1, val_loss)
    return TrainResult(best, history, space)


def write_history_csv(history: list[EpochStats], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("epoch,train_loss,val_loss,lr,active_triplets_mean\n")
        for s in history:
            fh.write(f"{s.epoch},{s.train_loss!r},{s.val_loss!r},{s.lr!r},{s.active_triplets_mean!r}\n")
