"""Loss values with analytic gradients: softmax cross-entropy and triplet variants."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mining import pairwise_distances, select_all_extremes, triplet_masks
from .types import EmbeddingBatch, LossConfig

DEFAULT_EPS = 1e-12


@dataclass
class LossOutput:
    value: float
    grad_embeddings: np.ndarray
    grad_logits: np.ndarray
    active_triplet_count: int = 0


@dataclass
class ActiveTerms:
    """Hinge terms that contribute gradient, each scaled by ``coef``."""

    a: np.ndarray
    p: np.ndarray
    n: np.ndarray
    coef: np.ndarray

    @classmethod
    def empty(cls) -> "ActiveTerms":
        z = np.zeros(0, dtype=np.int64)
        return cls(z, z, z, np.zeros(0))


def softmax_cross_entropy(logits, labels) -> LossOutput:
    z = np.asarray(logits, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if z.ndim != 2 or z.shape[1] < 2:
        raise ValueError(f"logits must be B x C with C >= 2, got {z.shape}")
    if not np.all(np.isfinite(z)):
        raise ValueError("non-finite logits")
    B, C = z.shape
    if y.shape != (B,) or (B and (y.min() < 0 or y.max() >= C)):
        raise ValueError("labels out of range for logits")
    shifted = z - z.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    log_p = shifted - log_norm[:, None]
    value = -log_p[np.arange(B), y].sum() / B
    grad = np.exp(log_p)
    grad[np.arange(B), y] -= 1.0
    grad /= B
    return LossOutput(float(value), np.zeros((B, 0)), grad)


def triplet_single(d_ap: float, d_an: float, margin: float) -> float:
    return max(d_ap - d_an + margin, 0.0)


def triplet_gradients(batch: EmbeddingBatch | np.ndarray, terms: ActiveTerms, eps: float = DEFAULT_EPS) -> np.ndarray:
    """d/dH of sum_t coef_t * (d(a_t, p_t) - d(a_t, n_t))."""
    h = batch.embeddings if isinstance(batch, EmbeddingBatch) else np.asarray(batch, dtype=np.float64)
    grad = np.zeros_like(h)
    if len(terms.a) == 0:
        return grad
    diff_ap = h[terms.a] - h[terms.p]
    diff_an = h[terms.a] - h[terms.n]
    u_ap = diff_ap / np.maximum(np.linalg.norm(diff_ap, axis=1), eps)[:, None]
    u_an = diff_an / np.maximum(np.linalg.norm(diff_an, axis=1), eps)[:, None]
    c = terms.coef[:, None]
    # np.add.at accumulates sequentially in term order
    np.add.at(grad, terms.a, c * (u_ap - u_an))
    np.add.at(grad, terms.p, -c * u_ap)
    np.add.at(grad, terms.n, c * u_an)
    return grad


def _zero_output(batch: EmbeddingBatch) -> LossOutput:
    return LossOutput(0.0, np.zeros_like(batch.embeddings), np.zeros((batch.B, 0)), 0)


def loss_batch_all(batch: EmbeddingBatch, margin: float, eps: float = DEFAULT_EPS) -> LossOutput:
    """Mean hinge over the valid triplets whose hinge is strictly positive."""
    d = pairwise_distances(batch)
    pos, neg = triplet_masks(batch.labels)
    valid = pos[:, :, None] & neg[:, None, :]
    hinge = d[:, :, None] - d[:, None, :] + margin
    active = valid & (hinge > 0)
    n_active = int(active.sum())
    if n_active == 0:
        return _zero_output(batch)
    a, p, n = np.nonzero(active)
    value = hinge[a, p, n].sum() / n_active
    terms = ActiveTerms(a, p, n, np.full(n_active, 1.0 / n_active))
    return LossOutput(float(value), triplet_gradients(batch, terms, eps), np.zeros((batch.B, 0)), n_active)


def _per_anchor_loss(batch: EmbeddingBatch, margin: float, easy_positive: bool, eps: float) -> LossOutput:
    d = pairwise_distances(batch)
    hp, ep, hn, ok = select_all_extremes(d, batch.labels)
    anchors = np.flatnonzero(ok)
    if anchors.size == 0:
        return _zero_output(batch)
    positives = (ep if easy_positive else hp)[anchors]
    negatives = hn[anchors]
    hinge = d[anchors, positives] - d[anchors, negatives] + margin
    live = hinge > 0
    value = np.where(live, hinge, 0.0).sum() / anchors.size
    terms = ActiveTerms(
        anchors[live], positives[live], negatives[live], np.full(int(live.sum()), 1.0 / anchors.size)
    )
    return LossOutput(float(value), triplet_gradients(batch, terms, eps), np.zeros((batch.B, 0)), int(live.sum()))


def loss_hp_hn(batch: EmbeddingBatch, margin: float, eps: float = DEFAULT_EPS) -> LossOutput:
    """Hardest positive against hardest negative, averaged over anchors that have both."""
    return _per_anchor_loss(batch, margin, easy_positive=False, eps=eps)


def loss_ep_hn(batch: EmbeddingBatch, margin: float, eps: float = DEFAULT_EPS) -> LossOutput:
    """Easiest positive against hardest negative, averaged over anchors that have both."""
    return _per_anchor_loss(batch, margin, easy_positive=True, eps=eps)


TRIPLET_LOSSES = {"BA": loss_batch_all, "HP_HN": loss_hp_hn, "EP_HN": loss_ep_hn}


def triplet_loss(batch: EmbeddingBatch, config: LossConfig) -> LossOutput:
    try:
        fn = TRIPLET_LOSSES[config.triplet_variant]
    except KeyError:
        raise ValueError(f"unknown triplet variant {config.triplet_variant!r}") from None
    return fn(batch, config.margin, config.distance_epsilon)


def combined_loss(batch: EmbeddingBatch, logits, labels, config: LossConfig) -> LossOutput:
    """Cross-entropy on the logits plus ``triplet_weight`` times the configured triplet loss."""
    ce = softmax_cross_entropy(logits, labels)
    if config.triplet_variant == "none":
        return LossOutput(ce.value, np.zeros_like(batch.embeddings), ce.grad_logits, 0)
    if config.triplet_variant not in TRIPLET_LOSSES:
        raise ValueError(f"unknown triplet variant {config.triplet_variant!r}")
    tri = triplet_loss(batch, config)
    w = config.triplet_weight
    return LossOutput(
        ce.value + w * tri.value,
        w * tri.grad_embeddings,
        ce.grad_logits,
        tri.active_triplet_count,
    )
