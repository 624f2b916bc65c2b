"""Online triplet mining over a single batch.

All selection is deterministic: ties go to the lowest batch index.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .types import EmbeddingBatch

EASY, SEMI_HARD, HARD = "easy", "semi_hard", "hard"


class TripletIndex(NamedTuple):
    a: int
    p: int
    n: int


@dataclass(frozen=True)
class AnchorSelection:
    anchor: int
    hard_positive: Optional[int]
    easy_positive: Optional[int]
    hard_negative: Optional[int]


def _as_matrix(batch) -> np.ndarray:
    if isinstance(batch, EmbeddingBatch):
        return batch.embeddings
    x = np.asarray(batch, dtype=np.float64)
    return x[:, None] if x.ndim == 1 else x


def pairwise_distances(batch) -> np.ndarray:
    """Euclidean distance matrix with an exact zero diagonal.

    Computed from coordinate differences rather than the Gram expansion so that
    values agree with a naive double loop to rounding error.
    """
    h = _as_matrix(batch)
    diff = h[:, None, :] - h[None, :, :]
    d = np.sqrt(np.maximum(np.einsum("ijk,ijk->ij", diff, diff), 0.0))
    np.fill_diagonal(d, 0.0)
    return d


def valid_triplets(labels) -> list[TripletIndex]:
    y = np.asarray(labels)
    n = len(y)
    out = []
    for a in range(n):
        for p in range(n):
            if p == a or y[p] != y[a]:
                continue
            for k in range(n):
                if y[k] != y[a]:
                    out.append(TripletIndex(a, p, k))
    return out


def triplet_masks(labels) -> tuple[np.ndarray, np.ndarray]:
    """Boolean (B, B) masks: same-class-not-self and different-class."""
    y = np.asarray(labels)
    same = y[:, None] == y[None, :]
    pos = same & ~np.eye(len(y), dtype=bool)
    return pos, ~same


def categorize_triplet(d: np.ndarray, triplet: TripletIndex, margin: float) -> str:
    a, p, n = triplet
    return categorize_from_distances(d[a, p], d[a, n], margin)


def categorize_from_distances(d_ap: float, d_an: float, margin: float) -> str:
    if d_an < d_ap:
        return HARD
    # same expression as the hinge, so "easy" coincides exactly with zero loss
    return SEMI_HARD if d_ap - d_an + margin > 0 else EASY


def count_categories(d: np.ndarray, labels, margin: float) -> dict[str, int]:
    """Vectorised easy/semi-hard/hard counts over every valid triplet."""
    pos, neg = triplet_masks(labels)
    d_ap = d[:, :, None]
    d_an = d[:, None, :]
    valid = pos[:, :, None] & neg[:, None, :]
    hard = valid & (d_an < d_ap)
    semi = valid & ~hard & (d_ap - d_an + margin > 0)
    n_valid = int(valid.sum())
    n_hard = int(hard.sum())
    n_semi = int(semi.sum())
    return {EASY: n_valid - n_hard - n_semi, SEMI_HARD: n_semi, HARD: n_hard}


def _first_arg(values: np.ndarray, mask: np.ndarray, pick_max: bool) -> Optional[int]:
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        return None
    vals = values[idx]
    # argmax/argmin return the first occurrence, i.e. the lowest batch index
    return int(idx[np.argmax(vals) if pick_max else np.argmin(vals)])


def select_anchor_extremes(d: np.ndarray, labels, anchor: int) -> AnchorSelection:
    y = np.asarray(labels)
    if not 0 <= anchor < len(y):
        raise IndexError(f"anchor {anchor} out of range for batch of {len(y)}")
    same = y == y[anchor]
    same[anchor] = False
    diff = y != y[anchor]
    row = d[anchor]
    return AnchorSelection(
        anchor=anchor,
        hard_positive=_first_arg(row, same, pick_max=True),
        easy_positive=_first_arg(row, same, pick_max=False),
        hard_negative=_first_arg(row, diff, pick_max=False),
    )


def select_all_extremes(d: np.ndarray, labels) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Vectorised per-anchor (hard positive, easy positive, hard negative, qualifies).

    Indices for non-qualifying anchors are meaningless and must be masked out.
    """
    pos, neg = triplet_masks(labels)
    hp = np.argmax(np.where(pos, d, -np.inf), axis=1)
    ep = np.argmin(np.where(pos, d, np.inf), axis=1)
    hn = np.argmin(np.where(neg, d, np.inf), axis=1)
    ok = pos.any(axis=1) & neg.any(axis=1)
    return hp, ep, hn, ok
