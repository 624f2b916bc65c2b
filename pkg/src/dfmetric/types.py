"""Domain types shared across the package: samples, label spaces, batches, configs."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

REAL = "real"
FAKE = "fake"
MANIPULATIONS = ("FS", "RE")
LABEL_MODES = ("binary", "att_categ", "att_dataset")
TRIPLET_VARIANTS = ("none", "BA", "HP_HN", "EP_HN")


class RecordError(ValueError):
    """A sample record violates its invariants."""


@dataclass(frozen=True)
class FrameRef:
    path: str
    t: float
    bbox: tuple[float, float, float, float]


@dataclass(frozen=True)
class SampleRecord:
    """One sampled face observation.

    Exactly one of ``features`` / ``frame`` is set. Real records never carry a
    manipulation tag.
    """

    sample_id: str
    video_id: str
    dataset: str
    label: str
    manipulation: Optional[str] = None
    features: Optional[tuple[float, ...]] = None
    frame: Optional[FrameRef] = None

    def __post_init__(self):
        if self.label not in (REAL, FAKE):
            raise RecordError(f"label must be 'real' or 'fake', got {self.label!r}")
        if (self.features is None) == (self.frame is None):
            raise RecordError(f"{self.sample_id}: exactly one of features/frame must be present")
        if self.label == REAL and self.manipulation is not None:
            raise RecordError(f"{self.sample_id}: real record carries manipulation {self.manipulation!r}")
        if self.manipulation is not None and self.manipulation not in MANIPULATIONS:
            raise RecordError(f"{self.sample_id}: unknown manipulation {self.manipulation!r}")
        if self.label == FAKE and not self.dataset:
            raise RecordError(f"{self.sample_id}: fake record without dataset tag")

    @property
    def is_fake(self) -> bool:
        return self.label == FAKE


@dataclass(frozen=True)
class LabelSpace:
    mode: str
    class_names: tuple[str, ...]

    real_class_index = 0

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    @property
    def fake_class_indices(self) -> frozenset[int]:
        return frozenset(range(1, len(self.class_names)))

    def index_of(self, name: str) -> int:
        return self.class_names.index(name)


def make_label_space(mode: str, dataset_tags: Sequence[str] = ()) -> LabelSpace:
    """Build the class list for a label mode; real is always class 0."""
    if mode == "binary":
        return LabelSpace(mode, (REAL, FAKE))
    if mode == "att_categ":
        return LabelSpace(mode, (REAL,) + MANIPULATIONS)
    if mode == "att_dataset":
        tags = sorted(set(dataset_tags))
        if not tags:
            raise ValueError("att_dataset mode needs at least one dataset tag")
        return LabelSpace(mode, (REAL,) + tuple(tags))
    raise ValueError(f"unknown label mode {mode!r}; expected one of {LABEL_MODES}")


def assign_class(record: SampleRecord, space: LabelSpace) -> int:
    if not record.is_fake:
        return 0
    if space.mode == "binary":
        return 1
    if space.mode == "att_categ":
        if record.manipulation is None:
            raise RecordError(f"{record.sample_id}: fake record lacks manipulation tag required by att_categ")
        return space.index_of(record.manipulation)
    try:
        return space.index_of(record.dataset)
    except ValueError:
        raise RecordError(
            f"{record.sample_id}: dataset {record.dataset!r} not in label space {space.class_names[1:]}"
        ) from None


@dataclass
class EmbeddingBatch:
    """B x D embeddings with aligned integer class labels."""

    embeddings: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.embeddings = np.asarray(self.embeddings, dtype=np.float64)
        if self.embeddings.ndim == 1:
            self.embeddings = self.embeddings[:, None]
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.embeddings.ndim != 2 or self.labels.shape != (self.embeddings.shape[0],):
            raise ValueError(
                f"embeddings {self.embeddings.shape} and labels {self.labels.shape} are misaligned"
            )
        if not np.all(np.isfinite(self.embeddings)):
            raise ValueError("embeddings contain non-finite values")
        if self.labels.size and self.labels.min() < 0:
            raise ValueError("labels must be nonnegative")

    @property
    def B(self) -> int:
        return self.embeddings.shape[0]

    @property
    def D(self) -> int:
        return self.embeddings.shape[1]


@dataclass
class LossConfig:
    margin: float = 0.2
    triplet_weight: float = 1.0
    triplet_variant: str = "none"
    distance_epsilon: float = 1e-12

    def __post_init__(self):
        if self.margin < 0:
            raise ValueError("margin must be >= 0")
        if self.triplet_weight < 0:
            raise ValueError("triplet_weight must be >= 0")
        if self.triplet_variant not in TRIPLET_VARIANTS:
            raise ValueError(f"unknown triplet variant {self.triplet_variant!r}")


@dataclass
class TrainConfig:
    epochs: int = 30
    batch_size: int = 64
    base_lr: float = 1e-4
    weight_decay: float = 0.05
    layer_decay: float = 0.75
    warmup_epochs: float = 5
    loss: LossConfig = field(default_factory=LossConfig)
    label_mode: str = "binary"
    hidden_dims: tuple[int, ...] = (64, 64)
    embed_dim: int = 16
    feature_jitter: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.loss, dict):
            self.loss = LossConfig(**self.loss)
        self.hidden_dims = tuple(int(h) for h in self.hidden_dims)
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")
        if not 0 <= self.warmup_epochs < self.epochs:
            raise ValueError("warmup_epochs must lie in [0, epochs)")
        if self.base_lr < 0 or self.weight_decay < 0 or self.layer_decay <= 0:
            raise ValueError("rates must be nonnegative (layer_decay positive)")
        if self.label_mode not in LABEL_MODES:
            raise ValueError(f"unknown label mode {self.label_mode!r}")
