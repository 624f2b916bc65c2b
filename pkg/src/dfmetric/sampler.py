"""Balanced per-video training-set construction and synthetic feature corpora."""

from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .ingest import Manifest
from .trainer import sub_rng
from .types import FAKE, REAL, SampleRecord

log = logging.getLogger(__name__)


@dataclass
class SamplingPlan:
    target_total: int
    seed: int = 0
    class_ratio_tolerance: float = 0.05
    per_video_min: int = 1


def class_imbalance(manifest: Manifest) -> float:
    """|n_real - n_fake| / (n_real + n_fake)."""
    n_fake = sum(r.is_fake for r in manifest.records)
    n_real = len(manifest) - n_fake
    return abs(n_real - n_fake) / max(n_real + n_fake, 1)


def _frame_key(r: SampleRecord, position: int):
    return (r.frame.t if r.frame is not None else 0.0, position)


def _video_quotas(avail: dict[str, int], target: int, rotation: int) -> dict[str, int]:
    """Round-robin allocation of ``target`` samples over videos ordered by id.

    Equivalent to cycling over the videos one frame at a time, skipping
    exhausted ones, until the target is met.
    """
    vids = sorted(avail)
    target = min(target, sum(avail.values()))
    level = 0
    while True:
        nxt = sum(min(a, level + 1) for a in avail.values())
        if nxt > target:
            break
        level += 1
        if nxt == target:
            break
    quotas = {v: min(avail[v], level) for v in vids}
    remainder = target - sum(quotas.values())
    open_vids = [v for v in vids if avail[v] > level]
    if open_vids:
        k = rotation % len(open_vids)
        for v in (open_vids[k:] + open_vids[:k])[:remainder]:
            quotas[v] += 1
    return quotas


def balanced_sample(manifest: Manifest, plan: SamplingPlan) -> Manifest:
    """Approximately 1:1 real/fake subset with equal per-video sampling.

    Every video contributes at least one frame. Per-class targets start at
    ``target_total // 2``, are raised to the class's video count and clipped to
    availability, which yields the best achievable ratio when exact balance is
    infeasible.
    """
    by_class: dict[str, dict[str, list[int]]] = {REAL: defaultdict(list), FAKE: defaultdict(list)}
    for i, r in enumerate(manifest.records):
        by_class[r.label][r.video_id].append(i)
    if not by_class[REAL] or not by_class[FAKE]:
        raise ValueError("balanced sampling needs at least one real and one fake video")
    n_videos = len(by_class[REAL]) + len(by_class[FAKE])
    if plan.target_total < n_videos * plan.per_video_min:
        raise ValueError(f"target_total {plan.target_total} is below the number of videos ({n_videos})")

    avail = {c: {v: len(ix) for v, ix in vids.items()} for c, vids in by_class.items()}
    totals = {c: sum(a.values()) for c, a in avail.items()}
    floors = {c: len(a) * plan.per_video_min for c, a in avail.items()}
    per_class = min(plan.target_total // 2, totals[REAL], totals[FAKE])
    per_class = max(per_class, floors[REAL], floors[FAKE])

    rng = sub_rng(plan.seed, "sampler")
    keep: set[int] = set()
    for c in (REAL, FAKE):
        quotas = _video_quotas(avail[c], min(per_class, totals[c]), int(rng.integers(1 << 30)))
        for vid, idx in by_class[c].items():
            ordered = sorted(idx, key=lambda i: _frame_key(manifest.records[i], i))
            keep.update(ordered[: quotas[vid]])

    out = Manifest([r for i, r in enumerate(manifest.records) if i in keep], manifest.source_path)
    ratio = class_imbalance(out)
    if ratio > plan.class_ratio_tolerance:
        log.warning("class imbalance %.3f exceeds tolerance %.3f (best achievable for this manifest)",
                    ratio, plan.class_ratio_tolerance)
    return out


@dataclass
class SynthSpec:
    datasets: tuple[str, ...] = ("synth_a", "synth_b")
    n_videos_per_cell: int = 20
    frames_per_video: tuple[int, int] = (1, 8)
    feature_dim: int = 16
    separation: float = 4.0
    cluster_std: float = 0.5
    video_coherence_std: float = 0.25
    split_fractions: tuple[float, float, float] = (0.6, 0.2, 0.2)
    seed: int = 0
    cluster_means: dict = field(default_factory=dict)

    def __post_init__(self):
        self.datasets = tuple(self.datasets)
        self.frames_per_video = tuple(self.frames_per_video)
        self.split_fractions = tuple(self.split_fractions)
        if not 1 <= self.frames_per_video[0] <= self.frames_per_video[1]:
            raise ValueError("frames_per_video must be a range with minimum >= 1")
        if self.video_coherence_std > self.cluster_std or (
            self.cluster_std > 0 and self.video_coherence_std == self.cluster_std
        ):
            raise ValueError("video_coherence_std must be smaller than cluster_std")
        if abs(sum(self.split_fractions) - 1.0) > 1e-9:
            raise ValueError("split fractions must sum to 1")

    def cells(self) -> list[tuple[str, str | None, str]]:
        out = []
        for ds in self.datasets:
            out.append((REAL, None, ds))
            out.append((FAKE, "FS", ds))
            out.append((FAKE, "RE", ds))
        return out

    def resolved_means(self) -> dict[tuple[str, str | None, str], np.ndarray]:
        """Cluster mean per (label, manipulation, dataset).

        Unless overridden, means are drawn as ``separation`` times a random unit
        direction, offset along a shared real/fake axis so labels stay distinct.
        """
        rng = sub_rng(self.seed, "cluster_means")
        axis = rng.normal(size=self.feature_dim)
        axis /= np.linalg.norm(axis)
        means = {}
        for cell in self.cells():
            key = _cell_key(cell)
            if key in self.cluster_means:
                means[cell] = np.asarray(self.cluster_means[key], dtype=np.float64)
                continue
            direction = rng.normal(size=self.feature_dim)
            direction /= np.linalg.norm(direction)
            sign = 1.0 if cell[0] == FAKE else -1.0
            means[cell] = self.separation * (0.5 * sign * axis + 0.5 * direction)
        return means


def _cell_key(cell) -> str:
    label, manip, ds = cell
    return f"{label}/{manip or '-'}/{ds}"


def generate_synthetic_corpus(spec: SynthSpec) -> tuple[Manifest, Manifest, Manifest]:
    """Clustered feature corpus split into train/val/test by video.

    Each video's mean is drawn around its cell mean with ``cluster_std``; frames
    scatter around the video mean with ``video_coherence_std``.
    """
    rng = sub_rng(spec.seed, "corpus")
    means = spec.resolved_means()
    splits: tuple[list, list, list] = ([], [], [])
    lo, hi = spec.frames_per_video
    n = spec.n_videos_per_cell
    n_train = int(round(spec.split_fractions[0] * n))
    n_val = int(round(spec.split_fractions[1] * n))
    for cell in spec.cells():
        label, manip, ds = cell
        for v in range(n):
            video_id = f"{ds}-{manip or 'real'}-{v:03d}"
            video_mean = means[cell] + rng.normal(0.0, spec.cluster_std, size=spec.feature_dim)
            n_frames = int(rng.integers(lo, hi + 1))
            frames = video_mean + rng.normal(0.0, spec.video_coherence_std, size=(n_frames, spec.feature_dim))
            split = 0 if v < n_train else (1 if v < n_train + n_val else 2)
            for k in range(n_frames):
                splits[split].append(SampleRecord(
                    sample_id=f"{video_id}-f{k:02d}",
                    video_id=video_id,
                    dataset=ds,
                    label=label,
                    manipulation=manip,
                    features=tuple(float(x) for x in frames[k]),
                ))
    return tuple(Manifest(s) for s in splits)
