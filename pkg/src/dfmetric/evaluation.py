"""Video-level scoring, ROC-AUC, balanced accuracy and grouped reports."""

from __future__ import annotations

import csv
import logging
import math
from collections import OrderedDict, defaultdict
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .types import LabelSpace

log = logging.getLogger(__name__)


class UndefinedMetric(ValueError):
    """The metric needs both classes present."""


@dataclass(frozen=True)
class VideoScore:
    video_id: str
    dataset: str
    manipulation: Optional[str]
    true_label: int
    fake_probability: float
    n_frames: int

    def __post_init__(self):
        if not 0.0 <= self.fake_probability <= 1.0:
            raise ValueError(f"{self.video_id}: probability {self.fake_probability} outside [0, 1]")
        if self.n_frames < 1:
            raise ValueError(f"{self.video_id}: no frames")


def collapse_to_binary(class_probs, label_space: LabelSpace, atol: float = 1e-6):
    """Total probability mass on the fake classes. Works row-wise on 2-D input."""
    p = np.asarray(class_probs, dtype=np.float64)
    if p.shape[-1] != label_space.num_classes:
        raise ValueError(f"expected {label_space.num_classes} class probabilities, got {p.shape[-1]}")
    if np.any(np.abs(p.sum(axis=-1) - 1.0) > atol):
        raise ValueError("class probabilities are not normalized")
    fake = sorted(label_space.fake_class_indices)
    out = p[..., fake].sum(axis=-1)
    return float(out) if out.ndim == 0 else out


def aggregate_video(frame_probs: Sequence[float]) -> float:
    if len(frame_probs) == 0:
        raise ValueError("cannot aggregate a video with no frames")
    return math.fsum(frame_probs) / len(frame_probs)


def _check_two_classes(labels: np.ndarray) -> tuple[int, int]:
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetric("metric undefined: need at least one real and one fake example")
    return n_pos, n_neg


def roc_auc(scores, labels) -> float:
    """Mann-Whitney AUC via average ranks; ties count one half. Labels: 1 = fake."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    n_pos, n_neg = _check_two_classes(y)
    order = np.argsort(s, kind="mergesort")
    sorted_s = s[order]
    # average rank over each run of equal scores
    starts = np.r_[0, np.flatnonzero(np.diff(sorted_s)) + 1]
    ends = np.r_[starts[1:], len(s)]
    run_rank = (starts + ends + 1) / 2.0
    ranks = np.empty(len(s))
    ranks[order] = np.repeat(run_rank, ends - starts)
    u = ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def balanced_accuracy(scores, labels, threshold: float = 0.5) -> float:
    """Mean of TPR and TNR; a score at or above ``threshold`` predicts fake."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    n_pos, n_neg = _check_two_classes(y)
    pred = s >= threshold
    tpr = int((pred & (y == 1)).sum()) / n_pos
    tnr = int((~pred & (y == 0)).sum()) / n_neg
    return (tpr + tnr) / 2


@dataclass
class FramePrediction:
    sample_id: str
    video_id: str
    dataset: str
    manipulation: Optional[str]
    true_label: int
    fake_probability: float


def video_scores(frames: Iterable[FramePrediction]) -> list[VideoScore]:
    """Average frame probabilities per video, keeping first-seen video order."""
    groups: "OrderedDict[str, list[FramePrediction]]" = OrderedDict()
    for f in frames:
        groups.setdefault(f.video_id, []).append(f)
    out = []
    for vid, fs in groups.items():
        labels = {f.true_label for f in fs}
        if len(labels) > 1:
            raise ValueError(f"video {vid} has frames with conflicting labels")
        out.append(VideoScore(vid, fs[0].dataset, fs[0].manipulation, fs[0].true_label,
                              aggregate_video([f.fake_probability for f in fs]), len(fs)))
    return out


@dataclass
class GroupMetrics:
    group: str
    n_videos: int
    n_real: int
    n_fake: int
    auc: Optional[float]
    bacc: Optional[float]

    @property
    def defined(self) -> bool:
        return self.auc is not None


@dataclass
class GroupedReport:
    group_key: str
    rows: list[GroupMetrics]
    avg_auc: Optional[float]
    avg_bacc: Optional[float]
    overall_auc: Optional[float]
    overall_bacc: Optional[float]

    def row(self, group: str) -> GroupMetrics:
        return next(r for r in self.rows if r.group == group)


def _metrics(scores, labels) -> tuple[Optional[float], Optional[float]]:
    try:
        return roc_auc(scores, labels), balanced_accuracy(scores, labels)
    except UndefinedMetric:
        return None, None


def grouped_report(videos: Sequence[VideoScore], group_key: str = "dataset", threshold: float = 0.5) -> GroupedReport:
    """Per-group AUC/bACC plus their unweighted mean over defined groups.

    For ``group_key="manipulation"`` each fake group is scored against all real
    videos, since real videos carry no manipulation tag.
    """
    if group_key not in ("dataset", "manipulation"):
        raise ValueError(f"unknown group key {group_key!r}")
    groups: dict[str, list[VideoScore]] = defaultdict(list)
    reals = [v for v in videos if v.true_label == 0]
    for v in videos:
        if group_key == "dataset":
            groups[v.dataset].append(v)
        elif v.true_label == 1:
            groups[v.manipulation or "unknown"].append(v)
    if group_key == "manipulation":
        groups = {g: reals + vs for g, vs in groups.items()}

    rows = []
    for g in sorted(groups):
        vs = groups[g]
        s = [v.fake_probability for v in vs]
        y = [v.true_label for v in vs]
        auc, bacc = _metrics(s, y)
        n_fake = sum(y)
        if auc is None:
            log.warning("group %r has a single class (%d real, %d fake); excluded from average", g, len(y) - n_fake, n_fake)
        rows.append(GroupMetrics(g, len(vs), len(vs) - n_fake, n_fake, auc, bacc))
    defined = [r for r in rows if r.defined]
    avg_auc = float(np.mean([r.auc for r in defined])) if defined else None
    avg_bacc = float(np.mean([r.bacc for r in defined])) if defined else None
    overall = _metrics([v.fake_probability for v in videos], [v.true_label for v in videos])
    return GroupedReport(group_key, rows, avg_auc, avg_bacc, *overall)


def _fmt(x: Optional[float]) -> str:
    return "n/a" if x is None else f"{100 * x:.2f}"


def format_report(report: GroupedReport) -> str:
    """Aligned text table: metric rows, one column per group plus Avg."""
    cols = [r.group for r in report.rows] + ["Avg"]
    width = max(8, *(len(c) for c in cols)) + 2
    lines = ["Metric".ljust(10) + "".join(c.rjust(width) for c in cols)]
    lines.append("AUC (%)".ljust(10) + "".join(_fmt(r.auc).rjust(width) for r in report.rows)
                 + _fmt(report.avg_auc).rjust(width))
    lines.append("bACC (%)".ljust(10) + "".join(_fmt(r.bacc).rjust(width) for r in report.rows)
                 + _fmt(report.avg_bacc).rjust(width))
    return "\n".join(lines) + "\n"


def write_report_csv(report: GroupedReport, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([report.group_key, "n_videos", "n_real", "n_fake", "auc", "bacc"])
        for r in report.rows:
            w.writerow([r.group, r.n_videos, r.n_real, r.n_fake,
                        "" if r.auc is None else repr(r.auc), "" if r.bacc is None else repr(r.bacc)])
        w.writerow(["Avg", "", "", "", "" if report.avg_auc is None else repr(report.avg_auc),
                    "" if report.avg_bacc is None else repr(report.avg_bacc)])


PRED_FIELDS = ["sample_id", "video_id", "dataset", "manipulation", "true_label", "fake_probability"]


def write_predictions_csv(frames: Sequence[FramePrediction], path, class_probs=None, class_names=()) -> None:
    """Frame-level predictions; optional per-class probability columns ``p_<class>``."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        extra = [f"p_{c}" for c in class_names] if class_probs is not None else []
        w.writerow(PRED_FIELDS + extra)
        for i, f in enumerate(frames):
            row = [f.sample_id, f.video_id, f.dataset, f.manipulation or "", "fake" if f.true_label else "real",
                   repr(float(f.fake_probability))]
            if class_probs is not None:
                row += [repr(float(p)) for p in class_probs[i]]
            w.writerow(row)


def read_predictions_csv(path) -> list[FramePrediction]:
    """Read frame predictions; ``fake_probability`` may be replaced by ``p_<class>`` columns."""
    out = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        prob_cols = [c for c in (reader.fieldnames or []) if c.startswith("p_")]
        for row in reader:
            if row.get("fake_probability"):
                p = float(row["fake_probability"])
            elif prob_cols:
                probs = [float(row[c]) for c in prob_cols]
                real_cols = [c for c in prob_cols if c == "p_real"]
                if not real_cols:
                    raise ValueError("per-class probabilities need a p_real column")
                p = sum(q for c, q in zip(prob_cols, probs) if c != "p_real")
                if abs(sum(probs) - 1.0) > 1e-6:
                    raise ValueError(f"{row['sample_id']}: class probabilities are not normalized")
            else:
                raise ValueError("predictions need fake_probability or p_<class> columns")
            label = row["true_label"].strip().lower()
            out.append(FramePrediction(row["sample_id"], row["video_id"], row.get("dataset", ""),
                                       row.get("manipulation") or None,
                                       1 if label in ("fake", "1") else 0, min(max(p, 0.0), 1.0)))
    return out


def predict_manifest(checkpoint, manifest) -> tuple[list[FramePrediction], np.ndarray]:
    """Frame predictions from a checkpoint: collapsed fake probability and raw class probabilities."""
    from .model import softmax
    from .types import LABEL_MODES

    mode = checkpoint.label_mode
    if mode not in LABEL_MODES:
        raise ValueError(f"checkpoint has unknown label mode {mode!r}")
    space = LabelSpace(mode, tuple(checkpoint.class_names))
    if not manifest.has_features:
        raise ValueError("prediction needs a feature-based manifest")
    x = np.array([r.features for r in manifest.records], dtype=np.float64)
    _, z = checkpoint.network.forward(x)
    probs = softmax(z)
    fake_p = collapse_to_binary(probs, space)
    frames = [
        FramePrediction(r.sample_id, r.video_id, r.dataset, r.manipulation, int(r.is_fake),
                        float(min(max(p, 0.0), 1.0)))
        for r, p in zip(manifest.records, np.atleast_1d(fake_p))
    ]
    return frames, probs


def separation_ratio(embeddings, labels) -> float:
    """Mean inter-class distance divided by mean intra-class distance (distinct pairs)."""
    from .mining import pairwise_distances

    d = pairwise_distances(embeddings)
    y = np.asarray(labels)
    same = y[:, None] == y[None, :]
    off = ~np.eye(len(y), dtype=bool)
    return float(d[~same].mean() / d[same & off].mean())
