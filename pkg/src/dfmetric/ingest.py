"""Manifest JSONL I/O, frame-sampling timestamps and face-crop geometry."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .types import FrameRef, RecordError, SampleRecord


class ManifestError(ValueError):
    """Raised when a manifest file cannot be loaded; carries the offending line."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class BBox:
    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self):
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise ValueError(f"degenerate box {self.as_tuple()}")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x0, self.y0, self.x1, self.y1)

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0


@dataclass
class Manifest:
    records: list[SampleRecord]
    source_path: str = ""

    def __post_init__(self):
        seen = set()
        kinds = set()
        for i, r in enumerate(self.records):
            if r.sample_id in seen:
                raise ManifestError(f"duplicate sample_id {r.sample_id!r}", i + 1)
            seen.add(r.sample_id)
            kinds.add(r.features is not None)
            if len(kinds) > 1:
                raise ManifestError("mixed feature/frame representations", i + 1)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def has_features(self) -> bool:
        return bool(self.records) and self.records[0].features is not None

    def datasets(self, fake_only: bool = True) -> list[str]:
        return sorted({r.dataset for r in self.records if r.is_fake or not fake_only})


def record_from_dict(obj: dict) -> SampleRecord:
    missing = {"sample_id", "video_id", "label"} - obj.keys()
    if missing:
        raise RecordError(f"missing fields {sorted(missing)}")
    features = obj.get("features")
    frame = obj.get("frame")
    if frame is not None:
        bbox = tuple(float(v) for v in frame["bbox"])
        if len(bbox) != 4:
            raise RecordError("bbox must have 4 coordinates")
        frame = FrameRef(str(frame["path"]), float(frame["t"]), bbox)
    return SampleRecord(
        sample_id=str(obj["sample_id"]),
        video_id=str(obj["video_id"]),
        dataset=str(obj.get("dataset") or ""),
        label=obj["label"],
        manipulation=obj.get("manipulation"),
        features=None if features is None else tuple(float(v) for v in features),
        frame=frame,
    )


def record_to_dict(r: SampleRecord) -> dict:
    frame = None
    if r.frame is not None:
        frame = {"path": r.frame.path, "t": r.frame.t, "bbox": list(r.frame.bbox)}
    return {
        "sample_id": r.sample_id,
        "video_id": r.video_id,
        "dataset": r.dataset,
        "label": r.label,
        "manipulation": r.manipulation,
        "features": None if r.features is None else list(r.features),
        "frame": frame,
    }


def load_manifest(path: str | Path) -> Manifest:
    """Parse a JSONL manifest; any bad line aborts the whole load."""
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                records.append(record_from_dict(json.loads(line)))
            except (json.JSONDecodeError, RecordError, KeyError, TypeError, ValueError) as exc:
                raise ManifestError(str(exc), lineno) from exc
    return Manifest(records, str(path))


def save_manifest(manifest: Manifest | Iterable[SampleRecord], path: str | Path) -> None:
    records = manifest.records if isinstance(manifest, Manifest) else list(manifest)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in records:
            fh.write(json.dumps(record_to_dict(r), separators=(",", ":")) + "\n")


def select_frame_timestamps(video_duration_s: float, fps_rate: float = 1.0) -> list[float]:
    """Timestamps k / rate for k = 0, 1, ... strictly before the video end."""
    if video_duration_s < 0:
        raise ValueError("video duration must be nonnegative")
    if fps_rate <= 0:
        raise ValueError("sampling rate must be positive")
    n = math.ceil(video_duration_s * fps_rate)
    out = [k / fps_rate for k in range(n + 1)]
    return [t for t in out if t < video_duration_s]


def expand_bbox(box: BBox, margin_fraction: float, image_w: float, image_h: float) -> BBox:
    """Scale a box by ``1 + margin_fraction`` about its center, then clip to the image."""
    if margin_fraction < 0:
        raise ValueError("margin_fraction must be nonnegative")
    cx = (box.x0 + box.x1) / 2
    cy = (box.y0 + box.y1) / 2
    half_w = box.width * (1 + margin_fraction) / 2
    half_h = box.height * (1 + margin_fraction) / 2
    x0, x1 = max(cx - half_w, 0.0), min(cx + half_w, float(image_w))
    y0, y1 = max(cy - half_h, 0.0), min(cy + half_h, float(image_h))
    if not (x0 < x1 and y0 < y1):
        raise ValueError(f"box {box.as_tuple()} lies outside the {image_w}x{image_h} image")
    return BBox(x0, y0, x1, y1)


@dataclass(frozen=True)
class CropTransform:
    """Affine map target = scale * (source - box origin), per axis."""

    scale: tuple[float, float]
    offset: tuple[float, float]

    def apply(self, x: float, y: float) -> tuple[float, float]:
        return (self.scale[0] * x + self.offset[0], self.scale[1] * y + self.offset[1])


def crop_resize_geometry(box: BBox, target_side: int = 224) -> CropTransform:
    if target_side <= 0:
        raise ValueError("target_side must be positive")
    sx = target_side / box.width
    sy = target_side / box.height
    # + 0.0 normalises -0.0 offsets for boxes anchored at the origin
    return CropTransform((sx, sy), (-sx * box.x0 + 0.0, -sy * box.y0 + 0.0))
