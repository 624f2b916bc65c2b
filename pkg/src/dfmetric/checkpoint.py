"""Binary checkpoint container.

Layout::

    MAGIC (8 bytes) | header length (uint32 LE) | header JSON (utf-8) | arrays

The header carries ``format_version``, the resolved config, training state and
an ordered list of ``{"name", "shape"}`` entries; arrays follow in that order
as little-endian float64, C order.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .model import Network

MAGIC = b"DFMCKPT\x00"
FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    network: Network
    moments_m: dict[str, np.ndarray]
    moments_v: dict[str, np.ndarray]
    epoch: int
    step: int
    val_loss: float
    config: dict
    class_names: tuple[str, ...]
    format_version: int = FORMAT_VERSION
    extra: dict = field(default_factory=dict)

    @property
    def label_mode(self) -> str:
        return self.config.get("label_mode", "binary")


def _header(ckpt: Checkpoint, arrays: list[tuple[str, np.ndarray]]) -> bytes:
    net = ckpt.network
    header = {
        "format_version": ckpt.format_version,
        "config": ckpt.config,
        "class_names": list(ckpt.class_names),
        "epoch": ckpt.epoch,
        "step": ckpt.step,
        "val_loss": ckpt.val_loss,
        "network": {
            "input_dim": net.input_dim,
            "hidden_dims": list(net.hidden_dims),
            "embed_dim": net.embed_dim,
            "num_classes": net.num_classes,
            "activation": net.activation,
        },
        "extra": ckpt.extra,
        "arrays": [{"name": n, "shape": list(a.shape)} for n, a in arrays],
    }
    return json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")


def to_bytes(ckpt: Checkpoint) -> bytes:
    arrays = []
    for name, value in ckpt.network.params.items():
        arrays.append((f"param/{name}", value))
    for name, value in ckpt.moments_m.items():
        arrays.append((f"m/{name}", value))
    for name, value in ckpt.moments_v.items():
        arrays.append((f"v/{name}", value))
    head = _header(ckpt, arrays)
    chunks = [MAGIC, struct.pack("<I", len(head)), head]
    chunks += [np.ascontiguousarray(a, dtype="<f8").tobytes() for _, a in arrays]
    return b"".join(chunks)


def from_bytes(blob: bytes) -> Checkpoint:
    if blob[: len(MAGIC)] != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    (n,) = struct.unpack_from("<I", blob, len(MAGIC))
    start = len(MAGIC) + 4
    header = json.loads(blob[start : start + n].decode("utf-8"))
    if header["format_version"] != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint format {header['format_version']}")
    offset = start + n
    groups: dict[str, dict[str, np.ndarray]] = {"param": {}, "m": {}, "v": {}}
    for entry in header["arrays"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(blob, dtype="<f8", count=count, offset=offset).reshape(shape).astype(np.float64)
        offset += 8 * count
        kind, name = entry["name"].split("/", 1)
        groups[kind][name] = arr
    if offset != len(blob):
        raise CheckpointError("trailing bytes after checkpoint arrays")
    nh = header["network"]
    net = Network(nh["input_dim"], tuple(nh["hidden_dims"]), nh["embed_dim"], nh["num_classes"], nh["activation"], groups["param"])
    return Checkpoint(
        network=net,
        moments_m=groups["m"],
        moments_v=groups["v"],
        epoch=header["epoch"],
        step=header["step"],
        val_loss=header["val_loss"],
        config=header["config"],
        class_names=tuple(header["class_names"]),
        format_version=header["format_version"],
        extra=header["extra"],
    )


def save_checkpoint(ckpt: Checkpoint, path: str | Path) -> None:
    Path(path).write_bytes(to_bytes(ckpt))


def load_checkpoint(path: str | Path) -> Checkpoint:
    return from_bytes(Path(path).read_bytes())
