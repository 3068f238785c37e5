"""Binary field snapshots (``SHOMv1``).

Layout, all integers little-endian unsigned 32-bit:

    b"SHOMv1"                 magic
    dimension                 spatial dimension of the stored fields
    header_length             byte length of the JSON header that follows
    header                    UTF-8 JSON: {"grid": {...}, "metadata": {...},
                              "arrays": [{"name", "shape", "offset"}, ...]}
    payload                   every array as little-endian float64, row-major,
                              at ``offset`` bytes from the start of the payload
"""

from __future__ import annotations

import json
import logging
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from shom.observability import to_builtin

LOGGER = logging.getLogger(__name__)

MAGIC = b"SHOMv1"
_HEADER = struct.Struct("<II")


class SnapshotFormatError(ValueError):
    """Raised when a file is not a readable SHOMv1 snapshot."""


@dataclass(frozen=True)
class Snapshot:
    """Named float64 arrays plus grid description and free-form metadata."""

    dimension: int
    arrays: Mapping[str, np.ndarray]
    grid: Mapping[str, Any] = field(default_factory=dict)
    metadata: Mapping[str, Any] = field(default_factory=dict)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.arrays[name]


def encode_snapshot(snapshot: Snapshot) -> bytes:
    entries = []
    chunks = []
    offset = 0
    for name, values in snapshot.arrays.items():
        data = np.ascontiguousarray(values, dtype="<f8")
        entries.append({"name": name, "shape": list(data.shape), "offset": offset})
        chunk = data.tobytes(order="C")
        chunks.append(chunk)
        offset += len(chunk)
    header = json.dumps(
        {"grid": to_builtin(dict(snapshot.grid)), "metadata": to_builtin(dict(snapshot.metadata)), "arrays": entries},
        sort_keys=True,
    ).encode("utf-8")
    return MAGIC + _HEADER.pack(snapshot.dimension, len(header)) + header + b"".join(chunks)


def decode_snapshot(raw: bytes) -> Snapshot:
    if raw[: len(MAGIC)] != MAGIC:
        raise SnapshotFormatError("missing SHOMv1 magic bytes")
    start = len(MAGIC)
    try:
        dimension, header_length = _HEADER.unpack_from(raw, start)
    except struct.error as exc:
        raise SnapshotFormatError("truncated snapshot header") from exc
    start += _HEADER.size
    try:
        header = json.loads(raw[start : start + header_length].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise SnapshotFormatError("snapshot header is not valid JSON") from exc
    payload = memoryview(raw)[start + header_length :]
    arrays: dict[str, np.ndarray] = {}
    for entry in header.get("arrays", []):
        shape = tuple(int(size) for size in entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        begin = int(entry["offset"])
        if begin + 8 * count > len(payload):
            raise SnapshotFormatError(f"array '{entry['name']}' runs past the end of the payload")
        arrays[entry["name"]] = np.frombuffer(payload, dtype="<f8", count=count, offset=begin).reshape(shape).copy()
    return Snapshot(
        dimension=int(dimension),
        arrays=arrays,
        grid=header.get("grid", {}),
        metadata=header.get("metadata", {}),
    )


def write_snapshot(path: Path, snapshot: Snapshot) -> Path:
    """Write ``snapshot`` atomically (temporary file, then rename)."""

    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    partial = target.with_name(f".{target.name}.{os.getpid()}.part")
    partial.write_bytes(encode_snapshot(snapshot))
    os.replace(partial, target)
    LOGGER.debug("Wrote snapshot %s (%d arrays)", target, len(snapshot.arrays))
    return target


def read_snapshot(path: Path) -> Snapshot:
    return decode_snapshot(Path(path).read_bytes())


__all__ = [
    "MAGIC",
    "Snapshot",
    "SnapshotFormatError",
    "decode_snapshot",
    "encode_snapshot",
    "read_snapshot",
    "write_snapshot",
]
