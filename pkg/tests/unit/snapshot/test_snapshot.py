"""Unit tests for the SHOMv1 binary snapshot format."""

from __future__ import annotations

import numpy as np
import pytest

from shom.snapshot import MAGIC, Snapshot, SnapshotFormatError, decode_snapshot, encode_snapshot, read_snapshot
from shom.snapshot import write_snapshot


def _sample() -> Snapshot:
    return Snapshot(
        dimension=2,
        arrays={"chi": np.arange(24, dtype=float).reshape(2, 3, 4), "scalar": np.array(1.5)},
        grid={"kind": "torus", "size": 8},
        metadata={"family": "trig", "residual": np.float64(1e-10)},
    )


def test_encoded_snapshot_starts_with_magic_and_dimension() -> None:
    """The header is the magic string followed by little-endian dimension."""

    raw = encode_snapshot(_sample())

    assert raw.startswith(MAGIC)
    assert int.from_bytes(raw[len(MAGIC) : len(MAGIC) + 4], "little") == 2


def test_write_and_read_preserve_arrays_and_metadata(tmp_path) -> None:
    """Arrays keep shape and values; metadata keeps JSON-compatible values."""

    path = write_snapshot(tmp_path / "nested" / "cell.shom", _sample())
    loaded = read_snapshot(path)

    assert loaded.dimension == 2
    np.testing.assert_array_equal(loaded["chi"], _sample()["chi"])
    assert loaded["scalar"].shape == ()
    assert loaded.grid == {"kind": "torus", "size": 8}
    assert loaded.metadata["residual"] == pytest.approx(1e-10)
    assert not list(path.parent.glob(".*.part"))


def test_decode_rejects_missing_magic() -> None:
    """Foreign bytes raise SnapshotFormatError."""

    with pytest.raises(SnapshotFormatError):
        decode_snapshot(b"NOTSHOM" + b"\x00" * 16)


def test_decode_rejects_truncated_payload() -> None:
    """An array that runs past the payload is reported, not silently truncated."""

    raw = encode_snapshot(_sample())

    with pytest.raises(SnapshotFormatError):
        decode_snapshot(raw[:-16])
