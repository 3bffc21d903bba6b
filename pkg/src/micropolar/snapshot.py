"""Binary field snapshots.

Layout::

    b"MPFLD\\0\\0\\x01"                 8-byte magic
    uint32 little-endian               header length in bytes
    UTF-8 JSON                         {"n", "box_length", "components", "time"}
    float64 little-endian samples      component-major, x1 fastest within a component

Snapshots always hold real-space samples. A :class:`State` is stored with six
components (u1, u2, u3, w1, w2, w3).
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .spectral import Grid, ScalarField, State, VectorField, to_real, to_spectral

__all__ = ["MAGIC", "SnapshotError", "write_snapshot", "read_snapshot", "save_state", "load_state", "load_field"]

MAGIC = b"MPFLD\x00\x00\x01"
_LEN = struct.Struct("<I")


class SnapshotError(ValueError):
    pass


def write_snapshot(path, grid: Grid, components: np.ndarray, time: float = 0.0) -> None:
    """Write real samples of shape (c, n, n, n), indexed [comp, x1, x2, x3]."""
    arr = np.asarray(components, dtype=np.float64)
    if arr.ndim == 3:
        arr = arr[None]
    if arr.shape[1:] != grid.shape:
        raise SnapshotError(f"expected samples on {grid.shape}, got {arr.shape[1:]}")
    header = json.dumps(
        {"n": grid.n, "box_length": grid.box_length, "components": int(arr.shape[0]), "time": float(time)},
        sort_keys=True,
    ).encode("utf-8")
    # x1 fastest: transpose each component to [x3, x2, x1] before flattening
    body = np.ascontiguousarray(arr.transpose(0, 3, 2, 1)).astype("<f8").tobytes()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(_LEN.pack(len(header)))
        fh.write(header)
        fh.write(body)


def read_snapshot(path) -> tuple[Grid, np.ndarray, float]:
    raw = Path(path).read_bytes()
    if raw[:8] != MAGIC:
        raise SnapshotError(f"{path}: bad magic {raw[:8]!r}")
    if len(raw) < 12:
        raise SnapshotError(f"{path}: truncated header")
    (hlen,) = _LEN.unpack_from(raw, 8)
    try:
        header = json.loads(raw[12 : 12 + hlen].decode("utf-8"))
        n, c = int(header["n"]), int(header["components"])
        grid = Grid(n, float(header["box_length"]))
        t = float(header["time"])
    except (KeyError, ValueError, UnicodeDecodeError) as exc:
        raise SnapshotError(f"{path}: malformed header: {exc}") from exc
    body = raw[12 + hlen :]
    expected = 8 * c * n**3
    if len(body) != expected:
        raise SnapshotError(f"{path}: expected {expected} data bytes, found {len(body)}")
    data = np.frombuffer(body, dtype="<f8").reshape(c, n, n, n).transpose(0, 3, 2, 1)
    return grid, np.ascontiguousarray(data, dtype=np.float64), t


def save_state(path, state: State) -> None:
    data = np.concatenate([to_real(state.u).data, to_real(state.omega).data])
    write_snapshot(path, state.grid, data, state.t)


def load_state(path) -> State:
    """Read a 6-component snapshot (or a 3-component velocity with zero omega)."""
    grid, data, t = read_snapshot(path)
    if data.shape[0] == 6:
        u, w = data[:3], data[3:]
    elif data.shape[0] == 3:
        u, w = data, np.zeros_like(data)
    else:
        raise SnapshotError(f"{path}: a state needs 3 or 6 components, found {data.shape[0]}")
    return State(to_spectral(VectorField(grid, u)), to_spectral(VectorField(grid, w)), t)


def load_field(path):
    """Real-space field from a 1-component (scalar) or 3-component (vector) snapshot."""
    grid, data, _ = read_snapshot(path)
    if data.shape[0] == 1:
        return ScalarField(grid, data[0])
    if data.shape[0] == 3:
        return VectorField(grid, data)
    if data.shape[0] == 6:
        return VectorField(grid, data[:3])
    raise SnapshotError(f"{path}: cannot interpret {data.shape[0]} components as a field")
