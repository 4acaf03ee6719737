"""Bit-exact binary snapshots of distribution values with their grid and model.

Layout (all little-endian)::

    magic   8 bytes  b"ESBGKSN\\0"
    version u32
    meta_len u32     length of the metadata block
    meta    META     d, n_v, n_I, n_x (u32 each), then L_v, I_max, dx, delta,
                     nu, theta, mu and center[3] (float64, center zero-padded)
    values  float64  n_x * n_v**d * n_I values in row-major (x, v_1..v_d, I) order
    footer  32 bytes SHA-256 of everything before it
"""

from __future__ import annotations

import hashlib
import struct
from pathlib import Path

import numpy as np

from .phase_grid import DistSnapshot, GridSpec, ModelParams, build_grid

__all__ = [
    "MAGIC",
    "VERSION",
    "SnapshotError",
    "SnapshotMagicError",
    "SnapshotVersionError",
    "SnapshotSizeError",
    "SnapshotChecksumError",
    "encode_snapshot",
    "decode_snapshot",
    "write_snapshot",
    "read_snapshot",
    "snapshot_diff",
]

MAGIC = b"ESBGKSN\x00"
VERSION = 1
HEADER = struct.Struct("<8sII")
META = struct.Struct("<4I10d")
FOOTER_LEN = 32


class SnapshotError(ValueError):
    pass


class SnapshotMagicError(SnapshotError):
    pass


class SnapshotVersionError(SnapshotError):
    pass


class SnapshotSizeError(SnapshotError):
    pass


class SnapshotChecksumError(SnapshotError):
    pass


def encode_snapshot(snap: DistSnapshot) -> bytes:
    spec = snap.grid.spec
    p = snap.params
    center = list(spec.center) + [0.0] * (3 - len(spec.center))
    meta = META.pack(p.d, spec.n_v, spec.n_I, snap.n_x,
                     spec.L_v, spec.I_max, snap.dx, p.delta, p.nu, p.theta, p.mu, *center)
    body = (HEADER.pack(MAGIC, VERSION, len(meta)) + meta
            + np.ascontiguousarray(snap.cells(), dtype="<f8").tobytes())
    return body + hashlib.sha256(body).digest()


def decode_snapshot(data: bytes) -> DistSnapshot:
    if len(data) < HEADER.size:
        raise SnapshotSizeError(f"file has {len(data)} bytes, shorter than the {HEADER.size}-byte header")
    magic, version, meta_len = HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise SnapshotMagicError(f"bad magic {magic!r}")
    if version != VERSION:
        raise SnapshotVersionError(f"unsupported snapshot version {version} (expected {VERSION})")
    if meta_len != META.size or len(data) < HEADER.size + META.size:
        raise SnapshotSizeError(f"metadata block has {meta_len} bytes, expected {META.size}")
    d, n_v, n_I, n_x, L_v, I_max, dx, delta, nu, theta, mu, *center = META.unpack_from(data, HEADER.size)
    n_values = n_x * n_v ** d * n_I
    expected = HEADER.size + META.size + 8 * n_values + FOOTER_LEN
    if len(data) != expected:
        raise SnapshotSizeError(f"file has {len(data)} bytes, expected {expected}")
    body, footer = data[:-FOOTER_LEN], data[-FOOTER_LEN:]
    if hashlib.sha256(body).digest() != footer:
        raise SnapshotChecksumError("checksum mismatch")
    params = ModelParams(d, delta, nu, theta, mu)
    grid = build_grid(GridSpec(n_v, L_v, tuple(center[:d]), n_I, I_max), params)
    values = np.frombuffer(body, dtype="<f8", offset=HEADER.size + META.size).astype(np.float64)
    shape = grid.shape if n_x == 1 and dx == 0.0 else (n_x,) + grid.shape
    return DistSnapshot(values.reshape(shape), grid, params, dx)


def write_snapshot(path, snap: DistSnapshot) -> None:
    Path(path).write_bytes(encode_snapshot(snap))


def read_snapshot(path) -> DistSnapshot:
    return decode_snapshot(Path(path).read_bytes())


def snapshot_diff(a: DistSnapshot, b: DistSnapshot) -> dict:
    """Compare two snapshots: metadata equality, max abs and L1 differences."""
    same_meta = (a.params == b.params and a.grid.spec == b.grid.spec
                 and a.n_x == b.n_x and a.dx == b.dx)
    out = {"same_metadata": same_meta, "bitwise_equal": False}
    if not same_meta:
        return out
    va, vb = a.cells(), b.cells()
    diff = np.abs(va - vb)
    out["bitwise_equal"] = bool(va.tobytes() == vb.tobytes())
    out["max_abs_diff"] = float(diff.max())
    out["l1_diff"] = float(sum(np.sum(a.grid.v_marginal(c)) * a.grid.v_cell for c in diff))
    return out
