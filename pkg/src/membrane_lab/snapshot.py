"""Binary persistence of space-time fields.

Layout: one ASCII header line

    MEMBRANE1 dims=<M> n=<points> nt=<levels> L=<hex> dx=<hex> dt=<hex> t0=<hex> sponge=<cells> endian=little

followed by ``nt * n^M`` little-endian float64 values in row-major
``(t, x_1, ..., x_M)`` order.  Floats in the header use ``float.hex`` so the
round trip is bit-exact.  ``sponge`` is optional on import (default 0).
"""

from __future__ import annotations

import os

import numpy as np

from .grid import Grid, SpaceTimeField

__all__ = ["MAGIC", "SnapshotError", "export_snapshot", "import_snapshot"]

MAGIC = "MEMBRANE1"
MAX_PAYLOAD = 1 << 40
_MAX_HEADER = 512


class SnapshotError(ValueError):
    pass


def export_snapshot(field: SpaceTimeField, path) -> None:
    g = field.grid
    header = (
        f"{MAGIC} dims={g.dim} n={g.points} nt={field.n_t} L={float(g.half_width).hex()} "
        f"dx={float(g.spacing).hex()} dt={float(field.dt).hex()} t0={float(field.t0).hex()} sponge={g.sponge_width} endian=little\n"
    )
    payload = np.ascontiguousarray(field.values, dtype="<f8").tobytes()
    tmp = f"{os.fspath(path)}.part"
    with open(tmp, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(payload)
    os.replace(tmp, path)


def _parse_header(line: bytes) -> dict:
    try:
        text = line.decode("ascii").strip()
    except UnicodeDecodeError as exc:
        raise SnapshotError("header is not ASCII") from exc
    parts = text.split()
    if not parts or parts[0] != MAGIC:
        raise SnapshotError(f"bad magic: expected {MAGIC!r}, found {parts[0] if parts else ''!r}")
    fields = {}
    for item in parts[1:]:
        if "=" not in item:
            raise SnapshotError(f"malformed header entry {item!r}")
        k, v = item.split("=", 1)
        fields[k] = v
    missing = {"dims", "n", "nt", "L", "dx", "dt", "t0", "endian"} - fields.keys()
    if missing:
        raise SnapshotError(f"header lacks {sorted(missing)}")
    return fields


def import_snapshot(path) -> SpaceTimeField:
    with open(path, "rb") as fh:
        head = fh.read(_MAX_HEADER)
        nl = head.find(b"\n")
        if nl < 0:
            raise SnapshotError(f"bad magic or missing header line in {os.fspath(path)!r}")
        f = _parse_header(head[:nl])
        try:
            dims, n, nt = int(f["dims"]), int(f["n"]), int(f["nt"])
            sponge = int(f.get("sponge", "0"))
            L, dx, dt, t0 = (float.fromhex(f[k]) for k in ("L", "dx", "dt", "t0"))
        except ValueError as exc:
            raise SnapshotError(f"unreadable header value: {exc}") from exc
        if f["endian"] != "little":
            raise SnapshotError(f"unsupported endianness {f['endian']!r}")
        if not 1 <= dims <= 3 or n < 1 or nt < 1:
            raise SnapshotError(f"dimension out of range: dims={dims}, n={n}, nt={nt}")
        expected = 8 * nt * n**dims
        if expected > MAX_PAYLOAD:
            raise SnapshotError(f"dimension overflow: header declares {expected} bytes")
        fh.seek(nl + 1)
        payload = fh.read(expected + 1)
    if len(payload) != expected:
        raise SnapshotError(f"payload size mismatch: expected {expected} bytes, found {len(payload)}")
    try:
        grid = Grid(dims, L, n, sponge)
    except ValueError as exc:
        raise SnapshotError(f"invalid grid in header: {exc}") from exc
    if grid.spacing != dx:
        raise SnapshotError(f"spacing {dx!r} inconsistent with L={L!r}, n={n}")
    values = np.frombuffer(payload, dtype="<f8").astype(np.float64).reshape((nt,) + grid.shape)
    return SpaceTimeField(grid, dt, values, t0)
