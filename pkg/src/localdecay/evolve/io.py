"""Text series and binary snapshot files.

Snapshot layout (all little-endian), see docs/snapshot_format.md:

    offset  size  type     field
    0       8     char[8]  magic b"LDSNAP01"
    8       4     uint32   format version (1)
    12      4     uint32   ell
    16      8     uint64   nx, points per snapshot
    24      8     uint64   nsnap, number of records
    32      8     float64  x0, first grid point (tortoise)
    40      8     float64  h, grid spacing
    48      8     float64  mass (0 for flat backgrounds)
    56      4     uint32   flags, bit 0 set for a staggered grid
    60      4     uint32   reserved, 0

followed by ``nsnap`` records of ``1 + nx`` float64 values: the time, then
phi at x0 + i h for i = 0..nx-1.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import SnapshotFormatError

MAGIC = b"LDSNAP01"
VERSION = 1
HEADER = struct.Struct("<8sIIQQdddII")
assert HEADER.size == 64


def write_series(path, t, columns, names=("phi",), header: str = "") -> None:
    """Columnar text: t followed by one column per entry of ``columns``."""
    cols = [np.asarray(t, dtype=float)] + [np.asarray(c, dtype=float) for c in columns]
    data = np.column_stack(cols)
    head = (header.rstrip("\n") + "\n" if header else "") + "t " + " ".join(names)
    np.savetxt(path, data, fmt="%.17e", header=head)


def read_series(path) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of :func:`write_series`; returns (t, columns[ncol, nt])."""
    data = np.loadtxt(path, ndmin=2)
    return data[:, 0], data[:, 1:].T


@dataclass(frozen=True)
class SnapshotFile:
    ell: int
    x0: float
    h: float
    mass: float
    staggered: bool
    times: np.ndarray
    data: np.ndarray   # (nsnap, nx)

    @property
    def x(self) -> np.ndarray:
        return self.x0 + self.h * np.arange(self.data.shape[1])


def write_snapshots(path, times, x, data, ell: int = 0, mass: float = 0.0,
                    staggered: bool = False) -> None:
    times = np.asarray(times, dtype="<f8")
    data = np.asarray(data, dtype="<f8")
    x = np.asarray(x, dtype=float)
    nsnap, nx = data.shape
    if len(times) != nsnap or len(x) != nx:
        raise ValueError("times/x do not match the snapshot array")
    h = float(x[1] - x[0]) if nx > 1 else 0.0
    with open(path, "wb") as fh:
        fh.write(HEADER.pack(MAGIC, VERSION, int(ell), nx, nsnap, float(x[0]), h,
                             float(mass), 1 if staggered else 0, 0))
        rec = np.empty((nsnap, nx + 1), dtype="<f8")
        rec[:, 0] = times
        rec[:, 1:] = data
        fh.write(rec.tobytes(order="C"))


def read_snapshots(path) -> SnapshotFile:
    raw = Path(path).read_bytes()
    if len(raw) < HEADER.size:
        raise SnapshotFormatError("file shorter than the 64-byte header")
    magic, ver, ell, nx, nsnap, x0, h, mass, flags, _ = HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise SnapshotFormatError(f"bad magic {magic!r}")
    if ver != VERSION:
        raise SnapshotFormatError(f"unsupported version {ver}")
    expect = HEADER.size + 8 * nsnap * (nx + 1)
    if len(raw) != expect:
        raise SnapshotFormatError(f"payload size {len(raw)} != expected {expect}")
    rec = np.frombuffer(raw, dtype="<f8", offset=HEADER.size).reshape(nsnap, nx + 1)
    return SnapshotFile(ell=ell, x0=x0, h=h, mass=mass, staggered=bool(flags & 1),
                        times=rec[:, 0].astype(float), data=rec[:, 1:].astype(float))
