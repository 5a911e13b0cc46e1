"""Binary field snapshots: 24-byte little-endian header, then row-major f64 samples."""
from pathlib import Path

import numpy as np

from ..errors import SnapshotFormatError
from ..models import Grid, SpectralField

MAGIC = b"PLAB"
VERSION = 1

HEADER = np.dtype([
    ("magic", "S4"),
    ("version", "<u4"),
    ("dim", "<u4"),
    ("n", "<u4"),
    ("box_length", "<f8"),
])


def write_field(path, f: SpectralField) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = np.array([(MAGIC, VERSION, f.grid.dim, f.grid.n, f.grid.box_length)], dtype=HEADER)
    with open(path, "wb") as fh:
        fh.write(header.tobytes())
        fh.write(np.ascontiguousarray(f.samples, dtype="<f8").tobytes())
    return path


def read_field(path) -> SpectralField:
    raw = Path(path).read_bytes()
    if len(raw) < HEADER.itemsize:
        raise SnapshotFormatError(f"{path}: file shorter than the {HEADER.itemsize}-byte header")
    head = np.frombuffer(raw[:HEADER.itemsize], dtype=HEADER)[0]
    if bytes(head["magic"]) != MAGIC:
        raise SnapshotFormatError(f"{path}: bad magic {bytes(head['magic'])!r}")
    if int(head["version"]) != VERSION:
        raise SnapshotFormatError(f"{path}: unsupported version {int(head['version'])}")
    try:
        grid = Grid(int(head["n"]), float(head["box_length"]), int(head["dim"]))
    except ValueError as exc:
        raise SnapshotFormatError(f"{path}: invalid grid in header ({exc})") from exc
    body = np.frombuffer(raw[HEADER.itemsize:], dtype="<f8")
    if body.size != int(np.prod(grid.shape)):
        raise SnapshotFormatError(f"{path}: expected {np.prod(grid.shape)} samples, found {body.size}")
    return SpectralField.from_samples(grid, body.reshape(grid.shape).astype(float))
