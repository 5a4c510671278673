"""Canonical data model and file formats for snapshot ensembles.

A dataset directory holds a JSON manifest (``dataset.json``) plus one
binary blob per ensemble.  Blob layout (little-endian): magic ``QSNP``,
u16 version, u32 rows, u32 cols, u32 count, then count*rows*cols site
readings as signed bytes, row-major within a snapshot, snapshot-major
overall.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    AlphabetViolation,
    ChecksumMismatch,
    InvalidDataset,
    MagicMismatch,
    ShapeMismatch,
    TruncatedBlob,
    VersionUnsupported,
)

MAGIC = b"QSNP"
FORMAT_VERSION = 1
MANIFEST_NAME = "dataset.json"

ALPHABETS = {
    "parity01": (0, 1),
    "spin_pm1": (-1, 1),
}


@dataclass(frozen=True)
class Snapshot:
    """One projective measurement: a rows x cols grid of site readings."""

    rows: int
    cols: int
    values: np.ndarray  # int8, length rows*cols, row-major

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.int8)
        object.__setattr__(self, "values", v)
        if self.rows < 1 or self.cols < 1:
            raise InvalidDataset(f"snapshot shape {self.rows}x{self.cols} must be positive")
        if v.ndim != 1 or v.size != self.rows * self.cols:
            raise InvalidDataset(
                f"snapshot payload length {v.size} != rows*cols = {self.rows * self.cols}"
            )

    @classmethod
    def from_grid(cls, grid) -> "Snapshot":
        g = np.asarray(grid)
        if g.ndim == 1:
            g = g[None, :]
        if g.ndim != 2:
            raise InvalidDataset(f"snapshot grid must be 1D or 2D, got ndim={g.ndim}")
        return cls(rows=g.shape[0], cols=g.shape[1], values=g.reshape(-1).astype(np.int8))

    def grid(self) -> np.ndarray:
        return self.values.reshape(self.rows, self.cols)

    def validate_alphabet(self, alphabet: str, mask=None):
        allowed = ALPHABETS[alphabet]
        v = self.values
        if mask is not None:
            active = np.zeros(v.size, dtype=bool)
            active[mask] = True
            if np.any(v[~active] != 0):
                raise AlphabetViolation("masked-out site carries a nonzero reading")
            v = v[active]
        if not np.isin(v, allowed).all():
            bad = v[~np.isin(v, allowed)][0]
            raise AlphabetViolation(f"value {bad} outside alphabet {alphabet}")


def flatten(s: Snapshot) -> np.ndarray:
    """Row-major real vector of the snapshot; entry (r, c) at index r*cols + c."""
    return s.values.astype(float)


@dataclass(frozen=True)
class SnapshotEnsemble:
    """All snapshots taken at one setting of the control parameter."""

    parameter: float
    label: str
    snapshots: tuple  # of Snapshot

    def __post_init__(self):
        object.__setattr__(self, "snapshots", tuple(self.snapshots))
        if len(self.snapshots) < 2:
            raise InvalidDataset("ensemble needs at least two snapshots")
        r, c = self.snapshots[0].rows, self.snapshots[0].cols
        for s in self.snapshots:
            if (s.rows, s.cols) != (r, c):
                raise InvalidDataset("snapshots within an ensemble must share one shape")

    @property
    def rows(self):
        return self.snapshots[0].rows

    @property
    def cols(self):
        return self.snapshots[0].cols

    @property
    def count(self):
        return len(self.snapshots)

    def stacked(self) -> np.ndarray:
        """(count, rows*cols) float matrix of flattened snapshots."""
        return np.stack([flatten(s) for s in self.snapshots])

    @classmethod
    def from_array(cls, parameter, arr, label="") -> "SnapshotEnsemble":
        """Build from a (count, rows, cols) or (count, sites) integer array."""
        a = np.asarray(arr)
        if a.ndim == 2:
            a = a[:, None, :]
        snaps = [Snapshot.from_grid(g) for g in a]
        return cls(parameter=float(parameter), label=label, snapshots=tuple(snaps))


@dataclass(frozen=True)
class Dataset:
    """Ordered parameter sweep of snapshot ensembles."""

    ensembles: tuple  # of SnapshotEnsemble, parameter-ascending
    parameter_name: str
    alphabet: str
    mask: tuple | None = None  # active site indices; None = all sites active
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "ensembles", tuple(self.ensembles))
        if self.alphabet not in ALPHABETS:
            raise InvalidDataset(f"unknown alphabet {self.alphabet!r}")
        if len(self.ensembles) < 3:
            raise InvalidDataset("a sweep needs at least three ensembles")
        r, c = self.ensembles[0].rows, self.ensembles[0].cols
        params = []
        for e in self.ensembles:
            if (e.rows, e.cols) != (r, c):
                raise InvalidDataset("all ensembles must share one snapshot shape")
            params.append(e.parameter)
        if np.any(np.diff(params) <= 0):
            raise InvalidDataset("parameters must be strictly increasing after sorting")
        mask = self.mask
        if mask is not None:
            mask = tuple(int(i) for i in mask)
            object.__setattr__(self, "mask", mask)
            if len(mask) == 0 or min(mask) < 0 or max(mask) >= r * c:
                raise InvalidDataset("mask indices outside the snapshot grid")
            if len(set(mask)) != len(mask):
                raise InvalidDataset("mask indices must be unique")
        for e in self.ensembles:
            for s in e.snapshots:
                s.validate_alphabet(self.alphabet, mask)

    @property
    def rows(self):
        return self.ensembles[0].rows

    @property
    def cols(self):
        return self.ensembles[0].cols

    @property
    def parameters(self) -> np.ndarray:
        return np.array([e.parameter for e in self.ensembles])


def _blob_bytes(e: SnapshotEnsemble) -> bytes:
    header = MAGIC + struct.pack("<HIII", FORMAT_VERSION, e.rows, e.cols, e.count)
    payload = np.concatenate([s.values for s in e.snapshots]).astype("<i1").tobytes()
    return header + payload


def write_dataset(ds: Dataset, path) -> None:
    """Write manifest plus one blob per ensemble; rejects invalid input first."""
    if not isinstance(ds, Dataset):
        raise InvalidDataset("write_dataset expects a Dataset")
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    blobs = []
    for i, e in enumerate(ds.ensembles):
        raw = _blob_bytes(e)
        name = f"ensemble_{i:04d}.qsnp"
        blobs.append((name, raw))
        entries.append(
            {
                "parameter": float(e.parameter),
                "label": e.label,
                "blob": name,
                "count": e.count,
                "sha256": hashlib.sha256(raw).hexdigest(),
            }
        )
    manifest = {
        "format_version": FORMAT_VERSION,
        "parameter_name": ds.parameter_name,
        "alphabet": ds.alphabet,
        "rows": ds.rows,
        "cols": ds.cols,
        "mask": list(ds.mask) if ds.mask is not None else None,
        "metadata": ds.metadata,
        "ensembles": entries,
    }
    for name, raw in blobs:
        (out / name).write_bytes(raw)
    with open(out / MANIFEST_NAME, "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")


def _read_blob(path: Path, rows, cols, count) -> np.ndarray:
    raw = path.read_bytes()
    if len(raw) < 4 or raw[:4] != MAGIC:
        raise MagicMismatch("bad magic bytes", path=path, offset=0)
    if len(raw) < 18:
        raise TruncatedBlob("header incomplete", path=path, offset=len(raw))
    version, brows, bcols, bcount = struct.unpack("<HIII", raw[4:18])
    if version != FORMAT_VERSION:
        raise VersionUnsupported(f"blob version {version}, expected {FORMAT_VERSION}", path=path, offset=4)
    if (brows, bcols, bcount) != (rows, cols, count):
        raise ShapeMismatch(
            f"blob header {brows}x{bcols}x{bcount} disagrees with manifest {rows}x{cols}x{count}",
            path=path,
            offset=6,
        )
    expected = 18 + rows * cols * count
    if len(raw) < expected:
        raise TruncatedBlob(
            f"payload has {len(raw) - 18} of {rows * cols * count} bytes",
            path=path,
            offset=len(raw),
        )
    if len(raw) > expected:
        raise ShapeMismatch(f"{len(raw) - expected} trailing bytes", path=path, offset=expected)
    values = np.frombuffer(raw[18:], dtype="<i1")
    return values.reshape(count, rows * cols)


def read_dataset(path) -> Dataset:
    """Load and fully validate a dataset directory; ensembles come back parameter-sorted."""
    root = Path(path)
    mpath = root / MANIFEST_NAME
    if not mpath.exists():
        raise InvalidDataset(f"missing manifest {mpath}")
    with open(mpath) as f:
        manifest = json.load(f)
    if manifest.get("format_version") != FORMAT_VERSION:
        raise VersionUnsupported(
            f"manifest format_version {manifest.get('format_version')!r}", path=mpath
        )
    alphabet = manifest["alphabet"]
    if alphabet not in ALPHABETS:
        raise AlphabetViolation(f"unknown alphabet {alphabet!r}", path=mpath)
    rows, cols = int(manifest["rows"]), int(manifest["cols"])
    mask = manifest.get("mask")
    ensembles = []
    for entry in manifest["ensembles"]:
        bpath = root / entry["blob"]
        if not bpath.exists():
            raise TruncatedBlob("blob file missing", path=bpath)
        raw = bpath.read_bytes()
        digest = hashlib.sha256(raw).hexdigest()
        if "sha256" in entry and digest != entry["sha256"]:
            raise ChecksumMismatch(
                f"sha256 {digest[:12]}... != manifest {entry['sha256'][:12]}...", path=bpath
            )
        values = _read_blob(bpath, rows, cols, int(entry["count"]))
        snaps = tuple(Snapshot(rows=rows, cols=cols, values=v) for v in values)
        ensembles.append(
            SnapshotEnsemble(
                parameter=float(entry["parameter"]),
                label=entry.get("label", ""),
                snapshots=snaps,
            )
        )
    ensembles.sort(key=lambda e: e.parameter)
    return Dataset(
        ensembles=tuple(ensembles),
        parameter_name=manifest["parameter_name"],
        alphabet=alphabet,
        mask=tuple(mask) if mask is not None else None,
        metadata=manifest.get("metadata", {}),
    )
