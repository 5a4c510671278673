"""Direct physical observables computed on snapshot ensembles.

These are the comparison curves the embedding is judged against: region
parity (sign of the total occupation deviation over a centered window),
left/right imbalance, and nearest-neighbor parity correlations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset, SnapshotEnsemble
from .errors import NoAtoms, UsageError


@dataclass(frozen=True)
class ObservableSeries:
    name: str
    parameters: np.ndarray
    values: np.ndarray
    stderr: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.parameters, dtype=float)
        v = np.asarray(self.values, dtype=float)
        s = np.asarray(self.stderr, dtype=float)
        if not (p.size == v.size == s.size):
            raise UsageError("series arrays must have equal length")
        if np.any(s < 0):
            raise UsageError("stderr must be nonnegative")
        object.__setattr__(self, "parameters", p)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "stderr", s)


def _centered_window(rows, cols, size):
    if size > rows or size > cols:
        raise UsageError(f"{size}x{size} region exceeds {rows}x{cols} snapshot")
    r0 = (rows - size) // 2
    c0 = (cols - size) // 2
    return r0, c0


def brane_parity(e: SnapshotEnsemble, region_size: int,
                 mean_filling: float | None = None, origin=None, mask=None):
    """Shot-averaged parity of the occupation deviation over a square window.

    Each shot contributes (-1)**(sum over the window of n_i - round(f)),
    f the reference filling (defaults to the ensemble mean reading;
    rounding is half-even).  Masked-out sites inside the window are
    skipped.  Returns (value, stderr).
    """
    rows, cols = e.rows, e.cols
    if origin is None:
        r0, c0 = _centered_window(rows, cols, region_size)
    else:
        r0, c0 = origin
        if r0 < 0 or c0 < 0 or r0 + region_size > rows or c0 + region_size > cols:
            raise UsageError(f"window at ({r0},{c0}) size {region_size} exceeds bounds")
    shots = np.stack([s.grid() for s in e.snapshots]).astype(np.int64)
    window = shots[:, r0 : r0 + region_size, c0 : c0 + region_size]
    active = np.ones((region_size, region_size), dtype=bool)
    if mask is not None:
        full = np.zeros(rows * cols, dtype=bool)
        full[list(mask)] = True
        active = full.reshape(rows, cols)[r0 : r0 + region_size, c0 : c0 + region_size]
    if mean_filling is None:
        mean_filling = float(shots.mean())
    ref = int(np.rint(mean_filling))
    dev = (window - ref)[:, active].sum(axis=1)
    signs = np.where(dev % 2 == 0, 1.0, -1.0)
    value = float(signs.mean())
    stderr = float(signs.std(ddof=1) / np.sqrt(len(signs))) if len(signs) > 1 else 0.0
    return value, stderr


def imbalance(e: SnapshotEnsemble, edge_column: int):
    """Shot-averaged (N_left - N_right) / N_total with the cut before ``edge_column``.

    Columns < edge_column count left, the rest right; "atoms" are readings
    equal to 1.  Shots with no atoms are dropped (their count is not
    reported here; all-empty input raises NoAtoms).  Returns (value, stderr).
    """
    if not 0 < edge_column < e.cols:
        raise UsageError(f"edge_column {edge_column} outside (0, {e.cols})")
    shots = np.stack([s.grid() for s in e.snapshots])
    atoms = (shots == 1).astype(np.int64)
    n_left = atoms[:, :, :edge_column].sum(axis=(1, 2))
    n_total = atoms.sum(axis=(1, 2))
    keep = n_total > 0
    if not keep.any():
        raise NoAtoms("every shot is empty")
    n_left = n_left[keep]
    n_total = n_total[keep]
    vals = (2.0 * n_left - n_total) / n_total
    value = float(vals.mean())
    stderr = float(vals.std(ddof=1) / np.sqrt(vals.size)) if vals.size > 1 else 0.0
    return value, stderr


def nn_parity_correlation(e: SnapshotEnsemble, mask=None):
    """Connected correlation <p_i p_j> - <p_i><p_j> averaged over nearest-
    neighbor bonds (horizontal and vertical, open boundaries).  Bonds
    touching masked-out sites are excluded.  Returns (value, stderr)."""
    shots = np.stack([s.grid() for s in e.snapshots]).astype(float)
    m, rows, cols = shots.shape
    active = np.ones((rows, cols), dtype=bool)
    if mask is not None:
        full = np.zeros(rows * cols, dtype=bool)
        full[list(mask)] = True
        active = full.reshape(rows, cols)
    dev = shots - shots.mean(axis=0)
    per_shot = []
    h_ok = active[:, :-1] & active[:, 1:]
    v_ok = active[:-1, :] & active[1:, :]
    n_bonds = int(h_ok.sum() + v_ok.sum())
    if n_bonds == 0:
        raise UsageError("no active nearest-neighbor bonds")
    for k in range(m):
        d = dev[k]
        h = (d[:, :-1] * d[:, 1:])[h_ok].sum()
        v = (d[:-1, :] * d[1:, :])[v_ok].sum()
        per_shot.append((h + v) / n_bonds)
    per_shot = np.asarray(per_shot)
    value = float(per_shot.mean())
    stderr = float(per_shot.std(ddof=1) / np.sqrt(m)) if m > 1 else 0.0
    return value, stderr


def observable_sweep(ds: Dataset, which: str, **kwargs) -> ObservableSeries:
    """One observable evaluated across every ensemble of a dataset."""
    fns = {
        "brane": lambda e: brane_parity(
            e, kwargs.get("region_size", min(ds.rows, ds.cols)),
            kwargs.get("mean_filling"), mask=ds.mask),
        "imbalance": lambda e: imbalance(e, kwargs.get("edge_column", ds.cols // 2)),
        "nnparity": lambda e: nn_parity_correlation(e, mask=ds.mask),
    }
    if which not in fns:
        raise UsageError(f"unknown observable {which!r}")
    vals, errs = [], []
    for e in ds.ensembles:
        v, s = fns[which](e)
        vals.append(v)
        errs.append(s)
    return ObservableSeries(
        name=which,
        parameters=ds.parameters,
        values=np.array(vals),
        stderr=np.array(errs),
    )
