"""Weighted Haar transform applied per snapshot before distance computation.

Coefficients are laid out approximation first, then detail bands from the
coarsest level down to the finest.  Scaling the detail band at level ``l``
(0 = finest) by ``2**(-(J - l) * (1 + d/2))`` makes the l1 geometry of the
coefficient vectors approximate the earth mover's distance between the
underlying mass distributions; the approximation band keeps weight 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import SnapshotEnsemble, flatten
from .errors import UsageError

SQRT2 = np.sqrt(2.0)


def _next_pow2(n: int) -> int:
    p = 1
    while p < n:
        p *= 2
    return p


@dataclass(frozen=True)
class WaveletConfig:
    """Free parameters of the preprocessing step.

    ``spatial_dim`` and ``weight_exponent`` may be left as None to derive
    them from the data (rows == 1 means 1D) and from ``1 + spatial_dim/2``.
    ``levels`` is an int depth or "full".
    """

    enabled: bool = True
    spatial_dim: int | None = None
    weight_exponent: float | None = None
    levels: int | str = "full"

    def resolve_dim(self, rows: int) -> int:
        dim = 1 if rows == 1 else 2
        if self.spatial_dim is not None and self.spatial_dim != dim:
            raise UsageError(
                f"spatial_dim={self.spatial_dim} but snapshots have rows={rows}"
            )
        return dim

    def resolve_exponent(self, dim: int) -> float:
        if self.weight_exponent is not None:
            return float(self.weight_exponent)
        return 1.0 + dim / 2.0

    def resolve_levels(self, padded_side: int) -> int:
        full = int(np.log2(padded_side))
        if self.levels == "full":
            return full
        levels = int(self.levels)
        if not 1 <= levels <= full:
            raise UsageError(f"levels={levels} outside [1, {full}] for side {padded_side}")
        return levels


@dataclass(frozen=True)
class PreprocessedEnsemble:
    """Per-snapshot feature vectors for one setting; all rows share length D."""

    parameter: float
    vectors: np.ndarray  # (count, D)

    @property
    def count(self):
        return self.vectors.shape[0]

    @property
    def dim(self):
        return self.vectors.shape[1]


def coefficient_layout(shape, cfg: WaveletConfig):
    """Band layout for input ``shape``: (dim, J, [(level, start, size)], total).

    level -1 denotes the approximation band; detail levels count 0 = finest.
    Bands are stored approximation first, then details coarse to fine.
    """
    if len(shape) == 1 or shape[0] == 1:
        n = shape[-1]
        N = _next_pow2(n)
        J = cfg.resolve_levels(N)
        bands = [(-1, 0, N >> J)]
        pos = N >> J
        for lev in range(J - 1, -1, -1):
            size = N >> (lev + 1)
            bands.append((lev, pos, size))
            pos += size
        return 1, J, bands, N
    side = _next_pow2(max(shape))
    J = cfg.resolve_levels(side)
    bands = [(-1, 0, (side >> J) ** 2)]
    pos = bands[0][2]
    for lev in range(J - 1, -1, -1):
        size = 3 * (side >> (lev + 1)) ** 2
        bands.append((lev, pos, size))
        pos += size
    return 2, J, bands, side * side


def haar_transform(values, cfg: WaveletConfig | None = None) -> np.ndarray:
    """Orthonormal Haar coefficients of the zero-padded dyadic extension.

    ``values`` is a 1D vector or a 2D grid.  2D inputs are padded top-left
    into a square of the next power-of-two side and decomposed with the
    recursive (ll-band) construction, three detail blocks per level in
    (row-detail, column-detail, diagonal) order.
    """
    cfg = cfg or WaveletConfig()
    v = np.asarray(values, dtype=float)
    if v.ndim == 2 and v.shape[0] == 1:
        v = v[0]
    if v.ndim == 1:
        N = _next_pow2(v.size)
        J = cfg.resolve_levels(N)
        x = np.zeros(N)
        x[: v.size] = v
        a = x
        details = []  # finest first
        for _ in range(J):
            d = (a[0::2] - a[1::2]) / SQRT2
            a = (a[0::2] + a[1::2]) / SQRT2
            details.append(d)
        return np.concatenate([a] + details[::-1])
    if v.ndim != 2:
        raise UsageError(f"haar_transform expects a vector or a grid, got ndim={v.ndim}")
    side = _next_pow2(max(v.shape))
    J = cfg.resolve_levels(side)
    grid = np.zeros((side, side))
    grid[: v.shape[0], : v.shape[1]] = v
    a = grid
    details = []  # finest first, (lh, hl, hh)
    for _ in range(J):
        lo = (a[:, 0::2] + a[:, 1::2]) / SQRT2
        hi = (a[:, 0::2] - a[:, 1::2]) / SQRT2
        ll = (lo[0::2] + lo[1::2]) / SQRT2
        hl = (lo[0::2] - lo[1::2]) / SQRT2
        lh = (hi[0::2] + hi[1::2]) / SQRT2
        hh = (hi[0::2] - hi[1::2]) / SQRT2
        details.append((lh, hl, hh))
        a = ll
    parts = [a.ravel()]
    for lh, hl, hh in details[::-1]:
        parts += [lh.ravel(), hl.ravel(), hh.ravel()]
    return np.concatenate(parts)


def weight_vector(shape, cfg: WaveletConfig) -> np.ndarray:
    """Per-coefficient weights matching the haar_transform layout for ``shape``."""
    dim, J, bands, total = coefficient_layout(shape, cfg)
    expo = cfg.resolve_exponent(dim)
    w = np.ones(total)
    for lev, start, size in bands:
        if lev >= 0:
            w[start : start + size] = 2.0 ** (-(J - lev) * expo)
    return w


def apply_weights(coeffs, cfg: WaveletConfig, shape=None) -> np.ndarray:
    """Scale detail bands by their level weights; approximation unchanged.

    ``shape`` is the original input shape; without it the layout is derived
    from the coefficient length and ``cfg.spatial_dim``.
    """
    c = np.asarray(coeffs, dtype=float)
    if shape is None:
        n = c.shape[-1]
        if cfg.spatial_dim == 2:
            side = int(round(np.sqrt(n)))
            if side * side != n:
                raise UsageError(f"coefficient length {n} is not a square grid")
            shape = (side, side)
        else:
            shape = (1, n)
    w = weight_vector(shape, cfg)
    if c.shape[-1] != w.size:
        raise UsageError(f"coefficient length {c.shape[-1]} does not match layout {w.size}")
    return c * w


def preprocess_ensemble(e: SnapshotEnsemble, cfg: WaveletConfig | None = None) -> PreprocessedEnsemble:
    """Flatten, pad, transform, and weight every snapshot of one ensemble."""
    cfg = cfg or WaveletConfig()
    if not cfg.enabled:
        return PreprocessedEnsemble(parameter=e.parameter, vectors=e.stacked())
    shape = (e.rows, e.cols)
    cfg.resolve_dim(e.rows)
    w = weight_vector(shape, cfg)
    rows = np.empty((e.count, w.size))
    for i, s in enumerate(e.snapshots):
        grid = flatten(s) if e.rows == 1 else s.grid().astype(float)
        rows[i] = haar_transform(grid, cfg)
    return PreprocessedEnsemble(parameter=e.parameter, vectors=rows * w)


def weighted_l1_distance(u, v, cfg: WaveletConfig | None = None) -> float:
    """EMD-surrogate distance: l1 between weighted coefficient vectors."""
    cfg = cfg or WaveletConfig()
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    shape = u.shape if u.ndim == 2 else (1, u.size)
    tu = apply_weights(haar_transform(u, cfg), cfg, shape)
    tv = apply_weights(haar_transform(v, cfg), cfg, shape)
    return float(np.abs(tu - tv).sum())
