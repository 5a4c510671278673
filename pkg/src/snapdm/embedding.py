"""Diffusion-map spectral embedding of the ensemble kernel.

The kernel is density-normalized, row-normalized into a Markov operator,
and eigendecomposed through its symmetric conjugate.  Right eigenvectors
are normalized in L2(pi) (pi the stationary distribution), which makes the
Euclidean gap between embedded points equal to the diffusion distance at
time t over the full nontrivial spectrum.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import Dataset
from .errors import NumericalFailure, UsageError
from .kernel import (
    BandwidthPolicy,
    KernelMatrix,
    RankPolicy,
    build_kernel,
    compute_stats,
    DEFAULT_SUPPORT_WEIGHT,
)
from .wavelet import WaveletConfig, preprocess_ensemble

SIGN_TIE_TOL = 1e-12


@dataclass(frozen=True)
class PipelineConfig:
    """Every knob of the snapshot-to-embedding pipeline, defaults materialized."""

    wavelet: WaveletConfig = field(default_factory=WaveletConfig)
    rank: RankPolicy = field(default_factory=RankPolicy)
    bandwidth: BandwidthPolicy = field(default_factory=BandwidthPolicy)
    support_weight: float = DEFAULT_SUPPORT_WEIGHT
    alpha: float = 1.0
    diffusion_time: int = 3
    dims: int = 3


@dataclass(frozen=True)
class EmbeddingResult:
    parameters: np.ndarray    # (n,) sweep values, ascending
    coordinates: np.ndarray   # (n, d); column k is the k-th diffusion coordinate
    eigenvalues: np.ndarray   # (d,) in (0, 1], descending, trivial pair excluded
    alpha: float
    diffusion_time: int

    @property
    def size(self):
        return self.parameters.size

    @property
    def dims(self):
        return self.coordinates.shape[1]


def normalize_kernel(K: KernelMatrix | np.ndarray, alpha: float) -> np.ndarray:
    """Density normalization K_ij / (q_i q_j)**alpha with q the row sums."""
    if not 0.0 <= alpha <= 1.0:
        raise UsageError(f"alpha must lie in [0, 1], got {alpha}")
    M = K.similarities if isinstance(K, KernelMatrix) else np.asarray(K, dtype=float)
    q = M.sum(axis=1)
    if np.any(q <= 0):
        raise NumericalFailure("kernel row sum vanished")
    if alpha == 0.0:
        return M.copy()
    qa = q**alpha
    return M / np.outer(qa, qa)


def _fix_signs(coords: np.ndarray, parameters: np.ndarray) -> np.ndarray:
    """Deterministic sign convention: nonnegative correlation with the centered
    parameter vector, falling back to a positive largest-magnitude entry."""
    centered = parameters - parameters.mean()
    out = coords.copy()
    for k in range(out.shape[1]):
        score = float(out[:, k] @ centered)
        if abs(score) > SIGN_TIE_TOL:
            if score < 0:
                out[:, k] = -out[:, k]
        elif out[np.argmax(np.abs(out[:, k])), k] < 0:
            out[:, k] = -out[:, k]
    return out


def markov_and_eigs(K_norm: np.ndarray, dims: int, diffusion_time: int,
                    parameters, alpha_used: float = float("nan")) -> EmbeddingResult:
    """Spectral embedding of the row-stochastic operator built from ``K_norm``.

    Coordinates are mu_k**t * psi_k for the ``dims`` leading nontrivial
    eigenpairs, psi_k the right eigenvectors normalized so that
    sum_i pi_i psi_k(i)^2 = 1.
    """
    M = np.asarray(K_norm, dtype=float)
    n = M.shape[0]
    if M.shape != (n, n):
        raise UsageError("kernel must be square")
    if dims > n - 1:
        raise UsageError(f"dims={dims} exceeds n-1={n - 1}")
    params = np.asarray(parameters, dtype=float)
    row = M.sum(axis=1)
    if np.any(row <= 0):
        raise NumericalFailure("row sum vanished; operator is not stochastic")
    sq = np.sqrt(row)
    A = M / np.outer(sq, sq)
    A = (A + A.T) / 2
    try:
        evals, evecs = np.linalg.eigh(A)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise NumericalFailure(f"eigendecomposition failed: cond issues ({exc})")
    order = np.argsort(evals)[::-1]
    evals, evecs = evals[order], evecs[:, order]
    # right eigenvectors of D^-1 K, normalized in L2(pi)
    pi = row / row.sum()
    psi = evecs / sq[:, None]
    norms = np.sqrt((pi[:, None] * psi**2).sum(axis=0))
    psi = psi / norms
    mu = evals[1 : dims + 1]
    coords = (mu[None, :] ** diffusion_time) * psi[:, 1 : dims + 1]
    coords = _fix_signs(coords, params)
    return EmbeddingResult(
        parameters=params,
        coordinates=coords,
        eigenvalues=mu,
        alpha=alpha_used,
        diffusion_time=diffusion_time,
    )


def embed_kernel(K: KernelMatrix, alpha: float = 1.0, diffusion_time: int = 3,
                 dims: int = 3) -> EmbeddingResult:
    """normalize -> Markov -> eigenpairs for an already-built kernel."""
    Kn = normalize_kernel(K, alpha)
    return markov_and_eigs(Kn, dims, diffusion_time, K.parameters, alpha_used=alpha)


def preprocess_dataset(ds: Dataset, cfg: PipelineConfig):
    """Per-ensemble feature vectors in parameter order."""
    return [preprocess_ensemble(e, cfg.wavelet) for e in ds.ensembles]


def embed_vectors(preprocessed, cfg: PipelineConfig):
    """stats -> kernel -> embedding from preprocessed ensembles.

    Returns (EmbeddingResult, KernelMatrix).  The requested dimension count
    is capped at n - 1, the most the spectrum can provide.
    """
    stats = [compute_stats(pe, cfg.rank) for pe in preprocessed]
    K = build_kernel(stats, cfg.bandwidth, cfg.support_weight)
    dims = min(cfg.dims, len(stats) - 1)
    return embed_kernel(K, cfg.alpha, cfg.diffusion_time, dims), K


def embed_dataset(ds: Dataset, cfg: PipelineConfig | None = None) -> EmbeddingResult:
    """Full pipeline: preprocess -> stats -> kernel -> normalize -> eigenpairs."""
    cfg = cfg or PipelineConfig()
    emb, _ = embed_vectors(preprocess_dataset(ds, cfg), cfg)
    return emb
