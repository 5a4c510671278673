"""Per-setting distribution statistics and the inter-ensemble similarity kernel.

The squared distance between two settings is the covariance-whitened gap
between their mean vectors,

    0.5 * (z_i - z_j)^T (pinv(C_i) + pinv(C_j)) (z_i - z_j),

with each covariance inverted on its retained singular subspace only.
Directions a covariance cannot resolve would otherwise contribute nothing,
which makes ensembles with mismatched fluctuation support look spuriously
close; a scale-free support-mismatch term therefore adds, for each side,
the partner's excess variance in the unresolved directions relative to the
partner's own dominant variance.  The term vanishes whenever both
covariances are full rank or equal, so it never perturbs well-conditioned
comparisons.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateKernel, InsufficientSamples, UsageError
from .wavelet import PreprocessedEnsemble

DEFAULT_SVD_TOL = 1e-3
DEFAULT_SUPPORT_WEIGHT = 0.5


@dataclass(frozen=True)
class RankPolicy:
    """Truncation rule for covariance inversion.

    Keep singular values >= tol * s_max, at most max_rank (None means the
    structural bound min(m - 1, D)).
    """

    tol: float = DEFAULT_SVD_TOL
    max_rank: int | None = None


@dataclass(frozen=True)
class BandwidthPolicy:
    """Kernel width selection.

    kind "chain" sets epsilon to the largest squared distance between
    parameter-consecutive settings, so every link of the sweep keeps a
    similarity of at least exp(-1/scale).  kind "median" uses the median
    off-diagonal squared distance.  An explicit epsilon overrides both.
    ``scale`` multiplies the policy value.
    """

    kind: str = "chain"
    scale: float = 4.0
    epsilon: float | None = None


@dataclass(frozen=True)
class EnsembleStats:
    """Empirical mean, covariance, and truncated pseudo-inverse for one setting."""

    parameter: float
    mean: np.ndarray            # (D,)
    covariance: np.ndarray      # (D, D)
    pinv: np.ndarray            # (D, D), inverse on the retained subspace
    rank_used: int
    basis: np.ndarray           # (D, rank_used) retained directions
    variances: np.ndarray       # (rank_used,) retained eigenvalues, descending
    sigma_max: float            # largest covariance eigenvalue (0 for a point mass)
    sample_count: int

    @property
    def dim(self):
        return self.mean.size


@dataclass(frozen=True)
class KernelMatrix:
    size: int
    parameters: np.ndarray      # (n,)
    distances: np.ndarray       # (n, n) squared distances
    similarities: np.ndarray    # (n, n) Gaussian kernel values
    bandwidth: float


def truncated_pinv(matrix, tol=DEFAULT_SVD_TOL, max_rank=None):
    """SVD pseudo-inverse keeping singular values >= tol * s_max (at most max_rank).

    Returns (pinv, rank_used).  A zero matrix maps to a zero inverse.
    """
    m = np.asarray(matrix, dtype=float)
    u, s, vt = np.linalg.svd(m, full_matrices=False)
    smax = s[0] if s.size else 0.0
    if smax <= 0:
        return np.zeros_like(m), 0
    keep = s >= tol * smax
    rank = int(np.count_nonzero(keep))
    if max_rank is not None:
        rank = min(rank, max_rank)
    if rank == 0:
        return np.zeros_like(m), 0
    return (vt[:rank].T / s[:rank]) @ u[:, :rank].T, rank


def compute_stats(pe: PreprocessedEnsemble, policy: RankPolicy | None = None) -> EnsembleStats:
    """Mean, unbiased covariance, and truncated inverse of one preprocessed ensemble."""
    policy = policy or RankPolicy()
    X = np.asarray(pe.vectors, dtype=float)
    m, D = X.shape
    if m < 2:
        raise InsufficientSamples(f"need at least 2 snapshots, got {m}")
    z = X.mean(axis=0)
    Xc = X - z
    C = Xc.T @ Xc / (m - 1)
    C = (C + C.T) / 2
    evals, evecs = np.linalg.eigh(C)
    evals = np.clip(evals[::-1], 0.0, None)
    evecs = evecs[:, ::-1]
    smax = float(evals[0]) if D else 0.0
    cap = min(m - 1, D)
    if policy.max_rank is not None:
        cap = min(cap, policy.max_rank)
    rank = 0
    while rank < cap and smax > 0 and evals[rank] >= policy.tol * smax:
        rank += 1
    basis = evecs[:, :rank]
    variances = evals[:rank]
    if rank:
        pinv = (basis / variances) @ basis.T
    else:
        pinv = np.zeros((D, D))
    return EnsembleStats(
        parameter=float(pe.parameter),
        mean=z,
        covariance=C,
        pinv=pinv,
        rank_used=rank,
        basis=basis,
        variances=variances,
        sigma_max=smax,
        sample_count=m,
    )


def _support_mismatch(s: EnsembleStats, o: EnsembleStats) -> float:
    """Partner's excess variance outside s's retained subspace, in units of the
    partner's dominant variance.  Zero when s is full rank or the partner has
    no variance of its own."""
    if s.rank_used >= s.dim or o.sigma_max <= 0:
        return 0.0
    diff = o.covariance - s.covariance
    total = float(np.trace(diff))
    if s.rank_used:
        proj = s.basis.T @ diff @ s.basis
        total -= float(np.trace(proj))
    return max(total, 0.0) / o.sigma_max


def mahalanobis_sq(a: EnsembleStats, b: EnsembleStats,
                   support_weight: float = DEFAULT_SUPPORT_WEIGHT) -> float:
    """Squared distribution distance between two settings (symmetric, >= 0).

    Whitened mean gap plus the support-mismatch term described in the module
    docstring; ``support_weight`` 0 reduces to the plain whitened form.
    """
    if a.dim != b.dim:
        raise UsageError(f"dimension mismatch: {a.dim} vs {b.dim}")
    delta = a.mean - b.mean
    d2 = 0.5 * float(delta @ (a.pinv + b.pinv) @ delta)
    if support_weight > 0:
        d2 += support_weight * (_support_mismatch(a, b) + _support_mismatch(b, a))
    return max(d2, 0.0)


def distance_matrix(stats, support_weight=DEFAULT_SUPPORT_WEIGHT) -> np.ndarray:
    n = len(stats)
    d2 = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            d2[i, j] = d2[j, i] = mahalanobis_sq(stats[i], stats[j], support_weight)
    return d2


def resolve_bandwidth(d2: np.ndarray, parameters, policy: BandwidthPolicy) -> float:
    """Bandwidth per policy; raises DegenerateKernel when no scale exists."""
    if policy.epsilon is not None:
        if policy.epsilon <= 0:
            raise UsageError("epsilon must be positive")
        return float(policy.epsilon)
    n = d2.shape[0]
    off = d2[np.triu_indices(n, 1)]
    if not np.any(off > 0):
        raise DegenerateKernel("all ensembles are statistically identical")
    if policy.kind == "median":
        eps = float(np.median(off))
    elif policy.kind == "chain":
        order = np.argsort(np.asarray(parameters))
        chain = [d2[order[i], order[i + 1]] for i in range(n - 1)]
        eps = float(np.max(chain))
        if eps <= 0:  # consecutive duplicates; fall back to the global scale
            eps = float(np.median(off[off > 0]))
    else:
        raise UsageError(f"unknown bandwidth kind {policy.kind!r}")
    eps *= policy.scale
    if eps <= 0:
        raise DegenerateKernel("bandwidth collapsed to zero")
    return eps


def build_kernel(stats, policy: BandwidthPolicy | None = None,
                 support_weight: float = DEFAULT_SUPPORT_WEIGHT) -> KernelMatrix:
    """Gaussian kernel K_ij = exp(-d2_ij / eps) over a list of EnsembleStats."""
    policy = policy or BandwidthPolicy()
    if len(stats) < 3:
        raise UsageError(f"kernel needs at least 3 ensembles, got {len(stats)}")
    dims = {s.dim for s in stats}
    if len(dims) != 1:
        raise UsageError(f"inconsistent feature dimensions {sorted(dims)}")
    params = np.array([s.parameter for s in stats])
    d2 = distance_matrix(stats, support_weight)
    eps = resolve_bandwidth(d2, params, policy)
    K = np.exp(-d2 / eps)
    np.fill_diagonal(K, 1.0)
    return KernelMatrix(size=len(stats), parameters=params, distances=d2,
                        similarities=K, bandwidth=eps)
