"""Critical-parameter extraction from the leading diffusion coordinate.

Primary detector: damped Gauss-Newton least squares of
``a * tanh((p - p_c) / w) + b`` with analytic Jacobian.  Fallback detector:
two-means clustering of the embedded points with the boundary read off the
parameter axis.  Uncertainty comes from resampling snapshots within each
ensemble and refitting.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from .data import Dataset
from .embedding import EmbeddingResult, PipelineConfig, embed_vectors, preprocess_dataset
from .errors import AmbiguousClustering, NonConvergence, NoTransition, UnstableDetection, UsageError
from .kernel import compute_stats
from .wavelet import PreprocessedEnsemble

GRAD_TOL = 1e-10
MAX_ITER = 500


@dataclass(frozen=True)
class TransitionReport:
    p_c: float
    width: float
    amplitude: float
    offset: float
    p_c_stderr: float          # bootstrap; 0.0 until bootstrap_pc fills it in
    p_c_stderr_fit: float      # from the fit covariance, for comparison
    fit_rss: float
    method: str                # "tanh-fit" | "cluster-gap"
    n_bootstrap: int = 0

    def as_dict(self):
        return {
            "p_c": self.p_c,
            "width": self.width,
            "amplitude": self.amplitude,
            "offset": self.offset,
            "p_c_stderr": self.p_c_stderr,
            "p_c_stderr_fit": self.p_c_stderr_fit,
            "fit_rss": self.fit_rss,
            "method": self.method,
            "n_bootstrap": self.n_bootstrap,
        }


def _tanh_model(theta, p):
    a, c, w, b = theta
    u = (p - c) / w
    t = np.tanh(u)
    f = a * t + b
    sech2 = 1.0 - t * t
    jac = np.stack(
        [t, -a / w * sech2, -a * (p - c) / w**2 * sech2, np.ones_like(p)],
        axis=1,
    )
    return f, jac


def _initial_guess(p, y):
    b = float(y.mean())
    a = float(y.max() - y.min()) / 2.0
    if y[-1] < y[0]:
        a = -a
    # parameter where the curve crosses its offset, by linear interpolation
    shifted = y - b
    c = float(p[int(np.argmin(np.abs(shifted)))])
    for i in range(len(p) - 1):
        if shifted[i] == 0.0:
            c = float(p[i])
            break
        if shifted[i] * shifted[i + 1] < 0:
            frac = shifted[i] / (shifted[i] - shifted[i + 1])
            c = float(p[i] + frac * (p[i + 1] - p[i]))
            break
    w = float(p.max() - p.min()) / 4.0
    return np.array([a, c, w, b])


def fit_tanh(parameters, values) -> TransitionReport:
    """Least-squares tanh step fit; raises NoTransition on flat data."""
    p = np.asarray(parameters, dtype=float)
    y = np.asarray(values, dtype=float)
    if p.size != y.size:
        raise UsageError("parameters and values must have equal length")
    if p.size < 5:
        raise UsageError(f"need at least 5 points, got {p.size}")
    if np.unique(p).size != p.size:
        raise UsageError("parameters must be distinct")
    scale = max(float(np.abs(y).max()), 1.0)
    if float(y.max() - y.min()) < 1e-12 * scale:
        raise NoTransition("values are constant")

    theta = _initial_guess(p, y)
    f, jac = _tanh_model(theta, p)
    resid = y - f
    cost = float(resid @ resid)
    lam = 1e-3
    converged = False
    for _ in range(MAX_ITER):
        grad = jac.T @ resid
        if np.linalg.norm(grad) < GRAD_TOL:
            converged = True
            break
        jtj = jac.T @ jac
        damping = np.diag(np.maximum(np.diag(jtj), 1e-12))
        improved = False
        for _ in range(60):
            try:
                step = np.linalg.solve(jtj + lam * damping, grad)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            cand = theta + step
            if cand[2] == 0.0:
                lam *= 10.0
                continue
            f2, jac2 = _tanh_model(cand, p)
            r2 = y - f2
            c2 = float(r2 @ r2)
            if c2 < cost:
                theta, f, jac, resid, cost = cand, f2, jac2, r2, c2
                lam = max(lam / 3.0, 1e-14)
                improved = True
                break
            lam *= 10.0
        if not improved:
            # damping exhausted: either at a (numerical) optimum or stuck
            converged = np.linalg.norm(jac.T @ resid) < 1e-6 * max(cost, 1.0)
            break

    a, c, w, b = (float(v) for v in theta)
    if w < 0:  # tanh odd symmetry: (a, w) ~ (-a, -w); canonicalize w > 0
        a, w = -a, -w
    dof = max(p.size - 4, 1)
    sigma = float(np.sqrt(cost / dof))
    stderr_fit = 0.0
    try:
        cov = sigma**2 * np.linalg.inv(jac.T @ jac)
        stderr_fit = float(np.sqrt(max(cov[1, 1], 0.0)))
    except np.linalg.LinAlgError:
        pass
    report = TransitionReport(
        p_c=c, width=w, amplitude=a, offset=b,
        p_c_stderr=0.0, p_c_stderr_fit=stderr_fit,
        fit_rss=cost, method="tanh-fit",
    )
    flat_floor = 1e-12 * max(1.0, abs(b))
    if abs(a) < max(3.0 * sigma, flat_floor) or abs(a) <= flat_floor:
        raise NoTransition(
            f"step amplitude {a:.3g} below 3x residual noise {sigma:.3g}"
        )
    if not converged:
        raise NonConvergence("Gauss-Newton did not converge", report=report)
    return report


def _kmeans(points, k, n_restarts, seed):
    """Lloyd iterations from seeded random starts; returns labels of the best run."""
    X = np.asarray(points, dtype=float)
    n = X.shape[0]
    rng = np.random.default_rng(seed)
    best_labels, best_inertia = None, np.inf
    for _ in range(n_restarts):
        centers = X[rng.choice(n, size=k, replace=False)].copy()
        for _ in range(100):
            d2 = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
            labels = d2.argmin(axis=1)
            new_centers = centers.copy()
            for j in range(k):
                members = X[labels == j]
                if members.size:
                    new_centers[j] = members.mean(axis=0)
            if np.allclose(new_centers, centers):
                break
            centers = new_centers
        inertia = float(((X - centers[labels]) ** 2).sum())
        if inertia < best_inertia:
            best_inertia, best_labels = inertia, labels.copy()
    return best_labels, best_inertia


def cluster_gap_detect(emb: EmbeddingResult, k: int = 2, n_restarts: int = 50,
                       seed: int = 0) -> TransitionReport:
    """Two-means boundary detector on the embedded coordinates.

    p_c is the midpoint of the label-change pair with the largest latent
    gap; more than two label changes along the parameter axis means the
    clusters interleave and no boundary exists.
    """
    n = emb.size
    if n < 2 * k:
        raise UsageError(f"need at least {2 * k} points for k={k}")
    labels, inertia = _kmeans(emb.coordinates, k, n_restarts, seed)
    changes = [i for i in range(n - 1) if labels[i] != labels[i + 1]]
    if not changes:
        raise AmbiguousClustering("clustering produced a single block; no boundary")
    if len(changes) > 2:
        raise AmbiguousClustering(
            f"cluster labels interleave ({len(changes)} boundary crossings)"
        )
    gaps = [float(np.linalg.norm(emb.coordinates[i + 1] - emb.coordinates[i])) for i in changes]
    i = changes[int(np.argmax(gaps))]
    p = emb.parameters
    p_c = 0.5 * float(p[i] + p[i + 1])
    width = 0.5 * float(p[i + 1] - p[i])
    phi1 = emb.coordinates[:, 0]
    lo = float(phi1[labels == labels[0]].mean())
    hi = float(phi1[labels == labels[-1]].mean())
    return TransitionReport(
        p_c=p_c, width=max(width, np.finfo(float).tiny),
        amplitude=(hi - lo) / 2.0, offset=(hi + lo) / 2.0,
        p_c_stderr=0.0, p_c_stderr_fit=0.0,
        fit_rss=inertia, method="cluster-gap",
    )


class BootstrapResult(NamedTuple):
    stderr: float
    n_ok: int
    n_failed: int
    replicates: tuple


def _resample(pe: PreprocessedEnsemble, rng) -> PreprocessedEnsemble:
    idx = rng.integers(0, pe.count, size=pe.count)
    return PreprocessedEnsemble(parameter=pe.parameter, vectors=pe.vectors[idx])


def bootstrap_pc(ds: Dataset, cfg: PipelineConfig | None = None, n_boot: int = 50,
                 seed: int = 0, detector: str = "tanh") -> BootstrapResult:
    """Bootstrap standard error of p_c.

    Snapshots are resampled with replacement within each ensemble and the
    embed + detect path is rerun per replicate with a derived seed stream.
    Preprocessing is per snapshot and deterministic, so replicates resample
    the preprocessed vectors directly.  Replicates whose fit fails are
    dropped and counted; more than half failing aborts.
    """
    cfg = cfg or PipelineConfig()
    if n_boot < 20:
        raise UsageError(f"need at least 20 bootstrap replicates, got {n_boot}")
    base = preprocess_dataset(ds, cfg)
    streams = np.random.SeedSequence(seed).spawn(n_boot)
    values = []
    failures = 0
    for b in range(n_boot):
        rng = np.random.default_rng(streams[b])
        replicate = [_resample(pe, rng) for pe in base]
        try:
            emb, _ = embed_vectors(replicate, cfg)
            if detector == "cluster":
                rep = cluster_gap_detect(emb)
            else:
                rep = fit_tanh(emb.parameters, emb.coordinates[:, 0])
            values.append(rep.p_c)
        except (NoTransition, NonConvergence, AmbiguousClustering):
            failures += 1
    if failures > n_boot // 2:
        raise UnstableDetection(
            f"{failures}/{n_boot} bootstrap replicates failed to fit"
        )
    arr = np.sort(np.array(values))
    stderr = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return BootstrapResult(stderr=stderr, n_ok=len(values), n_failed=failures,
                           replicates=tuple(arr.tolist()))


def detect_transition(ds: Dataset, cfg: PipelineConfig | None = None,
                      method: str = "tanh", n_boot: int = 0, seed: int = 0):
    """Embed a dataset and extract the transition.

    Returns a dict of method name -> TransitionReport ("tanh" and/or
    "cluster"); bootstrap stderr is attached to the tanh report when
    ``n_boot`` > 0.
    """
    cfg = cfg or PipelineConfig()
    if method not in ("tanh", "cluster", "both"):
        raise UsageError(f"unknown method {method!r}")
    pre = preprocess_dataset(ds, cfg)
    emb, _ = embed_vectors(pre, cfg)
    out = {}
    if method in ("tanh", "both"):
        rep = fit_tanh(emb.parameters, emb.coordinates[:, 0])
        if n_boot:
            bres = bootstrap_pc(ds, cfg, n_boot=n_boot, seed=seed)
            rep = replace(rep, p_c_stderr=bres.stderr, n_bootstrap=bres.n_ok)
        out["tanh"] = rep
    if method in ("cluster", "both"):
        out["cluster"] = cluster_gap_detect(emb)
    return out, emb
