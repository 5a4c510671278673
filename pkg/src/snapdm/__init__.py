"""Phase-transition detection from ensembles of configurational snapshots.

Pipeline: snapshot datasets -> per-snapshot weighted Haar features ->
per-setting mean/covariance statistics -> distribution-aware Gaussian
kernel -> diffusion-map embedding -> tanh / cluster transition detectors.
"""

__version__ = "0.1.0"

from .data import (
    Dataset,
    Snapshot,
    SnapshotEnsemble,
    flatten,
    read_dataset,
    write_dataset,
)
from .embedding import (
    EmbeddingResult,
    PipelineConfig,
    embed_dataset,
    embed_kernel,
    markov_and_eigs,
    normalize_kernel,
)
from .generators import (
    IsingConfig,
    TfimConfig,
    ising_sweep,
    tfim_ground_state,
    tfim_sample,
    tfim_sweep,
    toy_dataset,
    toy_two_site,
)
from .kernel import (
    BandwidthPolicy,
    EnsembleStats,
    KernelMatrix,
    RankPolicy,
    build_kernel,
    compute_stats,
    mahalanobis_sq,
    truncated_pinv,
)
from .observables import (
    ObservableSeries,
    brane_parity,
    imbalance,
    nn_parity_correlation,
    observable_sweep,
)
from .transition import (
    TransitionReport,
    bootstrap_pc,
    cluster_gap_detect,
    detect_transition,
    fit_tanh,
)
from .wavelet import (
    PreprocessedEnsemble,
    WaveletConfig,
    apply_weights,
    haar_transform,
    preprocess_ensemble,
)

__all__ = [
    "__version__",
    "Dataset", "Snapshot", "SnapshotEnsemble", "flatten", "read_dataset", "write_dataset",
    "WaveletConfig", "PreprocessedEnsemble", "haar_transform", "apply_weights",
    "preprocess_ensemble",
    "RankPolicy", "BandwidthPolicy", "EnsembleStats", "KernelMatrix",
    "truncated_pinv", "compute_stats", "mahalanobis_sq", "build_kernel",
    "PipelineConfig", "EmbeddingResult", "normalize_kernel", "markov_and_eigs",
    "embed_kernel", "embed_dataset",
    "TransitionReport", "fit_tanh", "cluster_gap_detect", "bootstrap_pc",
    "detect_transition",
    "TfimConfig", "IsingConfig", "tfim_ground_state", "tfim_sample", "tfim_sweep",
    "ising_sweep", "toy_two_site", "toy_dataset",
    "ObservableSeries", "brane_parity", "imbalance", "nn_parity_correlation",
    "observable_sweep",
]
