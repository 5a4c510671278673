"""Desk-scale validation data sources.

* 1D transverse-field Ising chains: sparse exact diagonalization of the
  open-boundary Hamiltonian, then Born-rule sampling of Z-basis spin
  configurations from the ground state.
* 2D classical Ising on a periodic square lattice: Metropolis single-flip
  or Wolff cluster Monte Carlo.
* Two-site toy ensembles (anticorrelated vs i.i.d. uniform occupation).

All randomness flows from a master integer seed through SeedSequence
spawning (one stream per sweep setting), so identical configs produce
byte-identical datasets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .data import Dataset, Snapshot, SnapshotEnsemble
from .errors import NumericalFailure, UsageError

TFIM_MAX_DIM = 16384  # 2**14
_DENSE_CUTOFF = 2048  # below this, full diagonalization beats Lanczos


@dataclass(frozen=True)
class TfimConfig:
    """Transverse-field Ising sweep: open chain of length L, couplings lambdas."""

    L: int
    lambdas: tuple
    m: int = 500
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "lambdas", tuple(float(x) for x in self.lambdas))
        if not 2 <= self.L or 2**self.L > TFIM_MAX_DIM:
            raise UsageError(f"L={self.L} outside tractable range (2**L <= {TFIM_MAX_DIM})")
        if any(x < 0 for x in self.lambdas):
            raise UsageError("couplings must be nonnegative")
        if np.any(np.diff(self.lambdas) <= 0):
            raise UsageError("couplings must be strictly increasing")
        if self.m < 2:
            raise UsageError("need at least 2 snapshots per setting")


@dataclass(frozen=True)
class IsingConfig:
    """2D classical Ising sweep on a side x side periodic lattice.

    One sweep is side**2 attempted flips for Metropolis; for Wolff it is
    the cluster updates needed to flip side**2 spins in total.  With
    ``fold_sector`` each stored snapshot is globally flipped to nonnegative
    magnetization, emulating the symmetry-broken ensembles that local
    dynamics produce below the critical temperature (Wolff's global sign
    flips are an algorithmic artifact, not physics).
    """

    side: int
    temperatures: tuple
    m: int = 500
    burn_in: int = 1000
    decorrelation: int = 2
    seed: int = 0
    algorithm: str = "wolff"
    fold_sector: bool = True

    def __post_init__(self):
        object.__setattr__(self, "temperatures", tuple(float(t) for t in self.temperatures))
        if self.side < 2:
            raise UsageError("lattice side must be >= 2")
        if any(t <= 0 for t in self.temperatures):
            raise UsageError("temperatures must be positive")
        if np.any(np.diff(self.temperatures) <= 0):
            raise UsageError("temperatures must be strictly increasing")
        if self.algorithm not in ("metropolis", "wolff"):
            raise UsageError(f"unknown algorithm {self.algorithm!r}")
        if self.m < 2:
            raise UsageError("need at least 2 snapshots per setting")


# --------------------------------------------------------------------------
# transverse-field Ising chain
# --------------------------------------------------------------------------

def tfim_hamiltonian(L: int, lam: float) -> sp.csr_matrix:
    """Open-chain Hamiltonian -lam * sum_j XX_{j,j+1} - sum_j Z_j in the Z basis.

    Basis index bit (L-1-j) encodes site j; bit 0 means spin up (+1).
    """
    dim = 1 << L
    idx = np.arange(dim, dtype=np.int64)
    pop = np.zeros(dim, dtype=np.int64)
    for b in range(L):
        pop += (idx >> b) & 1
    diag = -(L - 2 * pop).astype(float)
    rows = [idx]
    cols = [idx]
    vals = [diag]
    for j in range(L - 1):
        mask = (1 << (L - 1 - j)) | (1 << (L - 2 - j))
        rows.append(idx)
        cols.append(idx ^ mask)
        vals.append(np.full(dim, -lam))
    H = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(dim, dim),
    )
    return H.tocsr()


def tfim_ground_state(L: int, lam: float):
    """Lowest eigenpair; amplitudes real, l2-normalized, largest entry positive.

    Returns (energy, amplitudes).
    """
    if lam < 0:
        raise UsageError("lam must be nonnegative")
    H = tfim_hamiltonian(L, lam)
    dim = H.shape[0]
    if dim <= _DENSE_CUTOFF:
        evals, evecs = np.linalg.eigh(H.toarray())
        energy, vec = float(evals[0]), evecs[:, 0]
    else:
        v0 = np.ones(dim) / math.sqrt(dim)  # deterministic start with gs overlap
        try:
            evals, evecs = spla.eigsh(H, k=1, which="SA", v0=v0, maxiter=5000)
        except spla.ArpackNoConvergence as exc:
            raise NumericalFailure(f"Lanczos did not converge for L={L}, lam={lam}: {exc}")
        energy, vec = float(evals[0]), evecs[:, 0]
    vec = vec / np.linalg.norm(vec)
    if vec[int(np.argmax(np.abs(vec)))] < 0:
        vec = -vec
    return energy, vec


def tfim_sample(amplitudes, m: int, seed, parameter: float = 0.0,
                label: str = "") -> SnapshotEnsemble:
    """m Born-rule draws from |amplitudes|^2, rendered as 1 x L spin snapshots."""
    amps = np.asarray(amplitudes, dtype=float)
    dim = amps.size
    L = int(round(math.log2(dim)))
    if 2**L != dim:
        raise UsageError(f"amplitude vector length {dim} is not a power of two")
    probs = amps * amps
    probs = probs / probs.sum()
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    draws = rng.choice(dim, size=m, p=probs)
    spins = np.empty((m, L), dtype=np.int8)
    for j in range(L):
        spins[:, j] = 1 - 2 * ((draws >> (L - 1 - j)) & 1)
    return SnapshotEnsemble.from_array(parameter, spins, label=label)


def tfim_sweep(cfg: TfimConfig) -> Dataset:
    """Ground-state snapshot ensembles across the coupling sweep."""
    streams = np.random.SeedSequence(cfg.seed).spawn(len(cfg.lambdas))
    ensembles = []
    for i, lam in enumerate(cfg.lambdas):
        _, vec = tfim_ground_state(cfg.L, lam)
        rng = np.random.default_rng(streams[i])
        ens = tfim_sample(vec, cfg.m, rng, parameter=lam, label=f"lambda={lam:g}")
        ensembles.append(ens)
    return Dataset(
        ensembles=tuple(ensembles),
        parameter_name="lambda",
        alphabet="spin_pm1",
        metadata={"model": "tfim_chain", "L": cfg.L, "boundary": "open",
                  "shots": cfg.m, "seed": cfg.seed},
    )


# --------------------------------------------------------------------------
# 2D classical Ising
# --------------------------------------------------------------------------

def metropolis_acceptance(delta_e: float, temperature: float) -> float:
    """min(1, exp(-dE/T))."""
    if delta_e <= 0:
        return 1.0
    return math.exp(-delta_e / temperature)


def lattice_energy(spins: np.ndarray) -> float:
    """E = -sum over bonds s_i s_j; right and down bonds with periodic wrap."""
    s = spins
    return float(-(s * np.roll(s, -1, axis=0)).sum() - (s * np.roll(s, -1, axis=1)).sum())


def _neighbor_table(side: int) -> np.ndarray:
    idx = np.arange(side * side)
    r, c = idx // side, idx % side
    return np.stack(
        [
            ((r + 1) % side) * side + c,
            ((r - 1) % side) * side + c,
            r * side + (c + 1) % side,
            r * side + (c - 1) % side,
        ],
        axis=1,
    ).astype(np.int64)


def metropolis_sweeps(spins, temperature, sweeps, rng, nbr=None):
    """Random-site single-flip updates, side**2 proposals per sweep (in place)."""
    flat = spins.reshape(-1)
    N = flat.size
    if nbr is None:
        nbr = _neighbor_table(int(math.isqrt(N)))
    total = sweeps * N
    beta = 1.0 / temperature
    block = 65536
    done = 0
    while done < total:
        todo = min(block, total - done)
        sites = rng.integers(0, N, size=todo)
        us = rng.random(todo)
        for site, u in zip(sites, us):
            nb = nbr[site]
            de = 2.0 * flat[site] * (
                flat[nb[0]] + flat[nb[1]] + flat[nb[2]] + flat[nb[3]]
            )
            if de <= 0 or u < math.exp(-de * beta):
                flat[site] = -flat[site]
        done += todo


def wolff_update(spins_flat, p_add, rng, nbr) -> int:
    """Grow and flip one Wolff cluster; returns the cluster size."""
    N = spins_flat.size
    seed_site = int(rng.integers(N))
    s0 = spins_flat[seed_site]
    in_cluster = np.zeros(N, dtype=bool)
    in_cluster[seed_site] = True
    frontier = np.array([seed_site], dtype=np.int64)
    size = 1
    while frontier.size:
        cand = nbr[frontier].ravel()
        cand = cand[(spins_flat[cand] == s0) & ~in_cluster[cand]]
        if cand.size == 0:
            break
        accepted = cand[rng.random(cand.size) < p_add]
        if accepted.size == 0:
            break
        accepted = np.unique(accepted)
        in_cluster[accepted] = True
        size += accepted.size
        frontier = accepted
    spins_flat[in_cluster] = -s0
    return size


def _wolff_sweeps(spins_flat, p_add, sweeps, rng, nbr):
    """Cluster updates until sweeps * N spins have been flipped in total."""
    target = sweeps * spins_flat.size
    flipped = 0
    while flipped < target:
        flipped += wolff_update(spins_flat, p_add, rng, nbr)


def ising_ensemble(side, temperature, m, burn_in, decorrelation, rng,
                   algorithm="wolff", fold_sector=True, nbr=None) -> SnapshotEnsemble:
    """Burn in from the all-up state, then store m decorrelated snapshots."""
    N = side * side
    if nbr is None:
        nbr = _neighbor_table(side)
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    spins = np.ones(N, dtype=np.int8)
    if algorithm == "wolff":
        p_add = 1.0 - math.exp(-2.0 / temperature)
        _wolff_sweeps(spins, p_add, burn_in, rng, nbr)
    else:
        metropolis_sweeps(spins.reshape(side, side), temperature, burn_in, rng, nbr)
    snaps = np.empty((m, N), dtype=np.int8)
    for k in range(m):
        if algorithm == "wolff":
            _wolff_sweeps(spins, p_add, decorrelation, rng, nbr)
        else:
            metropolis_sweeps(spins.reshape(side, side), temperature, decorrelation, rng, nbr)
        stored = spins
        if fold_sector and stored.sum() < 0:
            stored = -stored
        snaps[k] = stored
    return SnapshotEnsemble.from_array(
        temperature, snaps.reshape(m, side, side), label=f"T={temperature:g}"
    )


def ising_sweep(cfg: IsingConfig) -> Dataset:
    """Independent per-temperature streams derived from the master seed."""
    nbr = _neighbor_table(cfg.side)
    streams = np.random.SeedSequence(cfg.seed).spawn(len(cfg.temperatures))
    ensembles = []
    for ti, T in enumerate(cfg.temperatures):
        rng = np.random.default_rng(streams[ti])
        ensembles.append(
            ising_ensemble(cfg.side, T, cfg.m, cfg.burn_in, cfg.decorrelation, rng,
                           algorithm=cfg.algorithm, fold_sector=cfg.fold_sector, nbr=nbr)
        )
    return Dataset(
        ensembles=tuple(ensembles),
        parameter_name="temperature",
        alphabet="spin_pm1",
        metadata={"model": "ising2d", "side": cfg.side, "algorithm": cfg.algorithm,
                  "burn_in": cfg.burn_in, "decorrelation": cfg.decorrelation,
                  "fold_sector": cfg.fold_sector, "shots": cfg.m, "seed": cfg.seed},
    )


# --------------------------------------------------------------------------
# two-site toy ensembles
# --------------------------------------------------------------------------

def toy_two_site(kind: str, m: int, seed, parameter: float = 0.0) -> SnapshotEnsemble:
    """Two-site occupation ensembles.

    "anticorrelated": each shot is (1, 0) or (0, 1) with equal probability.
    "uniform": each site i.i.d. Bernoulli(1/2).  Both share the site means
    (1/2, 1/2); only the correlation structure differs.
    """
    if kind not in ("anticorrelated", "uniform"):
        raise UsageError(f"unknown toy kind {kind!r}")
    if m < 2:
        raise UsageError("need at least 2 snapshots")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if kind == "anticorrelated":
        first = rng.integers(0, 2, size=m).astype(np.int8)
        shots = np.stack([first, 1 - first], axis=1)
    else:
        shots = rng.integers(0, 2, size=(m, 2)).astype(np.int8)
    return SnapshotEnsemble.from_array(parameter, shots, label=kind)


def toy_dataset(kind: str, m: int, seed: int, replicas: int = 3) -> Dataset:
    """Independent replica ensembles of one toy kind, parameter = replica index."""
    if replicas < 3:
        raise UsageError("a dataset needs at least 3 replicas")
    streams = np.random.SeedSequence(seed).spawn(replicas)
    ensembles = tuple(
        toy_two_site(kind, m, np.random.default_rng(streams[i]), parameter=float(i))
        for i in range(replicas)
    )
    return Dataset(
        ensembles=ensembles,
        parameter_name="replica",
        alphabet="parity01",
        metadata={"model": "toy_two_site", "kind": kind, "shots": m, "seed": seed},
    )
