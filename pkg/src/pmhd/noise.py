"""Mollified space-time white noise and the stationary Gaussian drivers.

Per nonzero mode k the velocity driver is a 3-component complex
Ornstein-Uhlenbeck process with decay |k|^2, stationary covariance

    E[ Xhat^i(k, t) conj(Xhat^j(k, s)) ]
        = f(eps k)^2 P_hat^{ij}(k) e^(-|k|^2 |t-s|) / (2 |k|^2),

realised by exact discrete OU updates (no time-stepping error) from a
stationary initial draw.  Reality is enforced by sampling a half lattice
and conjugating; the magnetic driver either reuses the velocity
innovations ("identical", the printed cross-covariance, which makes the
two drivers equal almost surely) or draws fresh ones ("independent").

Randomness layout: every half-lattice mode owns the stream
SeedSequence((master_seed, mode_rank)); full-field replicas derive their
master seed as SeedSequence((master_seed, replica)).  sample_mode_ou
draws all its replicas from the owning mode's stream, with the replica
as a leading array axis.  Either way results are deterministic functions
of (master seed, replica index).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from pmhd.grid import SpectralField, TorusGrid
from pmhd.operators import leray_table

CORRELATION_MODES = ("identical", "independent")


@dataclass(frozen=True)
class MollifierCutoff:
    """Smooth radial cutoff f(eps k); f = bump with f(0)=1, support |x| < 1."""

    epsilon: float

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("mollification scale epsilon must be positive")

    @staticmethod
    def profile(r: np.ndarray) -> np.ndarray:
        """f(r) = exp(1 - 1/(1-r^2)) for |r| < 1, else 0."""
        r = np.abs(np.asarray(r, dtype=np.float64))
        inside = r < 1.0
        out = np.zeros_like(r)
        with np.errstate(divide="ignore"):
            out[inside] = np.exp(1.0 - 1.0 / (1.0 - r[inside] ** 2))
        return out

    def weights(self, grid: TorusGrid) -> np.ndarray:
        """f(eps k) on the grid's mode lattice."""
        return self.profile(self.epsilon * np.sqrt(grid.k_squared))

    def support_radius(self) -> float:
        return 1.0 / self.epsilon


@lru_cache(maxsize=None)
def half_lattice(grid: TorusGrid) -> list[tuple[int, int, int]]:
    """Retained nonzero modes with lexicographically positive sign, sorted.

    The list order defines each mode's rank in the randomness layout.
    """
    K = grid.k_max
    out = []
    rng = range(-K, K + 1)
    for kx in rng:
        for ky in rng:
            for kz in rng:
                k = (kx, ky, kz)
                if k == (0, 0, 0):
                    continue
                if k > (0, 0, 0):
                    out.append(k)
    return out


def _mode_rng(seed, rank: int) -> np.random.Generator:
    if not isinstance(seed, tuple):
        seed = (seed,)
    return np.random.default_rng(np.random.SeedSequence(seed + (rank,)))


def replica_seed(master_seed: int, replica: int) -> tuple[int, int]:
    """Derived master seed of one Monte Carlo replica."""
    return (master_seed, replica)


def _standard_complex(rng: np.random.Generator, shape) -> np.ndarray:
    # E z conj(z) = 1, E z z = 0
    return (rng.standard_normal(shape)
            + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)


@dataclass(frozen=True)
class GaussianDriverPath:
    """Time-indexed spectral states of the stationary pair (X_u, X_b)."""

    grid: TorusGrid
    cutoff: MollifierCutoff
    correlation_mode: str
    times: np.ndarray
    xu: np.ndarray  # (n_t, 3, n, n, n) complex
    xb: np.ndarray
    seed: object

    def field(self, which: str, it: int) -> SpectralField:
        arr = self.xu if which == "u" else self.xb
        return SpectralField(self.grid, arr[it], mean_zero=True,
                             divergence_free=True)

    def ou_increment(self, which: str, it: int) -> np.ndarray:
        """X(t_{it+1}) - e^(-|k|^2 h) X(t_it): the exact noise contribution
        of one step of the mild formulation."""
        arr = self.xu if which == "u" else self.xb
        h = self.times[it + 1] - self.times[it]
        decay = np.exp(-self.grid.k_squared * h)
        return arr[it + 1] - decay * arr[it]

    def save(self, which: str, path: str) -> None:
        """Serialize one driver component path in the field container
        format with the time-index extension."""
        from pmhd.grid import save_path
        fields = [self.field(which, m) for m in range(len(self.times))]
        save_path(self.times, fields, path)


def _ou_mode_path(rng: np.random.Generator, k2: float, sigma: float,
                  P: np.ndarray, times: np.ndarray, n_replicas: int | None,
                  correlated: bool) -> tuple[np.ndarray, np.ndarray]:
    """Exact OU path(s) at one mode; returns (xu, xb) with shape
    ([n_replicas,] n_t, 3)."""
    n_t = len(times)
    lead = () if n_replicas is None else (n_replicas,)
    zu = _standard_complex(rng, lead + (n_t, 3))
    zb = zu if correlated else _standard_complex(rng, lead + (n_t, 3))
    xu = np.empty(lead + (n_t, 3), dtype=np.complex128)
    xb = np.empty_like(xu)
    # stationary initial state
    xu[..., 0, :] = sigma * zu[..., 0, :] @ P.T
    xb[..., 0, :] = sigma * zb[..., 0, :] @ P.T
    for m in range(n_t - 1):
        h = times[m + 1] - times[m]
        decay = math.exp(-k2 * h)
        scale = sigma * math.sqrt(1.0 - decay * decay)
        xu[..., m + 1, :] = decay * xu[..., m, :] \
            + scale * zu[..., m + 1, :] @ P.T
        xb[..., m + 1, :] = decay * xb[..., m, :] \
            + scale * zb[..., m + 1, :] @ P.T
    return xu, xb


def sample_driver_path(grid: TorusGrid, cutoff: MollifierCutoff,
                       times, seed,
                       correlation_mode: str = "identical"
                       ) -> GaussianDriverPath:
    """Stationary driver pair sampled exactly on the given times."""
    times = np.asarray(times, dtype=np.float64)
    if times.ndim != 1 or len(times) < 1 or np.any(np.diff(times) <= 0):
        raise ValueError("times must be a strictly increasing sequence")
    if correlation_mode not in CORRELATION_MODES:
        raise ValueError(f"correlation_mode must be one of {CORRELATION_MODES}")
    correlated = correlation_mode == "identical"
    n = grid.n_per_axis
    n_t = len(times)
    xu = np.zeros((n_t, 3, n, n, n), dtype=np.complex128)
    xb = np.zeros_like(xu)
    tab = leray_table(grid)
    fk = cutoff.weights(grid)
    for rank, k in enumerate(half_lattice(grid)):
        idx = grid.mode_index(k)
        sigma = fk[idx]
        if sigma == 0.0:
            continue
        k2 = float(sum(c * c for c in k))
        sigma = sigma / math.sqrt(2.0 * k2)
        P = tab[(slice(None), slice(None), *idx)]
        rng = _mode_rng(seed, rank)
        mu, mb = _ou_mode_path(rng, k2, sigma, P, times, None, correlated)
        cidx = grid.mode_index(tuple(-c for c in k))
        xu[(slice(None), slice(None), *idx)] = mu
        xu[(slice(None), slice(None), *cidx)] = np.conj(mu)
        xb[(slice(None), slice(None), *idx)] = mb
        xb[(slice(None), slice(None), *cidx)] = np.conj(mb)
    return GaussianDriverPath(grid, cutoff, correlation_mode, times,
                              xu, xb, seed)


def sample_mode_ou(grid: TorusGrid, cutoff: MollifierCutoff, times, seed,
                   k: tuple[int, int, int], n_replicas: int,
                   correlation_mode: str = "identical"
                   ) -> tuple[np.ndarray, np.ndarray]:
    """Replica-vectorised OU samples of a single mode k (or its conjugate).

    Returns (xu, xb) of shape (n_replicas, n_t, 3).  Uses the owning
    half-lattice mode's stream; requesting -k returns conjugated samples,
    matching the reality convention of the full-field sampler.
    """
    times = np.asarray(times, dtype=np.float64)
    if np.any(np.diff(times) <= 0):
        raise ValueError("times must be strictly increasing")
    correlated = correlation_mode == "identical"
    conjugate = tuple(k) < (0, 0, 0)
    base = tuple(-c for c in k) if conjugate else tuple(k)
    rank = half_lattice(grid).index(base)
    idx = grid.mode_index(base)
    sigma = float(cutoff.weights(grid)[idx])
    k2 = float(sum(c * c for c in base))
    if sigma == 0.0:
        shape = (n_replicas, len(times), 3)
        z = np.zeros(shape, dtype=np.complex128)
        return z, z.copy()
    sigma = sigma / math.sqrt(2.0 * k2)
    P = leray_table(grid)[(slice(None), slice(None), *idx)]
    rng = _mode_rng(seed, rank)
    xu, xb = _ou_mode_path(rng, k2, sigma, P, times, n_replicas, correlated)
    if conjugate:
        xu, xb = np.conj(xu), np.conj(xb)
    return xu, xb


def analytic_mode_covariance(grid: TorusGrid, cutoff: MollifierCutoff,
                             k, kp, t: float, s: float) -> np.ndarray:
    """E[ Xhat^i(k, t) Xhat^j(k', s) ], the closed-form 3x3 block.

    Zero unless k + k' = 0; within a driver pair the same formula holds in
    "identical" mode while cross-field blocks vanish in "independent" mode
    (handled by the caller).
    """
    k = tuple(int(c) for c in k)
    kp = tuple(int(c) for c in kp)
    if tuple(a + b for a, b in zip(k, kp)) != (0, 0, 0) or k == (0, 0, 0):
        return np.zeros((3, 3))
    idx = grid.mode_index(k)
    P = leray_table(grid)[(slice(None), slice(None), *idx)]
    k2 = float(sum(c * c for c in k))
    f = float(cutoff.weights(grid)[idx])
    return f * f * math.exp(-k2 * abs(t - s)) / (2.0 * k2) * (P @ P.T)


def sample_white_noise_increment(grid: TorusGrid, cutoff: MollifierCutoff,
                                 dt: float, seed
                                 ) -> tuple[SpectralField, SpectralField]:
    """One pair of mollified white-noise increments over a window of length dt.

    Per retained mode the increment is complex Gaussian with
    E ΔW^i(k) conj(ΔW^j(k)) = dt f(eps k)^2 δ^{ij} (mean zero, reality
    enforced); dt = 0 yields the zero increment, negative dt is rejected.
    """
    if dt < 0:
        raise ValueError("dt must be nonnegative")
    n = grid.n_per_axis
    wu = np.zeros((3, n, n, n), dtype=np.complex128)
    wb = np.zeros_like(wu)
    if dt == 0.0:
        return (SpectralField(grid, wu, mean_zero=True),
                SpectralField(grid, wb, mean_zero=True))
    fk = cutoff.weights(grid)
    for rank, k in enumerate(half_lattice(grid)):
        idx = grid.mode_index(k)
        amp = fk[idx] * math.sqrt(dt)
        if amp == 0.0:
            continue
        rng = _mode_rng(seed, rank)
        zu = amp * _standard_complex(rng, (3,))
        zb = amp * _standard_complex(rng, (3,))
        cidx = grid.mode_index(tuple(-c for c in k))
        wu[(slice(None), *idx)] = zu
        wu[(slice(None), *cidx)] = np.conj(zu)
        wb[(slice(None), *idx)] = zb
        wb[(slice(None), *cidx)] = np.conj(zb)
    return (SpectralField(grid, wu, mean_zero=True),
            SpectralField(grid, wb, mean_zero=True))
