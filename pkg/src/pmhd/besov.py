"""Dyadic Littlewood-Paley decomposition and Hoelder-Besov norms.

The radial profiles are built from one smooth step phi with
phi(r) = 1 for r <= 4/7 and phi(r) = 0 for r >= 8/7, obtained by
integrating a C-infinity bump across the transition window:

    chi(r)   = phi(r)                      (ball cutoff, block j = -1)
    rho_j(r) = phi(r / 2^(j+1)) - phi(r / 2^j)   (annulus blocks j >= 0)

so that chi + sum_j rho_j telescopes to 1 exactly wherever the last
step has closed (true on the whole retained lattice by the choice of
j_max), rho is supported in [4/7, 16/7] after rescaling, and blocks
with |i - j| > 1 have disjoint supports.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from pmhd.grid import SpectralField, TorusGrid, phys_from_coeffs

_STEP_LO = 4.0 / 7.0
_STEP_HI = 8.0 / 7.0


@lru_cache(maxsize=1)
def _step_table(n_mesh: int = 200001) -> tuple[np.ndarray, np.ndarray]:
    # cumulative integral of the bump exp(1 - 1/(1-x^2)) mapped onto the
    # transition window; only ever evaluated at lattice radii, where the
    # telescoping makes the partition identity exact independently of the
    # quadrature error here.
    r = np.linspace(_STEP_LO, _STEP_HI, n_mesh)
    x = (r - 0.5 * (_STEP_LO + _STEP_HI)) / (0.5 * (_STEP_HI - _STEP_LO))
    with np.errstate(divide="ignore"):
        bump = np.exp(1.0 - 1.0 / np.maximum(1.0 - x ** 2, 0.0))
    bump[0] = bump[-1] = 0.0
    cum = np.concatenate([[0.0], np.cumsum((bump[1:] + bump[:-1])
                                           * 0.5 * np.diff(r))])
    return r, 1.0 - cum / cum[-1]


def smooth_step(r: np.ndarray) -> np.ndarray:
    """phi: 1 below 4/7, 0 above 8/7, smooth monotone in between."""
    mesh, values = _step_table()
    r = np.asarray(r, dtype=np.float64)
    out = np.interp(r, mesh, values, left=1.0, right=0.0)
    return out


def chi_profile(r: np.ndarray) -> np.ndarray:
    return smooth_step(r)


def rho_profile(r: np.ndarray) -> np.ndarray:
    """Annulus profile rho with support [4/7, 16/7]; rho_j(r) = rho(r/2^j)."""
    r = np.asarray(r, dtype=np.float64)
    return smooth_step(r / 2.0) - smooth_step(r)


@dataclass(frozen=True)
class BesovIndex:
    alpha: float
    p: float = math.inf
    q: float = math.inf

    def __post_init__(self):
        if not (1 <= self.p):
            raise ValueError("p must be >= 1 (math.inf allowed)")
        if not (1 <= self.q):
            raise ValueError("q must be >= 1 (math.inf allowed)")


def holder(alpha: float) -> BesovIndex:
    """The Hoelder-Besov index C^alpha = B^alpha_{inf,inf}."""
    return BesovIndex(alpha)


class DyadicPartition:
    """Block multipliers chi, rho_j realised on a grid's mode lattice."""

    def __init__(self, grid: TorusGrid):
        self.grid = grid
        k_max = grid.k_max
        self.j_max = math.ceil(math.log2(k_max)) + 1 if k_max > 1 else 1
        radius = np.sqrt(grid.k_squared)
        tables = [chi_profile(radius)]
        for j in range(self.j_max + 1):
            tables.append(rho_profile(radius / 2.0 ** j))
        # omit trailing blocks with no support on the retained lattice
        retained = grid.retained
        while len(tables) > 1 and not np.any(tables[-1][retained] > 0.0):
            tables.pop()
        mult = np.stack(tables)
        mult.setflags(write=False)
        self.block_multipliers = mult  # index 0 <-> j = -1
        defect = self.partition_defect()
        if defect > 1e-12:
            raise AssertionError(
                f"partition of unity defect {defect:.3e}; j_max too small")

    @property
    def j_top(self) -> int:
        """Largest block index with support on the lattice."""
        return self.block_multipliers.shape[0] - 2

    @property
    def js(self) -> np.ndarray:
        return np.arange(-1, self.j_top + 1)

    def multiplier(self, j: int) -> np.ndarray:
        if not (-1 <= j <= self.j_top):
            raise ValueError(f"block index {j} outside [-1, {self.j_top}]")
        return self.block_multipliers[j + 1]

    def low_pass_multiplier(self, j: int) -> np.ndarray:
        """Multiplier of S_j = sum_{i <= j-1} Delta_i (S_{-1} = S_0's floor: 0)."""
        m = np.zeros_like(self.block_multipliers[0])
        for i in range(-1, min(j - 1, self.j_top) + 1):
            m = m + self.multiplier(i)
        return m

    def partition_defect(self) -> float:
        """max |1 - sum of block multipliers| over the retained lattice."""
        total = np.sum(self.block_multipliers, axis=0)
        return float(np.max(np.abs(total[self.grid.retained] - 1.0)))


@lru_cache(maxsize=None)
def partition_for(grid: TorusGrid) -> DyadicPartition:
    return DyadicPartition(grid)


def lp_block(f: SpectralField, j: int) -> SpectralField:
    """Littlewood-Paley block Delta_j f."""
    part = partition_for(f.grid)
    return SpectralField(f.grid, f.coeffs * part.multiplier(j),
                         mean_zero=f.mean_zero or j >= 0,
                         divergence_free=f.divergence_free)


def block_sup_norms(coeffs: np.ndarray, grid: TorusGrid) -> np.ndarray:
    """Collocation L-infinity of every block, batched over leading axes.

    Components (axis -4) are reduced to the pointwise Euclidean magnitude;
    the result has shape (n_blocks,) + batch_shape.
    """
    return block_extrema(coeffs, grid)[0]


def block_extrema(coeffs: np.ndarray, grid: TorusGrid
                  ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-block sup norms plus the pointwise min/max of the low block.

    Returns (sups, lo_min, lo_max) with sups of shape (n_blocks,) + batch
    and the extrema of shape batch + (ncomp,): knowing them makes the
    effect of a mode-0 (constant) shift on the norm exactly computable
    without another transform, since only block -1 sees mode 0.
    """
    part = partition_for(grid)
    mult = part.block_multipliers
    nb = mult.shape[0]
    batch = coeffs.shape[:-4]
    ncomp = coeffs.shape[-4]
    flat = coeffs.reshape((-1,) + coeffs.shape[-3:])
    sups = np.empty((nb, flat.shape[0] // ncomp))
    lo_min = lo_max = None
    for i in range(nb):
        p = phys_from_coeffs(grid, flat * mult[i]).real
        p = p.reshape((-1, ncomp) + coeffs.shape[-3:])
        mag2 = np.sum(p * p, axis=1)
        sups[i] = np.sqrt(np.max(mag2, axis=(-3, -2, -1)))
        if i == 0:
            lo_min = np.min(p, axis=(-3, -2, -1))
            lo_max = np.max(p, axis=(-3, -2, -1))
    return (sups.reshape((nb,) + batch),
            lo_min.reshape(batch + (ncomp,)),
            lo_max.reshape(batch + (ncomp,)))


def _lp_norm_phys(p_samples: np.ndarray, grid: TorusGrid, p: float) -> float:
    mag = np.sqrt(np.sum(p_samples * p_samples, axis=0))
    if math.isinf(p):
        return float(np.max(mag))
    w = (2.0 * np.pi / grid.n_per_axis) ** 3
    return float((np.sum(mag ** p) * w) ** (1.0 / p))


def besov_norm(f: SpectralField, idx: BesovIndex) -> float:
    """B^alpha_{p,q} norm: l^q over j of 2^(j alpha) ||Delta_j f||_{L^p}.

    L^p norms use collocation quadrature on the grid (documented
    approximation); components are reduced pointwise to their Euclidean
    magnitude.
    """
    part = partition_for(f.grid)
    terms = []
    for j in part.js:
        p_samples = phys_from_coeffs(f.grid, f.coeffs * part.multiplier(j)).real
        terms.append(2.0 ** (j * idx.alpha) * _lp_norm_phys(p_samples, f.grid,
                                                            idx.p))
    terms = np.asarray(terms)
    if math.isinf(idx.q):
        return float(np.max(terms))
    return float(np.sum(terms ** idx.q) ** (1.0 / idx.q))


def holder_norm(f: SpectralField, alpha: float) -> float:
    return besov_norm(f, holder(alpha))


def holder_norms_batch(coeffs: np.ndarray, grid: TorusGrid,
                       alpha: float) -> np.ndarray:
    """C^alpha norms of a batch of coefficient arrays (..., ncomp, n, n, n)."""
    blocks = block_sup_norms(coeffs, grid)
    part = partition_for(grid)
    weights = 2.0 ** (part.js * alpha)
    return np.max(weights.reshape((-1,) + (1,) * (blocks.ndim - 1)) * blocks,
                  axis=0)


@dataclass
class LowFreqReport:
    alpha: float
    holder_norm: float
    ratios: dict[int, float]
    flagged: list[int]
    constant: float


def low_freq_bound_check(f: SpectralField, alpha: float,
                         c_max: float | None = None) -> LowFreqReport:
    """Ratios ||S_j f||_Linf * 2^(j alpha) / ||f||_C^alpha for alpha < 0.

    The bound ||S_j f||_Linf <= C 2^(-j alpha) ||f||_C^alpha holds with a
    profile-dependent constant; the report records the observed ratios and
    flags any exceeding c_max when one is supplied.
    """
    if alpha >= 0:
        raise ValueError("low-frequency bound applies to alpha < 0")
    part = partition_for(f.grid)
    norm = holder_norm(f, alpha)
    ratios: dict[int, float] = {}
    for j in range(0, part.j_top + 2):
        m = part.low_pass_multiplier(j)
        p_samples = phys_from_coeffs(f.grid, f.coeffs * m).real
        sup = _lp_norm_phys(p_samples, f.grid, math.inf)
        ratios[j] = (sup * 2.0 ** (j * alpha) / norm) if norm > 0 else 0.0
    flagged = [j for j, r in ratios.items() if c_max is not None and r > c_max]
    constant = max(ratios.values()) if ratios else 0.0
    return LowFreqReport(alpha, norm, ratios, flagged, constant)
