"""Truncated Fourier representation of real periodic fields on the 3-torus.

Fields live on a symmetric integer mode lattice {k : max_i |k_i| <= k_max}
inside the standard FFT cube of an n^3 collocation grid.  The basis is
e_k(x) = (2*pi)^(-3/2) * exp(i k.x), so a field is f(x) = sum_k c(k) e_k(x)
and Parseval reads  integral |f|^2 dx = sum_k |c(k)|^2.

Quadratic products are evaluated pseudo-spectrally on the collocation grid
and truncated back to the retained lattice; k_max is chosen so that this
truncation is alias-free for quadratic nonlinearities (2/3-type rule).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np
import scipy.fft as sfft

TWO_PI_POW = (2.0 * np.pi) ** 1.5  # (2*pi)^(3/2), the e_k normalisation

_fft_workers = 1


def set_fft_workers(n: int) -> None:
    """Cap the number of threads scipy.fft may use (1 = serial)."""
    global _fft_workers
    _fft_workers = max(1, int(n))


def fftn(a: np.ndarray) -> np.ndarray:
    return sfft.fftn(a, axes=(-3, -2, -1), workers=_fft_workers)


def ifftn(a: np.ndarray) -> np.ndarray:
    return sfft.ifftn(a, axes=(-3, -2, -1), workers=_fft_workers)


class RealityError(ValueError):
    """A spectral field violated the conjugate-symmetry invariant."""


def _alias_free_kmax(n: int, dealias_fraction: Fraction) -> int:
    # Quadratic products of retained modes wrap to |k| >= n - 2*k_max under
    # the length-n FFT; those stay outside the lattice iff 3*k_max < n.
    k = int(n * dealias_fraction / 2)
    while k > 0 and not (3 * k < n and 2 * k < n):
        k -= 1
    return k


@dataclass(frozen=True)
class TorusGrid:
    """Collocation grid and retained mode lattice for T^3."""

    n_per_axis: int
    dealias_fraction: Fraction = Fraction(2, 3)

    def __post_init__(self):
        if self.n_per_axis < 4 or self.n_per_axis % 2:
            raise ValueError("n_per_axis must be an even integer >= 4")
        f = Fraction(self.dealias_fraction)
        if not (0 < f <= 1):
            raise ValueError("dealias_fraction must lie in (0, 1]")
        object.__setattr__(self, "dealias_fraction", f)

    @property
    def k_max(self) -> int:
        return _alias_free_kmax(self.n_per_axis, self.dealias_fraction)

    # -- cached lattice tables -------------------------------------------

    @property
    def k_vectors(self) -> np.ndarray:
        """Integer wavevectors, shape (3, n, n, n), FFT layout."""
        return _k_vectors(self.n_per_axis)

    @property
    def k_squared(self) -> np.ndarray:
        return _k_squared(self.n_per_axis)

    @property
    def retained(self) -> np.ndarray:
        """Boolean mask of the retained lattice, shape (n, n, n)."""
        return _retained(self.n_per_axis, self.k_max)

    @property
    def n_modes(self) -> int:
        return (2 * self.k_max + 1) ** 3

    def mode_index(self, k: Sequence[int]) -> tuple[int, int, int]:
        """FFT-cube index of integer mode k."""
        n = self.n_per_axis
        kx, ky, kz = (int(c) for c in k)
        if max(abs(kx), abs(ky), abs(kz)) > self.k_max:
            raise ValueError(f"mode {k!r} outside retained lattice")
        return (kx % n, ky % n, kz % n)


@lru_cache(maxsize=None)
def _k_vectors(n: int) -> np.ndarray:
    k1 = np.fft.fftfreq(n, d=1.0 / n).astype(np.int64)
    kx, ky, kz = np.meshgrid(k1, k1, k1, indexing="ij")
    out = np.stack([kx, ky, kz]).astype(np.float64)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=None)
def _k_squared(n: int) -> np.ndarray:
    k = _k_vectors(n)
    out = np.sum(k * k, axis=0)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=None)
def _retained(n: int, k_max: int) -> np.ndarray:
    k = _k_vectors(n)
    out = np.max(np.abs(k), axis=0) <= k_max
    out.setflags(write=False)
    return out


@lru_cache(maxsize=None)
def _conj_index(n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    idx = (-np.arange(n)) % n
    return np.ix_(idx, idx, idx)


@dataclass(frozen=True)
class SpectralField:
    """Fourier coefficients of an n-component field; immutable value type.

    coeffs has shape (ncomp, n, n, n) with ncomp in {1, 3, 6}; entries
    outside the retained lattice are identically zero.
    """

    grid: TorusGrid
    coeffs: np.ndarray
    mean_zero: bool = False
    divergence_free: bool = False

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.complex128)
        if c.ndim == 3:
            c = c[None]
        n = self.grid.n_per_axis
        if c.shape[1:] != (n, n, n) or c.shape[0] not in (1, 3, 6):
            raise ValueError(f"bad coefficient shape {c.shape}")
        c = np.where(self.grid.retained, c, 0.0)
        if self.mean_zero:
            c[:, 0, 0, 0] = 0.0
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def ncomp(self) -> int:
        return self.coeffs.shape[0]

    def component(self, i: int) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs[i][None],
                             mean_zero=self.mean_zero)

    def __add__(self, other: "SpectralField") -> "SpectralField":
        _check_same_grid(self, other)
        return SpectralField(self.grid, self.coeffs + other.coeffs,
                             mean_zero=self.mean_zero and other.mean_zero,
                             divergence_free=self.divergence_free
                             and other.divergence_free)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        _check_same_grid(self, other)
        return SpectralField(self.grid, self.coeffs - other.coeffs,
                             mean_zero=self.mean_zero and other.mean_zero,
                             divergence_free=self.divergence_free
                             and other.divergence_free)

    def __mul__(self, scalar: complex) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs * scalar,
                             mean_zero=self.mean_zero,
                             divergence_free=self.divergence_free)

    __rmul__ = __mul__

    def mode(self, k: Sequence[int]) -> np.ndarray:
        """Coefficient vector at integer mode k (length ncomp)."""
        return self.coeffs[(slice(None), *self.grid.mode_index(k))]

    def reality_defect(self) -> float:
        """max |c(-k) - conj(c(k))| over the lattice."""
        c = self.coeffs
        return float(np.max(np.abs(c[(slice(None), *_conj_index(self.grid.n_per_axis))]
                                   - np.conj(c))))

    def divergence_defect(self) -> float:
        """max_k |k . c(k)| for 3-component fields."""
        if self.ncomp != 3:
            raise ValueError("divergence defined for 3-component fields")
        k = self.grid.k_vectors
        return float(np.max(np.abs(np.sum(k * self.coeffs, axis=0))))


def _check_same_grid(f: SpectralField, g: SpectralField) -> None:
    if f.grid != g.grid:
        raise ValueError("fields live on different grids")


# ---------------------------------------------------------------------------
# raw-array kernels (hot path; no validation, leading batch axes allowed)
# ---------------------------------------------------------------------------

def phys_from_coeffs(grid: TorusGrid, c: np.ndarray) -> np.ndarray:
    """Collocation samples of sum_k c(k) e_k; complex output, caller checks."""
    n3 = grid.n_per_axis ** 3
    return ifftn(c) * (n3 / TWO_PI_POW)


def coeffs_from_phys(grid: TorusGrid, samples: np.ndarray) -> np.ndarray:
    n3 = grid.n_per_axis ** 3
    c = fftn(samples) * (TWO_PI_POW / n3)
    return np.where(grid.retained, c, 0.0)


def product_coeffs(grid: TorusGrid, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Dealiased coefficient array of the pointwise product a*b."""
    pa = phys_from_coeffs(grid, a)
    pb = phys_from_coeffs(grid, b)
    return coeffs_from_phys(grid, (pa * pb).real)


def product_pairs(grid: TorusGrid, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """All pairwise dealiased products: (*sa,n,n,n) x (*sb,...) -> (*sa,*sb,...).

    Assumes real-valued fields (conjugate-symmetric coefficients)."""
    sa, sb = a.shape[:-3], b.shape[:-3]
    pa = phys_from_coeffs(grid, a.reshape((-1,) + a.shape[-3:])).real
    pb = phys_from_coeffs(grid, b.reshape((-1,) + b.shape[-3:])).real
    prod = pa[:, None] * pb[None, :]
    out = coeffs_from_phys(grid, prod)
    return out.reshape(sa + sb + a.shape[-3:])


def phys_batch(grid: TorusGrid, a: np.ndarray) -> np.ndarray:
    """Real collocation samples of a real-field coefficient array
    (T, *s, n, n, n) flattened to (T, prod(s), n, n, n)."""
    T = a.shape[0]
    return phys_from_coeffs(grid, a.reshape((T, -1) + a.shape[-3:])).real


def product_pairs_diag(grid: TorusGrid, a: np.ndarray, b: np.ndarray,
                       pa: np.ndarray | None = None,
                       pb: np.ndarray | None = None) -> np.ndarray:
    """Per-slice pairwise products: (T,*sa,n,n,n) x (T,*sb,...) ->
    (T,*sa,*sb,...); the leading axis (typically time) is diagonal.

    pa/pb accept cached phys_batch results of a/b."""
    T = a.shape[0]
    sa, sb = a.shape[1:-3], b.shape[1:-3]
    pa = phys_batch(grid, a) if pa is None else pa
    pb = phys_batch(grid, b) if pb is None else pb
    prod = pa[:, :, None] * pb[:, None, :]
    out = coeffs_from_phys(grid, prod)
    return out.reshape((T,) + sa + sb + a.shape[-3:])


def pack_coeffs(grid: TorusGrid, c: np.ndarray) -> np.ndarray:
    """Keep only retained-lattice entries: (..., n,n,n) -> (..., n_modes)."""
    return c[..., grid.retained]


def unpack_coeffs(grid: TorusGrid, packed: np.ndarray) -> np.ndarray:
    n = grid.n_per_axis
    full = np.zeros(packed.shape[:-1] + (n, n, n), dtype=packed.dtype)
    full[..., grid.retained] = packed
    return full


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------

def to_physical(f: SpectralField, rtol: float = 1e-12) -> np.ndarray:
    """Real collocation samples of f; raises RealityError on corrupt input."""
    p = phys_from_coeffs(f.grid, f.coeffs)
    scale = np.max(np.abs(p.real))
    if scale > 0 and np.max(np.abs(p.imag)) > rtol * scale:
        raise RealityError(
            f"imaginary residue {np.max(np.abs(p.imag)):.3e} exceeds "
            f"{rtol:g} x field scale {scale:.3e}")
    return p.real


def to_spectral(samples: np.ndarray, grid: TorusGrid, **flags) -> SpectralField:
    """Spectral field from real collocation samples (modes beyond k_max drop)."""
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim == 3:
        samples = samples[None]
    return SpectralField(grid, coeffs_from_phys(grid, samples), **flags)


def pointwise_product(f: SpectralField, g: SpectralField) -> SpectralField:
    """Alias-free product under the grid's dealiasing rule.

    Component arities: scalar*scalar -> scalar, scalar*vector -> vector.
    """
    _check_same_grid(f, g)
    if f.ncomp != 1 and g.ncomp != 1 and f.ncomp != g.ncomp:
        raise ValueError(f"incompatible arities {f.ncomp} x {g.ncomp}")
    c = product_coeffs(f.grid, f.coeffs, g.coeffs)
    return SpectralField(f.grid, c)


def project_mean_zero(f: SpectralField) -> SpectralField:
    c = f.coeffs.copy()
    c[:, 0, 0, 0] = 0.0
    return SpectralField(f.grid, c, mean_zero=True,
                         divergence_free=f.divergence_free)


def leray_project_coeffs(grid: TorusGrid, c: np.ndarray) -> np.ndarray:
    """Apply the divergence-free projector I - k k^T/|k|^2 per mode (k=0: id)."""
    k = grid.k_vectors
    k2 = grid.k_squared.copy()
    k2[0, 0, 0] = 1.0  # P(0) = identity: mode 0 passes through untouched
    div = np.sum(k * c, axis=-4, keepdims=True)
    return c - k * div / k2


def project_divergence_free(f: SpectralField) -> SpectralField:
    if f.ncomp != 3:
        raise ValueError("divergence-free projection needs a 3-component field")
    c = leray_project_coeffs(f.grid, f.coeffs)
    return SpectralField(f.grid, c, mean_zero=f.mean_zero,
                         divergence_free=True)


def zero_field(grid: TorusGrid, ncomp: int = 1, **flags) -> SpectralField:
    n = grid.n_per_axis
    return SpectralField(grid, np.zeros((ncomp, n, n, n), dtype=np.complex128),
                         **flags)


def basis_mode_pair(grid: TorusGrid, k: Sequence[int],
                    amplitude: complex = 1.0, component: int = 0,
                    ncomp: int = 1) -> SpectralField:
    """a*e_k + conj(a)*e_{-k}: the elementary real single-mode field."""
    f = zero_field(grid, ncomp)
    c = f.coeffs.copy()
    c[(component, *grid.mode_index(k))] = amplitude
    c[(component, *grid.mode_index([-x for x in k]))] += np.conj(amplitude)
    return SpectralField(grid, c, mean_zero=any(x != 0 for x in k))


def random_field(grid: TorusGrid, ncomp: int = 1, seed: int = 0,
                 decay: float = 0.0, mean_zero: bool = True,
                 divergence_free: bool = False) -> SpectralField:
    """Gaussian random field with E|c(k)|^2 = (1+|k|^2)^(-decay).

    Modes are sampled directly and conjugate-symmetrised, so the law of any
    individual mode does not depend on the grid size; fitted-constant sweeps
    across resolutions therefore compare like with like.
    """
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    n = grid.n_per_axis
    shape = (ncomp, n, n, n)
    g = (rng.standard_normal(shape)
         + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
    g_reflected = g[(slice(None), *_conj_index(n))]
    c = (g + np.conj(g_reflected)) / np.sqrt(2.0)
    envelope = (1.0 + grid.k_squared) ** (-decay / 2.0)
    c = c * envelope
    f = SpectralField(grid, c, mean_zero=mean_zero)
    if mean_zero:
        f = project_mean_zero(f)
    if divergence_free:
        if ncomp != 3:
            raise ValueError("divergence_free needs ncomp=3")
        f = project_divergence_free(f)
    return f


def inner_product(f: SpectralField, g: SpectralField) -> float:
    """integral f.g dx via Parseval (componentwise contraction)."""
    _check_same_grid(f, g)
    return float(np.real(np.sum(f.coeffs * np.conj(g.coeffs))))


def l2_norm(f: SpectralField) -> float:
    return float(np.sqrt(np.sum(np.abs(f.coeffs) ** 2)))


# ---------------------------------------------------------------------------
# field container format "PMHD1"
# ---------------------------------------------------------------------------

_MAGIC = "PMHD1"


def _grid_header(grid: TorusGrid) -> dict:
    return {
        "n_per_axis": grid.n_per_axis,
        "k_max": grid.k_max,
        "dealias_fraction": [grid.dealias_fraction.numerator,
                             grid.dealias_fraction.denominator],
    }


def _grid_from_header(h: dict) -> TorusGrid:
    num, den = h["dealias_fraction"]
    grid = TorusGrid(h["n_per_axis"], Fraction(num, den))
    if grid.k_max != h["k_max"]:
        raise ValueError("container k_max inconsistent with grid parameters")
    return grid


def _pack_coeffs(f: SpectralField) -> dict:
    kk = f.grid.k_vectors
    mask = f.grid.retained
    modes = kk[:, mask].T.astype(int)
    vals = f.coeffs[:, mask]
    return {
        "modes": modes.tolist(),
        "re": vals.real.tolist(),
        "im": vals.imag.tolist(),
    }


def _unpack_coeffs(grid: TorusGrid, ncomp: int, rec: dict) -> np.ndarray:
    n = grid.n_per_axis
    c = np.zeros((ncomp, n, n, n), dtype=np.complex128)
    modes = np.asarray(rec["modes"], dtype=int)
    vals = np.asarray(rec["re"]) + 1j * np.asarray(rec["im"])
    idx = tuple(modes[:, d] % n for d in range(3))
    c[(slice(None),) + idx] = vals
    return c


def save_field(f: SpectralField, path: str) -> None:
    doc = {
        "magic": _MAGIC,
        "grid": _grid_header(f.grid),
        "ncomp": f.ncomp,
        "mean_zero": f.mean_zero,
        "divergence_free": f.divergence_free,
        "data": _pack_coeffs(f),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_field(path: str) -> SpectralField:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("magic") != _MAGIC:
        raise ValueError(f"not a {_MAGIC} container: {path}")
    grid = _grid_from_header(doc["grid"])
    c = _unpack_coeffs(grid, doc["ncomp"], doc["data"])
    return SpectralField(grid, c, mean_zero=doc["mean_zero"],
                         divergence_free=doc["divergence_free"])


def save_path(times: Sequence[float], fields: Sequence[SpectralField],
              path: str) -> None:
    """Time-indexed extension of the container format."""
    if len(times) != len(fields):
        raise ValueError("times and fields disagree in length")
    f0 = fields[0]
    doc = {
        "magic": _MAGIC,
        "grid": _grid_header(f0.grid),
        "ncomp": f0.ncomp,
        "mean_zero": f0.mean_zero,
        "divergence_free": f0.divergence_free,
        "times": list(map(float, times)),
        "snapshots": [_pack_coeffs(f) for f in fields],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_path(path: str) -> tuple[list[float], list[SpectralField]]:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("magic") != _MAGIC:
        raise ValueError(f"not a {_MAGIC} container: {path}")
    grid = _grid_from_header(doc["grid"])
    fields = [SpectralField(grid, _unpack_coeffs(grid, doc["ncomp"], rec),
                            mean_zero=doc["mean_zero"],
                            divergence_free=doc["divergence_free"])
              for rec in doc["snapshots"]]
    return doc["times"], fields
