"""Duhamel integration and the perturbative tree: levels 1-3, the K-fields,
and the 21-slot driver bundle with its aggregate norm.

Level conventions (all right-hand sides Leray-projected, so every tree
field is divergence-free and mean zero):

    level 1:  the stationary drivers (x_1u, x_1b) and L K_c = x_1c, K_c(0)=0
    level 2:  L x_2u = -1/2 P d_j (x_1u x_1u - x_1b x_1b)_wick, x_2(0) = 0
              L x_2b = -1/2 P d_j (x_1b x_1u - x_1u x_1b)_wick
    level 3:  driven by level1 x level2 plain products, x_3(0) = 0

Time stepping is the first-order exponential integrator

    v(t_{m+1}) = e^(-|k|^2 h) v(t_m) + h phi1(-|k|^2 h) rhs(t_m),

exact for rhs constant in time on each mode.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from pmhd.besov import block_extrema, holder_norms_batch, partition_for
from pmhd.grid import (TorusGrid, TWO_PI_POW, leray_project_coeffs,
                       phys_batch, product_pairs_diag)
from pmhd.noise import GaussianDriverPath
from pmhd.operators import (block_phys_diag, leray_table,
                            para_res_pairs_diag)
from pmhd.renorm import c0_matrix, c2_matrix, group3_total_matrix


# ---------------------------------------------------------------------------
# exponents
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExponentRecord:
    """Regularity bookkeeping (delta0, z, delta, beta); defaults satisfy the
    inequality chain with slack."""
    delta0: float = 0.25
    z: float = 0.6
    delta: float = 0.05
    beta: float = 0.10


# ---------------------------------------------------------------------------
# Duhamel integration
# ---------------------------------------------------------------------------

def phi1(x: np.ndarray) -> np.ndarray:
    """(e^x - 1)/x with phi1(0) = 1."""
    x = np.asarray(x, dtype=np.float64)
    safe = np.where(x == 0.0, 1.0, x)
    return np.where(x == 0.0, 1.0, np.expm1(safe) / safe)


def duhamel(grid: TorusGrid, times, rhs, initial=None) -> np.ndarray:
    """Integrate L v = rhs from v(times[0]) = initial along the time grid.

    rhs: array (n_t, ...) of coefficient cubes or a callable m -> cube;
    returns the path array (n_t, ...).
    """
    times = np.asarray(times, dtype=np.float64)
    if np.any(np.diff(times) <= 0):
        raise ValueError("times must be strictly increasing")
    get = rhs if callable(rhs) else (lambda m: rhs[m])
    first = np.asarray(get(0))
    out = np.empty((len(times),) + first.shape, dtype=np.complex128)
    out[0] = 0.0 if initial is None else initial
    k2 = grid.k_squared
    for m in range(len(times) - 1):
        h = times[m + 1] - times[m]
        decay = np.exp(-k2 * h)
        weight = h * phi1(-k2 * h)
        r = first if m == 0 else np.asarray(get(m))
        out[m + 1] = decay * out[m] + weight * r
    return out


# ---------------------------------------------------------------------------
# tree levels
# ---------------------------------------------------------------------------

def constant_field_coeff(value: float) -> complex:
    """Mode-0 coefficient of the constant function `value`."""
    return value * TWO_PI_POW


def _apply_div_and_leray(grid: TorusGrid, W: np.ndarray) -> np.ndarray:
    """-1/2 P^{i i1} d_j W^{i1 j} for pair blocks (..., 3, 3, n, n, n)."""
    k = grid.k_vectors
    D = -0.5j * np.einsum("jxyz,...ajxyz->...axyz", k, W)
    return leray_project_coeffs(grid, D)


def level2_rhs_path(driver: GaussianDriverPath,
                    c0: dict[str, np.ndarray] | None
                    ) -> tuple[np.ndarray, np.ndarray]:
    """Right-hand sides of the level-2 equations at every time node.

    c0 maps "uu", "bb", "ub", "bu" to 3x3 constant matrices (the level-1
    Wick corrections); None keeps raw products (the unrenormalized branch).
    """
    grid = driver.grid
    xu, xb = driver.xu, driver.xb
    puu = product_pairs_diag(grid, xu, xu)
    pbb = product_pairs_diag(grid, xb, xb)
    pbu = product_pairs_diag(grid, xb, xu)
    pub = product_pairs_diag(grid, xu, xb)
    if c0 is not None:
        for block, key in ((puu, "uu"), (pbb, "bb"), (pub, "ub"),
                           (pbu, "bu")):
            block[:, :, :, 0, 0, 0] -= constant_field_coeff(1.0) * c0[key]
    return (_apply_div_and_leray(grid, puu - pbb),
            _apply_div_and_leray(grid, pbu - pub))


def level3_rhs_path(driver: GaussianDriverPath, u2: np.ndarray,
                    b2: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Right-hand sides of the level-3 equations (level1 x level2 products
    carry no correction)."""
    grid = driver.grid
    xu, xb = driver.xu, driver.xb
    W_u = (product_pairs_diag(grid, xu, u2)
           + product_pairs_diag(grid, u2, xu)
           - product_pairs_diag(grid, xb, b2)
           - product_pairs_diag(grid, b2, xb))
    W_b = (product_pairs_diag(grid, xb, u2)
           + product_pairs_diag(grid, b2, xu)
           - product_pairs_diag(grid, xu, b2)
           - product_pairs_diag(grid, u2, xb))
    return (_apply_div_and_leray(grid, W_u), _apply_div_and_leray(grid, W_b))


@dataclass
class TreeLevels:
    """All explicitly constructed tree fields on a shared time grid."""
    driver: GaussianDriverPath
    c0: dict[str, np.ndarray] | None
    Ku: np.ndarray
    Kb: np.ndarray
    u2: np.ndarray
    b2: np.ndarray
    u3: np.ndarray
    b3: np.ndarray
    L3u: np.ndarray  # the level-3 right-hand sides (= L x_3 at the nodes)
    L3b: np.ndarray

    @property
    def grid(self) -> TorusGrid:
        return self.driver.grid

    @property
    def times(self) -> np.ndarray:
        return self.driver.times


def c0_matrices(epsilon: float, k_max: int,
                correlation_mode: str) -> dict[str, np.ndarray]:
    return {
        "uu": c0_matrix(epsilon, k_max, 1, correlation_mode),
        "bb": c0_matrix(epsilon, k_max, 2, correlation_mode),
        "ub": c0_matrix(epsilon, k_max, 3, correlation_mode),
        "bu": c0_matrix(epsilon, k_max, 4, correlation_mode),
    }


def build_levels(driver: GaussianDriverPath, renormalize: bool = True
                 ) -> TreeLevels:
    """K-fields and levels 2, 3 from a sampled driver path.

    renormalize=False keeps the raw level-1 products (the branch whose
    bundle norm is expected to blow up along mollification sweeps).
    """
    grid = driver.grid
    times = driver.times
    c0 = (c0_matrices(driver.cutoff.epsilon, grid.k_max,
                      driver.correlation_mode) if renormalize else None)
    Ku = duhamel(grid, times, driver.xu)
    Kb = duhamel(grid, times, driver.xb)
    rhs2u, rhs2b = level2_rhs_path(driver, c0)
    u2 = duhamel(grid, times, rhs2u)
    b2 = duhamel(grid, times, rhs2b)
    L3u, L3b = level3_rhs_path(driver, u2, b2)
    u3 = duhamel(grid, times, L3u)
    b3 = duhamel(grid, times, L3b)
    return TreeLevels(driver, c0, Ku, Kb, u2, b2, u3, b3, L3u, L3b)


# ---------------------------------------------------------------------------
# the driver bundle
# ---------------------------------------------------------------------------

@dataclass
class BundleSlot:
    name: str
    regularity: float
    norms: np.ndarray  # per-index C^reg norms, shape (n_t, *index_shape)
    times: np.ndarray  # the slot's norm-evaluation nodes

    @property
    def sup_norm(self) -> float:
        return float(np.sum(np.max(self.norms, axis=0)))


@dataclass
class DriverBundle:
    """Norm traces of the 21 bundle slots (group-4 collapsed to tagged
    families), plus the exponent record used for the regularity labels."""
    exponents: ExponentRecord
    slots: dict[str, BundleSlot] = field(default_factory=dict)

    def c_xi(self) -> float:
        """Sum over slots of sup-in-time norms (the aggregate driver size)."""
        return sum(s.sup_norm for s in self.slots.values())


def _group4_first_args(grid: TorusGrid, tab: np.ndarray,
                       K: np.ndarray) -> np.ndarray:
    """The 54 scalar fields P^{i i1} d_j K^j and P^{i i1} d_j K^{i1}
    (indices free, no sums), stacked as (2, 3, 3, 3, n, n, n)."""
    kvec = grid.k_vectors
    gradK = 1j * kvec[None, :] * K[:, None]  # (comp a, deriv j, n,n,n)
    famA = np.einsum("abxyz,bjxyz->abjxyz", tab, gradK)
    famB = np.einsum("abxyz,jbxyz->abjxyz", tab,
                     np.swapaxes(gradK, 0, 1))
    return np.stack([famA, famB])


@dataclass
class BundleConstants:
    """Every renormalization constant the bundle subtracts, precomputed on
    one time grid; replica-independent, so sweeps compute this once per
    mollification scale."""
    times: np.ndarray
    c0: dict[str, np.ndarray]          # key -> (3, 3)
    c2: dict[str, np.ndarray]          # key -> (n_t, 3, 3)
    g3: dict[str, np.ndarray]          # key -> (n_t, 3, 3)


def compute_bundle_constants(epsilon: float, k_max: int, times,
                             correlation_mode: str) -> BundleConstants:
    times = np.asarray(times, dtype=np.float64)
    c0 = c0_matrices(epsilon, k_max, correlation_mode)
    c2 = {key: c2_matrix(lt, rt, times, epsilon, k_max, correlation_mode)
          for key, (lt, rt) in (("u2u2", ("u2", "u2")),
                                ("b2b2", ("b2", "b2")),
                                ("b2u2", ("b2", "u2")))}
    g3 = {key: group3_total_matrix(src, right, times, epsilon, k_max,
                                   correlation_mode)
          for key, (src, right) in (("r_u3u1", ("u3", "u")),
                                    ("r_b3b1", ("b3", "b")),
                                    ("r_u3b1", ("u3", "b")),
                                    ("r_b3u1", ("b3", "u")))}
    return BundleConstants(times, c0, c2, g3)


def _norms_with_shift(grid: TorusGrid, sups: np.ndarray, lo_min: np.ndarray,
                      lo_max: np.ndarray, alpha: float,
                      shift: np.ndarray | None) -> np.ndarray:
    """C^alpha norms from block extrema; `shift` subtracts a constant field
    (touching only block -1, whose sup becomes max(|min-c|, |max-c|))."""
    part = partition_for(grid)
    weights = 2.0 ** (part.js * alpha)
    sups = sups.copy()
    if shift is not None:
        sups[0] = np.maximum(np.abs(lo_min - shift), np.abs(lo_max - shift))
    return np.max(weights.reshape((-1,) + (1,) * (sups.ndim - 1)) * sups,
                  axis=0)


def assemble_bundles(levels: TreeLevels, exponents: ExponentRecord,
                     constants: BundleConstants | None = None,
                     stride: int = 1,
                     group4_stride: int = 1) -> dict[str, DriverBundle]:
    """Populate all 21 bundle slots and record their C^reg norm traces,
    returning both the Wick-corrected and the raw-product bundle.

    Both variants share one pass over the quadratic/resonant products:
    the corrections are constant fields, so they only move block -1, whose
    collocation extrema are tracked alongside the block sup norms.  stride
    subsamples the norm-evaluation nodes (the level fields are integrated
    on the full grid regardless); group4_stride additionally thins the
    constant-free group-4 families, which dominate the transform volume.
    """
    grid = levels.grid
    d = exponents.delta
    driver = levels.driver
    sel = slice(None, None, stride)
    times = levels.times[sel]
    n_t = len(times)
    if constants is None:
        constants = compute_bundle_constants(driver.cutoff.epsilon,
                                             grid.k_max, levels.times,
                                             driver.correlation_mode)
    tab = leray_table(grid)

    reg = {
        "x1": -0.5 - d / 2, "wick11": -1.0 - d / 2,
        "cross12": -0.5 - d / 2, "wick22": -d, "res31": -d, "group4": -d,
    }

    xu, xb = driver.xu[sel], driver.xb[sel]
    u2, b2 = levels.u2[sel], levels.b2[sel]
    u3, b3 = levels.u3[sel], levels.b3[sel]
    phys = {"u1": phys_batch(grid, xu), "b1": phys_batch(grid, xb),
            "u2": phys_batch(grid, u2), "b2": phys_batch(grid, b2)}
    blocks_of = {"u1": block_phys_diag(grid, xu),
                 "b1": block_phys_diag(grid, xb),
                 "u3": block_phys_diag(grid, u3),
                 "b3": block_phys_diag(grid, b3)}
    paths = {"u1": xu, "b1": xb, "u2": u2, "b2": b2, "u3": u3, "b3": b3}

    corrected: dict[str, BundleSlot] = {}
    raw: dict[str, BundleSlot] = {}

    def add_pair_slot(name, a, b, alpha, corr=None, resonant=False):
        if resonant:
            blocks = para_res_pairs_diag(grid, paths[a], paths[b],
                                         ablocks=blocks_of[a],
                                         bblocks=blocks_of[b])
        else:
            blocks = product_pairs_diag(grid, paths[a], paths[b],
                                        pa=phys[a], pb=phys[b])
        sups, lo_min, lo_max = block_extrema(blocks[:, :, :, None], grid)
        lo_min, lo_max = lo_min[..., 0], lo_max[..., 0]
        raw[name] = BundleSlot(
            name, alpha, _norms_with_shift(grid, sups, lo_min, lo_max,
                                           alpha, None), times)
        shift = None
        if corr is not None:
            shift = np.broadcast_to(corr[sel] if corr.ndim == 3 else corr,
                                    (n_t, 3, 3))
        corrected[name] = BundleSlot(
            name, alpha, _norms_with_shift(grid, sups, lo_min, lo_max,
                                           alpha, shift), times)

    # 1-2: the drivers themselves (no corrections)
    for name, arr in (("u1", xu), ("b1", xb)):
        tr = holder_norms_batch(arr[:, :, None], grid, reg["x1"])
        raw[name] = BundleSlot(name, reg["x1"], tr, times)
        corrected[name] = raw[name]

    # 3-6: level-1 squares with the C_0 constants
    for key, (a, b) in (("uu", ("u1", "u1")), ("bb", ("b1", "b1")),
                        ("ub", ("u1", "b1")), ("bu", ("b1", "u1"))):
        add_pair_slot(f"w1_{key}", a, b, reg["wick11"], constants.c0[key])

    # 7-10: level1 x level2 (plain products by definition)
    for key, (a, b) in (("u1u2", ("u1", "u2")), ("b1b2", ("b1", "b2")),
                        ("b1u2", ("b1", "u2")), ("b2u1", ("b2", "u1"))):
        add_pair_slot(key, a, b, reg["cross12"])

    # 11-13: level-2 squares with the pairing constants
    for key, (a, b) in (("u2u2", ("u2", "u2")), ("b2b2", ("b2", "b2")),
                        ("b2u2", ("b2", "u2"))):
        add_pair_slot(key, a, b, reg["wick22"], constants.c2[key])

    # 14-17: resonant level3 x level1 with the summed group-3 constants
    for key, (a, b) in (("r_u3u1", ("u3", "u1")), ("r_b3b1", ("b3", "b1")),
                        ("r_u3b1", ("u3", "b1")), ("r_b3u1", ("b3", "u1"))):
        add_pair_slot(key, a, b, reg["res31"], constants.g3[key],
                      resonant=True)

    # 18-21: resonant P dK x level1 families (plain resonant products)
    sel4 = slice(None, None, stride * group4_stride)
    for kname, K in (("Ku", levels.Ku), ("Kb", levels.Kb)):
        fams = np.stack([_group4_first_args(grid, tab, K[m])
                         for m in range(len(levels.times))[sel4]])
        for xname, X in (("u1", driver.xu), ("b1", driver.xb)):
            block = para_res_pairs_diag(grid, fams, X[sel4])
            tr = holder_norms_batch(block[..., None, :, :, :], grid,
                                    reg["group4"])
            name = f"g4_{kname}_{xname}"
            raw[name] = BundleSlot(name, reg["group4"], tr,
                                   levels.times[sel4])
            corrected[name] = raw[name]

    return {"corrected": DriverBundle(exponents, corrected),
            "raw": DriverBundle(exponents, raw)}


def assemble_bundle(levels: TreeLevels, exponents: ExponentRecord,
                    constants: BundleConstants | None = None,
                    renormalize: bool = True) -> DriverBundle:
    """One driver bundle; see assemble_bundles for the dual-variant form."""
    variant = "corrected" if renormalize else "raw"
    return assemble_bundles(levels, exponents, constants)[variant]


def bundle_norm_rows(bundle: DriverBundle) -> list[dict]:
    """Flat per-(slot, t) rows for the CSV interface."""
    rows = []
    for name, slot in bundle.slots.items():
        per_t = np.sum(slot.norms.reshape(slot.norms.shape[0], -1), axis=1)
        for m, t in enumerate(slot.times):
            rows.append({"slot": name, "t": float(t),
                         "norm": float(per_t[m]),
                         "regularity_label": slot.regularity})
    return rows
