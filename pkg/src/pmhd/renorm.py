"""Renormalization constants: truncated mode-lattice sums with every time
integral done in closed form per mode pair.

All constants are reported as the actual expectations they recentre (values
of constant functions in the e_k = (2 pi)^(-3/2) exp(ikx) basis), so the
Wick-corrected objects built from them are mean zero by construction.
Divergence rates and vanishing mechanisms do not depend on that choice.

Correlation-mode bookkeeping: under "identical" every velocity/magnetic
pairing carries the same covariance; under "independent" cross pairings
vanish.  Each pairing term below carries the corresponding gate, which is
what makes the coupled cancellations inspectable.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from pmhd.besov import chi_profile, rho_profile
from pmhd.noise import MollifierCutoff

TWO_PI = 2.0 * np.pi

VANISHING_LABELS = ("Ct5", "C3", "C378")

# level-2 fields as signed lists of (sign, tag of factor carrying i1/P,
# tag of factor carrying i2/derivative)
LEVEL2_TERMS = {
    "u2": ((1.0, "u", "u"), (-1.0, "b", "b")),
    "b2": ((1.0, "b", "u"), (-1.0, "u", "b")),
}

# level-3 pieces: sign of L x_{3m}, outer tag A, inner tags (B carries the
# projector index, C carries the derivative index), and the wiring
# ("first" = outer factor left of the inner integral, "last" = right).
LEVEL3_TERMS = {
    "u3": {
        1: (1.0, "u", "u", "u", "first"),
        2: (-1.0, "u", "b", "b", "first"),
        3: (1.0, "u", "u", "u", "last"),
        4: (-1.0, "u", "b", "b", "last"),
        5: (-1.0, "b", "b", "u", "first"),
        6: (1.0, "b", "u", "b", "first"),
        7: (-1.0, "b", "b", "u", "last"),
        8: (1.0, "b", "u", "b", "last"),
    },
    "b3": {
        1: (1.0, "b", "u", "u", "first"),
        2: (-1.0, "b", "b", "b", "first"),
        3: (1.0, "u", "b", "u", "last"),
        4: (-1.0, "u", "u", "b", "last"),
        5: (-1.0, "u", "b", "u", "first"),
        6: (1.0, "u", "u", "b", "first"),
        7: (-1.0, "b", "u", "u", "last"),
        8: (1.0, "b", "b", "b", "last"),
    },
}


@dataclass(frozen=True)
class RenormConstant:
    """One evaluated constant, as written to the CSV interfaces."""
    label: str
    i: int
    j: int
    epsilon: float
    k_max: int
    t: float | None
    value: float


def _gate(tag_a: str, tag_b: str, correlation_mode: str) -> float:
    if correlation_mode == "identical":
        return 1.0
    return 1.0 if tag_a == tag_b else 0.0


@lru_cache(maxsize=None)
def _lattice(k_max: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Nonzero modes |k|_inf <= k_max: (k (M,3), |k|^2 (M,), P_hat (M,3,3))."""
    r = np.arange(-k_max, k_max + 1)
    kx, ky, kz = np.meshgrid(r, r, r, indexing="ij")
    k = np.stack([kx.ravel(), ky.ravel(), kz.ravel()], axis=1).astype(float)
    keep = np.any(k != 0, axis=1)
    k = np.ascontiguousarray(k[keep])
    k2 = np.sum(k * k, axis=1)
    P = np.eye(3)[None] - k[:, :, None] * k[:, None, :] / k2[:, None, None]
    for a in (k, k2, P):
        a.setflags(write=False)
    return k, k2, P


def _warn_if_unsaturated(epsilon: float, k_max: int) -> None:
    if k_max < 1.0 / epsilon:
        warnings.warn(
            f"k_max={k_max} truncates the mollifier support radius "
            f"{1.0 / epsilon:.1f}; the lattice sum is truncation-limited",
            stacklevel=3)


def dyadic_pair_weight(radii: np.ndarray) -> np.ndarray:
    """sum over |i-j| <= 1 of theta_i theta_j with theta the dyadic annulus
    profiles (theta_{-1} = chi), as appears in block-paired resonant sums."""
    radii = np.asarray(radii, dtype=np.float64)
    rmax = float(np.max(radii)) if radii.size else 1.0
    j_top = max(1, math.ceil(math.log2(max(rmax, 1.0))) + 1)
    profiles = [chi_profile(radii)]
    for j in range(j_top + 1):
        profiles.append(rho_profile(radii / 2.0 ** j))
    w = np.zeros_like(radii)
    for a in range(len(profiles)):
        for b in range(max(0, a - 1), min(len(profiles), a + 2)):
            w += profiles[a] * profiles[b]
    return w


def _rel_expm1(x: np.ndarray) -> np.ndarray:
    """expm1(x)/x, stable through x = 0."""
    x = np.asarray(x, dtype=np.float64)
    small = np.abs(x) < 1e-7
    safe = np.where(small, 1.0, x)
    return np.where(small, 1.0 + x / 2.0 + x * x / 6.0, np.expm1(safe) / safe)


def _double_heat_integral(M: np.ndarray, S: np.ndarray, t: float) -> np.ndarray:
    """int over [0,t]^2 of exp(-M(2t-s-sbar) - S|s-sbar|), elementwise.

    M > 0 assumed (callers mask the K = 0 pairs, which their integrands kill
    anyway); S > 0 always.
    """
    M = np.asarray(M, dtype=np.float64)
    Ms = np.where(M > 0, M, 1.0)
    first = -np.expm1(-2.0 * Ms * t) / (2.0 * Ms)
    second = t * _rel_expm1((M - S) * t) * np.exp(-2.0 * Ms * t)
    return 2.0 / (Ms + S) * (first - second)


def _nested_heat_integral(A: np.ndarray, B: np.ndarray, t: float) -> np.ndarray:
    """int_0^t e^(-B(t-s)) int_0^s e^(-A(s-sig) - B(t-sig)) dsig ds."""
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    first = np.expm1(2.0 * B * t) / (2.0 * B)
    second = t * _rel_expm1((B - A) * t)
    return np.exp(-2.0 * B * t) / (A + B) * (first - second)


# ---------------------------------------------------------------------------
# C_{0,k}: variance of the level-1 drivers
# ---------------------------------------------------------------------------

def c0_constant(i: int, j: int, epsilon: float, k_max: int,
                which: int = 1, correlation_mode: str = "identical") -> float:
    """E[x_1^i x_1^j](t) for the driver pair `which` in 1..4 ((u,u), (b,b),
    (u,b), (b,u)); stationary, hence t-independent:

        (2 pi)^-3 sum_{k != 0} f(eps k)^2 / (2 |k|^2) P_hat^{ij}(k).
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if which not in (1, 2, 3, 4):
        raise ValueError("which must be in 1..4")
    _warn_if_unsaturated(epsilon, k_max)
    tags = {1: ("u", "u"), 2: ("b", "b"), 3: ("u", "b"), 4: ("b", "u")}[which]
    gate = _gate(*tags, correlation_mode)
    if gate == 0.0:
        return 0.0
    k, k2, P = _lattice(k_max)
    f2 = MollifierCutoff(epsilon).profile(epsilon * np.sqrt(k2)) ** 2
    total = np.sum(f2 / (2.0 * k2) * P[:, i, j])
    return float(gate * total / TWO_PI ** 3)


def c0_matrix(epsilon: float, k_max: int, which: int = 1,
              correlation_mode: str = "identical") -> np.ndarray:
    return np.array([[c0_constant(i, j, epsilon, k_max, which,
                                  correlation_mode)
                      for j in range(3)] for i in range(3)])


# ---------------------------------------------------------------------------
# vanishing constants (odd mode sums annihilated by the projector)
# ---------------------------------------------------------------------------

@dataclass
class VanishingCheck:
    label: str
    value: complex
    scale: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return abs(self.value) <= self.tolerance * max(self.scale, 1e-300)


def vanishing_summand(label: str, k, resolved: int, t: float,
                      epsilon: float, indices: tuple[int, ...]) -> complex:
    """Single index-resolved lattice summand of a vanishing constant.

    `resolved` fixes the contraction index (i2 for Ct5; j1 for C3, C378);
    the summand is odd under k -> -k, which is the cancellation mechanism.
    """
    k = np.asarray(k, dtype=float)
    k2 = float(k @ k)
    if k2 == 0:
        return 0.0
    P = np.eye(3) - np.outer(k, k) / k2
    f2 = float(MollifierCutoff(epsilon).profile(
        epsilon * np.array([math.sqrt(k2)]))[0] ** 2)
    time_int = -math.expm1(-2.0 * k2 * t) / (2.0 * k2)
    if label == "Ct5":
        i, i1, j = indices
        i2 = resolved
        core = sum(P[i2, i3] * P[j, i3] for i3 in range(3))
        return complex(1j * k[i2] * f2 / (2.0 * k2) * P[i, i1] * core
                       * time_int / (2.0 * TWO_PI ** 3))
    w = float(dyadic_pair_weight(np.array([math.sqrt(k2)]))[0])
    j1 = resolved
    if label == "C3":
        i0, i1, j0 = indices
        core = sum(P[j1, i4] * P[j0, i4] for i4 in range(3))
        return complex(w * f2 / k2 * core * 1j * k[j1] * P[i0, i1] * time_int
                       / TWO_PI ** 4.5)
    if label == "C378":
        i0, i1, j0 = indices
        core = sum(P[j1, i4] * P[j0, i4] for i4 in range(3))
        return complex(w * f2 / (2.0 * k2) * core * 1j * k[j1] * P[i0, i1]
                       * time_int / (2.0 * TWO_PI ** 3))
    raise ValueError(f"unknown vanishing constant {label!r}")


def vanishing_constant_check(label: str, t: float = 0.5, epsilon: float = 0.3,
                             k_max: int = 8,
                             indices: tuple[int, ...] = (0, 0, 0),
                             tolerance: float = 1e-12) -> VanishingCheck:
    """Evaluate the printed lattice sum literally; pass iff |value| is below
    tolerance times the absolute-summand scale."""
    if label not in VANISHING_LABELS:
        raise ValueError(f"label must be one of {VANISHING_LABELS}")
    k, k2, P = _lattice(k_max)
    f2 = MollifierCutoff(epsilon).profile(epsilon * np.sqrt(k2)) ** 2
    time_int = -np.expm1(-2.0 * k2 * t) / (2.0 * k2)
    core = np.einsum("mab,mcb->mac", P, P)  # sum over the repeated P index
    if label == "Ct5":
        i, i1, j = indices
        weight = f2 / (2.0 * k2) * P[:, i, i1] * time_int / (2.0 * TWO_PI ** 3)
        terms = 1j * k * core[:, :, j] * weight[:, None]
    else:
        w = dyadic_pair_weight(np.sqrt(k2))
        i0, i1, j0 = indices
        if label == "C3":
            weight = w * f2 / k2 * P[:, i0, i1] * time_int / TWO_PI ** 4.5
        else:
            weight = (w * f2 / (2.0 * k2) * P[:, i0, i1] * time_int
                      / (2.0 * TWO_PI ** 3))
        terms = 1j * k * core[:, :, j0] * weight[:, None]
    value = complex(np.sum(terms))
    scale = float(np.sum(np.abs(terms)))
    return VanishingCheck(label, value, scale, tolerance)


# ---------------------------------------------------------------------------
# the level-2 projector bracket and covariance constants
# ---------------------------------------------------------------------------

def projector_bracket(k1, k2, i1: int, i2: int, j1: int, j2: int) -> float:
    """The eight-term projector bracket of the level-2 cross constant,
    evaluated literally with its printed signs (+ + - - - - + +).

    Terms 1,3,5,7 repeat one product and 2,4,6,8 the other, so the bracket
    cancels identically; this function performs the sixteen multiplications
    anyway and lets the arithmetic exhibit it.
    """
    k1 = np.asarray(k1, dtype=float)
    k2 = np.asarray(k2, dtype=float)
    P1 = np.eye(3) - np.outer(k1, k1) / (k1 @ k1)
    P2 = np.eye(3) - np.outer(k2, k2) / (k2 @ k2)
    total = 0.0
    for s, swap in zip((1, 1, -1, -1, -1, -1, 1, 1),
                       (0, 1, 0, 1, 0, 1, 0, 1)):
        for j3 in range(3):
            for j4 in range(3):
                a, b = (j1, j2) if swap == 0 else (j2, j1)
                total += s * (P2[i2, j4] * P2[a, j4] * P1[i1, j3] * P1[b, j3])
    return total


def _pair_chunks(k_max: int, epsilon: float, chunk_rows: int = 96):
    """Iterate the (k1, k2) double lattice in row chunks, yielding the
    geometric quantities every pairing sum needs."""
    k, k2, P = _lattice(k_max)
    f2 = MollifierCutoff(epsilon).profile(epsilon * np.sqrt(k2)) ** 2
    M = k.shape[0]
    for lo in range(0, M, chunk_rows):
        hi = min(M, lo + chunk_rows)
        ka = k[lo:hi]
        K = ka[:, None, :] + k[None, :, :]
        K2 = np.sum(K * K, axis=-1)
        live = K2 > 0
        K2s = np.where(live, K2, 1.0)
        PK = (np.eye(3)[None, None]
              - K[..., :, None] * K[..., None, :] / K2s[..., None, None])
        yield {
            "ka": ka, "kb": k, "k2a": k2[lo:hi], "k2b": k2,
            "P1": P[lo:hi], "P2": P, "K": K, "K2": K2, "live": live,
            "PK": PK, "f2a": f2[lo:hi], "f2b": f2,
        }


def c2_matrix(left: str, right: str, ts, epsilon: float, k_max: int,
              correlation_mode: str = "identical",
              return_scale: bool = False):
    """E[x_{2,left}^i x_{2,right}^j](t) for every t in ts, as (n_t, 3, 3).

    Pairing the level-2 chaos representations, the two connected pairings
    contract to

      pairing a: [P(K) P(k1) P(K)]^{ij} * (K . P(k2) K)
      pairing b: [P(K) P(k1) K]^i  *  [P(K) P(k2) K]^j

    each gated by the correlation mode of its paired tags and summed over
    the signed tag terms of both factors; time integrals in closed form.
    """
    ts = np.atleast_1d(np.asarray(ts, dtype=np.float64))
    if np.any(ts < 0):
        raise ValueError("times must be nonnegative")
    _warn_if_unsaturated(epsilon, k_max)
    lt = LEVEL2_TERMS[left]
    rt = LEVEL2_TERMS[right]
    ga = gb = 0.0
    for sl, l1, l2 in lt:
        for sr, r1, r2 in rt:
            ga += sl * sr * (_gate(l1, r1, correlation_mode)
                             * _gate(l2, r2, correlation_mode))
            gb += sl * sr * (_gate(l1, r2, correlation_mode)
                             * _gate(l2, r1, correlation_mode))
    n_terms = len(lt) * len(rt)
    value = np.zeros((len(ts), 3, 3))
    scale = np.zeros((len(ts), 3, 3))
    pref = 1.0 / (4.0 * TWO_PI ** 6)
    for c in _pair_chunks(k_max, epsilon):
        G = (pref * c["f2a"][:, None] * c["f2b"][None] * c["live"]
             / (4.0 * c["k2a"][:, None] * c["k2b"][None]))
        if not np.any(G):
            continue
        T = np.stack([_double_heat_integral(
            c["K2"], c["k2a"][:, None] + c["k2b"][None], t) for t in ts])
        Sa = np.einsum("AMia,Aab,AMjb->AMij", c["PK"], c["P1"], c["PK"],
                       optimize=True)
        KPK2 = np.einsum("AMa,Mab,AMb->AM", c["K"], c["P2"], c["K"],
                         optimize=True)
        v = np.einsum("AMia,Aab,AMb->AMi", c["PK"], c["P1"], c["K"],
                      optimize=True)
        w = np.einsum("AMja,Mab,AMb->AMj", c["PK"], c["P2"], c["K"],
                      optimize=True)
        term_a = Sa * KPK2[..., None, None]
        term_b = v[..., :, None] * w[..., None, :]
        combo = ga * term_a + gb * term_b
        value += np.einsum("tAM,AM,AMij->tij", T, G, combo, optimize=True)
        if return_scale:
            scale += np.einsum("tAM,AM,AMij->tij", np.abs(T), np.abs(G),
                               n_terms * (np.abs(term_a) + np.abs(term_b)),
                               optimize=True)
    if return_scale:
        return value, scale
    return value


def c2_constant(left: str, right: str, i: int, j: int, t: float,
                epsilon: float, k_max: int,
                correlation_mode: str = "identical",
                return_scale: bool = False):
    out = c2_matrix(left, right, [t], epsilon, k_max, correlation_mode,
                    return_scale)
    if return_scale:
        return float(out[0][0, i, j]), float(out[1][0, i, j])
    return float(out[0, i, j])


def c23_constant(i: int, j: int, t: float, epsilon: float, k_max: int,
                 return_scale: bool = False):
    """The level-2 cross constant E[x_{2,b}^i x_{2,u}^j](t).

    Evaluated through the signed pairing sum whose eight-term projector
    bracket cancels identically; the companion scale gathers the unsigned
    summands.
    """
    return c2_constant("b2", "u2", i, j, t, epsilon, k_max,
                       correlation_mode="identical",
                       return_scale=return_scale)


# ---------------------------------------------------------------------------
# group-3 constants (exact evaluation of all eight pieces, both wirings)
# ---------------------------------------------------------------------------

@lru_cache(maxsize=8)
def _group3_reductions(ts_key: tuple, epsilon: float, k_max: int
                       ) -> dict[str, np.ndarray]:
    """The four geometry reductions every group-3 piece is built from,
    each (n_t, 3, 3): pairing 1/2 x wiring last/first.

    Pairing 1 couples (B, right) at +-k1 and (C, A) at +-k2, putting the
    dyadic weight and outer heat on k1; pairing 2 swaps the roles.
    """
    ts = np.asarray(ts_key, dtype=np.float64)
    _, k2_all, _ = _lattice(k_max)
    w_all = dyadic_pair_weight(np.sqrt(k2_all))
    out = {key: np.zeros((len(ts), 3, 3))
           for key in ("L1", "F1", "L2", "F2")}
    row = 0
    for c in _pair_chunks(k_max, epsilon, chunk_rows=192):
        nrows = c["ka"].shape[0]
        wa = w_all[row:row + nrows]
        row += nrows
        G = (c["f2a"][:, None] * c["f2b"][None] * c["live"]
             / (4.0 * c["k2a"][:, None] * c["k2b"][None]))
        if not np.any(G):
            continue
        T1 = np.stack([_nested_heat_integral(
            c["K2"] + c["k2b"][None], c["k2a"][:, None], t) for t in ts])
        T2 = np.stack([_nested_heat_integral(
            c["K2"] + c["k2a"][:, None], c["k2b"][None], t) for t in ts])
        GT1 = np.einsum("tAM,AM,A->tAM", T1, G, wa, optimize=True)
        GT2 = np.einsum("tAM,AM,M->tAM", T2, G, w_all, optimize=True)
        # L1: (k1 . P(k2) k1) * [P(k1) P(K) P(k1)]^{ij}
        s = np.einsum("Aa,Mab,Ab->AM", c["ka"], c["P2"], c["ka"],
                      optimize=True)
        mat = np.einsum("Aia,AMab,Abj->AMij", c["P1"], c["PK"], c["P1"],
                        optimize=True)
        out["L1"] += np.einsum("tAM,AM,AMij->tij", GT1, s, mat,
                               optimize=True)
        # F1: (P(k1) P(k2) k1)^i (P(k1) P(K) k1)^j
        SA = np.einsum("Aia,Mab,Ab->AMi", c["P1"], c["P2"], c["ka"],
                       optimize=True)
        SB = np.einsum("Aja,AMab,Ab->AMj", c["P1"], c["PK"], c["ka"],
                       optimize=True)
        out["F1"] += np.einsum("tAM,AMi,AMj->tij", GT1, SA, SB,
                               optimize=True)
        # shared j-leg of both pairing-2 wirings: (P(k2) k1)^j
        SBj = np.einsum("Mja,Aa->AMj", c["P2"], c["ka"], optimize=True)
        # L2: (P(k2) P(K) P(k1) k2)^i (P(k2) k1)^j
        y = np.einsum("Aab,Mb->AMa", c["P1"], c["kb"], optimize=True)
        y = np.einsum("AMab,AMb->AMa", c["PK"], y, optimize=True)
        SAL = np.einsum("Mia,AMa->AMi", c["P2"], y, optimize=True)
        out["L2"] += np.einsum("tAM,AMi,AMj->tij", GT2, SAL, SBj,
                               optimize=True)
        # F2: (P(k2) P(k1) P(K) k2)^i (P(k2) k1)^j
        w1 = np.einsum("AMab,Mb->AMa", c["PK"], c["kb"], optimize=True)
        w2 = np.einsum("Aab,AMb->AMa", c["P1"], w1, optimize=True)
        SAF = np.einsum("Mia,AMa->AMi", c["P2"], w2, optimize=True)
        out["F2"] += np.einsum("tAM,AMi,AMj->tij", GT2, SAF, SBj,
                               optimize=True)
    return out


def group3_matrix(src: str, m: int, right: str, ts, epsilon: float,
                  k_max: int,
                  correlation_mode: str = "identical") -> np.ndarray:
    """Deterministic part of the block-paired resonant product of the m-th
    piece of a level-3 field against a level-1 driver, as (n_t, 3, 3).

    The two connected pairings of the four Gaussian factors carry dyadic
    pair weights and nested heat integrals in closed form; which pairing
    survives depends on the piece's field tags and the correlation mode
    (the coupled cancellations live here).
    """
    if src not in LEVEL3_TERMS or m not in LEVEL3_TERMS[src]:
        raise ValueError("src must be 'u3'/'b3' with m in 1..8")
    ts = np.atleast_1d(np.asarray(ts, dtype=np.float64))
    sign, tag_a, tag_b, tag_c, wiring = LEVEL3_TERMS[src][m]
    g1 = _gate(tag_b, right, correlation_mode) * _gate(tag_c, tag_a,
                                                       correlation_mode)
    g2 = _gate(tag_c, right, correlation_mode) * _gate(tag_b, tag_a,
                                                       correlation_mode)
    value = np.zeros((len(ts), 3, 3))
    if g1 == 0.0 and g2 == 0.0:
        return value
    _warn_if_unsaturated(epsilon, k_max)
    red = _group3_reductions(tuple(float(t) for t in ts), float(epsilon),
                             int(k_max))
    pref = -sign / (4.0 * TWO_PI ** 6)
    if g1 != 0.0:
        value = value + g1 * red["L1" if wiring == "last" else "F1"]
    if g2 != 0.0:
        value = value + g2 * red["L2" if wiring == "last" else "F2"]
    return pref * value


def group3_constant(m: int, right: str, i0: int, j0: int, t: float,
                    epsilon: float, k_max: int,
                    correlation_mode: str = "identical",
                    src: str = "u3") -> float:
    return float(group3_matrix(src, m, right, [t], epsilon, k_max,
                               correlation_mode)[0, i0, j0])


def group3_total_matrix(src: str, right: str, ts, epsilon: float, k_max: int,
                        correlation_mode: str = "identical") -> np.ndarray:
    """Sum of the eight per-piece constants: the full correction of the
    resonant level3 x level1 slot."""
    total = np.zeros((len(np.atleast_1d(ts)), 3, 3))
    for m in range(1, 9):
        total += group3_matrix(src, m, right, ts, epsilon, k_max,
                               correlation_mode)
    return total


def c138_constant(i0: int, j0: int, t: float, epsilon: float,
                  k_max: int) -> float:
    """The representative group-3 constant (velocity level-3 piece m = 8
    against the magnetic driver) under the printed identical
    cross-covariance; diverges as epsilon -> 0."""
    return group3_constant(8, "b", i0, j0, t, epsilon, k_max,
                           correlation_mode="identical", src="u3")
