"""The paracontrolled ansatz and the Picard fixed point producing the
remainder pair (x_4u, x_4b) and its sharp parts (s_u, s_b).

One Picard sweep, every stage pointwise in time and batched over nodes:

    (s, x_4) -> cancelled right-hand sides phi(x_4, s)
             -> s_new(t) = P_t s(0) + Duhamel(phi)
             -> x_4_new  = paraproducts(x_3 + x_4, K) + s_new [ansatz]

until the weighted-norm change of x_4 falls below tolerance.

Orientation convention: every pair tensor PB[t, p, q, ...] holds
Op(A^p, B^q); brackets are assembled in (i1, j) order, where j contracts
with the outer derivative and i1 with the projector.  Terms are listed
one per line with their source monomial, and _tr swaps the pair axes.

The cancelled right-hand sides contain no low-high paraproduct of a
level-3/4 field against a driver: those cancel structurally against the
heat derivative of the ansatz and are never assembled (see
PHI_SHARP_TERMS, audited by the tests).  Resonant products of the
remainder against drivers go through the ansatz commutator route: the
projector/paraproduct commutator piece plus the plain resonant
K-gradient slots; the raw resonant product is retained as a debug route
(for fixed mollification both agree, every field being smooth).

Mode-0 renormalization constants never reach phi: the outer divergence
kills constant fields, so raw products are used here while the corrected
objects live in the bundle norms.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from pmhd.besov import holder_norms_batch
from pmhd.grid import (TorusGrid, leray_project_coeffs, pack_coeffs,
                       product_pairs_diag, unpack_coeffs)
from pmhd.operators import (block_phys_diag, para_lt_pairs_diag,
                            para_res_pairs_diag)
from pmhd.tree import ExponentRecord, TreeLevels, duhamel

# term ledger of the cancelled right-hand sides (kind, left, right);
# ("para_lt", "level34", "level1") is structurally absent
PHI_SHARP_TERMS: tuple[tuple[str, str, str], ...] = (
    ("para_gt", "level34", "level1"),
    ("resonant_diamond", "level3", "level1"),
    ("resonant_diamond", "level4", "level1"),
    ("wick", "level2", "level2"),
    ("product", "level2", "level34"),
    ("product", "level34", "level34"),
    ("para_lt", "L_level34", "K"),
    ("para_lt", "grad_level34", "grad_K"),
)


@dataclass(frozen=True)
class ExponentViolation:
    constraint: str
    detail: str


def validate_exponents(e: ExponentRecord) -> list[ExponentViolation]:
    """Check the admissible-exponent inequalities; empty list means valid."""
    out = []
    if not (0 < e.delta0 < 0.5):
        out.append(ExponentViolation("delta0", "delta0 must lie in (0, 1/2)"))
    if not (0.5 < e.z < 0.5 + e.delta0):
        out.append(ExponentViolation("z", "z must lie in (1/2, 1/2+delta0)"))
    cap = min(e.delta0, (1 - 2 * e.delta0) / 3, (1 - e.z) / 4, 2 * e.z - 1)
    if not (0 < e.delta < cap):
        out.append(ExponentViolation(
            "delta-window",
            f"delta must lie in (0, {cap:.4f}) = "
            "(0, delta0 ^ (1-2 delta0)/3 ^ (1-z)/4 ^ (2z-1))"))
    hi = e.z + 2 * e.delta - 0.5
    if not (e.delta / 2 < e.beta < hi):
        out.append(ExponentViolation(
            "beta-window", f"beta must lie in (delta/2, {hi:.4f})"))
    if not (hi < 0.5 - 2 * e.delta):
        out.append(ExponentViolation(
            "beta-cap", "z + 2 delta - 1/2 must stay below 1/2 - 2 delta"))
    if not (e.delta <= e.delta0 < 0.5 - 1.5 * e.delta):
        out.append(ExponentViolation(
            "delta-delta0", "need delta <= delta0 < 1/2 - 3 delta/2"))
    return out


# ---------------------------------------------------------------------------
# small assembly helpers
# ---------------------------------------------------------------------------

U_ = np.s_[0:3]   # velocity components of a stacked (6, ...) pair
B_ = np.s_[3:6]   # magnetic components


def _div_leray(grid: TorusGrid, W: np.ndarray) -> np.ndarray:
    """-1/2 P^{i i1} d_j W^{..., i1, j, x}: contract the second pair axis
    with the derivative, the first with the projector."""
    k = grid.k_vectors
    D = -0.5j * np.einsum("jxyz,...ajxyz->...axyz", k, W)
    return leray_project_coeffs(grid, D)


def _tr(block: np.ndarray) -> np.ndarray:
    return np.swapaxes(block, -5, -4)


def _grad6(grid: TorusGrid, c: np.ndarray) -> np.ndarray:
    """(T, 6, x) -> (T, 3, 6, x): derivative axis in front of components."""
    k = grid.k_vectors
    return 1j * k[None, :, None] * c[:, None]


def _apply_leray_multiplier(grid: TorusGrid, c3: np.ndarray) -> np.ndarray:
    """Apply P_hat componentwise to a (..., 3, x) field."""
    return leray_project_coeffs(grid, c3)


def weighted_sup_norm(grid: TorusGrid, times: np.ndarray, path: np.ndarray,
                      alpha: float, weight_exp: float) -> float:
    """sup_t t^weight_exp ||path(t)||_{C^alpha} over the positive nodes."""
    norms = holder_norms_batch(path[:, None], grid, alpha)
    w = times ** weight_exp
    return float(np.max(w * norms))


# ---------------------------------------------------------------------------
# solver context: iteration-invariant data
# ---------------------------------------------------------------------------

@dataclass
class SolverContext:
    levels: TreeLevels
    exponents: ExponentRecord
    y0u: np.ndarray
    y0b: np.ndarray
    x1: np.ndarray = field(repr=False, default=None)      # (T, 6, x)
    x2: np.ndarray = field(repr=False, default=None)
    x3: np.ndarray = field(repr=False, default=None)
    K: np.ndarray = field(repr=False, default=None)
    L3: np.ndarray = field(repr=False, default=None)
    gradK: np.ndarray = field(repr=False, default=None)   # (T, 3, 6, x)
    pres3_packed: np.ndarray = field(repr=False, default=None)
    x1_blocks: np.ndarray = field(repr=False, default=None)
    K_blocks: np.ndarray = field(repr=False, default=None)
    sharp0: np.ndarray = field(repr=False, default=None)  # (6, x)

    @property
    def grid(self) -> TorusGrid:
        return self.levels.grid

    @property
    def times(self) -> np.ndarray:
        return self.levels.times

    def pres3(self, sl) -> np.ndarray:
        return unpack_coeffs(self.grid, self.pres3_packed[sl])


def build_context(levels: TreeLevels, exponents: ExponentRecord,
                  y0u: np.ndarray, y0b: np.ndarray) -> SolverContext:
    grid = levels.grid
    d = levels.driver
    x1 = np.concatenate([d.xu, d.xb], axis=1)
    x2 = np.concatenate([levels.u2, levels.b2], axis=1)
    x3 = np.concatenate([levels.u3, levels.b3], axis=1)
    K = np.concatenate([levels.Ku, levels.Kb], axis=1)
    L3 = np.concatenate([levels.L3u, levels.L3b], axis=1)
    gradK = _grad6(grid, K)
    # plain resonant level3 x level1 blocks [x3-comp, x1-comp]
    pres3 = para_res_pairs_diag(grid, x3, x1)
    pres3_packed = pack_coeffs(grid, pres3)
    x1_blocks = block_phys_diag(grid, x1)
    K_blocks = block_phys_diag(grid, K)
    y0 = np.concatenate([
        leray_project_coeffs(grid, np.asarray(y0u, dtype=complex)),
        leray_project_coeffs(grid, np.asarray(y0b, dtype=complex))])
    y0[:, 0, 0, 0] = 0.0
    sharp0 = y0 - x1[0]
    return SolverContext(levels, exponents, y0u, y0b, x1, x2, x3, K, L3,
                         gradK, pres3_packed, x1_blocks, K_blocks, sharp0)


# ---------------------------------------------------------------------------
# the cancelled right-hand sides
# ---------------------------------------------------------------------------

def _resonant_diamond(ctx: SolverContext, sl, x34: np.ndarray,
                      sharp: np.ndarray) -> tuple[np.ndarray, np.ndarray,
                                                  np.ndarray, np.ndarray]:
    """The four resonant remainder-against-driver objects on a node chunk,
    each (c, 3, 3, x) indexed [remainder comp, driver comp].

    Ansatz route: for each (argument, K-field) wiring the convective
    paraproduct pi_lt(x34^l, d_l K) enters once with the projector applied
    outside (the Leray/paraproduct commutator piece) and once inside
    (which collapses to d(PK) = dK since K is divergence-free, giving the
    commutator-plus-slot recombination); the derivative-on-the-argument
    companions carry no correction.  The projected gradient slots are the
    plain resonant products by definition.
    """
    grid = ctx.grid
    T = x34.shape[0]
    gradK = ctx.gradK[sl]                       # (c, 3 deriv, 6, x)
    x1 = ctx.x1[sl]

    # pi_lt(x34^l, d_l K^m): pairs [x34-comp l, (deriv, K-comp)]
    flatg = gradK.reshape((T, 18) + gradK.shape[-3:])
    PL = para_lt_pairs_diag(grid, x34, flatg)
    PL = PL.reshape((T, 6, 3, 6) + PL.shape[-3:])   # [l, deriv, K-comp, x]

    def convective(arg_sl, K_sl):
        # sum_l pi_lt(x34^l, d_l K^m), m free
        block = PL[:, arg_sl][:, :, :, K_sl]      # (c, 3 l, 3 deriv, 3 m, x)
        return np.einsum("tddmxyz->tmxyz", block)

    conv = {}
    for aname, asl in (("u", U_), ("b", B_)):
        for kname, ksl in (("Ku", U_), ("Kb", B_)):
            conv[aname, kname] = convective(asl, ksl)

    # pi_lt(d_l x34^m, K^l): pairs [(deriv, x34-comp), K-comp]
    gradx = _grad6(grid, x34).reshape((T, 18) + x34.shape[-3:])
    PD = para_lt_pairs_diag(grid, gradx, ctx.K[sl])
    PD = PD.reshape((T, 3, 6, 6) + PD.shape[-3:])   # [deriv, x34-comp, K, x]

    deriv = {}
    for aname, asl in (("u", U_), ("b", B_)):
        for kname, ksl in (("Ku", U_), ("Kb", B_)):
            block = PD[:, :, asl][:, :, :, ksl]     # (c, 3 d, 3 m, 3 K, x)
            deriv[aname, kname] = np.einsum("tdmdxyz->tmxyz", block)

    # first arguments of the resonant products:
    #  per wiring: [P-outside convective - P-inside convective] and the
    #  P-inside convective itself (the slot/commutator recombination),
    #  plus the projected derivative companion
    firsts = []
    index = {}
    for key in (("u", "Ku"), ("u", "Kb"), ("b", "Ku"), ("b", "Kb")):
        c = conv[key]
        inside = c  # P-inside: d(PK) = dK, identical by divergence freence
        outside = _apply_leray_multiplier(grid, c)
        dcomp = _apply_leray_multiplier(grid, deriv[key])
        index[key] = len(firsts)
        firsts.extend([outside - inside, inside, dcomp])
    firsts.append(sharp[:, U_])
    firsts.append(sharp[:, B_])
    stacked = np.concatenate(firsts, axis=1)

    R = para_res_pairs_diag(grid, stacked, x1)       # [first, x1-comp]

    def term(key):
        ofs = index[key] * 3
        comm = R[:, ofs:ofs + 3]        # outside - inside
        inner = R[:, ofs + 3:ofs + 6]   # inside
        dcmp = R[:, ofs + 6:ofs + 9]    # derivative companion
        return comm + inner, dcmp

    n_first = stacked.shape[1]
    sh_u = R[:, n_first - 6:n_first - 3]
    sh_b = R[:, n_first - 3:n_first]

    T2_u_Ku, t3_u_Ku = term(("u", "Ku"))
    T2_u_Kb, t3_u_Kb = term(("u", "Kb"))
    T2_b_Ku, t3_b_Ku = term(("b", "Ku"))
    T2_b_Kb, t3_b_Kb = term(("b", "Kb"))

    rd_u4 = -0.5 * (T2_u_Ku + t3_u_Ku - T2_b_Kb - t3_b_Kb) + sh_u
    rd_b4 = -0.5 * (T2_u_Kb - t3_u_Kb - T2_b_Ku + t3_b_Ku) + sh_b
    # [remainder comp, x1 comp]; split the driver axis afterwards
    return (rd_u4[:, :, U_], rd_u4[:, :, B_],
            rd_b4[:, :, B_], rd_b4[:, :, U_])


def phi_sharp_chunk(ctx: SolverContext, sl, y4: np.ndarray,
                    sharp: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Assemble the cancelled right-hand sides on a chunk of time nodes.

    y4, sharp: (c, 6, x) slices of the current iterates.
    """
    grid = ctx.grid
    x1, x2, x3 = ctx.x1[sl], ctx.x2[sl], ctx.x3[sl]
    K, L3 = ctx.K[sl], ctx.L3[sl]
    x34 = x3 + y4
    x1b = ctx.x1_blocks[:, sl]
    Kb = ctx.K_blocks[:, sl]

    # products: PPA[p in (x1, x2), q in x34], PPB[x34, x34], PPC[x2, x2]
    first = np.concatenate([x1, x2], axis=1)
    PPA = product_pairs_diag(grid, first, x34)
    PPB = product_pairs_diag(grid, x34, x34)
    PPC = product_pairs_diag(grid, x2, x2)
    a1 = {"u1": np.s_[0:3], "b1": np.s_[3:6], "u2": np.s_[6:9],
          "b2": np.s_[9:12]}

    def pa(p, q):
        return PPA[:, a1[p]][:, :, q]

    def pb(p, q):
        return PPB[:, p][:, :, q]

    def pc(p, q):
        return PPC[:, p][:, :, q]

    # L x_4 per the remainder equations; constants die under the divergence
    W_u = (pa("u1", U_) + _tr(pa("u1", U_))        # u1^{i1} U^j + U^{i1} u1^j
           + pc(U_, U_)                            # u2^{i1} u2^j
           + pa("u2", U_) + _tr(pa("u2", U_))      # u2^{i1} U^j + u2^j U^{i1}
           + pb(U_, U_)                            # U^{i1} U^j
           - pa("b1", B_) - _tr(pa("b1", B_))
           - pc(B_, B_)
           - pa("b2", B_) - _tr(pa("b2", B_))
           - pb(B_, B_))
    W_b = (pa("b1", U_)                            # b1^{i1} U^j
           + _tr(pa("u1", B_))                     # B^{i1} u1^j
           + pc(B_, U_)                            # b2^{i1} u2^j
           + pa("b2", U_)                          # b2^{i1} U^j
           + _tr(pa("u2", B_))                     # u2^j B^{i1}
           + pb(B_, U_)                            # B^{i1} U^j
           - pa("u1", B_)                          # - u1^{i1} B^j
           - _tr(pa("b1", U_))                     # - U^{i1} b1^j
           - pc(U_, B_)                            # - u2^{i1} b2^j
           - pa("u2", B_)                          # - u2^{i1} B^j
           - _tr(pa("b2", U_))                     # - b2^j U^{i1}
           - pb(U_, B_))                           # - U^{i1} B^j
    L4_u = _div_leray(grid, W_u)
    L4_b = _div_leray(grid, W_b)
    L34 = L3 + np.concatenate([L4_u, L4_b], axis=1)

    # pi_gt(x34, x1) = pi_lt(x1, x34): blocks [x1-comp, x34-comp]
    PG = para_lt_pairs_diag(grid, x1, x34, ablocks_phys=x1b)

    def pg(c1, a34):
        return PG[:, c1][:, :, a34]

    # pi_lt(L x34, K): blocks [L-comp, K-comp]
    PLL = para_lt_pairs_diag(grid, L34, K, bblocks_phys=Kb)

    def pll(a, b):
        return PLL[:, a][:, :, b]

    # gradient paraproducts, derivative contracted
    gx = _grad6(grid, x34)
    gK = ctx.gradK[sl]
    GG = 0.0
    for m in range(3):
        GG = GG + para_lt_pairs_diag(grid, gx[:, m], gK[:, m])

    def gg(a, b):
        return GG[:, a][:, :, b]

    # plain resonant level-3 slots [x3-comp, x1-comp]
    PR = ctx.pres3(sl)

    def pr(a3, c1):
        return PR[:, a3][:, :, c1]

    # resonant remainder objects [remainder comp, driver comp]
    rd_u4u1, rd_u4b1, rd_b4b1, rd_b4u1 = _resonant_diamond(ctx, sl, x34,
                                                           sharp)

    # ---- velocity bracket, terms in (i1, j) orientation ----
    bu = (pg(U_, U_)                 # pi_gt(x34_u^j, u1^{i1})
          + _tr(pg(U_, U_))          # pi_gt(x34_u^{i1}, u1^j)
          + _tr(pr(U_, U_))          # pi_0<>(u3^j, u1^{i1})
          + pr(U_, U_)               # pi_0<>(u3^{i1}, u1^j)
          + _tr(rd_u4u1)             # pi_0<>(u4^j, u1^{i1})
          + rd_u4u1                  # pi_0<>(u4^{i1}, u1^j)
          + pc(U_, U_)               # u2^{i1} <> u2^j
          + pa("u2", U_)             # u2^{i1} x34_u^j
          + _tr(pa("u2", U_))        # u2^j x34_u^{i1}
          + pb(U_, U_)               # x34_u^{i1} x34_u^j
          - pg(B_, B_) - _tr(pg(B_, B_))
          - _tr(pr(B_, B_)) - pr(B_, B_)
          - _tr(rd_b4b1) - rd_b4b1
          - pc(B_, B_) - pa("b2", B_) - _tr(pa("b2", B_)) - pb(B_, B_)
          - pll(U_, U_)              # - pi_lt(L x34_u^{i1}, Ku^j)
          - _tr(pll(U_, U_))         # - pi_lt(L x34_u^j, Ku^{i1})
          + pll(B_, B_) + _tr(pll(B_, B_))
          + 2 * gg(U_, U_) + 2 * _tr(gg(U_, U_))
          - 2 * gg(B_, B_) - 2 * _tr(gg(B_, B_)))

    # ---- magnetic bracket ----
    bb = (pg(B_, U_)                 # pi_gt(x34_u^j, b1^{i1})
          + _tr(pr(U_, B_))          # pi_0<>(u3^j, b1^{i1})
          + _tr(rd_u4b1)             # pi_0<>(u4^j, b1^{i1})
          + _tr(pg(U_, B_))          # pi_gt(x34_b^{i1}, u1^j)
          + pr(B_, U_)               # pi_0<>(b3^{i1}, u1^j)
          + rd_b4u1                  # pi_0<>(b4^{i1}, u1^j)
          + pc(B_, U_)               # b2^{i1} <> u2^j
          + pa("b2", U_)             # b2^{i1} x34_u^j
          + _tr(pa("u2", B_))        # u2^j x34_b^{i1}
          + pb(B_, U_)               # x34_b^{i1} x34_u^j
          - pg(U_, B_)               # - pi_gt(x34_b^j, u1^{i1})
          - _tr(pr(B_, U_))          # - pi_0<>(b3^j, u1^{i1})
          - _tr(rd_b4u1)             # - pi_0<>(b4^j, u1^{i1})
          - _tr(pg(B_, U_))          # - pi_gt(x34_u^{i1}, b1^j)
          - pr(U_, B_)               # - pi_0<>(u3^{i1}, b1^j)
          - rd_u4b1                  # - pi_0<>(u4^{i1}, b1^j)
          - pc(U_, B_)               # - u2^{i1} <> b2^j
          - pa("u2", B_)             # - u2^{i1} x34_b^j
          - _tr(pa("b2", U_))        # - b2^j x34_u^{i1}
          - pb(U_, B_)               # - x34_u^{i1} x34_b^j
          + pll(U_, B_)              # + pi_lt(L x34_u^{i1}, Kb^j)
          - _tr(pll(U_, B_))         # - pi_lt(L x34_u^j, Kb^{i1})
          - pll(B_, U_)              # - pi_lt(L x34_b^{i1}, Ku^j)
          + _tr(pll(B_, U_))         # + pi_lt(L x34_b^j, Ku^{i1})
          - 2 * gg(U_, B_) + 2 * _tr(gg(U_, B_))
          + 2 * gg(B_, U_) - 2 * _tr(gg(B_, U_)))

    return _div_leray(grid, bu), _div_leray(grid, bb)


def raw_resonant_remainder(ctx: SolverContext, sl, y4: np.ndarray
                           ) -> np.ndarray:
    """Debug route: plain pi_0(x4, x1) blocks [x4-comp, x1-comp]."""
    return para_res_pairs_diag(ctx.grid, y4, ctx.x1[sl])


def ansatz_remainder(ctx: SolverContext, x34: np.ndarray,
                     sharp: np.ndarray) -> np.ndarray:
    """x_4 from the paracontrolled ansatz given totals x34 = x3 + x4 and
    the sharp parts, all nodes at once: (T, 6, x)."""
    grid = ctx.grid
    PA = para_lt_pairs_diag(grid, x34, ctx.K, bblocks_phys=ctx.K_blocks)

    def p(a, b):
        return PA[:, a][:, :, b]

    W_u = p(U_, U_) + _tr(p(U_, U_)) - p(B_, B_) - _tr(p(B_, B_))
    W_b = -p(U_, B_) + _tr(p(U_, B_)) + p(B_, U_) - _tr(p(B_, U_))
    u4 = _div_leray(grid, W_u) + sharp[:, U_]
    b4 = _div_leray(grid, W_b) + sharp[:, B_]
    return np.concatenate([u4, b4], axis=1)


# ---------------------------------------------------------------------------
# the Picard iteration
# ---------------------------------------------------------------------------

@dataclass
class ParacontrolledState:
    """Converged (or last-iterate) solver state with its run report."""
    ctx: SolverContext
    sharp: np.ndarray         # (T, 6, x)
    y4: np.ndarray            # (T, 6, x)
    residual_history: list[float]
    weighted40_history: list[float]
    converged: bool
    iterations: int
    relaxed: bool

    @property
    def grid(self) -> TorusGrid:
        return self.ctx.grid

    @property
    def times(self) -> np.ndarray:
        return self.ctx.times

    def total(self) -> np.ndarray:
        """x1 + x2 + x3 + x4, shape (T, 6, x)."""
        return (self.ctx.x1 + self.ctx.x2 + self.ctx.x3 + self.y4)

    def lipschitz_ratios(self) -> list[float]:
        r = self.residual_history
        return [r[i + 1] / r[i] for i in range(len(r) - 1) if r[i] > 0]

    def weighted_norm(self, alpha: float, weight_exp: float,
                      path: np.ndarray | None = None) -> float:
        path = self.y4 if path is None else path
        return weighted_sup_norm(self.grid, self.times, path, alpha,
                                 weight_exp)

    def ansatz_residual(self) -> float:
        """sup-norm defect of the ansatz at the stored times."""
        again = ansatz_remainder(self.ctx, self.ctx.x3 + self.y4, self.sharp)
        scale = max(float(np.max(np.abs(self.y4))), 1e-300)
        return float(np.max(np.abs(again - self.y4))) / scale

    def report(self) -> dict:
        e = self.ctx.exponents
        w40 = self.weighted_norm(0.5 - e.delta0,
                                 (0.5 - e.delta0 + e.z) / 2.0)
        w46 = self.weighted_norm(0.5 + e.beta, (0.5 + e.beta + e.z) / 2.0)
        final = holder_norms_batch(self.total()[-1][None, None], self.grid,
                                   -e.z)
        return {
            "exponents": vars(e).copy(),
            "T": float(self.times[-1]),
            "iterations": self.iterations,
            "converged": self.converged,
            "relaxed": self.relaxed,
            "residual_history": self.residual_history,
            "weighted40_history": self.weighted40_history,
            "weighted_norm_40": w40,
            "weighted_norm_46": w46,
            "final_total_minus_z_norm": float(final[0, 0]),
            "lipschitz_ratios": self.lipschitz_ratios(),
        }


def _phi_paths(ctx: SolverContext, y4: np.ndarray, sharp: np.ndarray,
               chunk: int) -> np.ndarray:
    T = y4.shape[0]
    out = np.empty_like(y4)
    for lo in range(0, T, chunk):
        sl = np.s_[lo:lo + chunk]
        pu, pb = phi_sharp_chunk(ctx, sl, y4[sl], sharp[sl])
        out[sl] = np.concatenate([pu, pb], axis=1)
    return out


def phi_sharp(ctx: SolverContext, y4: np.ndarray, sharp: np.ndarray,
              chunk: int = 8) -> np.ndarray:
    """The cancelled right-hand sides (phi_u, phi_b) on all nodes (T, 6, x)."""
    return _phi_paths(ctx, y4, sharp, chunk)


def picard_solve(ctx: SolverContext, tol: float = 1e-10, max_iter: int = 60,
                 chunk: int = 8, relaxation: float | None = None
                 ) -> ParacontrolledState:
    """Iterate sharp fields -> ansatz -> cancelled right-hand sides ->
    Duhamel until the weighted-norm change of the remainder drops below
    tol (relative to the remainder size).

    If the residual oscillates upward twice, a relaxation factor of 0.5 is
    engaged on the sharp update.  Exceeding max_iter returns a state with
    converged=False carrying the full residual history.
    """
    grid = ctx.grid
    times = ctx.times
    e = ctx.exponents
    alpha40 = 0.5 - e.delta0
    wexp40 = (0.5 - e.delta0 + e.z) / 2.0

    heat0 = np.exp(-grid.k_squared * times[:, None, None, None, None]
                   * np.ones((1, 6, 1, 1, 1)))
    sharp = heat0 * ctx.sharp0[None]
    y4 = ansatz_remainder(ctx, ctx.x3, sharp)  # first sweep: x4 ~ 0 inside

    residuals: list[float] = []
    w40s: list[float] = []
    relaxed = False
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        phi = phi_sharp(ctx, y4, sharp, chunk)
        sharp_new = duhamel(grid, times, phi, initial=ctx.sharp0)
        if relaxed:
            sharp_new = 0.5 * (sharp_new + sharp)
        y4_new = ansatz_remainder(ctx, ctx.x3 + y4, sharp_new)
        diff = weighted_sup_norm(grid, times, y4_new - y4, alpha40, wexp40)
        size = max(weighted_sup_norm(grid, times, y4_new, alpha40, wexp40),
                   1e-300)
        residuals.append(diff / size)
        w40s.append(size)
        sharp, y4 = sharp_new, y4_new
        if residuals[-1] < tol:
            converged = True
            break
        if (relaxation is None and not relaxed and len(residuals) >= 3
                and residuals[-1] > residuals[-2] > residuals[-3]):
            relaxed = True
        elif relaxation is not None:
            relaxed = True
    return ParacontrolledState(ctx, sharp, y4, residuals, w40s, converged,
                               it, relaxed)


def solve(levels: TreeLevels, exponents: ExponentRecord, y0u: np.ndarray,
          y0b: np.ndarray, tol: float = 1e-10, max_iter: int = 60,
          chunk: int = 8) -> ParacontrolledState:
    """Build the context and run the fixed point; validates exponents."""
    violations = validate_exponents(exponents)
    if violations:
        msgs = "; ".join(f"{v.constraint}: {v.detail}" for v in violations)
        raise ValueError(f"inadmissible exponents: {msgs}")
    ctx = build_context(levels, exponents, y0u, y0b)
    return picard_solve(ctx, tol=tol, max_iter=max_iter, chunk=chunk)
