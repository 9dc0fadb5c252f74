"""Experiment runner: every verification pipeline behind one command-line
tool, emitting deterministic CSV/JSON artifacts.

Subcommands: covariance, wick, renorm-sweep, vanishing, chaos-scaling,
tree-norms, fixedpoint, energy, subcrit.  Flags: --config <json>, --seed,
--out, --threads.  Rerunning a config reproduces byte-identical CSV
bodies (a timestamp comment line is the only varying part) and every row
carries the hash of the resolved configuration.  Exit status is nonzero
on invalid configuration (with the violated fields listed) or on a failed
numerical verdict (with the report attached).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time

import numpy as np

SCHEMA = "pmhd-experiment-v1"

EXPERIMENTS = {}
DEFAULTS = {}


def experiment(name, **defaults):
    def deco(fn):
        EXPERIMENTS[name] = fn
        DEFAULTS[name] = defaults
        return fn
    return deco


def fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x))
    return str(x)


def config_hash(cfg: dict) -> str:
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:12]


def write_csv(path: str, rows: list[dict], cfg_hash: str) -> None:
    header = list(rows[0].keys()) if rows else []
    with open(path, "w") as fh:
        stamp = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
        fh.write(f"# generated_at={stamp}\n")
        fh.write(",".join(header + ["config_hash"]) + "\n")
        for row in rows:
            fh.write(",".join(fmt(row[c]) for c in header)
                     + f",{cfg_hash}\n")


def write_json(path: str, doc: dict) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")


class ConfigError(Exception):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


def _validate_epsilons(eps):
    bad = []
    if not eps:
        bad.append("epsilon list empty")
    if any(b >= a for a, b in zip(eps, eps[1:])):
        bad.append("epsilon list must be strictly decreasing")
    if any(e <= 0 for e in eps):
        bad.append("epsilons must be positive")
    if bad:
        raise ConfigError(bad)


def _exponents(cfg):
    from pmhd.solver import validate_exponents
    from pmhd.tree import ExponentRecord
    e = ExponentRecord(**cfg.get("exponents", {}))
    violations = validate_exponents(e)
    if violations:
        raise ConfigError([f"exponents.{v.constraint}: {v.detail}"
                           for v in violations])
    return e


# ---------------------------------------------------------------------------
# covariance
# ---------------------------------------------------------------------------

@experiment("covariance", n_per_axis=8, epsilon=0.35, mc_samples=100000,
            n_pairs=20, seed=1)
def run_covariance(cfg, out, h):
    from pmhd.grid import TorusGrid
    from pmhd.noise import (MollifierCutoff, analytic_mode_covariance,
                            sample_mode_ou)
    grid = TorusGrid(cfg["n_per_axis"])
    cut = MollifierCutoff(cfg["epsilon"])
    rng = np.random.default_rng(cfg["seed"])
    n = cfg["mc_samples"]
    rows = []
    worst = 0.0
    for mode in ("identical", "independent"):
        made = 0
        while made < cfg["n_pairs"]:
            k = tuple(int(c) for c in rng.integers(-2, 3, 3))
            if k == (0, 0, 0):
                continue
            conj_pair = rng.random() < 0.8
            kp = (tuple(-c for c in k) if conj_pair
                  else tuple(int(c) for c in rng.integers(-2, 3, 3)))
            if kp == (0, 0, 0):
                continue
            i, j = (int(c) for c in rng.integers(0, 3, 2))
            ts = sorted(float(x) for x in rng.uniform(0.0, 0.3, 2))
            fa, fb = ("u", "u") if rng.random() < 0.5 else ("u", "b")
            xu, xb = sample_mode_ou(grid, cut, ts, (cfg["seed"], made), k,
                                    n, mode)
            left = {"u": xu, "b": xb}[fa][:, 0, i]
            if conj_pair:
                # Xhat(-k, s) = conj Xhat(k, s)
                right = np.conj({"u": xu, "b": xb}[fb][:, 1, j])
            else:
                yu, yb = sample_mode_ou(grid, cut, ts,
                                        (cfg["seed"], made, 1), kp, n, mode)
                right = {"u": yu, "b": yb}[fb][:, 1, j]
            prod = left * right
            analytic = float(analytic_mode_covariance(grid, cut, k, kp,
                                                      ts[0], ts[1])[i, j])
            if fa != fb and mode == "independent":
                analytic = 0.0
            se = float(np.std(prod.real, ddof=1) / math.sqrt(n)) + 1e-300
            z = abs(float(np.mean(prod.real)) - analytic) / se
            worst = max(worst, z)
            rows.append({
                "mode": mode, "kx": k[0], "ky": k[1], "kz": k[2],
                "kpx": kp[0], "kpy": kp[1], "kpz": kp[2], "i": i, "j": j,
                "field_a": fa, "field_b": fb, "t": ts[0], "s": ts[1],
                "analytic": analytic,
                "empirical": float(np.mean(prod.real)), "se": se, "z": z,
            })
            made += 1
    write_csv(os.path.join(out, "covariance.csv"), rows, h)
    ok = worst <= 3.0
    return {"worst_z": worst, "passed": bool(ok)}, 0 if ok else 1


# ---------------------------------------------------------------------------
# wick
# ---------------------------------------------------------------------------

@experiment("wick", n_per_axis=8, epsilon=0.35, mc_samples=100000, seed=2)
def run_wick(cfg, out, h):
    from pmhd.grid import TorusGrid
    from pmhd.noise import MollifierCutoff
    from pmhd.wick import (DriverCovariance, TaggedGaussian, mc_validate,
                           pairing_expectation, pairing_terms_json,
                           wick_product)
    grid = TorusGrid(cfg["n_per_axis"])
    cut = MollifierCutoff(cfg["epsilon"])
    rows = []

    vs = [TaggedGaussian("u", i % 3, (1, 0, 0), 0.05 * i) for i in range(8)]
    for deg, want in ((1, 1), (2, 2), (3, 6), (4, 24)):
        got = json.loads(pairing_terms_json(vs[:deg],
                                            vs[4:4 + deg]))["n_terms"]
        rows.append({"check": f"pairing_terms_degree_{deg}",
                     "value": float(got), "expected": float(want),
                     "gap": abs(got - want), "passed": got == want})

    # degree-4 pairing formula against the Isserlis brute force on a
    # random symmetric covariance assignment
    class RandomOracle:
        def __init__(self, seed):
            self.rng = np.random.default_rng(seed)
            self.cache = {}

        def __call__(self, a, b):
            key = frozenset([a, b])
            if key not in self.cache:
                self.cache[key] = float(self.rng.standard_normal())
            return self.cache[key]

    def all_pairings(items):
        items = list(items)
        if not items:
            yield []
            return
        first = items.pop(0)
        for idx, other in enumerate(items):
            rest = items[:idx] + items[idx + 1:]
            for tail in all_pairings(rest):
                yield [(first, other)] + tail

    left, right = vs[:4], vs[4:8]
    oracle = RandomOracle(cfg["seed"])
    brute = 0.0
    for sl, pl, il in wick_product(left).terms:
        for sr, pr, ir in wick_product(right).terms:
            term = sl * sr
            for a, b in pl:
                term *= oracle(left[a], left[b])
            for a, b in pr:
                term *= oracle(right[a], right[b])
            raw = [left[x] for x in il] + [right[x] for x in ir]
            if len(raw) % 2:
                continue
            moment = 0.0
            for pairing in all_pairings(raw):
                mterm = 1.0
                for a, b in pairing:
                    mterm *= oracle(a, b)
                moment += mterm
            term *= moment
            brute += term
    fast = pairing_expectation(left, right, oracle)
    gap = abs(fast - brute)
    rows.append({"check": "degree4_isserlis", "value": float(fast.real),
                 "expected": float(brute), "gap": float(gap),
                 "passed": gap <= 1e-12 * max(1.0, abs(brute))})

    # Monte Carlo z-scores against the driver law
    driver = DriverCovariance(grid, cut, "identical")
    indep = DriverCovariance(grid, cut, "independent")
    checks = [
        ("mc_second_self", driver,
         [TaggedGaussian("u", 1, (1, 0, 0), 0.0),
          TaggedGaussian("u", 1, (-1, 0, 0), 0.05)], None),
        ("mc_fourth_zero_mean", driver,
         [TaggedGaussian("u", 1, (1, 0, 0), 0.0),
          TaggedGaussian("u", 2, (-1, 0, 0), 0.0),
          TaggedGaussian("u", 1, (0, 1, 0), 0.0),
          TaggedGaussian("u", 2, (0, -1, 0), 0.0)],
         [TaggedGaussian("u", 1, (1, 1, 0), 0.0)]),
        ("mc_mixed_independent", indep,
         [TaggedGaussian("u", 1, (1, 0, 0), 0.0),
          TaggedGaussian("b", 1, (-1, 0, 0), 0.0)], None),
    ]
    for name, orc, lvars, rvars in checks:
        if rvars is None:
            rep = mc_validate(lvars, lvars, orc, cfg["mc_samples"],
                              cfg["seed"])
            z = rep.max_abs_z
        else:
            samples = orc.sample(lvars + rvars, cfg["mc_samples"],
                                 cfg["seed"])
            vals = wick_product(lvars).evaluate(samples, orc)
            mean = complex(np.mean(vals))
            se = float(np.std(vals.real, ddof=1)
                       / math.sqrt(cfg["mc_samples"])) + 1e-300
            z = abs(mean.real) / se
        rows.append({"check": name, "value": float(z), "expected": 0.0,
                     "gap": float(z), "passed": z <= 3.0})

    write_csv(os.path.join(out, "wick.csv"), rows, h)
    ok = all(r["passed"] for r in rows)
    return {"passed": bool(ok),
            "checks": {r["check"]: bool(r["passed"]) for r in rows}}, \
        0 if ok else 1


# ---------------------------------------------------------------------------
# renorm sweep
# ---------------------------------------------------------------------------

@experiment("renorm-sweep", epsilons=[0.25, 0.125, 0.0625, 0.03125,
                                      0.015625],
            k_max=64, seed=0)
def run_renorm_sweep(cfg, out, h):
    from pmhd.renorm import c0_constant
    _validate_epsilons(cfg["epsilons"])
    rows = []
    for eps in cfg["epsilons"]:
        for i in range(3):
            t0 = time.perf_counter()
            v = c0_constant(i, i, eps, cfg["k_max"])
            ms = (time.perf_counter() - t0) * 1e3
            rows.append({"label": "C01", "i": i, "j": i, "epsilon": eps,
                         "k_max": cfg["k_max"], "t": 0.0, "value": v,
                         "runtime_ms": ms})
    write_csv(os.path.join(out, "renorm_sweep.csv"), rows, h)
    eps = np.asarray(cfg["epsilons"])
    slopes = {}
    for i in range(3):
        vals = np.asarray([r["value"] for r in rows if r["i"] == i])
        slopes[f"slope_{i}{i}"] = float(
            np.polyfit(np.log(eps), np.log(vals), 1)[0])
    ok = all(abs(s + 1.0) <= 0.15 for s in slopes.values())
    summary = {"passed": bool(ok), **slopes}
    write_json(os.path.join(out, "renorm_sweep_summary.json"), summary)
    return summary, 0 if ok else 1


# ---------------------------------------------------------------------------
# vanishing constants
# ---------------------------------------------------------------------------

@experiment("vanishing", t=0.5, epsilon=0.3, k_max=8, indices=[0, 1, 2],
            seed=0)
def run_vanishing(cfg, out, h):
    from pmhd.renorm import vanishing_constant_check
    rows = []
    for label in ("Ct5", "C3", "C378"):
        chk = vanishing_constant_check(label, t=cfg["t"],
                                       epsilon=cfg["epsilon"],
                                       k_max=cfg["k_max"],
                                       indices=tuple(cfg["indices"]))
        rows.append({"label": label, "abs_value": abs(chk.value),
                     "scale": chk.scale, "tolerance": chk.tolerance,
                     "passed": chk.passed})
    write_csv(os.path.join(out, "vanishing.csv"), rows, h)
    ok = all(r["passed"] for r in rows)
    return {"passed": bool(ok)}, 0 if ok else 1


# ---------------------------------------------------------------------------
# chaos scaling
# ---------------------------------------------------------------------------

@experiment("chaos-scaling", n_per_axis=32, epsilon=0.05, t=0.1, eta=0.1,
            slack=0.2, mc_samples=200, quad_nodes=17, seed=3)
def run_chaos_scaling(cfg, out, h):
    """Littlewood-Paley block scaling of the level1 x level2 cross product:
    E|Delta_q(x_1b x_2u)|^2 has to respect the 2^(q(1+2 eta)) envelope, so
    the slack-discounted statistic must not increase over the top blocks."""
    import warnings as _warnings
    from pmhd.besov import partition_for
    from pmhd.grid import TorusGrid, product_pairs
    from pmhd.noise import MollifierCutoff, sample_driver_path
    from pmhd.tree import c0_matrices, duhamel, level2_rhs_path
    grid = TorusGrid(cfg["n_per_axis"])
    cut = MollifierCutoff(cfg["epsilon"])
    part = partition_for(grid)
    times = np.concatenate([[0.0],
                            np.geomspace(cfg["t"] / 50.0, cfg["t"],
                                         cfg["quad_nodes"] - 1)])
    acc = None
    with _warnings.catch_warnings():
        _warnings.simplefilter("ignore")
        c0 = c0_matrices(cfg["epsilon"], grid.k_max, "independent")
        for rep in range(cfg["mc_samples"]):
            drv = sample_driver_path(grid, cut, times,
                                     (cfg["seed"], rep), "independent")
            rhs_u, _ = level2_rhs_path(drv, c0)
            u2 = duhamel(grid, times, rhs_u)
            prod = product_pairs(grid, drv.xb[-1], u2[-1])
            dens = np.sum(np.abs(prod) ** 2, axis=(0, 1))
            blocks = np.array([np.sum(m ** 2 * dens)
                               for m in part.block_multipliers])
            blocks = blocks / (2.0 * np.pi) ** 3
            acc = blocks if acc is None else acc + blocks
    mean = acc / cfg["mc_samples"]
    eta, slack = cfg["eta"], cfg["slack"]
    rows = []
    for jj, val in zip(part.js, mean):
        stat = float(val) * 2.0 ** (-jj * (1.0 + 2 * eta + slack))
        rows.append({"q": int(jj), "raw_mean_sq": float(val),
                     "statistic": stat, "eta": eta, "slack": slack,
                     "mc_samples": cfg["mc_samples"], "t": cfg["t"]})
    write_csv(os.path.join(out, "chaos_scaling.csv"), rows, h)
    top3 = [r["statistic"] for r in rows[-3:]]
    ok = all(b <= a * (1 + 1e-12) for a, b in zip(top3, top3[1:]))
    summary = {"passed": bool(ok), "top_blocks": [r["q"] for r in rows[-3:]],
               "statistics": [float(s) for s in top3]}
    write_json(os.path.join(out, "chaos_scaling_summary.json"), summary)
    return summary, 0 if ok else 1


# ---------------------------------------------------------------------------
# tree norms (renormalization necessity)
# ---------------------------------------------------------------------------

@experiment("tree-norms", n_per_axis=16, epsilons=[0.4, 0.2, 0.1, 0.05,
                                                   0.025],
            replicas=50, t_end=0.1, t_nodes=9, stride=2, group4_stride=4,
            correlation_mode="independent", seed=4)
def run_tree_norms(cfg, out, h):
    import warnings as _warnings
    from pmhd.grid import TorusGrid
    from pmhd.noise import MollifierCutoff, sample_driver_path
    from pmhd.tree import (ExponentRecord, assemble_bundles, build_levels,
                           bundle_norm_rows, compute_bundle_constants)
    _validate_epsilons(cfg["epsilons"])
    exponents = _exponents(cfg)
    grid = TorusGrid(cfg["n_per_axis"])
    times = np.linspace(0.0, cfg["t_end"], cfg["t_nodes"])
    cxi_rows = []
    slot_rows = []
    means = {"corrected": [], "raw": []}
    with _warnings.catch_warnings():
        _warnings.simplefilter("ignore")
        for eps in cfg["epsilons"]:
            consts = compute_bundle_constants(eps, grid.k_max, times,
                                              cfg["correlation_mode"])
            acc = {"corrected": 0.0, "raw": 0.0}
            for rep in range(cfg["replicas"]):
                drv = sample_driver_path(grid, MollifierCutoff(eps), times,
                                         (cfg["seed"], rep),
                                         cfg["correlation_mode"])
                lv = build_levels(drv)
                bundles = assemble_bundles(lv, exponents, consts,
                                           stride=cfg["stride"],
                                           group4_stride=cfg["group4_stride"])
                for variant, b in bundles.items():
                    c = b.c_xi()
                    acc[variant] += c
                    cxi_rows.append({"epsilon": eps, "replica": rep,
                                     "variant": variant, "c_xi": c})
                if rep == 0:
                    for row in bundle_norm_rows(bundles["corrected"]):
                        slot_rows.append({"epsilon": eps, **row})
            for variant in acc:
                means[variant].append(acc[variant] / cfg["replicas"])
    write_csv(os.path.join(out, "tree_norms.csv"), slot_rows, h)
    write_csv(os.path.join(out, "cxi.csv"), cxi_rows, h)
    cor, raw = means["corrected"], means["raw"]
    cor_changes = [abs(b - a) / a for a, b in zip(cor, cor[1:])]
    raw_growth = [b / a - 1.0 for a, b in zip(raw, raw[1:])]
    ok = (all(c < 0.10 for c in cor_changes[-2:])
          and all(g > 0.25 for g in raw_growth))
    summary = {"passed": bool(ok), "epsilons": cfg["epsilons"],
               "corrected_means": cor, "raw_means": raw,
               "corrected_changes": cor_changes, "raw_growth": raw_growth}
    write_json(os.path.join(out, "tree_norms_summary.json"), summary)
    return summary, 0 if ok else 1


# ---------------------------------------------------------------------------
# fixed point consistency
# ---------------------------------------------------------------------------

@experiment("fixedpoint", n_per_axis=16, epsilon=0.5, t_end=0.05,
            t_nodes=33, tol=1e-10, max_iter=60, amplitude=0.3,
            correlation_mode="independent", seed=7)
def run_fixedpoint(cfg, out, h):
    import warnings as _warnings
    from pmhd.besov import holder_norms_batch
    from pmhd.direct import MhdStepperConfig, run as run_direct
    from pmhd.grid import TorusGrid, random_field
    from pmhd.noise import MollifierCutoff, sample_driver_path
    from pmhd.solver import solve
    from pmhd.tree import build_levels
    exponents = _exponents(cfg)
    grid = TorusGrid(cfg["n_per_axis"])
    times = np.linspace(0.0, cfg["t_end"], cfg["t_nodes"])
    amp = cfg["amplitude"]
    y0u = amp * random_field(grid, 3, seed=(cfg["seed"], 1), decay=2.0,
                             divergence_free=True).coeffs
    y0b = amp * random_field(grid, 3, seed=(cfg["seed"], 2), decay=2.0,
                             divergence_free=True).coeffs
    with _warnings.catch_warnings():
        _warnings.simplefilter("ignore")
        drv = sample_driver_path(grid, MollifierCutoff(cfg["epsilon"]),
                                 times, cfg["seed"],
                                 cfg["correlation_mode"])
        levels = build_levels(drv)
        state = solve(levels, exponents, y0u, y0b, tol=cfg["tol"],
                      max_iter=cfg["max_iter"])
        step = cfg["t_end"] / (cfg["t_nodes"] - 1)
        traj = run_direct(y0u, y0b, MhdStepperConfig(
            grid, dt=step, T=cfg["t_end"], noise=drv))
    direct_final = np.concatenate([traj.u[-1], traj.b[-1]])
    diff = state.total()[-1] - direct_final
    z = exponents.z
    num = float(holder_norms_batch(diff[None, None], grid, -z)[0, 0])
    den = float(holder_norms_batch(direct_final[None, None], grid,
                                   -z)[0, 0])
    rel = num / den
    report = state.report()
    report["consistency_rel_err"] = rel
    report["consistency_tolerance"] = 1e-3
    report["passed"] = bool(state.converged and rel <= 1e-3)
    write_json(os.path.join(out, "fixedpoint_report.json"), report)
    rows = [{"T": cfg["t_end"], "epsilon": cfg["epsilon"],
             "n_per_axis": cfg["n_per_axis"], "iterations": state.iterations,
             "converged": state.converged, "rel_err": rel,
             "tolerance": 1e-3, "passed": report["passed"]}]
    write_csv(os.path.join(out, "fixedpoint.csv"), rows, h)
    return {"passed": report["passed"], "rel_err": rel,
            "iterations": state.iterations}, 0 if report["passed"] else 1


# ---------------------------------------------------------------------------
# energy identities
# ---------------------------------------------------------------------------

@experiment("energy", n_per_axis=16, n_seeds=20, traj_n=8, traj_dt=0.005,
            traj_T=0.05, seed=5)
def run_energy(cfg, out, h):
    from pmhd.direct import (MhdStepperConfig, energy_identities,
                             run as run_direct)
    from pmhd.grid import SpectralField, TorusGrid, random_field
    grid = TorusGrid(cfg["n_per_axis"])
    rows = []
    nonzero = 0
    for s in range(cfg["n_seeds"]):
        u = random_field(grid, 3, seed=(cfg["seed"], s, 0), decay=1.2,
                         divergence_free=True)
        b = random_field(grid, 3, seed=(cfg["seed"], s, 1), decay=1.2,
                         divergence_free=True)
        ids = energy_identities(u, b)
        scale = max(abs(ids["bbu"]), 1.0)
        ok = abs(ids["uuu"]) < 1e-10 * scale and \
            abs(ids["sum8"]) < 1e-10 * scale
        if abs(ids["bbu"]) > 1e-3 * scale:
            nonzero += 1
        rows.append({"seed": s, **{k: float(v) for k, v in ids.items()},
                     "vanishing_ok": ok})
    write_csv(os.path.join(out, "energy_identities.csv"), rows, h)

    tg = TorusGrid(cfg["traj_n"])
    u0 = 0.5 * random_field(tg, 3, seed=(cfg["seed"], 100), decay=1.5,
                            divergence_free=True).coeffs
    b0 = 0.5 * random_field(tg, 3, seed=(cfg["seed"], 101), decay=1.5,
                            divergence_free=True).coeffs
    traj = run_direct(u0, b0, MhdStepperConfig(tg, dt=cfg["traj_dt"],
                                               T=cfg["traj_T"]),
                      check_energy=True)
    trows = []
    for m, t in enumerate(traj.times):
        u = SpectralField(tg, traj.u[m], divergence_free=True,
                          mean_zero=True)
        b = SpectralField(tg, traj.b[m], divergence_free=True,
                          mean_zero=True)
        ids = energy_identities(u, b)
        trows.append({"t": float(t),
                      "kinetic": 0.5 * float(np.sum(np.abs(traj.u[m]) ** 2)),
                      "magnetic": 0.5 * float(np.sum(np.abs(traj.b[m]) ** 2)),
                      "residual_uuu": float(ids["uuu"]),
                      "residual_sum8": float(ids["sum8"])})
    write_csv(os.path.join(out, "energy_trajectory.csv"), trows, h)
    ok = all(r["vanishing_ok"] for r in rows) and nonzero >= 18
    return {"passed": bool(ok), "nonzero_cross_terms": nonzero}, \
        0 if ok else 1


# ---------------------------------------------------------------------------
# subcriticality
# ---------------------------------------------------------------------------

def subcriticality(system: str, N: int) -> dict:
    """Scaling-homogeneity counter for the quadratic terms.

    The diffusion carries beta = 2; spatial white noise sits below
    -1 - N/2, so alpha = -1 - N/2 is the borderline regularity.  The MHD
    nonlinearity (field times gradient) has homogeneity
    (beta+alpha) + (beta+alpha-1); the Hall term (gradient times gradient)
    has 2(beta+alpha-1).  Subcritical means the nonlinearity beats alpha.
    """
    if N < 1:
        raise ValueError("spatial dimension must be >= 1")
    beta = 2.0
    alpha = -1.0 - N / 2.0
    if system == "mhd":
        homogeneity = (beta + alpha) + (beta + alpha - 1.0)
        reduces_to = f"4 > {N}"
        ok = 4 > N
    elif system == "hall-mhd":
        homogeneity = 2.0 * (beta + alpha - 1.0)
        reduces_to = f"2 > {N}"
        ok = 2 > N
    else:
        raise ValueError("system must be 'mhd' or 'hall-mhd'")
    trace = [
        f"beta = {beta} (diffusion order)",
        f"alpha = -1 - N/2 = {alpha} (noise regularity, N = {N})",
        f"term homogeneity = {homogeneity}",
        f"require homogeneity > alpha: {homogeneity} > {alpha}"
        f" <=> {reduces_to}",
        f"verdict: {'subcritical' if ok else 'not subcritical'}",
    ]
    assert (homogeneity > alpha) == ok
    return {"system": system, "N": N, "beta": beta, "alpha": alpha,
            "homogeneity": homogeneity, "reduces_to": reduces_to,
            "subcritical": bool(ok), "trace": trace}


@experiment("subcrit", cases=[["mhd", 2], ["mhd", 3], ["mhd", 4],
                              ["hall-mhd", 1], ["hall-mhd", 2]], seed=0)
def run_subcrit(cfg, out, h):
    rows = []
    docs = []
    for system, N in cfg["cases"]:
        doc = subcriticality(system, int(N))
        docs.append(doc)
        for line in doc["trace"]:
            print(f"[{system}, N={N}] {line}")
        rows.append({"system": system, "N": int(N), "alpha": doc["alpha"],
                     "homogeneity": doc["homogeneity"],
                     "reduces_to": doc["reduces_to"].replace(" ", ""),
                     "subcritical": doc["subcritical"]})
    write_csv(os.path.join(out, "subcrit.csv"), rows, h)
    write_json(os.path.join(out, "subcrit_trace.json"), {"cases": docs})
    return {"passed": True,
            "verdicts": {f"{r['system']}-{r['N']}": r["subcritical"]
                         for r in rows}}, 0


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------

def load_config(args, name: str) -> dict:
    cfg = dict(DEFAULTS[name])
    if args.config:
        with open(args.config) as fh:
            user = json.load(fh)
        if user.get("schema", SCHEMA) != SCHEMA:
            raise ConfigError([f"schema: expected {SCHEMA!r}"])
        unknown = set(user) - set(cfg) - {"schema", "exponents"}
        if unknown:
            raise ConfigError([f"unknown fields: {sorted(unknown)}"])
        cfg.update({k: v for k, v in user.items() if k != "schema"})
    if args.seed is not None:
        cfg["seed"] = args.seed
    cfg["schema"] = SCHEMA
    return cfg


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="pmhd", description="stochastic-MHD verification experiments")
    parser.add_argument("experiment", choices=sorted(EXPERIMENTS))
    parser.add_argument("--config", default=None,
                        help="JSON experiment configuration")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the configured master seed")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--threads", type=int, default=1,
                        help="cap on FFT worker threads")
    args = parser.parse_args(argv)

    from pmhd.grid import set_fft_workers
    set_fft_workers(args.threads)
    os.makedirs(args.out, exist_ok=True)
    try:
        cfg = load_config(args, args.experiment)
    except ConfigError as err:
        print("invalid configuration:", file=sys.stderr)
        for v in err.violations:
            print(f"  - {v}", file=sys.stderr)
        return 2
    h = config_hash(cfg)
    try:
        summary, code = EXPERIMENTS[args.experiment](cfg, args.out, h)
    except ConfigError as err:
        print("invalid configuration:", file=sys.stderr)
        for v in err.violations:
            print(f"  - {v}", file=sys.stderr)
        return 2
    print(json.dumps({"experiment": args.experiment, "config_hash": h,
                      **summary}, default=float))
    return code


if __name__ == "__main__":
    sys.exit(main())
