import math

import numpy as np
import pytest

from pmhd.grid import TorusGrid, l2_norm
from pmhd.noise import (MollifierCutoff, analytic_mode_covariance,
                        half_lattice, sample_driver_path, sample_mode_ou,
                        sample_white_noise_increment)
from pmhd.operators import leray_table

GRID = TorusGrid(8)


class TestCutoff:
    def test_profile_properties(self):
        f = MollifierCutoff.profile
        assert f(np.array([0.0]))[0] == 1.0
        assert np.all(f(np.linspace(1.0, 3.0, 7)) == 0.0)
        r = np.linspace(0.0, 0.999, 200)
        vals = f(r)
        assert np.all(np.diff(vals) <= 1e-12)  # radially nonincreasing

    def test_epsilon_positive(self):
        with pytest.raises(ValueError):
            MollifierCutoff(0.0)


class TestDriverPath:
    def test_determinism(self):
        times = np.linspace(0.0, 0.1, 5)
        a = sample_driver_path(GRID, MollifierCutoff(0.3), times, seed=3)
        b = sample_driver_path(GRID, MollifierCutoff(0.3), times, seed=3)
        assert np.array_equal(a.xu, b.xu)
        assert np.array_equal(a.xb, b.xb)
        c = sample_driver_path(GRID, MollifierCutoff(0.3), times, seed=4)
        assert not np.array_equal(a.xu, c.xu)

    def test_field_invariants(self):
        times = np.linspace(0.0, 0.1, 4)
        d = sample_driver_path(GRID, MollifierCutoff(0.3), times, seed=5)
        for m in range(4):
            f = d.field("u", m)
            assert f.reality_defect() < 1e-13
            assert f.divergence_defect() < 1e-13
            assert np.all(f.coeffs[:, 0, 0, 0] == 0.0)

    def test_cutoff_support(self):
        # |eps k| >= 1 modes are identically zero
        eps = 0.45
        times = [0.0, 0.05]
        d = sample_driver_path(GRID, MollifierCutoff(eps), times, seed=6)
        for k in half_lattice(GRID):
            if eps * math.sqrt(sum(c * c for c in k)) >= 1.0:
                assert np.all(d.xu[(slice(None), slice(None),
                                    *GRID.mode_index(k))] == 0.0)

    def test_unsorted_times_rejected(self):
        with pytest.raises(ValueError):
            sample_driver_path(GRID, MollifierCutoff(0.3), [0.1, 0.0], 1)

    def test_identical_mode_equal_fields(self):
        times = np.linspace(0.0, 0.1, 3)
        d = sample_driver_path(GRID, MollifierCutoff(0.3), times, seed=7,
                               correlation_mode="identical")
        assert np.array_equal(d.xu, d.xb)
        di = sample_driver_path(GRID, MollifierCutoff(0.3), times, seed=7,
                                correlation_mode="independent")
        assert not np.array_equal(di.xu, di.xb)


class TestStationaryLaw:
    def test_paper_variance_substitution(self):
        # f ~ 1: E[Xhat^i(k) Xhat^j(-k)] at equal times is P_hat(k)/(2|k|^2)
        grid = TorusGrid(8)
        cut = MollifierCutoff(1e-8)
        k = (1, 0, 0)
        block = analytic_mode_covariance(grid, cut, k, (-1, 0, 0), 0.3, 0.3)
        P = leray_table(grid)[(slice(None), slice(None),
                               *grid.mode_index(k))]
        assert np.max(np.abs(block - P / 2.0)) < 1e-12

    def test_mc_covariance_matches_closed_form(self):
        # a reduced version of the acceptance sweep: a handful of mode and
        # time pairs in both correlation modes, 2e4 replicas, 4 SE
        cut = MollifierCutoff(0.35)
        rng = np.random.default_rng(0)
        times = [0.0, 0.07]
        n = 20000
        for mode in ("identical", "independent"):
            for trial in range(4):
                k = tuple(rng.integers(-2, 3, 3))
                if k == (0, 0, 0):
                    continue
                xu, xb = sample_mode_ou(GRID, cut, times, (9, trial), k, n,
                                        correlation_mode=mode)
                i, j = rng.integers(0, 3, 2)
                t_i, s_i = rng.integers(0, 2, 2)
                prod = xu[:, t_i, i] * np.conj(xu[:, s_i, j])
                # E[X(k,t) conj(X(k,s))] = E[X(k,t) X(-k,s)]
                expect = analytic_mode_covariance(
                    GRID, cut, k, tuple(-c for c in k),
                    times[t_i], times[s_i])[i, j]
                se = np.std(prod.real, ddof=1) / math.sqrt(n)
                if se > 0:
                    assert abs(np.mean(prod.real) - expect) < 4 * se
                cross = xu[:, t_i, i] * np.conj(xb[:, s_i, j])
                cexpect = expect if mode == "identical" else 0.0
                cse = np.std(cross.real, ddof=1) / math.sqrt(n)
                if cse > 0:
                    assert abs(np.mean(cross.real) - cexpect) < 4 * cse

    def test_gaussianity_kurtosis(self):
        cut = MollifierCutoff(0.35)
        xu, _ = sample_mode_ou(GRID, cut, [0.0], seed=11, k=(1, 0, 0),
                               n_replicas=10000)
        for part in (xu[:, 0, 1].real, xu[:, 0, 2].imag):
            m2 = np.mean(part ** 2)
            kurt = np.mean(part ** 4) / m2 ** 2
            se = math.sqrt(24.0 / len(part))
            assert abs(kurt - 3.0) <= 3 * se

    def test_stationarity_across_times(self):
        cut = MollifierCutoff(0.35)
        xu, _ = sample_mode_ou(GRID, cut, [0.0, 0.5, 1.0], seed=12,
                               k=(1, 1, 0), n_replicas=20000)
        v0 = np.mean(np.abs(xu[:, 0, 1]) ** 2)
        v2 = np.mean(np.abs(xu[:, 2, 1]) ** 2)
        se = np.std(np.abs(xu[:, 0, 1]) ** 2, ddof=1) / math.sqrt(20000)
        assert abs(v0 - v2) < 4 * se * math.sqrt(2)


class TestWhiteNoiseIncrements:
    def test_zero_dt(self):
        wu, wb = sample_white_noise_increment(GRID, MollifierCutoff(0.3),
                                              0.0, seed=1)
        assert l2_norm(wu) == 0.0 and l2_norm(wb) == 0.0

    def test_negative_dt_rejected(self):
        with pytest.raises(ValueError):
            sample_white_noise_increment(GRID, MollifierCutoff(0.3), -0.1, 1)

    def test_variance_matches(self):
        # var per mode component = dt f(eps |k|)^2 at k = (2, 1, 0)
        eps, dt = 0.3, 0.02
        cut = MollifierCutoff(eps)
        k = (2, 1, 0)
        idx = GRID.mode_index(k)
        n = 4000
        vals = np.array([
            sample_white_noise_increment(GRID, cut, dt, (77, r))[0]
            .coeffs[(1, *idx)] for r in range(n)])
        expect = dt * float(cut.profile(
            np.array([eps * math.sqrt(5.0)]))[0] ** 2)
        emp = np.mean(np.abs(vals) ** 2)
        se = np.std(np.abs(vals) ** 2, ddof=1) / math.sqrt(n)
        assert abs(emp - expect) < 3 * se

    def test_disjoint_windows_independent(self):
        cut = MollifierCutoff(0.3)
        idx = GRID.mode_index((1, 0, 0))
        n = 3000
        a = np.empty(n, dtype=complex)
        b = np.empty(n, dtype=complex)
        for r in range(n):
            a[r] = sample_white_noise_increment(
                GRID, cut, 0.01, (5, r, 0))[0].coeffs[(1, *idx)]
            b[r] = sample_white_noise_increment(
                GRID, cut, 0.01, (5, r, 1))[0].coeffs[(1, *idx)]
        cov = np.mean(a * np.conj(b)) - np.mean(a) * np.conj(np.mean(b))
        se = np.std((a * np.conj(b)).real, ddof=1) / math.sqrt(n)
        assert abs(cov.real) < 3 * se


class TestDriverSmallnessTrend:
    @pytest.mark.slow
    def test_running_integral_small_time_trend(self):
        # solving L K = x_1 from K(0) = 0 and measuring ||K(t)|| at a
        # strong norm reproduces the small-time power trend: the fitted
        # log-log slope stays above delta'/4 - 0.05
        from pmhd.besov import holder_norms_batch
        from pmhd.tree import duhamel
        delta_p = 0.2
        times = np.concatenate([[0.0], np.geomspace(1e-3, 1e-1, 10)])
        acc = None
        for rep in range(5):
            d = sample_driver_path(GRID, MollifierCutoff(0.35), times,
                                   seed=(31, rep))
            K = duhamel(GRID, times, d.xu)
            norms = holder_norms_batch(K[1:, None], GRID, 1.5 - delta_p)
            acc = norms if acc is None else acc + norms
        mean = acc / 5
        slope = np.polyfit(np.log(times[1:]), np.log(mean), 1)[0]
        assert slope >= delta_p / 4.0 - 0.05


class TestContainerExport:
    def test_driver_path_roundtrip(self, tmp_path):
        from pmhd.grid import load_path
        times = np.linspace(0.0, 0.05, 3)
        d = sample_driver_path(GRID, MollifierCutoff(0.35), times, seed=9)
        p = str(tmp_path / "xu.pmhd.json")
        d.save("u", p)
        back_times, fields = load_path(p)
        assert np.allclose(back_times, times)
        for m, f in enumerate(fields):
            assert np.max(np.abs(f.coeffs - d.xu[m])) < 1e-15
