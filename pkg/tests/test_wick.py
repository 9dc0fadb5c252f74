import math

import numpy as np
import pytest

from pmhd.grid import TorusGrid
from pmhd.noise import MollifierCutoff
from pmhd.wick import (DriverCovariance, McReport, TaggedGaussian,
                       mc_validate, pairing_expectation, pairing_terms_json,
                       wick_product)

from oracles import isserlis_moment

GRID = TorusGrid(8)
CUT = MollifierCutoff(0.35)


def tg(field, comp, mode, time=0.0):
    return TaggedGaussian(field, comp, tuple(mode), time)


class DictOracle:
    """Symmetric random-valued covariance assignment for algebra tests."""

    def __init__(self, variables, seed=0, complex_values=False):
        rng = np.random.default_rng(seed)
        self.values = {}
        for i, a in enumerate(variables):
            for b in variables[i:]:
                v = rng.standard_normal()
                if complex_values:
                    v = v + 1j * rng.standard_normal()
                self.values[frozenset([a, b])] = v

    def __call__(self, a, b):
        return self.values[frozenset([a, b])]


VARS = [tg("u", i, (1, 0, 0), t) for i, t in
        [(0, 0.0), (1, 0.1), (2, 0.2), (0, 0.3),
         (1, 0.4), (2, 0.5), (0, 0.6), (1, 0.7)]]


class TestWickProduct:
    def test_degree_one_is_identity(self):
        exp = wick_product(VARS[:1])
        assert exp.terms == [(1.0, [], [0])]

    def test_degree_two_recentres(self):
        exp = wick_product(VARS[:2])
        counts = exp.term_counts()
        assert counts == {0: 1, 1: 1}
        oracle = DictOracle(VARS[:2])
        samples = {v: np.array([1.0]) for v in VARS[:2]}
        val = exp.evaluate(samples, oracle)
        assert abs(val[0] - (1.0 - oracle(VARS[0], VARS[1]))) < 1e-15

    def test_degree_two_zero_covariance_is_plain_product(self):
        class Zero:
            def __call__(self, a, b):
                return 0.0
        exp = wick_product(VARS[:2])
        samples = {VARS[0]: np.array([2.0]), VARS[1]: np.array([3.0])}
        assert exp.evaluate(samples, Zero())[0] == 6.0

    def test_degree_three_term_structure(self):
        # :x1 x2 x3: = product - three covariance-times-single terms
        counts = wick_product(VARS[:3]).term_counts()
        assert counts == {0: 1, 1: 3}

    def test_degree_four_term_structure(self):
        # product - six pair terms + three double-pair terms
        counts = wick_product(VARS[:4]).term_counts()
        assert counts == {0: 1, 1: 6, 2: 3}

    def test_degree_cap(self):
        with pytest.raises(ValueError):
            wick_product(VARS[:5])

    def test_recentring_mean_zero_algebraic(self):
        # E[:x1..x4:] = 0: replacing samples by Isserlis moments gives 0
        vs = VARS[:4]
        oracle = DictOracle(vs, seed=3)
        total = 0.0
        for sign, pairs, singles in wick_product(vs).terms:
            term = sign
            for a, b in pairs:
                term *= oracle(vs[a], vs[b])
            term *= isserlis_moment([vs[s] for s in singles], oracle)
            total += term
        assert abs(total) < 1e-12


class TestPairingExpectation:
    def test_term_counts(self):
        import json
        for deg, expected in ((1, 1), (2, 2), (3, 6), (4, 24)):
            doc = json.loads(pairing_terms_json(VARS[:deg],
                                                VARS[4:4 + deg]))
            assert doc["n_terms"] == expected

    def test_degree_two_uniform_covariance(self):
        # all covariances equal c: expectation is 2 c^2
        class Const:
            def __call__(self, a, b):
                return 0.7
        val = pairing_expectation(VARS[:2], VARS[2:4], Const())
        assert abs(val - 2 * 0.7 ** 2) < 1e-14

    def test_degree_mismatch_is_zero(self):
        oracle = DictOracle(VARS)
        assert pairing_expectation(VARS[:2], VARS[2:5], oracle) == 0.0

    @pytest.mark.parametrize("degree", [2, 3, 4])
    def test_matches_isserlis_bruteforce(self, degree):
        # E[:L::R:] via the pairing formula equals the brute-force
        # evaluation: expand both Wick products, take Isserlis moments of
        # the raw monomials
        left = VARS[:degree]
        right = VARS[4:4 + degree]
        oracle = DictOracle(left + right, seed=degree)
        fast = pairing_expectation(left, right, oracle)
        total = 0.0
        lexp = wick_product(left).terms
        rexp = wick_product(right).terms
        for sl, pl, il in lexp:
            for sr, pr, ir in rexp:
                term = sl * sr
                for a, b in pl:
                    term *= oracle(left[a], left[b])
                for a, b in pr:
                    term *= oracle(right[a], right[b])
                raw = [left[i] for i in il] + [right[i] for i in ir]
                term *= isserlis_moment(raw, oracle)
                total += term
        assert abs(fast - total) < 1e-12 * max(1.0, abs(total))


class TestDriverOracle:
    def test_symmetry_and_support(self):
        oracle = DriverCovariance(GRID, CUT)
        a = tg("u", 1, (1, 0, 0), 0.0)
        b = tg("u", 1, (-1, 0, 0), 0.2)
        c = tg("u", 1, (1, 1, 0), 0.2)
        assert oracle(a, b) == oracle(b, a)
        assert oracle(a, c) == 0.0  # modes do not sum to zero

    def test_independent_mode_kills_cross(self):
        oracle = DriverCovariance(GRID, CUT, "independent")
        a = tg("u", 1, (1, 0, 0), 0.0)
        b = tg("b", 1, (-1, 0, 0), 0.0)
        assert oracle(a, b) == 0.0
        ident = DriverCovariance(GRID, CUT, "identical")
        assert ident(a, b) != 0.0


class TestMonteCarlo:
    def test_second_order_self(self):
        # components chosen so the projector block is nonzero
        oracle = DriverCovariance(GRID, CUT)
        left = [tg("u", 1, (1, 0, 0), 0.0), tg("u", 1, (-1, 0, 0), 0.05)]
        rep = mc_validate(left, left, oracle, n_samples=20000, seed=5)
        assert rep.max_abs_z <= 3.0
        assert abs(rep.expectation) > 0

    def test_chaos_orthogonality_mc(self):
        oracle = DriverCovariance(GRID, CUT)
        left = [tg("u", 1, (1, 0, 0), 0.0), tg("u", 2, (-1, 0, 0), 0.0)]
        right = [tg("u", 1, (1, 0, 0), 0.0), tg("u", 2, (0, 1, 0), 0.0),
                 tg("u", 1, (0, -1, 0), 0.0)]
        rep = mc_validate(left, right, oracle, n_samples=20000, seed=6)
        assert rep.expectation == 0.0
        assert rep.max_abs_z <= 3.5

    def test_mixed_fields_independent_mode(self):
        oracle = DriverCovariance(GRID, CUT, "independent")
        left = [tg("u", 1, (1, 0, 0), 0.0), tg("b", 2, (-1, 0, 0), 0.0)]
        right = [tg("u", 1, (1, 0, 0), 0.0), tg("b", 2, (-1, 0, 0), 0.0)]
        rep = mc_validate(left, right, oracle, n_samples=20000, seed=7)
        # cross pairings vanish; the surviving pairings use same-field
        # covariances only
        assert rep.max_abs_z <= 3.5

    def test_sample_count_guard(self):
        oracle = DriverCovariance(GRID, CUT)
        with pytest.raises(ValueError):
            mc_validate(VARS[:1], VARS[:1], oracle, n_samples=10, seed=0)

    def test_degenerate_zero_oracle(self):
        class ZeroSampler(DriverCovariance):
            def __call__(self, a, b):
                return 0.0
        oracle = ZeroSampler(GRID, MollifierCutoff(5.0))
        left = [tg("u", 1, (1, 0, 0), 0.0)]
        rep = mc_validate(left, left, oracle, n_samples=500, seed=1)
        assert rep.empirical == 0.0
        assert rep.expectation == 0.0
