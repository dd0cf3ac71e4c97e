"""Tests for k-LWE instances, the adjugate-kernel lift, key rerandomization,
the distribution audit and the parameter calculator."""

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from qmoney.errors import DimensionMismatch, EmptyAudit, InvalidInput, InvalidParams, RankDeficient
from qmoney.klwe_red import (
    RANDOM,
    REAL,
    HybridConfig,
    KLWEInstance,
    ReductionParams,
    adjugate,
    bounded_rows,
    default_statistics,
    direct_generator,
    distribution_audit,
    gen_instance,
    hybrid_table,
    hybrid_table_json,
    hybrid_table_markdown,
    kernel_matrix,
    lift_lwe_to_klwe,
    lifted_generator,
    lwe_challenge,
    mod_exp_params,
    mod_switch_params,
    noise_key_params,
    rerandomize_key,
    sample_dgauss,
    smudging_distance,
)
from qmoney.modarith import solve_mod


def fraction_adjugate(T):
    """det(T) * T^{-1} by Gauss-Jordan over the rationals (independent of cofactors)."""
    k = len(T)
    M = [[Fraction(int(v)) for v in row] + [Fraction(int(i == j)) for j in range(k)]
         for i, row in enumerate(T)]
    det = Fraction(1)
    for c in range(k):
        p = next((r for r in range(c, k) if M[r][c] != 0), None)
        if p is None:
            return None
        if p != c:
            M[c], M[p] = M[p], M[c]
            det = -det
        det *= M[c][c]
        piv = M[c][c]
        M[c] = [v / piv for v in M[c]]
        for r in range(k):
            if r != c and M[r][c] != 0:
                f = M[r][c]
                M[r] = [a - f * b for a, b in zip(M[r], M[c])]
    return [[det * M[i][k + j] for j in range(k)] for i in range(k)], det


def rows_in_span_mod(C, v, q):
    return solve_mod(C, np.mod(v, q), q) is not None


# ---------------------------------------------------------------------------
# instances
# ---------------------------------------------------------------------------

class TestGenInstance:
    @pytest.mark.parametrize("mode", [REAL, RANDOM])
    @pytest.mark.parametrize("k", [0, 1, 3])
    def test_invariants(self, rng, mode, k):
        inst = gen_instance(k, 3, 8, 101, bounded_rows(8, 2), None, 1.0, mode, rng)
        assert all(inst.check().values())
        assert inst.C.shape == (8, 8 - k)

    def test_k0_is_plain_lwe(self, rng):
        inst = gen_instance(0, 2, 5, 31, None, None, 1.0, REAL, rng)
        assert inst.S.shape == (0, 5) and inst.C.shape == (5, 5)

    def test_kls_rows_accepted(self, rng):
        from qmoney.lattice_money import KLSParams, kls_short_vectors
        S = kls_short_vectors(KLSParams(4099, 2, 5, 3, 30, 3)).T
        inst = gen_instance(3, 2, S.shape[1], 4099, S, None, 1.0, RANDOM, rng)
        assert all(inst.check().values())

    def test_dependent_fixed_rows(self, rng):
        with pytest.raises(RankDeficient):
            gen_instance(2, 2, 4, 7, np.array([[1, 2, 0, 0], [2, 4, 0, 0]]), None, 1.0, REAL, rng)

    @pytest.mark.parametrize("args", [(1, 2, 4, 8), (4, 2, 4, 7), (1, -1, 4, 7)])
    def test_invalid(self, rng, args):
        with pytest.raises(InvalidParams):
            gen_instance(*args, bounded_rows(args[2], 1), None, 1.0, REAL, rng)

    def test_json_round_trip(self, rng):
        inst = gen_instance(2, 2, 6, 31, bounded_rows(6, 1), None, 1.0, RANDOM, rng)
        again = KLWEInstance.from_json(inst.to_json())
        assert again.mode == RANDOM and again.dumps() == inst.dumps()
        assert "mode" not in inst.to_json("challenge") and "e" not in inst.to_json("challenge")
        with pytest.raises(InvalidInput):
            inst.to_json("full")

    def test_random_key_uniform(self, rng):
        q = 7
        vals = [gen_instance(1, 1, 3, q, bounded_rows(3, 1), None, 0.0, RANDOM, rng).rprime[0]
                for _ in range(3500)]
        assert stats.chisquare(np.bincount(vals, minlength=q)).pvalue > 1e-3


class TestNoise:
    def test_dgauss_moments(self, rng):
        x = sample_dgauss(3.0, 40000, rng)
        # variance of the width-w discrete Gaussian is close to w^2 / (2 pi)
        assert abs(x.mean()) < 0.05
        assert x.var() == pytest.approx(9 / (2 * math.pi), rel=0.03)

    def test_smudging(self):
        assert smudging_distance([0, 0], 5.0) == 0.0
        assert smudging_distance([1], 0.0) == 1.0
        small = smudging_distance([1], 100.0)
        # TV of N(0, s^2) vs N(1, s^2) is about 1/(s sqrt(2 pi)) with s = w/sqrt(2 pi)
        assert small == pytest.approx(1 / 100.0, rel=0.05)
        assert smudging_distance([1, -1], 100.0) == pytest.approx(2 * small)


# ---------------------------------------------------------------------------
# adjugate
# ---------------------------------------------------------------------------

class TestAdjugate:
    def test_identity(self):
        p = adjugate(np.eye(3, dtype=int))
        assert p.detT == 1 and p.Tadj.tolist() == np.eye(3, dtype=int).tolist()

    @given(a=st.integers(-9, 9), b=st.integers(-9, 9), c=st.integers(-9, 9), d=st.integers(-9, 9))
    def test_two_by_two(self, a, b, c, d):
        p = adjugate([[a, b], [c, d]])
        assert p.Tadj.tolist() == [[d, -b], [-c, a]] and p.detT == a * d - b * c

    def test_singular(self):
        p = adjugate([[1, 2], [2, 4]])
        assert p.detT == 0 and p.identity_holds()

    @settings(max_examples=60)
    @given(seed=st.integers(0, 2**32 - 1), k=st.integers(1, 6))
    def test_sweep_against_rational_inverse(self, seed, k):
        T = np.random.default_rng(seed).integers(-50, 51, size=(k, k))
        p = adjugate(T)
        assert p.identity_holds()
        ref = fraction_adjugate(T.tolist())
        if ref is not None:
            adj, det = ref
            assert det == p.detT
            assert [[int(v) for v in row] for row in p.Tadj.tolist()] == adj

    def test_non_square(self):
        with pytest.raises(InvalidInput):
            adjugate(np.zeros((2, 3), dtype=int))


# ---------------------------------------------------------------------------
# the lift
# ---------------------------------------------------------------------------

def params_for(k, B, m, sigma=1.0):
    return ReductionParams(k, B, float((2 * B) ** k * m * m), sigma)


class TestLift:
    def test_k1_unit_vector(self, rng):
        m, q = 4, 101
        S = np.zeros((1, m + 1), dtype=int)
        S[0, 0] = 1
        inst, rec = lift_lwe_to_klwe(lwe_challenge(2, m, q, 1.0, REAL, rng), S, params_for(1, 1, m), rng)
        expect = np.vstack([np.zeros((1, m), dtype=int), -np.eye(m, dtype=int)])
        assert rec.columns == (0,) and rec.adj.detT == 1
        np.testing.assert_array_equal(np.array(rec.U, dtype=int), expect)
        assert all(inst.check().values())

    def test_k2_b2_bound(self, rng):
        m, q = 6, 1009
        worst = 0
        for _ in range(40):
            S = rng.integers(-2, 3, size=(2, m + 2))
            try:
                _, rec = lift_lwe_to_klwe(lwe_challenge(2, m, q, 1.0, REAL, rng), S,
                                          params_for(2, 2, m), rng)
            except RankDeficient:
                continue
            assert rec.claim_SU_zero and rec.max_U <= 16
            worst = max(worst, rec.max_U)
        assert worst > 4        # the bound is exercised, not vacuous

    def test_kernel_matrix_block_structure(self):
        S = np.array([[1, 2, 0, -1, 1], [0, 1, 1, 2, -2]])
        U, pair, St = kernel_matrix(S, (0, 1))
        assert pair.detT == 1
        Ui = np.array(U, dtype=int)
        assert not np.any(S @ Ui)
        np.testing.assert_array_equal(Ui[2:], -np.eye(3, dtype=int))
        np.testing.assert_array_equal(Ui[:2], np.array(St, dtype=int)[:, 2:])

    @pytest.mark.parametrize("k,B", [(1, 2), (2, 1), (3, 1)])
    def test_real_noise_envelope(self, rng, k, B):
        m, q, sigma = 6, 10007, 1.5
        p = params_for(k, B, m, sigma)
        for _ in range(10):
            S = rng.integers(-B, B + 1, size=(k, m + k))
            try:
                inst, rec = lift_lwe_to_klwe(lwe_challenge(3, m, q, sigma, REAL, rng), S, p, rng)
            except RankDeficient:
                continue
            assert np.abs(rec.Ue).max() <= (2 * B) ** inst.k * m * p.tau * sigma
            assert inst.check()["witness"]
            np.testing.assert_array_equal(np.mod(inst.A @ inst.r + inst.e, q), inst.b)

    def test_random_in_span(self, rng):
        m, q = 5, 101
        S = np.array([[1, -1, 0, 1, 0, 1, 1]])
        inst, _ = lift_lwe_to_klwe(lwe_challenge(2, m + 1, q, 1.0, RANDOM, rng), S,
                                   params_for(1, 1, 6), rng)
        assert inst.check()["witness"] and rows_in_span_mod(inst.C, inst.b - inst.e, q)

    def test_rank_reduction_fallback(self, rng):
        q = 101
        S = np.array([[1, 0, 1, 0, 0], [2, 0, 2, 0, 0]])       # rank 1
        p = params_for(2, 2, 4)
        inst, _ = lift_lwe_to_klwe(lwe_challenge(2, 4, q, 1.0, REAL, rng), S, p, rng)
        assert inst.k == 1 and inst.k_requested == 2 and inst.k_reduced
        assert inst.C.shape == (5, 4)
        with pytest.raises(RankDeficient):
            lift_lwe_to_klwe(lwe_challenge(2, 4, q, 1.0, REAL, rng), S, p, rng,
                             allow_rank_reduction=False)

    def test_preconditions(self, rng):
        lwe = lwe_challenge(2, 4, 101, 1.0, REAL, rng)
        with pytest.raises(InvalidParams):
            lift_lwe_to_klwe(lwe, np.array([[3, 0, 0, 0, 0]]), params_for(1, 2, 4), rng)
        with pytest.raises(InvalidParams):
            lift_lwe_to_klwe(lwe, np.array([[1, 0, 0, 0, 0]]), ReductionParams(1, 1, 1.0, 1.0), rng)
        with pytest.raises(InvalidInput):
            lift_lwe_to_klwe(lwe, np.array([[1, 0, 0, 0, 0, 0]]), params_for(1, 1, 5), rng)
        with pytest.raises(InvalidParams):
            ReductionParams(4, 1, 1e6, 1.0)


# ---------------------------------------------------------------------------
# key rerandomization
# ---------------------------------------------------------------------------

class TestRerandomize:
    @pytest.mark.parametrize("mode", [REAL, RANDOM])
    def test_composes_additively(self, rng, mode):
        inst = gen_instance(2, 3, 7, 31, bounded_rows(7, 1), None, 1.0, mode, rng)
        s1, s2 = rng.integers(0, 31, 3), rng.integers(0, 31, 3)
        twice = rerandomize_key(rerandomize_key(inst, shift=s1), shift=s2)
        once = rerandomize_key(inst, shift=s1 + s2)
        np.testing.assert_array_equal(twice.b, once.b)
        assert all(twice.check().values())

    def test_random_class_preserved(self, rng):
        inst = gen_instance(2, 3, 7, 31, bounded_rows(7, 1), None, 1.0, RANDOM, rng)
        out = rerandomize_key(inst, rng)
        np.testing.assert_array_equal(np.mod(inst.S @ (inst.b - inst.e), 31),
                                      np.mod(out.S @ (out.b - out.e), 31))
        assert rows_in_span_mod(out.C, out.b - out.e, 31)

    def test_real_key_uniform(self, rng):
        q = 11
        inst = gen_instance(1, 1, 3, q, bounded_rows(3, 1), lambda r: np.zeros(1, dtype=int),
                            1.0, REAL, rng)
        keys = [rerandomize_key(inst, rng).r[0] for _ in range(10_000)]
        assert stats.chisquare(np.bincount(keys, minlength=q)).pvalue > 0.01

    def test_needs_rng_or_shift(self, rng):
        inst = gen_instance(1, 1, 3, 7, bounded_rows(3, 1), None, 1.0, REAL, rng)
        with pytest.raises(InvalidInput):
            rerandomize_key(inst)


# ---------------------------------------------------------------------------
# audit
# ---------------------------------------------------------------------------

class TestAudit:
    def test_statistic_count(self):
        assert len(default_statistics(2, 3, 10)) == 30 + 10 + 10 + 2 + 1

    def test_self_audit(self, rng):
        gen = lambda r: gen_instance(1, 2, 5, 7, bounded_rows(5, 1), None, 1.0, REAL, r)
        rep = distribution_audit(gen, gen, None, 300, rng)
        assert rep.passed and rep.violations == {"A": 0, "B": 0}

    def test_audit_has_power(self, rng):
        real = lambda r: gen_instance(1, 2, 5, 101, bounded_rows(5, 1), None, 0.5, REAL, r)
        rand = lambda r: gen_instance(1, 2, 5, 101, bounded_rows(5, 1), None, 0.5, RANDOM, r)
        rep = distribution_audit(real, rand, None, 300, rng)
        assert not rep.passed
        assert rep.pvalues["b-e in span(A)"] < 1e-10
        # S b = S e in both modes, so that marginal cannot tell them apart
        assert rep.pvalues["Sb[0]"] > 1e-3

    def test_lifted_vs_direct(self, rng):
        n, m, q, k, B = 2, 4, 11, 1, 1
        p = params_for(k, B, m)
        dS = bounded_rows(m + k, B)
        rep = distribution_audit(lifted_generator(n, m, q, 1.0, p, dS, REAL),
                                 direct_generator(n, m, q, 1.0, p, dS, REAL), None, 300, rng)
        assert rep.passed, rep.to_json()

    def test_empty(self, rng):
        gen = lambda r: gen_instance(1, 1, 3, 7, bounded_rows(3, 1), None, 1.0, REAL, r)
        with pytest.raises(EmptyAudit):
            distribution_audit(gen, gen, None, 0, rng)

    def test_shape_mismatch(self, rng):
        a = lambda r: gen_instance(1, 1, 3, 7, bounded_rows(3, 1), None, 1.0, REAL, r)
        b = lambda r: gen_instance(1, 1, 4, 7, bounded_rows(4, 1), None, 1.0, REAL, r)
        with pytest.raises(DimensionMismatch):
            distribution_audit(a, b, None, 5, rng)


# ---------------------------------------------------------------------------
# parameter formulas
# ---------------------------------------------------------------------------

class TestParams:
    def test_mod_switch_degenerate(self):
        assert mod_switch_params(8, 16, 101, 101, 3.0, 0.1, 0.0) == 3.0

    @pytest.mark.parametrize("n,q,qp,sigma,eps,B", [(8, 101, 1009, 3.0, 0.1, 2.0),
                                                    (64, 2**10, 2**20, 1.5, 0.25, 1.0)])
    def test_mod_switch_formula(self, n, q, qp, sigma, eps, B):
        expect = math.sqrt((sigma * qp / q) ** 2 + (4 / math.pi) * math.log(2 * n * (1 + 1 / eps)) * B ** 2)
        assert mod_switch_params(n, 2 * n, q, qp, sigma, eps, B) == pytest.approx(expect, rel=1e-15)

    def test_mod_switch_spot_value(self):
        # (3*10)^2 + (4/pi) ln(2*8*11) * 4 = 900 + (16/pi) ln 176
        v = mod_switch_params(8, 8, 10, 100, 3.0, 0.1, 2.0)
        assert v ** 2 == pytest.approx(900 + 16 / math.pi * math.log(176), rel=1e-14)

    @pytest.mark.parametrize("args", [(8, 8, 100, 10, 1.0, 0.1, 1.0), (8, 8, 10, 100, 1.0, 0.5, 1.0),
                                      (8, 8, 10, 100, 1.0, 0.0, 1.0), (8, 8, 10, 100, -1.0, 0.1, 1.0)])
    def test_mod_switch_domain(self, args):
        with pytest.raises(InvalidParams):
            mod_switch_params(*args)

    def test_mod_exp_k_equals_n(self):
        r = mod_exp_params(4, 7, 4, 1.0, 0.1, 1.0)
        assert r.dim == 1 and r.modulus == 7 ** 4
        assert r.G.ravel().tolist() == [1, 7, 49, 343]
        assert r.sigma_prime == pytest.approx(
            343 * math.sqrt(1 + (4 / math.pi) * math.log(8 * 11)))

    def test_mod_exp_gadget_shape(self):
        r = mod_exp_params(6, 5, 2, 1.0, 0.1, 1.0)
        assert r.G.shape == (6, 3) and r.dim == 3
        with pytest.raises(InvalidParams):
            mod_exp_params(6, 5, 4, 1.0, 0.1, 1.0)

    def test_noise_key(self):
        r = noise_key_params(16, 1000, 101, 2.0, 0.1)
        s = math.sqrt(math.log(32 * 11 / math.pi))
        assert r.s_min == pytest.approx(s) and r.sigma_prime == pytest.approx(math.hypot(2.0, s))
        assert r.m_prime == pytest.approx(1000 - 256 - 4 * math.log(math.log(101)))


class TestHybridTable:
    @pytest.fixture
    def cfg(self):
        return HybridConfig(n=4, m=64, q=3 ** 9, q_prime=3, eta=2.0, fN=50.0)

    def test_seven_rows(self, cfg):
        rows = hybrid_table(cfg)
        assert len(rows) == 7
        assert [r["assumption"] for r in rows] == ["k-LWE"] + ["LWE"] * 5 + ["GapSVP"]
        assert all(r["justification"] for r in rows)

    def test_noise_column_scaling(self, cfg):
        rows = hybrid_table(cfg)
        eta, f = Fraction(2), Fraction(50)
        assert rows[0]["noise"] == Fraction(cfg.q) / eta
        for r in rows[1:6]:
            assert r["noise"] == Fraction(r["modulus"]) / (eta * f)
        assert rows[6]["noise"] == eta * f
        assert rows[3]["modulus"] == 3 ** 4

    def test_modulus_order(self, cfg):
        assert cfg.modulus_order_ok
        assert not HybridConfig(4, 64, 50, 3, 2.0, 50.0).modulus_order_ok

    def test_exports(self, cfg):
        rows = hybrid_table(cfg)
        md = hybrid_table_markdown(rows)
        assert md.count("\n") == 9 and md.startswith("| assumption |")
        js = hybrid_table_json(rows)
        assert js[1]["noise"] == str(Fraction(3 ** 9, 100)) and js[1]["noise_approx"] == 196.83

    def test_invalid(self):
        with pytest.raises(InvalidParams):
            HybridConfig(0, 1, 1, 1, 1.0, 1.0)
