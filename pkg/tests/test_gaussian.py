"""Tests for the 1-D, lattice and covariance Gaussian constructions."""

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from qmoney.errors import InvalidInput, SingularBasis, WidthTooNarrow
from qmoney.gaussian import (
    KLS_SIGMA_FACTOR,
    CovarianceSpec,
    Gaussian1D,
    amp_1d,
    classical_gpv_sample,
    classical_gpv_samples,
    closed_form_amplitudes,
    coherent_gaussian_cov,
    coherent_gaussian_lattice,
    coherent_gaussian_Z,
    gram_schmidt,
    shifted_lattice_gaussian,
)
from qmoney.statekit import StateVector, embedded_trace_distance


def amps_by_label(state):
    return {lab: a for lab, a in zip(state.basis, state.amps)}


class TestAmp1D:
    def test_centre(self):
        assert amp_1d(3, Gaussian1D(3.0, 2.0)) == 1.0

    def test_one_width(self):
        assert amp_1d(4, Gaussian1D(0.0, 4.0)) == pytest.approx(math.exp(-math.pi / 2))
        assert math.exp(-math.pi / 2) == pytest.approx(0.2079, abs=1e-4)

    def test_outside_window(self):
        assert amp_1d(33, Gaussian1D(0.0, 4.0, tau=8)) == 0.0

    def test_nonpositive_width(self):
        with pytest.raises(InvalidInput):
            Gaussian1D(0.0, 0.0)

    def test_kls_conversion(self):
        s = 2.0
        x = 3
        assert amp_1d(x, Gaussian1D(0.0, s * KLS_SIGMA_FACTOR)) == pytest.approx(
            math.exp(-x ** 2 / (4 * s ** 2)))


class TestCoherentZ:
    def test_accept_prob_finite_sum(self):
        res = coherent_gaussian_Z(Gaussian1D(0.0, 4.0, 8.0))
        expect = sum(math.exp(-math.pi * i * i / 16) for i in range(-32, 33)) / 65
        assert len(res.state.basis) == 65
        assert res.accept_prob == pytest.approx(expect, rel=1e-12)

    @pytest.mark.parametrize("c,sigma", [(0.0, 4.0), (0.3, 5.5), (-2.7, 4.2)])
    def test_state_matches_amp_1d(self, c, sigma):
        g = Gaussian1D(c, sigma)
        res = coherent_gaussian_Z(g)
        ref = np.array([amp_1d(int(x), g) for x in res.state.basis])
        np.testing.assert_allclose(res.state.amps.real, ref / np.linalg.norm(ref), atol=1e-12)

    def test_flat_limit(self):
        res = coherent_gaussian_Z(Gaussian1D(0.0, 1e6, tau=5e-6))
        n = len(res.state.basis)
        np.testing.assert_allclose(np.abs(res.state.amps), 1 / math.sqrt(n), rtol=1e-6)
        assert res.accept_prob == pytest.approx(1.0, abs=1e-6)

    def test_sample_mode_counts_attempts(self, rng):
        g = Gaussian1D(0.0, 4.0)
        attempts = [coherent_gaussian_Z(g, "sample", rng).attempts for _ in range(400)]
        p = coherent_gaussian_Z(g).accept_prob
        # geometric mean attempts 1/p
        assert np.mean(attempts) == pytest.approx(1 / p, rel=0.15)

    def test_width_floor(self):
        with pytest.raises(WidthTooNarrow):
            coherent_gaussian_Z(Gaussian1D(0.0, 2.0), kappa_min=4.0)


class TestGramSchmidt:
    def test_identity(self):
        lb = gram_schmidt(np.eye(3))
        np.testing.assert_allclose(lb.gso, np.eye(3))

    def test_two_by_two(self):
        lb = gram_schmidt(np.array([[1.0, 1.0], [0.0, 1.0]]))
        np.testing.assert_allclose(lb.gso[:, 1], [0.0, 1.0], atol=1e-12)
        lb = gram_schmidt(np.array([[1.0, 1.0], [1.0, 0.0]]))
        np.testing.assert_allclose(lb.gso[:, 1], [0.5, -0.5], atol=1e-12)

    def test_orthogonal_unchanged(self):
        B = np.array([[2.0, 0.0], [0.0, 3.0]])
        np.testing.assert_allclose(gram_schmidt(B).gso, B)

    def test_singular(self):
        with pytest.raises(SingularBasis):
            gram_schmidt(np.array([[1.0, 2.0], [2.0, 4.0]]))

    @given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 5))
    def test_orthogonality_property(self, seed, n):
        B = np.random.default_rng(seed).integers(-5, 6, size=(n, n)).astype(float)
        if abs(np.linalg.det(B)) < 0.5:
            B += 7 * np.eye(n)
        G = gram_schmidt(B).gso
        off = G.T @ G - np.diag(np.sum(G ** 2, axis=0))
        assert np.max(np.abs(off)) < 1e-8
        np.testing.assert_allclose(G[:, 0], B[:, 0])


class TestCoherentLattice:
    def test_identity_basis_is_product(self):
        c = np.array([0.4, -1.2])
        st_ = coherent_gaussian_lattice(np.eye(2), c, 4.0)
        ref = np.array([amp_1d(x, Gaussian1D(c[0], 4.0)) * amp_1d(y, Gaussian1D(c[1], 4.0))
                        for x, y in st_.basis])
        np.testing.assert_allclose(st_.amps.real, ref / np.linalg.norm(ref), atol=1e-12)

    def test_even_lattice(self):
        st_ = coherent_gaussian_lattice(np.array([[2.0]]), [0.0], 8.0)
        xs = np.array([lab[0] for lab in st_.basis])
        assert np.all(xs % 2 == 0)
        ref = np.exp(-math.pi * xs ** 2 / 128)
        np.testing.assert_allclose(st_.amps.real, ref / np.linalg.norm(ref), atol=1e-12)

    @pytest.mark.parametrize("B,c,sigma", [
        ([[1, 1], [0, 1]], [0.3, 0.1], 4.5),
        ([[2, 1], [1, 3]], [-0.5, 1.0], 13.0),
        ([[1, 0, 1], [0, 1, 1], [0, 0, 1]], [0.0, 0.2, -0.4], 5.0),
    ])
    def test_matches_closed_form_and_ancillas_clean(self, B, c, sigma):
        B = np.array(B, dtype=float)
        st_, info = coherent_gaussian_lattice(B, c, sigma, audit=True)
        ref = closed_form_amplitudes(st_.basis, c, np.eye(len(c)) / sigma ** 2 * 1.0)
        # closed form uses exp(-pi q / 2) with q = |x-c|^2/sigma^2
        np.testing.assert_allclose(st_.amps.real, ref, atol=1e-8)
        assert info.trace_distance <= 1e-9

    def test_width_precondition(self):
        with pytest.raises(WidthTooNarrow):
            coherent_gaussian_lattice(np.eye(2) * 3, [0, 0], 4.0)

    def test_truncation_sensitivity(self):
        B = np.array([[1.0, 1.0], [0.0, 1.0]])
        a = coherent_gaussian_lattice(B, [0.2, 0.1], 4.0, tau=6)
        b = coherent_gaussian_lattice(B, [0.2, 0.1], 4.0, tau=8)
        assert embedded_trace_distance(a, b) <= 1e-8

    def test_measurement_matches_classical_sampler(self, rng):
        B = np.array([[1.0, 1.0], [0.0, 2.0]])
        c = np.array([0.3, -0.2])
        sigma = 8.0
        st_ = coherent_gaussian_lattice(B, c, sigma)
        probs = {lab: abs(a) ** 2 for lab, a in zip(st_.basis, st_.amps)}
        draws = classical_gpv_samples(B, c, sigma, rng, 100_000)
        # bin on the first coordinate; pool sparse tails
        xs = draws[:, 0]
        marg = {}
        for lab, p in probs.items():
            marg[lab[0]] = marg.get(lab[0], 0.0) + p
        keys = sorted(k for k, p in marg.items() if p * len(xs) >= 5)
        obs = np.array([np.sum(xs == k) for k in keys] + [np.sum(~np.isin(xs, keys))])
        exp = np.array([marg[k] for k in keys] + [1 - sum(marg[k] for k in keys)]) * len(xs)
        keep = exp > 0
        chi2 = float(np.sum((obs[keep] - exp[keep]) ** 2 / exp[keep]))
        assert stats.chi2.sf(chi2, keep.sum() - 1) > 0.01


class TestClassicalSampler:
    def test_even_lattice(self, rng):
        xs = classical_gpv_samples(np.array([[2.0]]), [0.0], 8.0, rng, 2000)
        assert np.all(xs % 2 == 0)

    def test_identity_histogram(self, rng):
        sigma = 4.0
        xs = classical_gpv_samples(np.eye(2), [0.0, 0.0], sigma, rng, 100_000)[:, 0]
        support = np.arange(-32, 33)
        p = np.exp(-math.pi * support ** 2 / sigma ** 2)
        p /= p.sum()
        keep = p * len(xs) >= 5
        obs = np.array([np.sum(xs == k) for k in support[keep]])
        exp = p[keep] * len(xs)
        exp *= obs.sum() / exp.sum()
        res = stats.chisquare(obs, exp)
        assert res.pvalue > 0.01

    def test_near_uniform_wide(self, rng):
        xs = classical_gpv_samples(np.eye(1), [0.0], 1e4, rng, 20_000, tau=3e-4)[:, 0]
        vals, counts = np.unique(xs, return_counts=True)
        assert len(vals) == 7
        assert stats.chisquare(counts).pvalue > 0.01

    def test_single_sample_shape(self, rng):
        assert classical_gpv_sample(np.eye(3), np.zeros(3), 4.0, rng).shape == (3,)


class TestCovariance:
    def test_spherical_agrees_with_lattice(self):
        B = np.array([[1.0, 1.0], [0.0, 1.0]])
        c = np.array([0.2, -0.3])
        sigma = 6.0
        a = coherent_gaussian_lattice(B, c, sigma)
        b = coherent_gaussian_cov(B, CovarianceSpec.make(sigma ** 2 * np.eye(2), c))
        da, db = amps_by_label(a), amps_by_label(b)
        common = set(da) & set(db)
        assert sum(abs(da[k]) ** 2 for k in common) > 1 - 1e-10
        assert max(abs(da[k] - db[k]) for k in common) < 1e-10

    def test_diagonal_is_product(self):
        s1, s2 = 4.0, 6.0
        st_ = coherent_gaussian_cov(np.eye(2), CovarianceSpec.make(np.diag([s1 ** 2, s2 ** 2]), [0, 0]))
        ref = np.array([amp_1d(x, Gaussian1D(0, s1, 1e9)) * amp_1d(y, Gaussian1D(0, s2, 1e9))
                        for x, y in st_.basis])
        np.testing.assert_allclose(st_.amps.real, ref / np.linalg.norm(ref), atol=1e-10)

    def test_rotated(self):
        th = math.pi / 4
        R = np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
        Sigma = R @ np.diag([36.0, 16.0]) @ R.T
        spec = CovarianceSpec.make(Sigma, [0.5, -0.25])
        st_ = coherent_gaussian_cov(np.eye(2), spec)
        Si = np.linalg.inv(Sigma)
        ref = np.array([math.exp(-math.pi * (np.array(l) - spec.c) @ Si @ (np.array(l) - spec.c) / 2)
                        for l in st_.basis])
        np.testing.assert_allclose(st_.amps.real, ref / np.linalg.norm(ref), atol=1e-8)

    def test_factor_recomposes(self):
        spec = CovarianceSpec.make([[5.0, 1.0], [1.0, 3.0]], [0, 0])
        np.testing.assert_allclose(spec.factorU.T @ spec.factorU, np.linalg.inv(spec.Sigma), atol=1e-9)

    def test_not_pd(self):
        with pytest.raises(InvalidInput):
            CovarianceSpec.make([[1.0, 2.0], [2.0, 1.0]], [0, 0])

    def test_width_precondition(self):
        with pytest.raises(WidthTooNarrow):
            coherent_gaussian_cov(np.eye(2), CovarianceSpec.make(np.eye(2), [0, 0]))


class TestShifted:
    def test_zero_shift_is_plain(self):
        spec = CovarianceSpec.make(np.eye(2) * 25.0, [0.0, 0.0])
        a = shifted_lattice_gaussian([0, 0], np.eye(2), spec)
        b = coherent_gaussian_cov(np.eye(2), spec)
        assert embedded_trace_distance(a, b) < 1e-10

    def test_odd_coset(self):
        spec = CovarianceSpec.make([[100.0]], [0.0])
        st_ = shifted_lattice_gaussian([1], [[2]], spec)
        assert all(lab[0] % 2 == 1 for lab in st_.basis)

    def test_two_vectors_in_z4(self):
        S = np.array([[1, 0], [1, 1], [0, 1], [0, 0]], dtype=float)
        y = np.array([3, -1, 2, 5])
        spec = CovarianceSpec.make(np.eye(4) * 40.0, np.zeros(4))
        st_ = shifted_lattice_gaussian(y, S, spec)
        ref = closed_form_amplitudes(st_.basis, spec.c, spec.Sigma_inv)
        np.testing.assert_allclose(st_.amps.real, ref, atol=1e-8)
        for lab in st_.basis:
            d = np.array(lab) - y
            assert d[3] == 0 and d[1] == d[0] + d[2]

    def test_dependent_columns(self):
        spec = CovarianceSpec.make(np.eye(2) * 100.0, [0, 0])
        with pytest.raises(SingularBasis):
            shifted_lattice_gaussian([0, 0], [[1, 2], [1, 2]], spec)
