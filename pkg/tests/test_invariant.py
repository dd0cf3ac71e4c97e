"""Tests for walkable invariants, verifiers and games."""

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qmoney.errors import InvalidInput, InvalidPath, InvariantBroken
from qmoney.invariant import (
    BankNote,
    PathWord,
    WalkableInvariant,
    closeness_bound_check,
    compute_orbits,
    cyclic_invariant,
    eigen_identity_residual,
    hypercube_invariant,
    lightning_game,
    mint,
    mint_branches,
    orbit_state,
    path_finding_game,
    product_invariant,
    serial_delta,
    verify_approx,
    verify_exact,
    verify_path,
    walk_spectrum,
)
from qmoney.statekit import StateVector, uniform_superposition


# ---------------------------------------------------------------------------
# independent oracle: dense joint-register operators built from scratch
# ---------------------------------------------------------------------------

def dense_joint_ops(w):
    """Return (U, P, load) as explicit matrices on C^{2r} ⊗ C^{|X|}."""
    n, r = len(w.domain), w.r
    rp = 2 * r
    U = np.zeros((rp * n, rp * n))
    for i in range(rp):
        block = np.zeros((n, n))
        for k, x in enumerate(w.domain):
            img = w.sigma(i, x) if i < r else x
            block[w.position[img], k] = 1.0
        U[i * n:(i + 1) * n, i * n:(i + 1) * n] = block
    one = np.full(rp, 1 / math.sqrt(rp))
    P = np.kron(np.outer(one, one), np.eye(n))
    return U, P, lambda psi: np.kron(one, psi)


def oracle_accept_prob(w, psi, t):
    U, P, load = dense_joint_ops(w)
    v = load(np.asarray(psi, dtype=complex))
    for _ in range(t):
        v = P @ (U @ v)
    return float(np.vdot(v, v).real)


def six_cycle():
    return cyclic_invariant(6)


class TestOrbits:
    def test_identity_generators_give_singletons(self):
        w = WalkableInvariant(range(4), lambda x: 0, [lambda x: x, lambda x: x])
        assert [len(o) for o in compute_orbits(w)] == [1, 1, 1, 1]

    def test_six_cycle_single_orbit(self):
        orbits = compute_orbits(six_cycle())
        assert len(orbits) == 1 and set(orbits[0].elements) == set(range(6))

    def test_step_two_parity(self):
        w = cyclic_invariant(6, steps=(2,), invariant=lambda x: x % 2)
        assert [set(o.elements) for o in compute_orbits(w)] == [{0, 2, 4}, {1, 3, 5}]

    def test_broken_invariant_reports_witness(self):
        w = WalkableInvariant(range(6), lambda x: x % 2,
                              [lambda x: (x + 1) % 6, lambda x: (x - 1) % 6])
        with pytest.raises(InvariantBroken) as exc:
            compute_orbits(w)
        assert exc.value.witness[0] in (0, 1)

    @pytest.mark.parametrize("n,classes", [(5, 2), (7, 3), (4, 1)])
    def test_orbits_refine_level_sets(self, n, classes):
        w = product_invariant(n, classes)
        for o in compute_orbits(w):
            assert len({w.inv(x) for x in o.elements}) == 1

    def test_json_roundtrip(self):
        w = cyclic_invariant(6, steps=(2,), invariant=lambda x: x % 2)
        w2 = WalkableInvariant.from_json(w.to_json())
        assert [o.elements for o in compute_orbits(w2)] == [o.elements for o in compute_orbits(w)]


class TestSpectrum:
    def test_singleton_orbit(self):
        w = WalkableInvariant(range(1), lambda x: 0, [lambda x: x, lambda x: x])
        sp = walk_spectrum(w, compute_orbits(w)[0])
        assert sp.lambda2 == 0.0 and sp.delta == 1.0

    def test_six_cycle_lambda2(self):
        w = six_cycle()
        sp = walk_spectrum(w, compute_orbits(w)[0])
        assert sp.lambda2 == pytest.approx(math.cos(2 * math.pi / 6), abs=1e-12)
        # circulant oracle: eigenvalues cos(2 pi k / 6)
        expect = sorted((math.cos(2 * math.pi * k / 6) for k in range(6)), reverse=True)
        np.testing.assert_allclose(sp.eigenvalues, expect, atol=1e-12)

    def test_bipartite_two_cycle_flags_non_mixing(self):
        w = WalkableInvariant(range(2), lambda x: 0, [lambda x: 1 - x, lambda x: 1 - x])
        sp = walk_spectrum(w, compute_orbits(w)[0])
        assert sp.lambda2_abs == pytest.approx(1.0)
        assert sp.delta_abs == pytest.approx(0.0)
        assert not sp.mixing

    @pytest.mark.parametrize("steps", [(1,), (1, 2), (1, 3)])
    def test_circulant_closed_form(self, steps):
        n = 7
        w = cyclic_invariant(n, steps=steps)
        sp = walk_spectrum(w, compute_orbits(w)[0])
        vals = [np.mean([math.cos(2 * math.pi * k * s / n) for s in steps]) for k in range(n)]
        np.testing.assert_allclose(sp.eigenvalues, sorted(vals, reverse=True), atol=1e-12)


class TestMint:
    def test_injective_invariant_is_classical(self, rng):
        w = cyclic_invariant(6, steps=(3,), invariant=lambda x: x)
        note = mint(w, rng)
        assert note.state.support() == [note.serial]

    def test_constant_invariant(self, rng):
        note = mint(six_cycle(), rng)
        assert note.serial == 0 and len(note.state.support()) == 6

    def test_parity_branches(self):
        w = cyclic_invariant(6, steps=(2,), invariant=lambda x: x % 2)
        br = mint_branches(w)
        assert sorted(p for p, _ in br) == pytest.approx([0.5, 0.5])
        for _, note in br:
            np.testing.assert_allclose(np.abs(note.state.amps[note.state.amps != 0]) ** 2, 1 / 3)


class TestVerifyExact:
    def test_honest_note_accepted(self, rng):
        w = cyclic_invariant(6, steps=(2,), invariant=lambda x: x % 2)
        note = mint(w, rng)
        p, post = verify_exact(w, note)
        assert p == pytest.approx(1.0)
        assert abs(np.vdot(post.reorder(note.state.basis).amps, note.state.amps)) == pytest.approx(1.0)

    @pytest.mark.parametrize("x", range(6))
    def test_classical_state_gets_one_over_orbit(self, x):
        w = cyclic_invariant(6, steps=(2,), invariant=lambda x: x % 2)
        p, _ = verify_exact(w, BankNote(x % 2, StateVector([x], [1.0])))
        assert p == pytest.approx(1 / 3)

    def test_superposition_of_orbits(self):
        w = product_invariant(4, 1, steps=(2,))  # orbits {0,2}, {1,3} in one class
        orbits = compute_orbits(w)
        assert len(orbits) == 2
        a, b = (orbit_state(w, o) for o in orbits)
        s = StateVector(w.domain, (a.amps + b.amps) / math.sqrt(2))
        assert verify_exact(w, BankNote(0, s))[0] == pytest.approx(1.0)

    def test_wrong_serial_rejected(self):
        w = cyclic_invariant(6, steps=(2,), invariant=lambda x: x % 2)
        p, post = verify_exact(w, BankNote(1, StateVector([0, 2, 4], np.full(3, 1 / math.sqrt(3)))))
        assert p == 0.0 and post is None


class TestVerifyApprox:
    def test_plus_one_eigenvector(self):
        w = six_cycle()
        psi = np.full(6, 1 / math.sqrt(6))
        assert eigen_identity_residual(w, psi, 1.0) < 1e-12
        res = verify_approx(w, BankNote(0, StateVector(range(6), psi)), 1)
        assert res.accept_prob == pytest.approx(1.0)

    def test_minus_one_eigenvector(self):
        w = six_cycle()
        psi = np.array([(-1) ** k for k in range(6)]) / math.sqrt(6)
        assert eigen_identity_residual(w, psi, -1.0) < 1e-12
        res = verify_approx(w, BankNote(0, StateVector(range(6), psi)), 1)
        assert res.accept_prob == pytest.approx(0.0, abs=1e-15)
        assert not res.accepted

    @pytest.mark.parametrize("k", range(6))
    def test_single_round_eigen_probability(self, k):
        w = six_cycle()
        psi = np.exp(2j * np.pi * k * np.arange(6) / 6) / math.sqrt(6)
        ell = math.cos(2 * math.pi * k / 6)
        res = verify_approx(w, BankNote(0, StateVector(range(6), psi)), 1)
        assert res.accept_prob == pytest.approx(((1 + ell) / 2) ** 2, abs=1e-12)

    def test_six_cycle_t20_closed_form(self):
        w = six_cycle()
        t = 20
        expect = sum((1 / 6) * ((1 + math.cos(2 * math.pi * k / 6)) / 2) ** (2 * t) for k in range(6))
        res = verify_approx(w, BankNote(0, StateVector([0], [1.0])), t)
        assert res.accept_prob == pytest.approx(expect, rel=1e-10)
        e0 = np.eye(6)[0]
        assert oracle_accept_prob(w, e0, t) == pytest.approx(expect, rel=1e-10)

    @pytest.mark.parametrize("builder", [
        lambda: cyclic_invariant(5, steps=(1, 2)),
        lambda: hypercube_invariant(3),
        lambda: product_invariant(5, 2),
    ])
    @pytest.mark.parametrize("t", [1, 3])
    def test_matches_dense_oracle(self, builder, t, rng):
        w = builder()
        x0 = w.domain[0]
        y = w.inv(x0)
        idx = [k for k, x in enumerate(w.domain) if w.inv(x) == y]
        psi = np.zeros(len(w.domain), dtype=complex)
        psi[idx] = rng.normal(size=len(idx)) + 1j * rng.normal(size=len(idx))
        psi /= np.linalg.norm(psi)
        res = verify_approx(w, BankNote(y, StateVector(w.domain, psi)), t)
        assert res.accept_prob == pytest.approx(oracle_accept_prob(w, psi, t), rel=1e-9, abs=1e-14)

    def test_sampled_rejection_records_round(self):
        w = six_cycle()
        psi = np.array([(-1) ** k for k in range(6)]) / math.sqrt(6)
        res = verify_approx(w, BankNote(0, StateVector(range(6), psi)), 3,
                            rng=np.random.default_rng(0))
        assert not res.accepted and res.reject_round == 0

    def test_invalid_t(self):
        with pytest.raises(InvalidInput):
            verify_approx(six_cycle(), BankNote(0, StateVector([0], [1.0])), 0)


class TestClosenessBound:
    def test_in_span_gives_zero(self):
        w = six_cycle()
        lhs, _ = closeness_bound_check(w, uniform_superposition(range(6)), 5)
        assert lhs == pytest.approx(0.0, abs=1e-20)

    @pytest.mark.parametrize("t", [1, 4, 10])
    def test_lambda2_eigenvector(self, t):
        w = six_cycle()
        psi = np.cos(2 * np.pi * np.arange(6) / 6)
        psi /= np.linalg.norm(psi)
        lam2 = 0.5
        lhs, rhs = closeness_bound_check(w, StateVector(range(6), psi), t)
        assert lhs == pytest.approx(((1 + lam2) / 2) ** (2 * t), rel=1e-10)
        assert rhs == pytest.approx((1 - (1 - lam2) / 2) ** (2 * t), rel=1e-10)
        assert lhs <= rhs * (1 + 1e-12)

    def test_random_state_t10(self, rng):
        w = six_cycle()
        psi = rng.normal(size=6) + 1j * rng.normal(size=6)
        lhs, rhs = closeness_bound_check(w, StateVector(range(6), psi / np.linalg.norm(psi)), 10)
        assert lhs <= rhs + 1e-15

    @given(seed=st.integers(0, 2**32 - 1), t=st.integers(1, 12),
           n=st.integers(3, 9), extra=st.booleans())
    def test_bound_property(self, seed, t, n, extra):
        r = np.random.default_rng(seed)
        w = cyclic_invariant(n, steps=(1, 2) if extra else (1,))
        psi = r.normal(size=n) + 1j * r.normal(size=n)
        lhs, rhs = closeness_bound_check(w, StateVector(range(n), psi / np.linalg.norm(psi)), t)
        assert lhs <= rhs * (1 + 1e-9) + 1e-14

    @given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 8))
    def test_eigen_identity_property(self, seed, n):
        w = cyclic_invariant(n)
        sp = walk_spectrum(w, compute_orbits(w)[0])
        k = int(np.random.default_rng(seed).integers(n))
        assert eigen_identity_residual(w, sp.eigenvectors[:, k], sp.eigenvalues[k]) < 1e-10


class TestPaths:
    def test_examples(self):
        w = six_cycle()
        assert verify_path(w, 3, 3, PathWord([]))
        assert verify_path(w, 2, 3, PathWord([0]))
        assert not verify_path(w, 2, 5, PathWord([0]))

    def test_reverse_direction_accepted(self):
        assert verify_path(six_cycle(), 3, 2, PathWord([0]))

    def test_out_of_range_step(self):
        with pytest.raises(InvalidPath):
            verify_path(six_cycle(), 0, 1, PathWord([7]))


class _Replay:
    def start(self):
        return 0

    def respond(self, z, walk):
        return walk


class _Empty:
    def start(self):
        return 0

    def respond(self, z):
        return PathWord([])


class _OneStep:
    def start(self):
        return 0

    def respond(self, z):
        return PathWord([0])


def lazy_end_distribution(n, length):
    """Exact distribution of the lazy walk end point on Z_n (r=2, r'=4)."""
    M = np.zeros((n, n))
    for x in range(n):
        M[(x + 1) % n, x] += 0.25
        M[(x - 1) % n, x] += 0.25
        M[x, x] += 0.5
    v = np.zeros(n)
    v[0] = 1
    return np.linalg.matrix_power(M, length) @ v


class TestPathGame:
    def test_replay_wins(self, rng):
        for _ in range(20):
            assert path_finding_game(six_cycle(), _Replay(), rng, leak_walk=True).won

    def test_empty_path_wins_iff_equal(self, rng):
        for _ in range(50):
            g = path_finding_game(six_cycle(), _Empty(), rng)
            assert g.won == (g.transcript["z"] == g.transcript["x"])

    def test_one_step_guess_rate(self, rng):
        w = six_cycle()
        trials = 10_000
        L = path_finding_game(w, _OneStep(), rng).transcript["L"]
        dist = lazy_end_distribution(6, L)
        expect = dist[1] + dist[5]          # +1 from x or +1 from z reaches the other
        wins = sum(path_finding_game(w, _OneStep(), rng).won for _ in range(trials))
        sd = math.sqrt(expect * (1 - expect) / trials)
        assert abs(wins / trials - expect) < 4 * sd
        assert expect == pytest.approx(2 / 6, abs=1e-6)

    def test_bad_start(self, rng):
        class Bad:
            def start(self):
                return 99

        with pytest.raises(InvalidInput):
            path_finding_game(six_cycle(), Bad(), rng)


class TestLightning:
    def test_honest_pair_always_wins(self):
        w = six_cycle()
        joint = StateVector([(a, b) for a in range(6) for b in range(6)], np.full(36, 1 / 6))
        g = lightning_game(w, lambda: (0, joint), t=5)
        assert g.prob == pytest.approx(1.0)

    @pytest.mark.parametrize("t", [1, 3, 8])
    def test_classical_pair_matches_oracle(self, t):
        w = six_cycle()
        g = lightning_game(w, lambda: (0, StateVector([(0, 0)], [1.0])), t=t)
        single = oracle_accept_prob(w, np.eye(6)[0], t)
        assert g.prob == pytest.approx(single ** 2, rel=1e-10)

    def test_classical_pair_limit(self):
        w = six_cycle()
        g = lightning_game(w, lambda: (0, StateVector([(0, 0)], [1.0])), t=200)
        assert g.prob == pytest.approx((1 / 6) ** 2, rel=1e-6)

    def test_orthogonal_register_loses(self):
        w = six_cycle()
        alt = np.array([(-1) ** k for k in range(6)]) / math.sqrt(6)
        labels = [(a, b) for a in range(6) for b in range(6)]
        amps = np.outer(alt, np.full(6, 1 / math.sqrt(6))).ravel()
        g = lightning_game(w, lambda: (0, StateVector(labels, amps)), t=3)
        assert not g.won

    def test_malformed_joint(self):
        with pytest.raises(InvalidInput):
            lightning_game(six_cycle(), lambda: (0, StateVector([7], [1.0])), t=1)


class TestSerialDelta:
    def test_min_over_orbits(self):
        w = product_invariant(5, 2)
        for y in (0, 1):
            deltas = [walk_spectrum(w, o).delta for o in compute_orbits(w) if w.inv(o.repr) == y]
            assert serial_delta(w, y) == pytest.approx(min(deltas))
