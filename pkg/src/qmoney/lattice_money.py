"""Lattice quantum money from short-vector superpositions, and its attack.

Scheme
    A public matrix ``A in Z_q^{m x n}`` is orthogonal (mod ``q``) to ``ell``
    secret-free short vectors ``S``.  A note is the superposition
    ``sum alpha_y |y>`` over short ``y`` conditioned on the serial
    ``u = A^T y mod q``.

Attack
    ``C`` spans the vectors orthogonal to ``S``.  Measuring ``C^T y``
    collapses a note onto a single coset ``y + L(S)`` (:func:`attack_project`);
    such coset states can be rebuilt at will from one vector ``y`` — by a
    shifted lattice Gaussian (:func:`clone_gaussian`) or, for arbitrary
    amplitudes inside a good ellipsoid, by two rejection steps
    (:func:`clone_ellipsoid`).

The concrete instance with three short vectors ``s0, s1, s2`` and the
product-state note (a bit, a uniform offset and Gaussian coordinates) is
built by :func:`kls_instance`; :func:`kls_flaw_demo` checks that two clones
never differ by a vector outside the span of the published short vectors.

Integers mod ``q`` are represented in ``[-(q-1)/2, (q-1)/2]``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import collapse_meas as cm
from .errors import (
    DegenerateShortSet,
    EmptyCoset,
    InvalidInput,
    InvalidParams,
    NotGoodEllipsoid,
    WidthTooNarrow,
    ZeroBranch,
)
from .gaussian import (
    KAPPA,
    KLS_SIGMA_FACTOR,
    TAU,
    CovarianceSpec,
    Gaussian1D,
    amp_1d,
    coherent_gaussian_cov,
    shifted_lattice_gaussian,
)
from .modarith import (
    centered,
    int_rank,
    is_prime,
    nullspace_mod,
    random_invertible,
    rank_mod,
)
from .statekit import DensityMatrix, StateVector, enumerate_branches, measure_function

#: ellipsoid widening factor for the clone's intermediate Gaussian
BETA = 16.0
#: squared Q-norm cut for the short sublattice: two points of the unit
#: ellipsoid differ by a vector of Q-norm at most 2
SUBLATTICE_RADIUS2 = 4.0


# ---------------------------------------------------------------------------
# parameters and instances
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SchemeParams:
    q: int
    n: int
    m: int
    ell: int
    W: float = 0.0
    noise_width: float = 1.0

    def __post_init__(self):
        if not is_prime(self.q):
            raise InvalidParams(f"q={self.q} is not prime")
        if self.ell < 0 or self.n < 1:
            raise InvalidParams("need n >= 1 and ell >= 0")
        if self.m <= self.n + self.ell:
            raise InvalidParams(f"need m > n + ell (m={self.m}, n={self.n}, ell={self.ell})")


@dataclass(frozen=True)
class LatticeMoneyInstance:
    """Public data ``A`` together with the short vectors ``S`` and the
    complement basis ``C`` (all integer arrays; ``A``, ``C`` reduced mod ``q``)."""

    q: int
    S: np.ndarray      # m x ell
    A: np.ndarray      # m x n
    C: np.ndarray      # m x (m - ell)

    def __post_init__(self):
        m = self.A.shape[0]
        S = np.asarray(self.S, dtype=np.int64).reshape(m, -1)
        object.__setattr__(self, "S", S)
        object.__setattr__(self, "A", np.mod(np.asarray(self.A, dtype=np.int64), self.q))
        object.__setattr__(self, "C", np.mod(np.asarray(self.C, dtype=np.int64), self.q))

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def n(self) -> int:
        return self.A.shape[1]

    @property
    def ell(self) -> int:
        return self.S.shape[1]

    def serial(self, y) -> tuple:
        return tuple(int(v) for v in np.mod(np.asarray(y, dtype=np.int64) @ self.A, self.q))

    def kernel_class(self, y) -> tuple:
        return tuple(int(v) for v in np.mod(np.asarray(y, dtype=np.int64) @ self.C, self.q))

    def check(self) -> dict:
        """Evaluate every structural invariant; all values should be ``True``."""
        q = self.q
        return {
            "AtS": bool(not np.any(np.mod(self.A.T @ self.S, q))),
            "CtS": bool(not np.any(np.mod(self.C.T @ self.S, q))),
            "rankC": rank_mod(self.C, q) == self.m - self.ell,
            "rankS": rank_mod(self.S, q) == self.ell if self.ell else True,
        }

    def to_json(self) -> dict:
        return {"q": self.q, "S": self.S.T.tolist(), "A": self.A.tolist(), "C": self.C.tolist()}

    @classmethod
    def from_json(cls, obj: dict) -> "LatticeMoneyInstance":
        A = np.array(obj["A"], dtype=np.int64)
        S = np.array(obj["S"], dtype=np.int64).reshape(-1, A.shape[0]).T
        return cls(int(obj["q"]), S, A, np.array(obj["C"], dtype=np.int64))


def bounded_short_sampler(m: int, ell: int, B: int) -> Callable[[np.random.Generator], np.ndarray]:
    """Short vectors with i.i.d. entries uniform in ``[-B, B]``."""
    return lambda rng: rng.integers(-B, B + 1, size=(m, ell))


def setup(params: SchemeParams, short_sampler, rng: np.random.Generator,
          max_retries: int = 100) -> LatticeMoneyInstance:
    """Sample ``S``, a randomized basis ``C`` of its orthogonal complement and
    ``A = C R`` for uniform ``R``.

    ``short_sampler`` is a callable ``rng -> (m x ell) int array`` or a fixed array.
    """
    q, m, n, ell = params.q, params.m, params.n, params.ell
    for _ in range(max_retries):
        S = short_sampler(rng) if callable(short_sampler) else np.asarray(short_sampler)
        S = np.asarray(S, dtype=np.int64).reshape(m, ell)
        if ell == 0 or rank_mod(S, q) == ell:
            break
        if not callable(short_sampler):
            raise DegenerateShortSet("fixed short vectors are dependent mod q")
    else:
        raise DegenerateShortSet(f"no independent short set after {max_retries} tries")
    K = nullspace_mod(S.T, q) if ell else np.eye(m, dtype=np.int64)
    C = np.mod(K @ random_invertible(m - ell, q, rng), q)
    R = rng.integers(0, q, size=(m - ell, n))
    A = np.mod(C @ R, q)
    return LatticeMoneyInstance(q, S, A, C)


# ---------------------------------------------------------------------------
# amplitudes
# ---------------------------------------------------------------------------

class AmplitudeSpec:
    """Real amplitudes ``alpha_y`` on a finite set of integer vectors.

    Subclasses implement :meth:`alpha` (vectorized, zero off the support),
    :meth:`support_array` and :meth:`sample`.  ``lo``/``hi`` give the
    per-coordinate bounds of the support.
    """

    m: int
    lo: np.ndarray
    hi: np.ndarray

    def alpha(self, Y) -> np.ndarray:
        raise NotImplementedError

    def support_array(self) -> np.ndarray:
        raise NotImplementedError

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        Y = self.support_array()
        w = self.alpha(Y) ** 2
        return Y[rng.choice(len(Y), p=w / w.sum())]

    def preimages(self, inst: LatticeMoneyInstance, u) -> np.ndarray:
        """All support vectors with ``A^T y = u mod q``."""
        Y = self.support_array()
        keep = np.all(np.mod(Y @ inst.A, inst.q) == np.asarray(u), axis=1)
        return Y[keep]

    @property
    def eta(self) -> float:
        """Exact maximum of ``alpha^2`` over the support."""
        return float(np.max(self.alpha(self.support_array()) ** 2))

    def in_box(self, Y) -> np.ndarray:
        Y = np.atleast_2d(Y)
        return np.all((Y >= self.lo) & (Y <= self.hi), axis=1)


class ExplicitAmplitude(AmplitudeSpec):
    """Amplitudes listed vector by vector (normalized on construction)."""

    def __init__(self, labels, weights=None):
        Y = np.array([tuple(int(v) for v in y) for y in labels], dtype=np.int64)
        if Y.size == 0:
            raise InvalidInput("empty amplitude support")
        w = np.ones(len(Y)) if weights is None else np.asarray(weights, dtype=float)
        if np.unique(Y, axis=0).shape[0] != Y.shape[0]:
            raise InvalidInput("duplicate support vectors")
        self._Y = Y
        self._w = w / np.linalg.norm(w)
        self._index = {tuple(y): k for k, y in enumerate(Y.tolist())}
        self.m = Y.shape[1]
        self.lo, self.hi = Y.min(axis=0), Y.max(axis=0)

    def alpha(self, Y) -> np.ndarray:
        Y = np.atleast_2d(np.asarray(Y, dtype=np.int64))
        return np.array([self._w[self._index[t]] if t in self._index else 0.0
                         for t in map(tuple, Y.tolist())])

    def support_array(self) -> np.ndarray:
        return self._Y


class ProductAmplitude(AmplitudeSpec):
    """``alpha_y = prod_i f_i(y_i)``, each factor a normalized 1-D table."""

    def __init__(self, factors: Sequence[tuple]):
        self.values = [np.asarray(v, dtype=np.int64) for v, _ in factors]
        amps = [np.asarray(a, dtype=float) for _, a in factors]
        self.amps = [a / np.linalg.norm(a) for a in amps]
        self._lookup = []
        for v, a in zip(self.values, self.amps):
            if np.any(np.diff(v) != 1):
                raise InvalidInput("factor values must be consecutive integers")
            self._lookup.append((int(v[0]), a))
        self.m = len(factors)
        self.lo = np.array([v[0] for v in self.values])
        self.hi = np.array([v[-1] for v in self.values])
        self._support = None

    def alpha(self, Y) -> np.ndarray:
        Y = np.atleast_2d(np.asarray(Y, dtype=np.int64))
        out = np.ones(Y.shape[0])
        for i, (lo, a) in enumerate(self._lookup):
            k = Y[:, i] - lo
            ok = (k >= 0) & (k < a.size)
            col = np.zeros(Y.shape[0])
            col[ok] = a[k[ok]]
            out *= col
        return out

    def support_array(self) -> np.ndarray:
        if self._support is None:
            grids = np.meshgrid(*self.values, indexing="ij")
            self._support = np.stack([g.ravel() for g in grids], axis=1)
        return self._support

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return np.array([rng.choice(v, p=a ** 2) for v, a in zip(self.values, self.amps)],
                        dtype=np.int64)

    @property
    def eta(self) -> float:
        return float(np.prod([np.max(a ** 2) for a in self.amps]))

    def preimages(self, inst: LatticeMoneyInstance, u) -> np.ndarray:
        """Solve for the last coordinate when ``n = 1`` and its ``A`` entry is a unit."""
        q = inst.q
        a_last = int(inst.A[-1, 0]) if inst.n == 1 else 0
        if inst.n != 1 or a_last % q == 0 or (self.hi[-1] - self.lo[-1] + 1) > q:
            return super().preimages(inst, u)
        grids = np.meshgrid(*self.values[:-1], indexing="ij")
        P = np.stack([g.ravel() for g in grids], axis=1) if grids else np.zeros((1, 0), np.int64)
        rest = np.mod(int(np.asarray(u).reshape(-1)[0]) - P @ inst.A[:-1, 0], q)
        last = np.mod(rest * pow(a_last, -1, q), q)
        lo, hi = int(self.lo[-1]), int(self.hi[-1])
        # the unique representative of ``last`` in [lo, lo + q)
        last = lo + np.mod(last - lo, q)
        keep = last <= hi
        Y = np.column_stack([P[keep], last[keep]])
        order = np.lexsort(Y.T[::-1])
        return Y[order]


def gaussian_product_amplitude(m: int, sigma: float, c=None, tau: float = TAU) -> ProductAmplitude:
    """Spherical Gaussian amplitudes ``exp(-pi (y_i - c_i)^2 / (2 sigma^2))`` on a box."""
    c = np.zeros(m) if c is None else np.asarray(c, dtype=float)
    factors = []
    for ci in c:
        g = Gaussian1D(float(ci), sigma, tau)
        pts = g.support
        factors.append((pts, [amp_1d(int(x), g) for x in pts]))
    return ProductAmplitude(factors)


def ball_amplitude(m: int, radius: int) -> ExplicitAmplitude:
    """Uniform amplitudes on the integer points of the Euclidean ball ``|y| <= radius``."""
    r = int(radius)
    axes = np.arange(-r, r + 1, dtype=np.int64)
    grid = np.stack(np.meshgrid(*([axes] * m), indexing="ij"), axis=-1).reshape(-1, m)
    return ExplicitAmplitude(grid[np.sum(grid ** 2, axis=1) <= r * r])


# ---------------------------------------------------------------------------
# mint and attack
# ---------------------------------------------------------------------------

def _state_on(Y: np.ndarray, amps: np.ndarray) -> StateVector:
    keep = amps != 0
    Y, amps = Y[keep], amps[keep]
    if Y.shape[0] == 0:
        raise ZeroBranch("empty branch")
    return StateVector(tuple(map(tuple, Y.tolist())), amps / np.linalg.norm(amps))


def note_state(inst: LatticeMoneyInstance, amp: AmplitudeSpec, u) -> StateVector:
    """``|psi_u> ∝ sum_{A^T y = u} alpha_y |y>``."""
    Y = amp.preimages(inst, u)
    return _state_on(Y, amp.alpha(Y))


def mint(inst: LatticeMoneyInstance, amp: AmplitudeSpec,
         rng: np.random.Generator) -> tuple[tuple, StateVector]:
    """Prepare ``sum alpha_y |y>`` and measure ``A^T y``.

    The serial is distributed as ``A^T y`` for ``y ~ alpha^2``, so it is
    drawn by sampling one ``y``; the state is then the renormalized class.
    """
    u = inst.serial(amp.sample(rng))
    return u, note_state(inst, amp, u)


def mint_branches(inst: LatticeMoneyInstance, amp: AmplitudeSpec) -> list:
    """Every serial with its probability and note (explicit supports only)."""
    Y = amp.support_array()
    full = _state_on(Y, amp.alpha(Y))
    return enumerate_branches(full, inst.serial)


def attack_project(state: StateVector, inst: LatticeMoneyInstance,
                   rng: np.random.Generator) -> tuple[tuple, StateVector]:
    """Measure ``C^T y mod q``; returns the outcome and the collapsed state."""
    res = measure_function(state, inst.kernel_class, rng)
    return res.outcome, _compact(res.post)


def attack_project_branches(state: StateVector, inst: LatticeMoneyInstance) -> list:
    return [type(b)(b.outcome, b.prob, _compact(b.post))
            for b in enumerate_branches(state, inst.kernel_class)]


def _compact(s: StateVector) -> StateVector:
    keep = np.abs(s.amps) > 0
    return StateVector(tuple(l for l, k in zip(s.basis, keep) if k), s.amps[keep])


def measure_vector(state: StateVector, rng: np.random.Generator) -> np.ndarray:
    p = np.abs(state.amps) ** 2
    k = rng.choice(len(p), p=p / p.sum())
    return np.array(state.basis[k], dtype=np.int64)


def honest_support_verify(state: StateVector, u, inst: LatticeMoneyInstance, W) -> bool:
    """Every support label satisfies ``A^T y = u`` and the size bound.

    ``W`` is a scalar (``|y_i| <= W``) or a pair ``(lo, hi)`` of per-coordinate bounds.
    """
    Y = np.array(state.support(), dtype=np.int64).reshape(-1, inst.m)
    if Y.shape[0] == 0:
        return False
    if not np.all(np.mod(Y @ inst.A, inst.q) == np.asarray(u)):
        return False
    if isinstance(W, tuple):
        lo, hi = W
        return bool(np.all((Y >= np.asarray(lo)) & (Y <= np.asarray(hi))))
    return bool(np.all(np.abs(Y) <= W))


# ---------------------------------------------------------------------------
# cloning: Gaussian case
# ---------------------------------------------------------------------------

def clone_gaussian(y, inst: LatticeMoneyInstance, spec: CovarianceSpec,
                   tau: float = TAU, kappa: float = KAPPA) -> StateVector:
    """Gaussian superposition over ``y + L(S)`` with covariance ``spec``."""
    y = np.asarray(y, dtype=np.int64)
    if inst.ell == 0:
        return StateVector((tuple(int(v) for v in y),), np.ones(1))
    return shifted_lattice_gaussian(y, inst.S, spec, tau=tau, kappa=kappa)


# ---------------------------------------------------------------------------
# cloning: ellipsoid case
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GoodEllipsoid:
    """``E = {x : (x-c)^T Sigma^{-1} (x-c) <= 1}`` with amplitude cap ``eta``.

    ``p_poly`` and ``q_poly`` bound the fraction and depth of low-amplitude
    points: a uniform point of ``E ∩ (y + L)`` must have ``alpha^2 >=
    eta / q_poly`` with probability at least ``1 / p_poly``.
    """

    Sigma: np.ndarray
    c: np.ndarray
    eta: float
    p_poly: float = 1e3
    q_poly: float = 1e6

    @property
    def Sigma_inv(self) -> np.ndarray:
        return np.linalg.inv(self.Sigma)

    @classmethod
    def from_axes(cls, axes, c, eta: float, **kw) -> "GoodEllipsoid":
        return cls(np.diag(np.asarray(axes, dtype=float) ** 2), np.asarray(c, dtype=float),
                   float(eta), **kw)

    def contains(self, X) -> np.ndarray:
        D = np.atleast_2d(X) - self.c
        return np.einsum("ij,jk,ik->i", D, self.Sigma_inv, D) <= 1.0 + 1e-12


def check_goodness(good: GoodEllipsoid, amp: AmplitudeSpec) -> dict:
    """The support-wide goodness conditions (containment and the ``eta`` cap)."""
    Y = amp.support_array()
    a2 = amp.alpha(Y) ** 2
    nz = a2 > 0
    return {"contains_support": bool(np.all(good.contains(Y[nz]))),
            "eta_caps": bool(np.max(a2) <= good.eta * (1 + 1e-12))}


@dataclass
class EllipsoidClonePlan:
    """Deterministic part of the ellipsoid clone for one starting vector ``y``.

    ``t``-coordinates parametrize ``x = y + S t``.  The restricted ellipsoid
    is ``(t - t_star)^T Q (t - t_star) <= 1``; ``R`` holds the short
    sublattice basis (columns, in ``t``-coordinates).
    """

    y: np.ndarray
    Q: np.ndarray
    t_star: np.ndarray
    R: np.ndarray
    beta: float
    gauss: StateVector              # over t-vectors of L(R), width beta * Q^{-1}
    in_E: np.ndarray                # mask over gauss.basis
    gamma: np.ndarray               # step-2 flag amplitudes
    eta_x: np.ndarray               # step-3 weights on E points
    alpha_E: np.ndarray             # alpha on E points
    points_E: np.ndarray            # x-vectors of E ∩ (y + L)
    p_to_E: float                   # step-2 acceptance
    p_to_alpha: float               # step-3 acceptance
    state: StateVector = None       # final clone

    @property
    def success_prob(self) -> float:
        return self.p_to_E * self.p_to_alpha

    def attempt(self, rng: np.random.Generator) -> bool:
        """Both flag measurements of one attempt; ``True`` when both read 0."""
        return bool(rng.random() < self.p_to_E) and bool(rng.random() < self.p_to_alpha)


def restrict_ellipsoid(y, S, Sigma_inv, c) -> tuple[np.ndarray, np.ndarray, float]:
    """Restrict ``E`` to ``y + span_R(S)``: returns ``(Q, t_star, mu)``."""
    y = np.asarray(y, dtype=float)
    S = np.asarray(S, dtype=float)
    G = S.T @ Sigma_inv @ S
    r = y - np.asarray(c, dtype=float)
    t_star = -np.linalg.solve(G, S.T @ Sigma_inv @ r)
    mu = float(r @ Sigma_inv @ r - t_star @ G @ t_star)
    if mu >= 1.0:
        raise EmptyCoset(f"y lies outside the ellipsoid (restricted offset {mu:.4f} >= 1)")
    return G / (1.0 - mu), t_star, mu


def _box_bounds(Q: np.ndarray, radius2: float) -> np.ndarray:
    return np.sqrt(np.maximum(np.diag(np.linalg.inv(Q)) * radius2, 0.0))


def short_sublattice(Q: np.ndarray, radius2: float = SUBLATTICE_RADIUS2) -> np.ndarray:
    """Successive shortest independent vectors of ``Z^ell`` under the form ``Q``
    with ``t^T Q t <= radius2`` (exhaustive; ties broken lexicographically)."""
    ell = Q.shape[0]
    b = np.floor(_box_bounds(Q, radius2) + 1e-9).astype(int)
    cands = []
    for t in itertools.product(*[range(-k, k + 1) for k in b]):
        if any(t):
            v = np.array(t)
            nrm = float(v @ Q @ v)
            if nrm <= radius2 + 1e-9:
                cands.append((round(nrm, 12), t))
    cands.sort()
    basis: list = []
    for _, t in cands:
        if len(basis) == ell:
            break
        trial = basis + [t]
        if np.linalg.matrix_rank(np.array(trial, dtype=float)) == len(trial):
            basis.append(t)
    return np.array(basis, dtype=np.int64).T.reshape(ell, len(basis))


def enumerate_coset_in_ellipsoid(y, S, Q: np.ndarray, t_star: np.ndarray) -> np.ndarray:
    """Brute-force ``{t in Z^ell : (t - t_star)^T Q (t - t_star) <= 1}``."""
    b = _box_bounds(Q, 1.0)
    ranges = [range(math.ceil(ts - bi - 1e-9), math.floor(ts + bi + 1e-9) + 1)
              for ts, bi in zip(t_star, b)]
    pts = [t for t in itertools.product(*ranges)
           if (np.array(t) - t_star) @ Q @ (np.array(t) - t_star) <= 1.0 + 1e-12]
    return np.array(pts, dtype=np.int64).reshape(-1, len(t_star))


def ellipsoid_clone_plan(y, inst: LatticeMoneyInstance, good: GoodEllipsoid,
                         amp: AmplitudeSpec, beta: float = BETA,
                         radius2: float = SUBLATTICE_RADIUS2) -> EllipsoidClonePlan:
    """Run the deterministic part of the three-step ellipsoid clone.

    1. restrict ``E`` to ``y + span(S)`` and extract the short sublattice ``T``;
    2. Gaussian of width ``beta Sigma'`` over ``y + L(T)``, then the flag
       ``gamma_x`` that leaves the uniform superposition over ``E ∩ (y + L)``;
    3. the flag ``sqrt(eta_x) alpha_x`` that leaves the ``alpha``-weighted state.
    """
    y = np.asarray(y, dtype=np.int64)
    S = inst.S
    Q, t_star, _ = restrict_ellipsoid(y, S, good.Sigma_inv, good.c)
    R = short_sublattice(Q, radius2)
    ell = Q.shape[0]
    if R.shape[1] == 0:
        T = np.zeros((1, ell), dtype=np.int64)
        gauss = StateVector((tuple([0] * ell),), np.ones(1))
    else:
        spec = CovarianceSpec.make(beta * np.linalg.inv(Q), t_star)
        # the truncation window (in the unit-width frame) just covers E, whose
        # radius there is 1/sqrt(beta); the width ratio is at least sqrt(beta/radius2)
        gauss = coherent_gaussian_cov(R, spec, tau=1.25 / math.sqrt(beta),
                                      kappa=math.sqrt(beta / radius2))
        T = np.array(gauss.basis, dtype=np.int64).reshape(-1, ell)
    D = T - t_star
    dx = np.einsum("ij,jk,ik->i", D, Q, D)
    in_E = dx <= 1.0 + 1e-12
    if not in_E.any():
        raise EmptyCoset("E ∩ (y + L) is empty")
    gamma = np.where(in_E, math.exp(-math.pi / beta) * np.exp(math.pi * dx / (2 * beta)), 0.0)
    amps2 = np.abs(gauss.amps) ** 2
    p_to_E = float(np.sum(amps2 * gamma ** 2))
    X = y[None, :] + T[in_E] @ S.T
    alpha = amp.alpha(X)
    eta = good.eta
    a2 = alpha ** 2
    eta_x = np.where(a2 <= eta, 1.0 / eta, 1.0 / np.where(a2 > 0, a2, 1.0))
    frac_good = float(np.mean(a2 >= eta / good.q_poly))
    if frac_good < 1.0 / good.p_poly:
        raise NotGoodEllipsoid(
            f"only {frac_good:.3g} of E ∩ (y+L) has alpha^2 >= eta/q (need {1 / good.p_poly:.3g})")
    p_to_alpha = float(np.mean(eta_x * a2))
    if p_to_alpha <= 0:
        raise EmptyCoset("no point of E ∩ (y + L) carries amplitude")
    plan = EllipsoidClonePlan(y, Q, t_star, R, beta, gauss, in_E, gamma, eta_x,
                              alpha, X, p_to_E, p_to_alpha)
    plan.state = _state_on(X, np.sqrt(eta_x) * alpha)
    return plan


def clone_ellipsoid(y, inst: LatticeMoneyInstance, good: GoodEllipsoid, amp: AmplitudeSpec,
                    rng: np.random.Generator, beta: float = BETA,
                    max_attempts: int = 1_000_000) -> tuple[StateVector, float]:
    """Rebuild the coset state through ``y``; restarts until both flags read 0.

    Returns ``(state, success_probability_per_attempt)``.
    """
    plan = ellipsoid_clone_plan(y, inst, good, amp, beta)
    for _ in range(max_attempts):
        if plan.attempt(rng):
            return plan.state, plan.success_prob
    raise ZeroBranch("clone did not succeed within the attempt budget")


def sublattice_claim_holds(plan: EllipsoidClonePlan, S) -> bool:
    """Every point of ``E' ∩ (y + L(S))`` lies in ``y + L(T)`` (brute force)."""
    full = enumerate_coset_in_ellipsoid(plan.y, S, plan.Q, plan.t_star)
    got = np.array(plan.gauss.basis, dtype=np.int64).reshape(-1, plan.Q.shape[0])[plan.in_E]
    return {tuple(t) for t in full.tolist()} == {tuple(t) for t in got.tolist()}


# ---------------------------------------------------------------------------
# the three-short-vector instance
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KLSParams:
    """Toy parameters: prime ``P``, width ``sigma`` (weight ``exp(-y^2/(4 sigma^2))``),
    odd ``Delta``, small ``t``, offset range ``k <= t sigma Delta`` and base dimension ``d``."""

    P: int
    sigma: int
    Delta: int
    t: int
    k: int
    d: int
    gauss_cut: float = 6.0     # Gaussian coordinates kept for |y| <= gauss_cut * sigma

    def __post_init__(self):
        if not is_prime(self.P):
            raise InvalidParams(f"P={self.P} is not prime")
        if self.Delta % 2 == 0 or self.Delta <= 0:
            raise InvalidParams("Delta must be a positive odd integer")
        if self.k > self.t * self.sigma * self.Delta or self.k < 0:
            raise InvalidParams("need 0 <= k <= t*sigma*Delta")
        if self.d < 2:
            raise InvalidParams("need d >= 2")
        if 2 * self.t * self.sigma * self.Delta + 1 >= self.P:
            raise InvalidParams("P too small for 2 t sigma Delta + 1")

    @property
    def Gamma(self) -> int:
        """``1/2 + t sigma Delta mod P``."""
        return ((self.P + 1) // 2 + self.t * self.sigma * self.Delta) % self.P

    @property
    def two_gamma(self) -> int:
        return 2 * self.t * self.sigma * self.Delta + 1

    @property
    def m(self) -> int:
        return self.d + 2

    @property
    def gauss_bound(self) -> int:
        return int(math.floor(self.gauss_cut * self.sigma + 1e-9))


def kls_short_vectors(kp: KLSParams) -> np.ndarray:
    """Columns ``s0, s1, s2`` (coordinates ordered ``b, j, y_1, ..., y_d``)."""
    S = np.zeros((kp.m, 3), dtype=np.int64)
    S[2, 0], S[3, 0] = kp.Delta, -2
    S[1, 1], S[2, 1] = 1, 1
    S[0, 2], S[1, 2] = -2, kp.two_gamma
    return S


def kls_vprime(kp: KLSParams, rng: np.random.Generator) -> np.ndarray:
    """Unscaled ``v' = (-Gamma, -1, 1, Delta/2 mod P, random...)`` mod ``P``."""
    P = kp.P
    head = [-kp.Gamma, -1, 1, kp.Delta * pow(2, -1, P)]
    rest = rng.integers(0, P, size=kp.d - 2)
    return np.mod(np.concatenate([np.array(head, dtype=np.int64), rest]), P)


def kls_amplitude(kp: KLSParams) -> ProductAmplitude:
    """Bit uniform on {0,1}, offset uniform on [-k,k], Gaussian coordinates."""
    sig = kp.sigma * KLS_SIGMA_FACTOR
    G = kp.gauss_bound
    g = Gaussian1D(0.0, sig, G / sig)
    gv = np.arange(-G, G + 1)
    factors = [(np.array([0, 1]), np.ones(2)), (np.arange(-kp.k, kp.k + 1), np.ones(2 * kp.k + 1))]
    factors += [(gv, [amp_1d(int(x), g) for x in gv])] * kp.d
    return ProductAmplitude(factors)


def kls_instance(kp: KLSParams, seed: int) -> tuple[LatticeMoneyInstance, ProductAmplitude]:
    """Instance with ``A`` a random vector orthogonal to ``s0, s1, s2`` mod ``P``."""
    rng = np.random.default_rng(seed)
    S = kls_short_vectors(kp)
    params = SchemeParams(kp.P, 1, kp.m, 3)
    while True:
        inst = setup(params, S, rng)
        if inst.A[-1, 0] % kp.P:
            break
    return inst, kls_amplitude(kp)


def kls_good_ellipsoid(kp: KLSParams, amp: ProductAmplitude, **kw) -> GoodEllipsoid:
    """Axis lengths ``4, 2k`` for the bit and offset, and Gaussian axes just
    large enough that the whole truncated box fits."""
    G = kp.gauss_bound
    a_b, a_j = 4.0, 2.0 * kp.k
    slack = 1.0 - (0.5 / a_b) ** 2 - (kp.k / a_j) ** 2
    a_g = math.ceil(G * math.sqrt(kp.d / slack) * 100) / 100 + 0.01
    c = np.zeros(kp.m)
    c[0] = 0.5
    return GoodEllipsoid.from_axes([a_b, a_j] + [a_g] * kp.d, c, amp.eta, **kw)


def kls_support_box(kp: KLSParams) -> tuple[np.ndarray, np.ndarray]:
    G = kp.gauss_bound
    lo = np.array([0, -kp.k] + [-G] * kp.d)
    hi = np.array([1, kp.k] + [G] * kp.d)
    return lo, hi


@dataclass
class FlawReport:
    params: dict
    trials: list = field(default_factory=list)

    @property
    def n_trials(self) -> int:
        return len(self.trials)

    @property
    def all_decompose(self) -> bool:
        return all(t["decomposes"] for t in self.trials)

    @property
    def n_independent(self) -> int:
        return sum(t["independent_of_S"] for t in self.trials)

    @property
    def support_pass_rate(self) -> float:
        return float(np.mean([t["support_pass"] for t in self.trials])) if self.trials else 0.0

    def to_json(self) -> dict:
        return {"params": self.params, "n_trials": self.n_trials,
                "all_decompose": self.all_decompose, "n_independent": self.n_independent,
                "support_pass_rate": self.support_pass_rate, "trials": self.trials}


def decompose_difference(diff, kp: KLSParams) -> tuple[int, int] | None:
    """Integer ``(a, b)`` with ``diff = a (s0 - Delta s1) + b s1``, or ``None``."""
    S = kls_short_vectors(kp)
    s0, s1 = S[:, 0], S[:, 1]
    M = np.column_stack([s0 - kp.Delta * s1, s1]).astype(float)
    coef, *_ = np.linalg.lstsq(M, np.asarray(diff, dtype=float), rcond=None)
    rc = np.rint(coef).astype(np.int64)
    if np.array_equal(M.astype(np.int64) @ rc, np.asarray(diff, dtype=np.int64)):
        return int(rc[0]), int(rc[1])
    return None


def kls_flaw_demo(kp: KLSParams, trials: int, rng: np.random.Generator,
                  seed: int = 0, beta: float = BETA) -> FlawReport:
    """Mint, project, clone twice from one measured vector, measure both clones
    and decompose their difference over ``{s0 - Delta s1, s1}``."""
    inst, amp = kls_instance(kp, seed)
    good = kls_good_ellipsoid(kp, amp)
    gchk = check_goodness(good, amp)
    if not all(gchk.values()):
        raise NotGoodEllipsoid(f"ellipsoid fails goodness: {gchk}")
    box = kls_support_box(kp)
    S = inst.S
    report = FlawReport({"P": kp.P, "sigma": kp.sigma, "Delta": kp.Delta, "t": kp.t,
                         "k": kp.k, "d": kp.d, "seed": seed, "beta": beta})
    for _ in range(trials):
        u, note = mint(inst, amp, rng)
        _, coset = attack_project(note, inst, rng)
        y = measure_vector(coset, rng)
        c1, p1 = clone_ellipsoid(y, inst, good, amp, rng, beta)
        c2, p2 = clone_ellipsoid(y, inst, good, amp, rng, beta)
        y1, y2 = measure_vector(c1, rng), measure_vector(c2, rng)
        diff = y1 - y2
        dec = decompose_difference(diff, kp)
        indep = int_rank(np.column_stack([S, diff])) > int_rank(S)
        passed = honest_support_verify(c1, u, inst, box) and honest_support_verify(c2, u, inst, box)
        report.trials.append({
            "serial": list(u), "y1": y1.tolist(), "y2": y2.tolist(), "diff": diff.tolist(),
            "decomposition": list(dec) if dec is not None else None,
            "decomposes": dec is not None, "independent_of_S": bool(indep),
            "support_pass": bool(passed), "success_prob": p1,
        })
    return report


# ---------------------------------------------------------------------------
# distinguishing experiment
# ---------------------------------------------------------------------------

def invariance_probability(state: StateVector, factor: np.ndarray, rounds: int) -> float:
    """``<psi| Phi^rounds(|psi><psi|) |psi>`` for an entrywise channel ``Phi``."""
    p = np.abs(state.amps) ** 2
    return float(p @ (factor ** rounds) @ p)


def distinguish_experiment(stateA: StateVector, stateB: StateVector,
                           inst: LatticeMoneyInstance, noise_width: float, t: int,
                           rounds: int = 1, channel: str = "M1",
                           mode: str = "exact", noise_tau: float = cm.NOISE_TAU) -> tuple[float, float]:
    """Probability that each state survives ``rounds`` rounding measurements
    unchanged (projected back onto itself), computed exactly from the channel
    factors.  ``channel="M1"`` uses ``b = A r + e``; ``"M2"`` uses ``b = C r' + e``."""
    noise = cm.NoiseModel(noise_width, noise_tau)
    grid = cm.RoundingGrid(inst.q, t)
    table = cm.factor_table_M1 if channel == "M1" else cm.factor_table_M2
    out = []
    for s in (stateA, stateB):
        F = table(inst, grid, noise, s.basis, mode).factor
        out.append(invariance_probability(s, F, rounds))
    return out[0], out[1]


def density_of(state: StateVector) -> DensityMatrix:
    return state.density()
