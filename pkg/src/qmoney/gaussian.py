"""Discrete Gaussian states and samplers over integer lattices.

Amplitude convention (used everywhere in the package)::

    amp(x)  ∝  exp(-pi * (x - c)^T Sigma^{-1} (x - c) / 2)

i.e. the square root of the Gaussian mass ``rho(x) = exp(-pi ||x-c||^2 /
sigma^2)`` in the spherical case.  A weight written as ``exp(-x^2 /
(4 s^2))`` corresponds to ``sigma = s * sqrt(2 pi)``
(:data:`KLS_SIGMA_FACTOR`).

Every infinite support is truncated at ``tau`` standard widths along each
sampling direction; states are renormalized on the truncated support.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import (
    InternalError,
    InvalidInput,
    SingularBasis,
    WidthTooNarrow,
)
from .statekit import StateVector, enumerate_branches, measure_function, uniform_superposition

#: width multiplier standing in for the asymptotic smoothing condition
KAPPA = 4.0
#: truncation multiplier
TAU = 8.0
#: ``exp(-x^2/(4 s^2)) == exp(-pi x^2 / (2 sigma^2))`` for ``sigma = s * KLS_SIGMA_FACTOR``
KLS_SIGMA_FACTOR = math.sqrt(2.0 * math.pi)


# ---------------------------------------------------------------------------
# one dimension
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Gaussian1D:
    c: float
    sigma: float
    tau: float = TAU

    def __post_init__(self):
        if not self.sigma > 0:
            raise InvalidInput(f"sigma must be positive (got {self.sigma})")

    @property
    def support(self) -> np.ndarray:
        lo = math.ceil(self.c - self.tau * self.sigma - 1e-12)
        hi = math.floor(self.c + self.tau * self.sigma + 1e-12)
        return np.arange(lo, hi + 1, dtype=np.int64)


def amp_1d(x: int, g: Gaussian1D) -> float:
    """``exp(-pi (x-c)^2 / (2 sigma^2))`` inside the truncation window, else 0."""
    if abs(x - g.c) > g.tau * g.sigma + 1e-12:
        return 0.0
    return math.exp(-math.pi * (x - g.c) ** 2 / (2.0 * g.sigma ** 2))


@dataclass(frozen=True)
class ZSampleResult:
    state: StateVector
    accept_prob: float
    attempts: int = 1


def coherent_gaussian_Z(g: Gaussian1D, mode: str = "exact",
                        rng: np.random.Generator | None = None,
                        kappa_min: float | None = None) -> ZSampleResult:
    """Prepare the truncated Gaussian superposition over the integers.

    Steps: uniform superposition over the ``w`` support points; attach a
    flag qubit with amplitude ``sqrt(rho(i))`` on ``|0>``; measure the flag
    and keep the ``0`` branch (restarting otherwise).

    ``mode="exact"`` returns the accepted branch with its probability;
    ``mode="sample"`` replays restarts with ``rng`` and reports the number of
    attempts.
    """
    if kappa_min is not None and g.sigma < kappa_min:
        raise WidthTooNarrow(f"sigma={g.sigma} below {kappa_min}")
    pts = g.support
    reg = uniform_superposition([int(i) for i in pts])
    rho = np.exp(-math.pi * (pts - g.c) ** 2 / g.sigma ** 2)
    labels, amps = [], []
    for i, a, r in zip(reg.basis, reg.amps, rho):
        labels += [(i, 0), (i, 1)]
        amps += [a * math.sqrt(r), a * math.sqrt(max(0.0, 1.0 - r))]
    joint = StateVector(tuple(labels), np.array(amps))
    flag = lambda lab: lab[1]
    if mode == "exact":
        branch = next(b for b in enumerate_branches(joint, flag) if b.outcome == 0)
        attempts = 1
    elif mode == "sample":
        if rng is None:
            raise InvalidInput("sample mode needs an rng")
        attempts = 0
        while True:
            attempts += 1
            res = measure_function(joint, flag, rng)
            if res.outcome == 0:
                branch = res
                break
    else:
        raise InvalidInput(f"unknown mode {mode!r}")
    post = branch.post
    out = StateVector(reg.basis, [post.amp((i, 0)) for i in reg.basis])
    p0 = float(rho.sum() / len(pts))
    return ZSampleResult(out, p0, attempts)


@lru_cache(maxsize=8192)
def _z_state_cached(c: float, sigma: float, tau: float) -> tuple[np.ndarray, np.ndarray, float]:
    res = coherent_gaussian_Z(Gaussian1D(c, sigma, tau))
    pts = np.array(res.state.basis, dtype=np.int64)
    return pts, res.state.amps.real.copy(), res.accept_prob


# ---------------------------------------------------------------------------
# lattices
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LatticeBasis:
    """Columns of ``B`` generate the lattice; ``gso`` holds their Gram-Schmidt
    orthogonalization in the same (column) layout."""

    B: np.ndarray
    gso: np.ndarray

    @property
    def dim(self) -> int:
        return self.B.shape[1]

    @property
    def gso_norms(self) -> np.ndarray:
        return np.linalg.norm(self.gso, axis=0)

    def coefficients(self, v: np.ndarray) -> np.ndarray:
        """Real coefficients of ``v`` in the basis (least squares)."""
        return np.linalg.lstsq(self.B, v, rcond=None)[0]


def gram_schmidt(B) -> LatticeBasis:
    """Gram-Schmidt orthogonalization of the columns of ``B`` (no normalization)."""
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if B.shape[0] < B.shape[1] or np.linalg.matrix_rank(B) < B.shape[1]:
        raise SingularBasis("basis columns are linearly dependent")
    gso = np.zeros_like(B)
    for i in range(B.shape[1]):
        v = B[:, i].copy()
        for j in range(i):
            bj = gso[:, j]
            v -= (B[:, i] @ bj) / (bj @ bj) * bj
        gso[:, i] = v
    return LatticeBasis(B, gso)


@dataclass
class LatticeAudit:
    """Ancilla bookkeeping of the coherent lattice sampler."""

    joint_dim: int
    ancilla_weight: float          # squared norm on labels with a nonzero ancilla
    trace_distance: float          # joint state vs (main state) ⊗ |0...0>
    accept_probs: list             # per-step min/max flag acceptance


def _gpv_coherent(Bt: np.ndarray, c: np.ndarray, sigma: float, tau: float,
                  audit: bool = False):
    """Coherent GPV loop over a real basis ``Bt`` (columns), centre ``c``.

    Returns ``(coeffs, amps, audit)``: integer coefficient vectors ``z`` (rows)
    with lattice point ``Bt @ z`` and their amplitudes.

    Registers per step ``i`` (processed from the last Gram-Schmidt direction
    to the first): ``V`` (the point, stored through its coefficients ``Z``),
    ``C`` (``c_i'``) and ``Zr`` (``z_i``).  The joint state is a list of
    labelled rows; equal labels are merged after every step so interference
    during uncomputation is simulated exactly.
    """
    lb = gram_schmidt(Bt)
    n = lb.dim
    norms2 = np.sum(lb.gso ** 2, axis=0)
    coef_rows = np.linalg.pinv(lb.B)
    Z = np.zeros((1, n), dtype=np.int64)
    CR = np.zeros(1)
    ZR = np.zeros(1, dtype=np.int64)
    amps = np.ones(1, dtype=complex)
    accept = []

    def cprime(Z, i):
        V = Z @ lb.B.T
        return ((c[None, :] - V) @ lb.gso[:, i]) / norms2[i]

    for i in range(n - 1, -1, -1):
        s_i = sigma / math.sqrt(norms2[i])
        # (a) compute c_i' into the C register
        CR = CR + cprime(Z, i)
        # (b) attach the 1-D Gaussian centred at the C register value
        centres, inv = np.unique(CR, return_inverse=True)
        parts_rows, parts_pts, parts_amp = [], [], []
        probs = []
        for g, cv in enumerate(centres):
            rows = np.nonzero(inv == g)[0]
            pts, za, p0 = _z_state_cached(float(cv), s_i, tau)
            probs.append(p0)
            parts_rows.append(np.repeat(rows, len(pts)))
            parts_pts.append(np.tile(pts, len(rows)))
            parts_amp.append(np.tile(za, len(rows)))
        if audit:
            accept.append((min(probs), max(probs)))
        rows = np.concatenate(parts_rows)
        Z, CR = Z[rows], CR[rows]
        ZR = ZR[rows] + np.concatenate(parts_pts)
        amps = amps[rows] * np.concatenate(parts_amp)
        # (c) uncompute c_i'
        CR = CR - cprime(Z, i)
        # (d) |v, z_i> -> |v + z_i b_i, z_i>
        Z = Z.copy()
        Z[:, i] += ZR
        # (e) uncompute z_i from the coefficient of b_i of the new point
        coef = (Z @ lb.B.T) @ coef_rows[i]
        rc = np.rint(coef)
        if np.any(np.abs(coef - rc) > 1e-6):
            raise InternalError("non-integral coefficient during uncompute")
        ZR = ZR - rc.astype(np.int64)
        Z, CR, ZR, amps = _merge(Z, CR, ZR, amps)

    clean = (np.abs(CR) < 1e-9) & (ZR == 0)
    anc_weight = float(np.sum(np.abs(amps[~clean]) ** 2))
    Zc, main = Z[clean], amps[clean]
    order = np.lexsort(Zc.T[::-1]) if Zc.size else np.arange(0)
    Zc, main = Zc[order], main[order]
    info = None
    if audit:
        total = float(np.sum(np.abs(amps) ** 2))
        # joint pure state vs (normalized main) ⊗ |0,0>: the only overlap is
        # on zero-ancilla labels, so 1 - |<joint|prod>|^2 = anc/total
        td = math.sqrt(anc_weight / total) if total > 0 else 1.0
        info = LatticeAudit(int(Z.shape[0]), anc_weight / total, td, accept)
    return [tuple(int(v) for v in z) for z in Zc], main, info


def _merge(Z, CR, ZR, amps):
    """Sum amplitudes of rows carrying the same joint label."""
    key = np.column_stack([Z, ZR, np.rint(CR * 1e9).astype(np.int64)])
    uniq, inv = np.unique(key, axis=0, return_inverse=True)
    if uniq.shape[0] == key.shape[0]:
        return Z, CR, ZR, amps
    inv = inv.reshape(-1)
    out = np.zeros(uniq.shape[0], dtype=complex)
    np.add.at(out, inv, amps)
    first = np.zeros(uniq.shape[0], dtype=np.int64)
    first[inv[::-1]] = np.arange(len(inv))[::-1]
    return Z[first], CR[first], ZR[first], out


def _check_width(lb: LatticeBasis, sigma: float, kappa: float):
    worst = float(np.max(lb.gso_norms))
    if sigma < kappa * worst - 1e-12:
        raise WidthTooNarrow(f"sigma={sigma} < kappa*max||b~||={kappa * worst}")


def _as_state(labels, amps) -> StateVector:
    amps = np.asarray(amps, dtype=complex)
    return StateVector(tuple(labels), amps / np.linalg.norm(amps))


def coherent_gaussian_lattice(B, c, sigma: float, tau: float = TAU,
                              kappa: float = KAPPA, audit: bool = False):
    """Gaussian superposition over the lattice spanned by the columns of ``B``.

    Labels are integer lattice points (tuples).  With ``audit=True`` returns
    ``(state, LatticeAudit)``.
    """
    lb = B if isinstance(B, LatticeBasis) else gram_schmidt(B)
    c = np.asarray(c, dtype=float).reshape(-1)
    if c.shape[0] != lb.B.shape[0]:
        raise InvalidInput("centre has wrong dimension")
    _check_width(lb, sigma, kappa)
    coeffs, amps, info = _gpv_coherent(lb.B, c, sigma, tau, audit)
    labels = [tuple(int(round(t)) for t in lb.B @ np.array(z)) for z in coeffs]
    st = _as_state(labels, amps)
    return (st, info) if audit else st


def closed_form_amplitudes(labels: Sequence[tuple], c, Sigma_inv) -> np.ndarray:
    """Normalized ``exp(-pi (x-c)^T Sigma^{-1} (x-c) / 2)`` on the given labels."""
    X = np.array(labels, dtype=float).reshape(len(labels), -1)
    d = X - np.asarray(c, dtype=float).reshape(1, -1)
    q = np.einsum("ij,jk,ik->i", d, np.atleast_2d(Sigma_inv), d)
    a = np.exp(-math.pi * (q - q.min()) / 2.0)
    return a / np.linalg.norm(a)


# ---------------------------------------------------------------------------
# general covariance
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CovarianceSpec:
    """Positive-definite ``Sigma`` with centre ``c``; ``factorU.T @ factorU == inv(Sigma)``."""

    Sigma: np.ndarray
    c: np.ndarray
    factorU: np.ndarray

    @classmethod
    def make(cls, Sigma, c) -> "CovarianceSpec":
        Sigma = np.atleast_2d(np.asarray(Sigma, dtype=float))
        if not np.allclose(Sigma, Sigma.T, atol=1e-12):
            raise InvalidInput("covariance must be symmetric")
        try:
            L = np.linalg.cholesky(np.linalg.inv(Sigma))
        except np.linalg.LinAlgError as exc:
            raise InvalidInput("covariance must be positive definite") from exc
        return cls(Sigma, np.asarray(c, dtype=float).reshape(-1), L.T)

    @property
    def Sigma_inv(self) -> np.ndarray:
        return self.factorU.T @ self.factorU


def coherent_gaussian_cov(B, spec: CovarianceSpec, tau: float = TAU,
                          kappa: float = KAPPA) -> StateVector:
    """Gaussian with covariance ``Sigma``: sample over ``U B`` with unit width,
    then map labels back by ``U^{-1}`` (i.e. read the original lattice point)."""
    B = np.atleast_2d(np.asarray(B, dtype=float))
    U = spec.factorU
    Bp = U @ B
    worst = float(np.max(np.einsum("ij,ij->j", B, spec.Sigma_inv @ B)))
    if worst > 1.0 / kappa ** 2 + 1e-12:
        raise WidthTooNarrow(f"max b^T Sigma^-1 b = {worst} > 1/kappa^2")
    coeffs, amps, _ = _gpv_coherent(Bp, U @ spec.c, 1.0, tau)
    labels = [tuple(int(round(t)) for t in B @ np.array(z)) for z in coeffs]
    return _as_state(labels, amps)


def shifted_lattice_gaussian(y, S, spec: CovarianceSpec, tau: float = TAU,
                             kappa: float = KAPPA) -> StateVector:
    """Gaussian over the coset ``y + L(S)``: build it over ``L(S)`` centred at
    ``c - y`` and add ``y`` to every label."""
    y = np.asarray(y, dtype=np.int64).reshape(-1)
    S = np.atleast_2d(np.asarray(S, dtype=float))
    if S.shape[0] != y.shape[0]:
        S = S.T if S.shape[1] == y.shape[0] else S
    if np.linalg.matrix_rank(S) < S.shape[1]:
        raise SingularBasis("short vectors are linearly dependent")
    U = spec.factorU
    worst = float(np.max(np.einsum("ij,ij->j", S, spec.Sigma_inv @ S)))
    if worst > 1.0 / kappa ** 2 + 1e-12:
        raise WidthTooNarrow(f"max s^T Sigma^-1 s = {worst} > 1/kappa^2")
    coeffs, amps, _ = _gpv_coherent(U @ S, U @ (spec.c - y), 1.0, tau)
    labels = [tuple(int(round(t)) for t in (S @ np.array(z) + y)) for z in coeffs]
    return _as_state(labels, amps)


# ---------------------------------------------------------------------------
# classical oracle
# ---------------------------------------------------------------------------

def _sample_z_batch(c: np.ndarray, s: float, tau: float, rng: np.random.Generator) -> np.ndarray:
    """Rejection sampling from the truncated ``D_{Z,s,c}`` for a vector of centres."""
    out = np.zeros(c.shape[0], dtype=np.int64)
    todo = np.arange(c.shape[0])
    lo = np.ceil(c - tau * s - 1e-12).astype(np.int64)
    hi = np.floor(c + tau * s + 1e-12).astype(np.int64)
    while todo.size:
        cand = rng.integers(lo[todo], hi[todo] + 1)
        keep = rng.random(todo.size) < np.exp(-math.pi * (cand - c[todo]) ** 2 / s ** 2)
        out[todo[keep]] = cand[keep]
        todo = todo[~keep]
    return out


def classical_gpv_samples(B, c, sigma: float, rng: np.random.Generator,
                          size: int, tau: float = TAU) -> np.ndarray:
    """``size`` classical GPV samples (rows) from the truncated ``D_{L,sigma,c}``."""
    lb = B if isinstance(B, LatticeBasis) else gram_schmidt(B)
    c = np.asarray(c, dtype=float).reshape(-1)
    n = lb.dim
    norms2 = np.sum(lb.gso ** 2, axis=0)
    v = np.zeros((size, lb.B.shape[0]))
    for i in range(n - 1, -1, -1):
        cp = ((c[None, :] - v) @ lb.gso[:, i]) / norms2[i]
        z = _sample_z_batch(cp, sigma / math.sqrt(norms2[i]), tau, rng)
        v += z[:, None] * lb.B[:, i][None, :]
    return np.rint(v).astype(np.int64)


def classical_gpv_sample(B, c, sigma: float, rng: np.random.Generator,
                         tau: float = TAU) -> np.ndarray:
    """One classical sample (see :func:`classical_gpv_samples`)."""
    return classical_gpv_samples(B, c, sigma, rng, 1, tau)[0]
