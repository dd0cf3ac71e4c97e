"""k-LWE instances and the constant-k reduction from plain LWE.

A k-LWE challenge publishes ``k`` short vectors ``S`` (rows, ``k x m``), a
matrix ``A`` with ``S A = 0 mod q``, a basis ``C`` of the right kernel of
``S`` and a vector ``b`` that is either ``A r + e`` (*Real*) or ``C r' + e``
(*Random*).

The reduction takes an LWE pair ``(A, t)`` with ``m`` samples and short
vectors ``S`` of length ``m + k``.  With ``T`` an invertible ``k x k`` column
block of ``S`` and ``T_adj`` its adjugate, ``T_adj S = [det(T) I | S_rest]``
and

    U = [ S_rest ; -det(T) I ]        ((m + k) x m)

satisfies ``S U = 0`` over the integers, with entries bounded by ``(2B)^k``.
The lifted challenge is ``(S, U A, U W, U t + e')`` with ``W`` uniform
invertible and ``e'`` a wide ("smudging") Gaussian.

Only the parameter formulas of the modulus-switching steps are provided;
:func:`hybrid_table` lists the whole chain of hops down to GapSVP.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from .errors import (
    DimensionMismatch,
    EmptyAudit,
    InternalError,
    InvalidInput,
    InvalidParams,
    RankDeficient,
)
from .modarith import int_det, is_prime, nullspace_mod, random_invertible, rank_mod, solve_mod

REAL = "Real"
RANDOM = "Random"
NOISE_TAU = 8.0


# ---------------------------------------------------------------------------
# noise
# ---------------------------------------------------------------------------

def sample_dgauss(width: float, size, rng: np.random.Generator,
                  tau: float = NOISE_TAU) -> np.ndarray:
    """Integer samples with mass ``∝ exp(-pi x^2 / width^2)`` on ``|x| <= tau*width``.

    Exact rejection sampling from the uniform distribution on the support,
    so any width works without building a probability table.
    """
    n = int(np.prod(size)) if np.ndim(size) else int(size)
    if width == 0:
        return np.zeros(size, dtype=np.int64)
    r = int(math.floor(tau * width + 1e-12))
    out = np.empty(0, dtype=np.int64)
    while out.size < n:
        batch = max(64, 2 * (n - out.size) * max(1, int(2 * tau)))
        x = rng.integers(-r, r + 1, size=batch)
        keep = rng.random(batch) < np.exp(-math.pi * x.astype(float) ** 2 / width ** 2)
        out = np.concatenate([out, x[keep]])
    return out[:n].reshape(size)


def _dgauss_pmf(width: float, tau: float) -> tuple[np.ndarray, np.ndarray]:
    r = int(math.floor(tau * width + 1e-12))
    x = np.arange(-r, r + 1, dtype=np.int64)
    w = np.exp(-math.pi * x.astype(float) ** 2 / width ** 2)
    return x, w / w.sum()


def smudging_distance(shift, width: float, tau: float = NOISE_TAU) -> float:
    """Union bound on the statistical distance between ``e'`` and ``e' + shift``.

    Each coordinate contributes the exact total-variation distance between
    the truncated discrete Gaussian of ``width`` and its translate by the
    (integer) shift; the coordinates are summed.
    """
    shift = np.atleast_1d(np.asarray(shift, dtype=np.int64))
    if width == 0:
        return float(np.count_nonzero(shift))
    x, p = _dgauss_pmf(width, tau)
    tot = 0.0
    for s in np.unique(np.abs(shift)):
        s = int(s)
        if s == 0:
            continue
        if s >= p.size:
            tv = 1.0
        else:
            # p(x) vs p(x - s): overlap on the shifted support
            q = np.zeros_like(p)
            q[s:] = p[:-s]
            tv = 0.5 * float(np.abs(p - q).sum())
        tot += tv * int(np.count_nonzero(np.abs(shift) == s))
    return tot


# ---------------------------------------------------------------------------
# instances
# ---------------------------------------------------------------------------

@dataclass
class KLWEInstance:
    """A k-LWE challenge plus the witnesses needed to check it in tests.

    ``mode`` and the witnesses ``r``, ``rprime``, ``e`` are ground truth and
    are dropped from the ``"challenge"`` export.
    """

    k: int
    n: int
    m: int
    q: int
    S: np.ndarray          # k x m (integers, short)
    A: np.ndarray          # m x n
    C: np.ndarray          # m x (m - k)
    b: np.ndarray          # m
    mode: str
    r: np.ndarray | None = None
    rprime: np.ndarray | None = None
    e: np.ndarray | None = None
    k_requested: int | None = None
    meta: dict = field(default_factory=dict)

    @property
    def effective_k(self) -> int:
        return self.k

    @property
    def k_reduced(self) -> bool:
        """True when rank-deficient short vectors forced fewer rows than requested."""
        return self.k_requested is not None and self.k_requested != self.k

    def check(self) -> dict:
        """Evaluate the structural invariants (all entries should be ``True``)."""
        q = self.q
        out = {
            "SA_zero": bool(not np.any(np.mod(self.S @ self.A, q))) if self.k else True,
            "SC_zero": bool(not np.any(np.mod(self.S @ self.C, q))) if self.k else True,
            "C_rank": rank_mod(self.C, q) == self.m - self.k,
        }
        if self.e is not None:
            if self.mode == REAL and self.r is not None:
                out["witness"] = bool(np.array_equal(
                    np.mod(self.A @ self.r + self.e, q), np.mod(self.b, q)))
            elif self.mode == RANDOM and self.rprime is not None:
                out["witness"] = bool(np.array_equal(
                    np.mod(self.C @ self.rprime + self.e, q), np.mod(self.b, q)))
        return out

    def to_json(self, export: str = "test") -> dict:
        if export not in ("test", "challenge"):
            raise InvalidInput(f"unknown export kind {export!r}")
        out = {"k": self.k, "n": self.n, "m": self.m, "q": self.q,
               "S": np.asarray(self.S).tolist(), "A": np.asarray(self.A).tolist(),
               "C": np.asarray(self.C).tolist(), "b": np.asarray(self.b).tolist()}
        if export == "test":
            out["mode"] = self.mode
            out["k_requested"] = self.k_requested
            for name in ("r", "rprime", "e"):
                v = getattr(self, name)
                out[name] = None if v is None else np.asarray(v).tolist()
        return out

    def dumps(self, export: str = "test") -> str:
        return json.dumps(self.to_json(export), sort_keys=True)

    @classmethod
    def from_json(cls, obj: dict) -> "KLWEInstance":
        def arr(v, shape=None):
            if v is None:
                return None
            a = np.array(v, dtype=np.int64)
            return a.reshape(shape) if shape is not None else a
        k, n, m = int(obj["k"]), int(obj["n"]), int(obj["m"])
        return cls(k, n, m, int(obj["q"]), arr(obj["S"], (k, m)), arr(obj["A"], (m, n)),
                   arr(obj["C"], (m, m - k)), arr(obj["b"]), obj.get("mode", ""),
                   arr(obj.get("r")), arr(obj.get("rprime")), arr(obj.get("e")),
                   obj.get("k_requested"))


def bounded_rows(m: int, B: int) -> Callable[[np.random.Generator], np.ndarray]:
    """Row sampler: i.i.d. uniform entries in ``[-B, B]``."""
    return lambda rng: rng.integers(-B, B + 1, size=m)


def uniform_key(n: int, q: int) -> Callable[[np.random.Generator], np.ndarray]:
    return lambda rng: rng.integers(0, q, size=n)


def gen_instance(k: int, n: int, m: int, q: int,
                 dS: Callable[[np.random.Generator], np.ndarray] | np.ndarray | None,
                 dR: Callable[[np.random.Generator], np.ndarray] | None,
                 noise: float, mode: str, rng: np.random.Generator,
                 max_retries: int = 100) -> KLWEInstance:
    """Sample a k-LWE challenge directly.

    ``dS`` draws one short row (length ``m``) or is a fixed ``k x m`` array;
    ``dR`` draws the key (default uniform over ``Z_q^n``); ``noise`` is the
    Gaussian width of ``e``.  ``A`` is uniform among matrices with
    ``S A = 0 mod q`` and ``C`` a uniformly random basis of that kernel.
    """
    if not is_prime(q):
        raise InvalidParams(f"q={q} is not prime")
    if mode not in (REAL, RANDOM):
        raise InvalidParams(f"mode must be {REAL!r} or {RANDOM!r}")
    if not 0 <= k < m or n < 0:
        raise InvalidParams("need 0 <= k < m and n >= 0")
    if k == 0:
        S = np.zeros((0, m), dtype=np.int64)
    elif isinstance(dS, np.ndarray) or (dS is not None and not callable(dS)):
        S = np.asarray(dS, dtype=np.int64).reshape(k, m)
        if rank_mod(S, q) != k:
            raise RankDeficient("fixed short vectors are dependent mod q")
    else:
        for _ in range(max_retries):
            S = np.array([dS(rng) for _ in range(k)], dtype=np.int64).reshape(k, m)
            if rank_mod(S, q) == k:
                break
        else:
            raise RankDeficient(f"no independent short rows after {max_retries} draws")
    K = nullspace_mod(S, q) if k else np.eye(m, dtype=np.int64)
    A = np.mod(K @ rng.integers(0, q, size=(m - k, n)), q)
    C = np.mod(K @ random_invertible(m - k, q, rng), q)
    e = sample_dgauss(noise, m, rng)
    r = rprime = None
    if mode == REAL:
        r = np.mod(np.asarray(dR(rng) if dR else rng.integers(0, q, size=n), dtype=np.int64), q)
        b = np.mod(A @ r + e, q)
    else:
        rprime = rng.integers(0, q, size=m - k)
        b = np.mod(C @ rprime + e, q)
    return KLWEInstance(k, n, m, q, S, A, C, b, mode, r, rprime, e, k_requested=k)


# ---------------------------------------------------------------------------
# adjugate
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AdjugatePair:
    T: np.ndarray
    Tadj: np.ndarray
    detT: int

    def identity_holds(self) -> bool:
        k = self.T.shape[0]
        lhs = _int_matmul(self.Tadj, self.T)
        return lhs == [[self.detT if i == j else 0 for j in range(k)] for i in range(k)]


def _int_matmul(X, Y) -> list:
    X = [[int(v) for v in row] for row in np.atleast_2d(np.asarray(X, dtype=object))]
    Y = [[int(v) for v in row] for row in np.atleast_2d(np.asarray(Y, dtype=object))]
    return [[sum(a * b for a, b in zip(row, col)) for col in zip(*Y)] for row in X]


def adjugate(T) -> AdjugatePair:
    """Integer adjugate by cofactors: ``Tadj[i, j] = (-1)^(i+j) det(T minus row j, col i)``."""
    T = np.atleast_2d(np.asarray(T, dtype=object))
    k = T.shape[0]
    if T.shape != (k, k):
        raise InvalidInput("adjugate of a non-square matrix")
    if k == 0:
        return AdjugatePair(np.zeros((0, 0), dtype=object), np.zeros((0, 0), dtype=object), 1)
    adj = np.empty((k, k), dtype=object)
    if k == 1:
        adj[0, 0] = 1
    else:
        for i in range(k):
            for j in range(k):
                minor = np.delete(np.delete(T, j, axis=0), i, axis=1)
                adj[i, j] = (-1) ** (i + j) * int_det(minor)
    pair = AdjugatePair(T.astype(object), adj, int(int_det(T)))
    if not pair.identity_holds():
        raise InternalError("adjugate identity failed")
    return pair


# ---------------------------------------------------------------------------
# the lift
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReductionParams:
    """``k`` short vectors with entries in ``[-B, B]``; the extra noise has
    width ``sigma * fN``.

    ``fN`` stands in for the superpolynomial blow-up and must be at least
    ``(2B)^k m^2`` (checked against ``m`` at lift time).
    """

    k: int
    B: int
    fN: float
    sigma: float
    tau: float = NOISE_TAU
    smudge_tol: float | None = None

    def __post_init__(self):
        if not 0 <= self.k <= 3:
            raise InvalidParams("the constant-k lift is provided for k <= 3")
        if self.B < 0 or self.sigma < 0 or self.fN <= 0:
            raise InvalidParams("need B >= 0, sigma >= 0, fN > 0")

    def min_fN(self, m: int) -> float:
        return float((2 * self.B) ** self.k * m * m)

    @property
    def entry_bound(self) -> int:
        return (2 * self.B) ** self.k


@dataclass
class LWEChallenge:
    """A plain LWE pair ``(A, t)`` with ground truth for testing."""

    A: np.ndarray
    t: np.ndarray
    q: int
    mode: str
    r: np.ndarray | None = None
    e: np.ndarray | None = None

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def n(self) -> int:
        return self.A.shape[1]


def lwe_challenge(n: int, m: int, q: int, sigma: float, mode: str,
                  rng: np.random.Generator, tau: float = NOISE_TAU) -> LWEChallenge:
    """Uniform ``A``; ``t = A r + e`` (Real) or uniform ``t`` (Random)."""
    A = rng.integers(0, q, size=(m, n))
    if mode == REAL:
        r = rng.integers(0, q, size=n)
        e = sample_dgauss(sigma, m, rng, tau)
        return LWEChallenge(A, np.mod(A @ r + e, q), q, REAL, r, e)
    if mode == RANDOM:
        return LWEChallenge(A, rng.integers(0, q, size=m), q, RANDOM)
    raise InvalidParams(f"unknown mode {mode!r}")


@dataclass
class LiftRecord:
    """Intermediate objects of one lift, kept for inspection and tests."""

    columns: tuple
    adj: AdjugatePair
    Stilde: np.ndarray
    U: np.ndarray
    W: np.ndarray
    eprime: np.ndarray
    Ue: np.ndarray | None
    claim_SU_zero: bool
    claim_U_bound: bool
    max_U: int
    smudge: float | None


def independent_rows(S, q: int) -> np.ndarray:
    """Greedy maximal set of rows of ``S`` independent mod ``q`` (order kept)."""
    keep: list[int] = []
    for i in range(S.shape[0]):
        if rank_mod(S[keep + [i]], q) == len(keep) + 1:
            keep.append(i)
    return S[keep]


def full_rank_columns(S, q: int) -> tuple | None:
    """First (lexicographic) ``k``-subset of columns whose block is invertible mod ``q``."""
    k, cols = S.shape
    for sub in itertools.combinations(range(cols), k):
        if int_det(S[:, list(sub)]) % q:
            return sub
    return None


def kernel_matrix(S, columns: Sequence[int]) -> tuple[np.ndarray, AdjugatePair, np.ndarray]:
    """``U`` with ``S U = 0`` over the integers, built from the column block ``columns``.

    Rows of ``U`` indexed by ``columns`` hold the remaining columns of
    ``T_adj S``; every other row holds ``-det(T)`` on its own diagonal slot.
    """
    S = np.asarray(S, dtype=object)
    k, total = S.shape
    columns = list(columns)
    rest = [c for c in range(total) if c not in columns]
    pair = adjugate(S[:, columns])
    Stilde = np.array(_int_matmul(pair.Tadj, S), dtype=object).reshape(k, total)
    U = np.zeros((total, len(rest)), dtype=object)
    for i, c in enumerate(columns):
        U[c, :] = Stilde[i, rest]
    for j, c in enumerate(rest):
        U[c, j] = -pair.detT
    return U, pair, Stilde


def lift_lwe_to_klwe(lwe: LWEChallenge, S, params: ReductionParams,
                     rng: np.random.Generator, allow_rank_reduction: bool = True) -> tuple[KLWEInstance, LiftRecord]:
    """Turn an LWE challenge into a k-LWE challenge over ``m + k`` samples.

    If ``S`` has rank ``k' < k`` mod ``q`` its dependent rows are dropped
    and the output is flagged with the effective ``k'``; the kernel then has
    dimension ``m + k - k'``, so that many LWE samples are needed.
    """
    q = lwe.q
    S = np.atleast_2d(np.asarray(S, dtype=np.int64))
    k_req, total = S.shape
    if k_req != params.k:
        raise InvalidParams(f"S has {k_req} rows but params.k = {params.k}")
    if np.any(np.abs(S) > params.B):
        raise InvalidParams(f"S has entries larger than B={params.B}")
    S_eff = independent_rows(S, q) if k_req else S
    k = S_eff.shape[0]
    if k < k_req and not allow_rank_reduction:
        raise RankDeficient(f"S has rank {k} < {k_req} mod q")
    if k_req and k == 0:
        raise RankDeficient("short vectors are all zero mod q")
    m_need = total - k
    if lwe.m < m_need:
        raise InvalidInput(f"lift needs {m_need} LWE samples, got {lwe.m}")
    if params.fN < params.min_fN(m_need):
        raise InvalidParams(f"fN={params.fN} below (2B)^k m^2 = {params.min_fN(m_need)}")
    A, t = lwe.A[:m_need], lwe.t[:m_need]
    cols = full_rank_columns(S_eff, q) if k else ()
    if cols is None:
        raise RankDeficient("no invertible k-column block")
    U, pair, Stilde = kernel_matrix(S_eff, cols)
    SU = _int_matmul(S_eff, U) if k else []
    claim_zero = all(v == 0 for row in SU for v in row)
    max_U = max((abs(int(v)) for v in U.ravel()), default=0)
    claim_bound = max_U <= params.entry_bound
    if not claim_zero:
        raise InternalError("S U != 0 over the integers")
    Ui = np.array(U, dtype=np.int64)
    while True:
        W = rng.integers(0, q, size=(m_need, m_need))
        C = np.mod(Ui @ W, q)
        if rank_mod(C, q) == m_need:
            break
    width = params.sigma * params.fN
    eprime = sample_dgauss(width, total, rng, params.tau)
    A2 = np.mod(Ui @ A, q)
    b = np.mod(Ui @ t + eprime, q)
    r = rprime = e_tot = Ue = None
    smudge = None
    if lwe.mode == REAL and lwe.e is not None:
        Ue = Ui @ lwe.e
        e_tot = Ue + eprime
        r = np.mod(lwe.r, q)
        smudge = smudging_distance(Ue, width, params.tau)
        if params.smudge_tol is not None and smudge > params.smudge_tol:
            raise InternalError(f"smudging distance {smudge:.3g} above tolerance")
    elif lwe.mode == RANDOM:
        rprime = solve_mod(C, np.mod(Ui @ t, q), q)
        if rprime is None:
            raise InternalError("U t is not in the span of C")
        e_tot = eprime
    inst = KLWEInstance(k, lwe.n, total, q, S_eff, A2, C, b, lwe.mode, r, rprime, e_tot,
                        k_requested=k_req, meta={"columns": list(cols)})
    rec = LiftRecord(tuple(cols), pair, Stilde, U, W, eprime, Ue, claim_zero, claim_bound,
                     max_U, smudge)
    return inst, rec


def lifted_generator(n: int, m: int, q: int, sigma: float, params: ReductionParams,
                     dS: Callable[[np.random.Generator], np.ndarray], mode: str
                     ) -> Callable[[np.random.Generator], KLWEInstance]:
    """Generator of lifted instances (fresh LWE pair and short rows each call)."""
    def gen(rng: np.random.Generator) -> KLWEInstance:
        for _ in range(100):
            S = np.array([dS(rng) for _ in range(params.k)], dtype=np.int64).reshape(params.k, m + params.k)
            if rank_mod(S, q) == params.k:
                break
        else:
            raise RankDeficient("no independent short rows after 100 draws")
        return lift_lwe_to_klwe(lwe_challenge(n, m, q, sigma, mode, rng), S, params, rng)[0]
    return gen


def direct_generator(n: int, m: int, q: int, sigma: float, params: ReductionParams,
                     dS: Callable[[np.random.Generator], np.ndarray], mode: str
                     ) -> Callable[[np.random.Generator], KLWEInstance]:
    """Generator of directly sampled instances matching :func:`lifted_generator`."""
    def gen(rng: np.random.Generator) -> KLWEInstance:
        return gen_instance(params.k, n, m + params.k, q, dS, None,
                            sigma * params.fN, mode, rng)
    return gen


# ---------------------------------------------------------------------------
# key rerandomization
# ---------------------------------------------------------------------------

def rerandomize_key(inst: KLWEInstance, rng: np.random.Generator | None = None,
                    shift=None) -> KLWEInstance:
    """Add ``A r''`` to ``b`` for uniform ``r''`` (or the given ``shift``).

    A Real instance keeps its form with key ``r + r''``.  In a Random
    instance ``A r''`` lies in the kernel of ``S``, so ``b - e`` stays in the
    span of ``C`` and the stored ``r'`` is updated accordingly.
    """
    q = inst.q
    if shift is None:
        if rng is None:
            raise InvalidInput("need an rng or an explicit shift")
        shift = rng.integers(0, q, size=inst.n)
    shift = np.mod(np.asarray(shift, dtype=np.int64), q)
    delta = np.mod(inst.A @ shift, q)
    b = np.mod(inst.b + delta, q)
    r, rprime = inst.r, inst.rprime
    if inst.mode == REAL and r is not None:
        r = np.mod(r + shift, q)
    elif inst.mode == RANDOM and rprime is not None:
        z = solve_mod(inst.C, delta, q)
        if z is None:
            raise InternalError("A r'' left the span of C")
        rprime = np.mod(rprime + z, q)
    out = KLWEInstance(inst.k, inst.n, inst.m, q, inst.S, inst.A, inst.C, b, inst.mode,
                       r, rprime, inst.e, inst.k_requested, dict(inst.meta))
    if inst.e is not None and inst.k:
        before = np.mod(inst.S @ (inst.b - inst.e), q)
        after = np.mod(out.S @ (out.b - out.e), q)
        if not np.array_equal(before, after):
            raise InternalError("rerandomization changed the kernel class of b - e")
    return out


# ---------------------------------------------------------------------------
# distribution audit
# ---------------------------------------------------------------------------

def in_span_statistic(inst: KLWEInstance) -> int:
    """1 if ``b - e`` lies in the column span of ``A`` mod ``q`` (needs the witness)."""
    if inst.e is None:
        raise InvalidInput("span statistic needs the stored noise")
    v = np.mod(inst.b - inst.e, inst.q)
    return int(solve_mod(inst.A, v, inst.q) is not None)


def default_statistics(k: int, n: int, m: int) -> dict[str, Callable[[KLWEInstance], int]]:
    """Marginal statistics of an instance of shape ``(k, n, m)``.

    Every entry of ``A``, every entry of ``b``, the first column of ``C``,
    every entry of ``S b``, and the span indicator of ``b - e``.
    """
    out: dict = {}
    for i in range(m):
        for j in range(n):
            out[f"A[{i},{j}]"] = lambda x, i=i, j=j: int(x.A[i, j])
    for i in range(m):
        out[f"b[{i}]"] = lambda x, i=i: int(x.b[i])
    for i in range(m):
        out[f"C[{i},0]"] = lambda x, i=i: int(x.C[i, 0]) if x.C.shape[1] else 0
    for i in range(k):
        out[f"Sb[{i}]"] = lambda x, i=i: int(np.mod(x.S[i] @ x.b, x.q))
    out["b-e in span(A)"] = in_span_statistic
    return out


@dataclass
class AuditReport:
    trials: int
    pvalues: dict
    violations: dict
    level: float

    @property
    def n_statistics(self) -> int:
        return len(self.pvalues)

    @property
    def min_p(self) -> float:
        return min(self.pvalues.values(), default=1.0)

    @property
    def n_rejected(self) -> int:
        """Statistics individually rejected at ``level`` (no correction)."""
        return sum(p < self.level for p in self.pvalues.values())

    @property
    def passed(self) -> bool:
        """No structural violation and no rejection at ``level`` after a
        Bonferroni correction over all statistics."""
        if any(self.violations.values()):
            return False
        return self.min_p * max(1, self.n_statistics) >= self.level

    def to_json(self) -> dict:
        return {"trials": self.trials, "level": self.level, "n_statistics": self.n_statistics,
                "min_p": self.min_p, "n_rejected": self.n_rejected, "passed": self.passed,
                "violations": self.violations, "pvalues": self.pvalues}


def _homogeneity_p(xa: list, xb: list) -> float:
    """Chi-square two-sample homogeneity p-value over the observed categories."""
    cats = sorted(set(xa) | set(xb))
    if len(cats) <= 1:
        return 1.0
    idx = {c: i for i, c in enumerate(cats)}
    table = np.zeros((2, len(cats)))
    for row, xs in enumerate((xa, xb)):
        for v in xs:
            table[row, idx[v]] += 1
    table = table[:, table.sum(axis=0) > 0]
    return float(stats.chi2_contingency(table, correction=False)[1])


def distribution_audit(generatorA: Callable[[np.random.Generator], KLWEInstance],
                       generatorB: Callable[[np.random.Generator], KLWEInstance],
                       statistics: dict[str, Callable[[KLWEInstance], int]] | None,
                       trials: int, rng: np.random.Generator,
                       level: float = 0.01) -> AuditReport:
    """Compare marginal statistics of two instance generators by chi-square tests.

    Also counts ``S A = 0 mod q`` violations on both sides (must be zero).
    """
    if trials <= 0:
        raise EmptyAudit("audit needs at least one trial")
    seqA = [generatorA(rng) for _ in range(trials)]
    seqB = [generatorB(rng) for _ in range(trials)]
    shapes = {(x.k, x.n, x.m, x.q) for x in seqA + seqB}
    if len(shapes) != 1:
        raise DimensionMismatch(f"generators disagree on public shapes: {sorted(shapes)}")
    k, n, m, _ = shapes.pop()
    if statistics is None:
        statistics = default_statistics(k, n, m)
    pvals = {name: _homogeneity_p([f(x) for x in seqA], [f(x) for x in seqB])
             for name, f in statistics.items()}
    viol = {"A": sum(not x.check()["SA_zero"] for x in seqA),
            "B": sum(not x.check()["SA_zero"] for x in seqB)}
    return AuditReport(trials, pvals, viol, level)


# ---------------------------------------------------------------------------
# parameter formulas
# ---------------------------------------------------------------------------

def _log_term(n: int, eps: float) -> float:
    return (4.0 / math.pi) * math.log(2 * n * (1 + 1 / eps))


def _check_eps(eps: float):
    if not 0 < eps < 0.5:
        raise InvalidParams("eps must lie in (0, 1/2)")


def mod_switch_params(n: int, m: int, q: int, qPrime: int, sigma: float, eps: float,
                      B: float) -> float:
    """Smallest admissible noise width after raising the modulus from ``q`` to ``q'``:

        sigma' = sqrt((sigma q'/q)^2 + (4/pi) ln(2n(1 + 1/eps)) B^2)

    for a key distribution bounded by ``B``.  ``q' = q`` is accepted as the
    degenerate case.
    """
    _check_eps(eps)
    if min(n, m, q) < 1 or qPrime < q or sigma < 0 or B < 0:
        raise InvalidParams("need positive n, m, q, q' >= q, sigma >= 0, B >= 0")
    return math.sqrt((sigma * qPrime / q) ** 2 + _log_term(n, eps) * B ** 2)


@dataclass(frozen=True)
class ModExpResult:
    sigma_prime: float
    dim: int
    modulus: int
    G: np.ndarray


def mod_exp_params(n: int, q: int, k: int, sigma: float, eps: float, B: float) -> ModExpResult:
    """Dimension-for-modulus switch: dimension ``n`` modulus ``q`` becomes
    dimension ``n/k`` modulus ``q^k`` with

        sigma' = sqrt((sigma q^(k-1))^2 + (4/pi) ln(2n(1 + 1/eps)) (B q^(k-1))^2)

    and gadget ``G = I_{n/k} ⊗ (1, q, ..., q^(k-1))^T``.
    """
    _check_eps(eps)
    if k < 1 or n % k:
        raise InvalidParams("k must divide n")
    g = q ** (k - 1)
    sp = math.sqrt((sigma * g) ** 2 + _log_term(n, eps) * (B * g) ** 2)
    gadget = np.array([[q ** j] for j in range(k)], dtype=object)
    G = np.kron(np.eye(n // k, dtype=np.int64).astype(object), gadget)
    return ModExpResult(sp, n // k, q ** k, G)


@dataclass(frozen=True)
class NoiseKeyResult:
    s_min: float
    sigma_prime: float
    m_prime: float
    advantage_factor: str


def noise_key_params(n: int, m: int, q: int, sigma: float, eps: float) -> NoiseKeyResult:
    """Key-from-noise step: ``s >= sqrt(ln(2n(1 + 1/eps)/pi))``,
    ``sigma' >= sqrt(sigma^2 + s^2)`` and ``m' = m - (16n + 4 ln ln q)``."""
    _check_eps(eps)
    if q < 25:
        raise InvalidParams("need q >= 25")
    s = math.sqrt(math.log(2 * n * (1 + 1 / eps) / math.pi))
    return NoiseKeyResult(s, math.sqrt(sigma ** 2 + s ** 2),
                          m - (16 * n + 4 * math.log(math.log(q))), "(adv - 8 eps) / 4")


@dataclass(frozen=True)
class HybridConfig:
    n: int
    m: int
    q: int
    q_prime: int
    eta: float
    fN: float

    def __post_init__(self):
        if min(self.n, self.m, self.q, self.q_prime) < 1 or self.eta <= 0 or self.fN <= 0:
            raise InvalidParams("hybrid parameters must be positive")

    @property
    def modulus_order_ok(self) -> bool:
        """The chain raises the modulus from ``q'^n`` to ``q``, so needs ``q > q'^n``."""
        return self.q > self.q_prime ** self.n


HYBRID_COLUMNS = ("assumption", "dim", "samples", "modulus", "key", "noise", "justification")


def hybrid_table(cfg: HybridConfig) -> list[dict]:
    """The chain of hybrids from the k-LWE instance down to GapSVP.

    ``noise`` is the modulus-to-noise entry of each row: ``modulus/(eta f)``
    for every LWE row, ``q/eta`` for the k-LWE instance, and the
    approximation factor ``eta f`` for GapSVP.  Numbers are exact
    fractions (``q'^n`` can be huge).
    """
    eta, f = Fraction(cfg.eta), Fraction(cfg.fN)
    qn = cfg.q_prime ** cfg.n
    rows = [
        ("k-LWE", 1, cfg.m, cfg.q, "uniform", Fraction(cfg.q) / eta, "start"),
        ("LWE", 1, cfg.m, cfg.q, "uniform", Fraction(cfg.q) / (eta * f),
         "constant-k lift via adjugate kernel basis (noise grows by f)"),
        ("LWE", 1, cfg.m, cfg.q, "noise", Fraction(cfg.q) / (eta * f),
         "key rerandomization (uniform key is hardest)"),
        ("LWE", 1, cfg.m, qn, "noise", Fraction(qn) / (eta * f),
         "modulus raise for bounded keys"),
        ("LWE", cfg.n, cfg.m, cfg.q_prime, "noise", Fraction(cfg.q_prime) / (eta * f),
         "modulus-to-dimension switch (k = n gadget)"),
        ("LWE", cfg.n, cfg.m, cfg.q_prime, "uniform", Fraction(cfg.q_prime) / (eta * f),
         "key drawn from the noise distribution"),
        ("GapSVP", cfg.n, None, None, None, eta * f, "worst-case hardness of LWE"),
    ]
    return [dict(zip(HYBRID_COLUMNS, r)) for r in rows]


def _fmt(v) -> str:
    if v is None:
        return "-"
    if isinstance(v, Fraction):
        if v.denominator == 1:
            return str(v.numerator)
        return f"{float(v):.6g}"
    return str(v)


def hybrid_table_markdown(rows: list[dict]) -> str:
    lines = ["| " + " | ".join(HYBRID_COLUMNS) + " |",
             "|" + "---|" * len(HYBRID_COLUMNS)]
    for r in rows:
        lines.append("| " + " | ".join(_fmt(r[c]) for c in HYBRID_COLUMNS) + " |")
    return "\n".join(lines) + "\n"


def hybrid_table_json(rows: list[dict]) -> list[dict]:
    out = []
    for r in rows:
        d = {}
        for c in HYBRID_COLUMNS:
            v = r[c]
            if isinstance(v, Fraction):
                d[c] = str(v)
                d[c + "_approx"] = float(v)
            else:
                d[c] = v
        out.append(d)
    return out
