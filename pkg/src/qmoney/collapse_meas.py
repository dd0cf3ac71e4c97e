"""Rounding-measurement channels on short-vector superpositions.

Three channels act on density matrices whose basis labels are integer
vectors ``y`` (tuples) sharing one value of ``A^T y mod q``:

* ``M0`` — measure ``C^T y mod q`` and forget the outcome;
* ``M1^t`` — draw ``b = A r + e`` and measure the coarse rounding of ``b.y``;
* ``M2^t`` — the same with ``b = C r' + e``.

Each channel multiplies the matrix entrywise by a fixed factor
``Pr_b[round(b.y) == round(b.y')]``.  Factors come in two modes:

``"exact"``
    enumerate the uniform scalar shift(s) contributed by ``r`` over ``Z_q``
    and the full (truncated) distribution of ``e.(y - y')``;
``"analytic"``
    ``1 - (t/q) E|e.(y - y')|`` for same-coset pairs and ``p_t`` otherwise.

The module only needs an object exposing ``q``, ``A`` (``m x n``) and ``C``
(``m x (m - ell)``) as integer arrays; :mod:`qmoney.lattice_money` provides
one.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .errors import InvalidInput, InvalidMixture, MixedCoset
from .statekit import DensityMatrix

#: noise truncation multiplier
NOISE_TAU = 8.0


# ---------------------------------------------------------------------------
# rounding grid
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RoundingGrid:
    """The ``t`` points ``floor(j q / t)`` of ``Z_q`` and the rounding map.

    Rounding uses the circular distance; a point equidistant from two grid
    points goes to the one with the smaller index.
    """

    q: int
    t: int

    def __post_init__(self):
        if self.q < 1 or not 1 <= self.t <= self.q:
            raise InvalidInput(f"need 1 <= t <= q (q={self.q}, t={self.t})")

    @property
    def points(self) -> np.ndarray:
        return (np.arange(self.t, dtype=np.int64) * self.q) // self.t

    def index(self, x) -> np.ndarray:
        """Index of the grid point each ``x`` rounds to (vectorized)."""
        x = np.mod(np.asarray(x, dtype=np.int64), self.q)
        diff = np.abs(x[..., None] - self.points)
        dist = np.minimum(diff, self.q - diff)
        return np.argmin(dist, axis=-1)

    def round(self, x):
        idx = self.index(x)
        pts = self.points[idx]
        return int(pts) if np.ndim(pts) == 0 else pts

    @property
    def cells(self) -> np.ndarray:
        """Cell index of every ``x in Z_q``."""
        return _cells(self.q, self.t)

    @property
    def cell_sizes(self) -> np.ndarray:
        return np.bincount(self.cells, minlength=self.t)


@lru_cache(maxsize=256)
def _cells(q: int, t: int) -> np.ndarray:
    out = RoundingGrid(q, t).index(np.arange(q))
    out.setflags(write=False)
    return out


def round_t(x: int, grid: RoundingGrid) -> int:
    """Nearest grid point to ``x`` in the circular metric of ``Z_q``."""
    return grid.round(x)


def p_t_exact(q: int, t: int) -> float:
    """``Pr[round(x) == round(y)]`` for independent uniform ``x, y in Z_q``."""
    sizes = RoundingGrid(q, t).cell_sizes.astype(float)
    return float(np.sum((sizes / q) ** 2))


@lru_cache(maxsize=256)
def _same_cell_table(q: int, t: int) -> np.ndarray:
    """``g[D] = Pr_z[cell(z) == cell(z + D)]`` for ``z`` uniform, every ``D in Z_q``.

    For a cell of ``L`` consecutive residues the number of ``z`` in the cell
    with ``z + D`` in the same cell is ``max(0, L - D) + max(0, L - q + D)``.
    """
    sizes = RoundingGrid(q, t).cell_sizes.astype(np.int64)
    D = np.arange(q, dtype=np.int64)[:, None]
    cnt = np.maximum(0, sizes - D) + np.maximum(0, sizes - q + D)
    if t == 1:
        cnt = np.full((q, 1), q)
    out = cnt.sum(axis=1) / q
    out.setflags(write=False)
    return out


# ---------------------------------------------------------------------------
# noise
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NoiseModel:
    """I.i.d. integer noise per coordinate with mass ``∝ exp(-pi e^2 / width^2)``
    on ``|e| <= tau * width``.  ``width == 0`` is the zero-noise model."""

    width: float
    tau: float = NOISE_TAU

    def __post_init__(self):
        if self.width < 0:
            raise InvalidInput("noise width must be non-negative")

    @property
    def values(self) -> np.ndarray:
        r = int(math.floor(self.tau * self.width + 1e-12))
        return np.arange(-r, r + 1, dtype=np.int64)

    @property
    def probs(self) -> np.ndarray:
        v = self.values
        if self.width == 0:
            return np.ones(1)
        w = np.exp(-math.pi * v.astype(float) ** 2 / self.width ** 2)
        return w / w.sum()

    @property
    def tail_mass(self) -> float:
        """Mass of the untruncated discrete Gaussian beyond the cut (per coordinate)."""
        if self.width == 0:
            return 0.0
        r = int(self.values[-1])
        far = np.arange(r + 1, r + 1 + int(20 * self.width) + 50, dtype=float)
        inner = np.exp(-math.pi * self.values.astype(float) ** 2 / self.width ** 2).sum()
        tail = 2 * np.exp(-math.pi * far ** 2 / self.width ** 2).sum()
        return float(tail / (inner + tail))

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        return rng.choice(self.values, size=size, p=self.probs)


def _dot_pmf(noise: NoiseModel, delta: tuple) -> tuple[np.ndarray, np.ndarray]:
    """Distribution of ``e . delta`` (values, probabilities)."""
    key = tuple(sorted(abs(int(d)) for d in delta if d != 0))
    return _dot_pmf_cached(noise.width, noise.tau, key)


@lru_cache(maxsize=65536)
def _dot_pmf_cached(width: float, tau: float, absdelta: tuple):
    noise = NoiseModel(width, tau)
    vals, probs = noise.values, noise.probs
    r = int(vals[-1]) if vals.size else 0
    pmf = np.ones(1)
    lo = 0
    for d in absdelta:
        step = np.zeros(2 * r * d + 1)
        step[(vals + r) * d] = probs
        pmf = np.convolve(pmf, step)
        lo -= r * d
    keep = pmf > 0
    values = np.arange(lo, lo + pmf.size, dtype=np.int64)[keep]
    return values, pmf[keep]


def _joint_pmf(noise: NoiseModel, y: np.ndarray, y2: np.ndarray) -> dict:
    """Joint distribution of ``(e.y, e.y2)`` by coordinatewise convolution."""
    dist = {(0, 0): 1.0}
    for a, b in zip(y.tolist(), y2.tolist()):
        if a == 0 and b == 0:
            continue
        nxt: dict = {}
        for v, p in zip(noise.values.tolist(), noise.probs.tolist()):
            for (s1, s2), w in dist.items():
                k = (s1 + a * v, s2 + b * v)
                nxt[k] = nxt.get(k, 0.0) + w * p
        dist = nxt
    return dist


# ---------------------------------------------------------------------------
# factor tables
# ---------------------------------------------------------------------------

def _labels(rho_or_basis) -> list[tuple]:
    basis = rho_or_basis.basis if hasattr(rho_or_basis, "basis") else rho_or_basis
    return [tuple(int(v) for v in lab) for lab in basis]


def _matrix(rho_or_basis) -> np.ndarray:
    labels = _labels(rho_or_basis)
    return np.array(labels, dtype=np.int64).reshape(len(labels), -1)


def _serial(inst, Y: np.ndarray) -> np.ndarray:
    return np.mod(Y @ np.asarray(inst.A, dtype=np.int64), inst.q)


def _check_single_class(inst, Y: np.ndarray) -> np.ndarray:
    u = _serial(inst, Y)
    if Y.shape[0] and np.any(u != u[0]):
        raise MixedCoset("support vectors do not share one value of A^T y")
    return u[0] if Y.shape[0] else np.zeros(np.asarray(inst.A).shape[1], dtype=np.int64)


def _kernel_class(C, q: int, Y: np.ndarray) -> np.ndarray:
    return np.mod(Y @ np.asarray(C, dtype=np.int64), q)


def _span_of_pair(w: np.ndarray, w2: np.ndarray, q: int):
    """Shifts ``(r.w, r.w2)`` for uniform ``r`` are uniform over a subspace of
    ``Z_q^2``: return ``"plane"``, a direction ``(alpha, beta)`` or ``None``
    (the zero subspace).  Needs ``q`` prime."""
    w, w2 = np.mod(w, q), np.mod(w2, q)
    if not w.any() and not w2.any():
        return None
    if not w.any():
        return (0, 1)
    k = int(np.nonzero(w)[0][0])
    lam = int(w2[k]) * pow(int(w[k]), -1, q) % q
    if np.array_equal(np.mod(lam * w, q), w2):
        return (1, lam)
    return "plane"


def _collision(q: int, t: int, noise: NoiseModel, y, y2, span) -> float:
    """Exact ``Pr[cell(s1 + e.y) == cell(s2 + e.y2)]`` for shifts uniform on ``span``."""
    if span == "plane":
        return p_t_exact(q, t)
    cells = _cells(q, t)
    if span is not None and span[0] == span[1]:
        vals, probs = _dot_pmf(noise, tuple(np.asarray(y) - np.asarray(y2)))
        return float(probs @ _same_cell_table(q, t)[np.mod(vals, q)])
    joint = _joint_pmf(noise, np.asarray(y), np.asarray(y2))
    xs = np.arange(q) if span is not None else np.zeros(1, dtype=np.int64)
    al, be = span if span is not None else (0, 0)
    tot = 0.0
    for (a, b), p in joint.items():
        tot += p * float(np.mean(cells[np.mod(al * xs + a, q)] == cells[np.mod(be * xs + b, q)]))
    return tot


@dataclass(frozen=True)
class ChannelFactorTable:
    """Entrywise multiplier of a rounding channel over an ordered support."""

    basis: tuple
    factor: np.ndarray
    channel: str = ""
    mode: str = ""

    def apply(self, rho: DensityMatrix) -> DensityMatrix:
        if tuple(_labels(rho)) != tuple(self.basis):
            raise InvalidInput("density matrix basis differs from the table support")
        return DensityMatrix(rho.basis, rho.mat * self.factor)

    def to_csv(self) -> str:
        lines = ["i,j,y,y_prime,factor"]
        for i, a in enumerate(self.basis):
            for j, b in enumerate(self.basis):
                lines.append(f"{i},{j},{' '.join(map(str, a))},{' '.join(map(str, b))},"
                             f"{self.factor[i, j]!r}")
        return "\n".join(lines) + "\n"


def _pair_keys(Y: np.ndarray):
    """Upper-triangle pair indices and, per pair, an index into the distinct
    multisets ``sorted|y - y'|`` (the noise law of ``e.(y - y')`` depends only
    on that multiset)."""
    iu, ju = np.triu_indices(Y.shape[0], k=1)
    D = np.sort(np.abs(Y[iu] - Y[ju]), axis=1)
    if D.shape[0] == 0:
        return iu, ju, np.zeros(0, dtype=np.int64), D
    base = int(D.max()) + 1
    if base ** D.shape[1] < 2 ** 62:
        # pack each row into one integer; much faster than a row-wise unique
        code = D @ (base ** np.arange(D.shape[1], dtype=np.int64))
        _, first, inv = np.unique(code, return_index=True, return_inverse=True)
        keys = D[first]
    else:
        keys, inv = np.unique(D, axis=0, return_inverse=True)
    return iu, ju, inv.reshape(-1), keys


def _key_tuple(row) -> tuple:
    return tuple(int(v) for v in row if v)


def _same_coset_factors(inst, grid: RoundingGrid, noise: NoiseModel, Y: np.ndarray,
                        mode: str, uniform_shift: bool) -> np.ndarray:
    """Factors ``Pr[cell(z + e.y) == cell(z + e.y')]`` for all pairs, common shift ``z``."""
    q, t = grid.q, grid.t
    N = Y.shape[0]
    F = np.ones((N, N))
    if not uniform_shift and mode != "analytic":
        for i in range(N):
            for j in range(i + 1, N):
                F[i, j] = F[j, i] = _collision(q, t, noise, Y[i], Y[j], None)
        return F
    iu, ju, inv, keys = _pair_keys(Y)
    vals = np.empty(keys.shape[0])
    for k, row in enumerate(keys):
        key = _key_tuple(row)
        if mode == "analytic":
            v, pr = _dot_pmf(noise, key)
            vals[k] = 1.0 - (t / q) * float(pr @ np.abs(v))
        else:
            vals[k] = _collision(q, t, noise, np.array(key or (0,)), np.zeros(len(key) or 1,
                                 dtype=np.int64), (1, 1))
    F[iu, ju] = vals[inv]
    F[ju, iu] = vals[inv]
    return F


def _projective(W: np.ndarray, q: int) -> np.ndarray:
    """Scale each nonzero row so its first nonzero entry is 1 (``q`` prime)."""
    out = np.mod(W, q).copy()
    for i in range(out.shape[0]):
        nz = np.nonzero(out[i])[0]
        if nz.size:
            out[i] = (out[i] * pow(int(out[i, nz[0]]), -1, q)) % q
    return out


def factor_table_M1(inst, grid: RoundingGrid, noise: NoiseModel, support,
                    mode: str = "exact") -> ChannelFactorTable:
    """Entrywise factor of ``M1^t`` (samples ``b = A r + e``) on ``support``."""
    _check_mode(mode)
    labels = _labels(support)
    Y = np.array(labels, dtype=np.int64).reshape(len(labels), -1)
    u = _check_single_class(inst, Y)
    F = _same_coset_factors(inst, grid, noise, Y, mode, uniform_shift=bool(np.any(u)))
    return ChannelFactorTable(tuple(labels), F, "M1", mode)


def factor_table_M2(inst, grid: RoundingGrid, noise: NoiseModel, support,
                    mode: str = "exact") -> ChannelFactorTable:
    """Entrywise factor of ``M2^t`` (samples ``b = C r' + e``) on ``support``."""
    _check_mode(mode)
    labels = _labels(support)
    Y = np.array(labels, dtype=np.int64).reshape(len(labels), -1)
    _check_single_class(inst, Y)
    q, t = grid.q, grid.t
    W = _kernel_class(inst.C, q, Y)
    N = Y.shape[0]
    F = np.ones((N, N))
    pt = p_t_exact(q, t)
    same = np.all(W[:, None, :] == W[None, :, :], axis=2)
    if mode == "analytic":
        M1 = _same_coset_factors(inst, grid, noise, Y, "analytic", True)
        F = np.where(same, M1, pt)
        np.fill_diagonal(F, 1.0)
        return ChannelFactorTable(tuple(labels), F, "M2", mode)
    F = np.where(same, _same_coset_factors(inst, grid, noise, Y, "exact", True), pt)
    # pairs whose kernel classes are proportional see a one-dimensional shift
    P = _projective(W, q)
    zero = ~P.any(axis=1)
    line = np.all(P[:, None, :] == P[None, :, :], axis=2) | zero[:, None] | zero[None, :]
    # (a zero class on both sides means no shift at all)
    special = (line & ~same) | (same & zero[:, None] & zero[None, :])
    for i, j in zip(*np.nonzero(np.triu(special, k=1))):
        span = _span_of_pair(W[i], W[j], q)
        F[i, j] = F[j, i] = _collision(q, t, noise, Y[i], Y[j], span)
    np.fill_diagonal(F, 1.0)
    return ChannelFactorTable(tuple(labels), F, "M2", mode)


def _check_mode(mode: str):
    if mode not in ("exact", "analytic"):
        raise InvalidInput(f"unknown factor mode {mode!r}")


# ---------------------------------------------------------------------------
# channels
# ---------------------------------------------------------------------------

def m0_mask(C, q: int, support) -> np.ndarray:
    W = _kernel_class(C, q, _matrix(support))
    return np.all(W[:, None, :] == W[None, :, :], axis=2).astype(float)


def apply_M0(rho: DensityMatrix, C, q: int) -> DensityMatrix:
    """Dephase between different values of ``C^T y mod q``."""
    return DensityMatrix(rho.basis, rho.mat * m0_mask(C, q, rho.basis))


def apply_M1(rho: DensityMatrix, inst, grid: RoundingGrid, noise: NoiseModel,
             mode: str = "exact") -> DensityMatrix:
    return factor_table_M1(inst, grid, noise, rho, mode).apply(rho)


def apply_M2(rho: DensityMatrix, inst, grid: RoundingGrid, noise: NoiseModel,
             mode: str = "exact") -> DensityMatrix:
    return factor_table_M2(inst, grid, noise, rho, mode).apply(rho)


def rounding_mask(b, q: int, t: int, support) -> np.ndarray:
    """Entrywise effect of measuring ``round(b.y)`` for one fixed ``b`` and
    discarding the outcome."""
    Y = _matrix(support)
    idx = RoundingGrid(q, t).index(np.mod(Y @ np.asarray(b, dtype=np.int64), q))
    return (idx[:, None] == idx[None, :]).astype(float)


# ---------------------------------------------------------------------------
# lemma suites
# ---------------------------------------------------------------------------

ANALYTIC_TOL = 1e-12


@dataclass
class SuiteReport:
    lemma: str
    params: dict
    deviation: float
    bound: float
    passed: bool
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out = {"lemma": self.lemma, "params": self.params, "deviation": self.deviation,
               "bound": self.bound, "pass": self.passed}
        out.update(self.extra)
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


def _tail_bound(grid_fine: RoundingGrid, noise: NoiseModel, support, t_coarse: int) -> float:
    """Slack of the exact-mode identities.

    The exact factor equals ``1 - (t/q)|D|`` whenever ``|D|`` does not exceed
    the smallest rounding cell of the finest grid involved; pairs whose noise
    product can exceed that contribute at most ``(1 + t d |D| / q)`` times the
    offending mass, summed over the terms of the identity.
    """
    q = grid_fine.q
    cmin = int(grid_fine.cell_sizes.min())
    _, _, _, keys = _pair_keys(_matrix(support))
    worst = 0.0
    for row in keys:
        vals, probs = _dot_pmf(noise, _key_tuple(row))
        bad = np.abs(vals) >= cmin
        if bad.any():
            w = float(probs[bad] @ (1.0 + grid_fine.t * np.abs(vals[bad]) / q))
            worst = max(worst, w)
    return 3.0 * worst


def _params(inst, noise, t, d, mode, **kw) -> dict:
    out = {"q": int(inst.q), "t": int(t), "d": int(d), "noise_width": float(noise.width),
           "noise_tau": float(noise.tau), "mode": mode, "dim": None}
    out.update(kw)
    return out


def _finish(name, rho, lhs, rhs, inst, noise, t, d, mode, extra=None) -> SuiteReport:
    dev = float(np.max(np.abs(lhs.mat - rhs.mat), initial=0.0))
    if mode == "analytic":
        bound = ANALYTIC_TOL
    else:
        bound = _tail_bound(RoundingGrid(inst.q, t * d), noise, rho, t) + ANALYTIC_TOL
    params = _params(inst, noise, t, d, mode)
    params["dim"] = len(rho.basis)
    ex = {"noise_tail_mass": noise.tail_mass}
    if extra:
        ex.update(extra)
    return SuiteReport(name, params, dev, bound, dev <= bound, ex)


def lemma_m1_suite(rho: DensityMatrix, inst, noise: NoiseModel, t: int, d: int,
                   mode: str = "analytic") -> SuiteReport:
    """Compare ``M1^t(rho)`` with ``(1/d) M1^{td}(rho) + (1 - 1/d) rho``."""
    lhs = apply_M1(rho, inst, RoundingGrid(inst.q, t), noise, mode)
    fine = apply_M1(rho, inst, RoundingGrid(inst.q, t * d), noise, mode)
    rhs = DensityMatrix(rho.basis, fine.mat / d + (1 - 1 / d) * rho.mat)
    return _finish("m1", rho, lhs, rhs, inst, noise, t, d, mode)


def lemma_m2_suite(rho: DensityMatrix, inst, noise: NoiseModel, t: int, d: int = 1,
                   mode: str = "analytic") -> SuiteReport:
    """Compare ``M2^t(rho)`` with ``M0(M1^t(rho)) + p_t (rho - M0(rho))``."""
    grid = RoundingGrid(inst.q, t)
    pt = p_t_exact(inst.q, t)
    lhs = apply_M2(rho, inst, grid, noise, mode)
    m0 = apply_M0(rho, inst.C, inst.q)
    m0m1 = apply_M0(apply_M1(rho, inst, grid, noise, mode), inst.C, inst.q)
    rhs = DensityMatrix(rho.basis, m0m1.mat + pt * (rho.mat - m0.mat))
    return _finish("m2", rho, lhs, rhs, inst, noise, t, 1, mode, {"p_t": pt})


def corollary_m_suite(rho: DensityMatrix, inst, noise: NoiseModel, t: int, d: int,
                      mode: str = "analytic", require_mixture: bool = True) -> SuiteReport:
    """Compare ``M2^t(rho)`` with ``(1/d) M0 M1^{td} rho + g M0 rho + p_t rho``.

    The right-hand side is a mixture of channels only when ``g = 1 - 1/d -
    p_t >= 0``; with ``require_mixture`` a negative ``g`` raises
    :class:`InvalidMixture`, otherwise only the identity is checked.
    """
    pt = p_t_exact(inst.q, t)
    g = 1.0 - 1.0 / d - pt
    if g < 0 and require_mixture:
        raise InvalidMixture(f"g = 1 - 1/d - p_t = {g:.6f} < 0")
    lhs = apply_M2(rho, inst, RoundingGrid(inst.q, t), noise, mode)
    fine = apply_M0(apply_M1(rho, inst, RoundingGrid(inst.q, t * d), noise, mode),
                    inst.C, inst.q)
    m0 = apply_M0(rho, inst.C, inst.q)
    rhs = DensityMatrix(rho.basis, fine.mat / d + g * m0.mat + pt * rho.mat)
    return _finish("corm", rho, lhs, rhs, inst, noise, t, d, mode,
                   {"p_t": pt, "g": g, "dg": d * g})


def commute_check(rho: DensityMatrix, inst, noise: NoiseModel, t: int,
                  which: str = "M1", mode: str = "exact") -> float:
    """``max |M0(M(rho)) - M(M0(rho))|`` for ``M`` in {M1, M2}."""
    grid = RoundingGrid(inst.q, t)
    ch = apply_M1 if which == "M1" else apply_M2
    a = apply_M0(ch(rho, inst, grid, noise, mode), inst.C, inst.q)
    b = ch(apply_M0(rho, inst.C, inst.q), inst, grid, noise, mode)
    return float(np.max(np.abs(a.mat - b.mat), initial=0.0))


# ---------------------------------------------------------------------------
# amplifier
# ---------------------------------------------------------------------------

def amplifier_weights(dg: float, lam: int) -> np.ndarray:
    """Law of ``j in [0, lam)``: ``(dg)^{-j} / T``."""
    if dg <= 1:
        raise InvalidMixture(f"need d*g > 1 (got {dg})")
    w = float(dg) ** -np.arange(lam, dtype=float)
    return w / w.sum()


def _dg(q: int, t: int, d: int) -> tuple[float, float]:
    g = 1.0 - 1.0 / d - p_t_exact(q, t)
    return g, d * g


def sample_challenge(inst, noise: NoiseModel, kind: str, rng: np.random.Generator) -> np.ndarray:
    """``b = A r + e`` (``kind="A"``) or ``b = C r' + e`` (``kind="C"``)."""
    M = np.asarray(inst.A if kind == "A" else inst.C, dtype=np.int64)
    r = rng.integers(0, inst.q, size=M.shape[1])
    e = noise.sample(rng, M.shape[0])
    return np.mod(M @ r + e, inst.q)


def amplifier(distinguisher: Callable[[DensityMatrix, np.random.Generator], int],
              rho: DensityMatrix, inst, b, t: int, noise: NoiseModel, d: int, lam: int,
              rng: np.random.Generator, mode: str = "exact") -> int:
    """One run of the amplified distinguisher on challenge vector ``b``.

    Draws ``j`` with probability ``(dg)^{-j}/T``, applies the fine channel
    ``M1^{td}`` ``j`` times, measures ``round_t(b.y)``, runs the
    distinguisher and flips its bit when ``j`` is odd.
    """
    g, dg = _dg(inst.q, t, d)
    j = int(rng.choice(lam, p=amplifier_weights(dg, lam)))
    fine = factor_table_M1(inst, RoundingGrid(inst.q, t * d), noise, rho, mode)
    mat = rho.mat * fine.factor ** j
    mat = mat * rounding_mask(b, inst.q, t, rho.basis)
    bit = int(distinguisher(DensityMatrix(rho.basis, mat), rng))
    return bit ^ (j & 1)


def amplifier_advantage_exact(D: np.ndarray, rho: DensityMatrix, inst, t: int,
                              noise: NoiseModel, d: int, lam: int,
                              mode: str = "exact") -> dict:
    """Exact signed advantage ``Pr[1 | b=A r+e] - Pr[1 | b=C r'+e]`` of the
    amplifier around the POVM-element distinguisher ``Pr[1] = Tr(D rho)``.

    Also returns the advantages ``eps_j = Tr D (rho_j - M0 rho_j)`` along the
    chain ``rho_{j+1} = M1^{td}(rho_j)`` and the per-step gaps
    ``delta_j = Tr D (M1^t rho_j - M2^t rho_j)``.
    """
    g, dg = _dg(inst.q, t, d)
    w = amplifier_weights(dg, lam)
    F1 = factor_table_M1(inst, RoundingGrid(inst.q, t), noise, rho, mode).factor
    F2 = factor_table_M2(inst, RoundingGrid(inst.q, t), noise, rho, mode).factor
    Ff = factor_table_M1(inst, RoundingGrid(inst.q, t * d), noise, rho, mode).factor
    M0 = m0_mask(inst.C, inst.q, rho.basis)
    tr = lambda m: float(np.real(np.trace(D @ m)))
    eps, delta = [], []
    mat = rho.mat
    for j in range(lam + 1):
        eps.append(tr(mat - mat * M0))
        if j < lam:
            delta.append(tr(mat * F1 - mat * F2))
        mat = mat * Ff
    signs = (-1.0) ** np.arange(lam)
    adv = float(np.sum(w * signs * np.array(delta)))
    return {"advantage": adv, "eps": eps, "delta": delta, "g": g, "dg": dg,
            "T": float(np.sum(dg ** -np.arange(lam, dtype=float)))}
