"""Walkable invariants: orbits, walk spectra, minting and verification.

A walkable invariant is a finite domain ``X`` with a labelling function
``inv: X -> Y`` and an even family of permutations ``sigma_0..sigma_{r-1}``
that come in inverse pairs and never change ``inv``.  The orbits of the
permutation group refine the level sets ``P_y = inv^{-1}(y)``.

A note with serial ``y`` is the uniform superposition over ``P_y``.  The
exact verifier projects onto ``span{|O> : O subset of P_y}``; the approximate
verifier implements that projection with the repeated ancilla circuit

    R ⊗ S,  R uniform over r' = 2r indices,
    U = sum_{i<r} |i><i| ⊗ sigma_i + sum_{i>=r} |i><i| ⊗ Id,
    P = |1><1| ⊗ Id,

whose single round maps ``|1>|psi>`` to ``|1> ⊗ (Id + M)/2 |psi>`` where ``M``
is the walk matrix.  See :func:`verify_approx` for the round structure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Hashable, Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    InvalidInput,
    InvalidPath,
    InvariantBroken,
    NotBijective,
    ZeroBranch,
)
from .statekit import (
    StateVector,
    enumerate_branches,
    measure_function,
    permutation_indices,
    project_family_raw,
    uniform_superposition,
)

Label = Hashable

#: Default security parameter for the path-finding challenger walk.
DEFAULT_LAMBDA_SEC = 40


@dataclass(frozen=True)
class Orbit:
    """A set of domain labels closed under every generator."""

    elements: tuple
    repr: Label

    def __len__(self) -> int:
        return len(self.elements)

    def __contains__(self, x) -> bool:
        return x in set(self.elements)


@dataclass(frozen=True)
class WalkSpectrum:
    """Spectrum of the averaged permutation matrix on one orbit.

    ``lambda2`` is the largest eigenvalue after removing one copy of the top
    eigenvalue (signed); this is the quantity that controls the verifier,
    since a round multiplies an eigencomponent by ``(1 + l)/2``.
    ``lambda2_abs`` is the second-largest eigenvalue *by absolute value*;
    ``delta_abs = 1 - lambda2_abs`` is zero for bipartite orbits, flagging a
    walk that never mixes.
    """

    matrix: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    lambda1: float
    lambda2: float
    lambda2_abs: float

    @property
    def delta(self) -> float:
        return 1.0 - self.lambda2

    @property
    def delta_abs(self) -> float:
        return 1.0 - self.lambda2_abs

    @property
    def mixing(self) -> bool:
        return self.delta_abs > 1e-12


@dataclass(frozen=True)
class BankNote:
    serial: Label
    state: StateVector


@dataclass(frozen=True)
class PathWord:
    steps: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(int(s) for s in self.steps))

    def to_json(self) -> list:
        return list(self.steps)


@dataclass(frozen=True)
class VerifyResult:
    """Outcome of the approximate verifier.

    ``raw`` is the unnormalized accepted branch of the state register (the
    quantity compared with ``V|psi>``); ``accept_prob`` is exact.
    ``reject_round`` is the (0-based) round at which a sampled run rejected.
    """

    accepted: bool
    post: StateVector | None
    accept_prob: float
    raw: StateVector
    reject_round: int | None = None
    round_probs: tuple = ()


@dataclass(frozen=True)
class GameResult:
    won: bool
    prob: float | None = None
    transcript: dict = field(default_factory=dict)


class WalkableInvariant:
    """Finite domain, invariant and inverse-paired permutation family.

    Parameters
    ----------
    domain : sequence of labels
        Enumeration of ``X`` (ordering fixes the state basis).
    invariant : callable, mapping or sequence
        ``inv(x)``; a sequence is indexed by domain position.
    generators : sequence
        Each entry is either a callable ``x -> sigma_i(x)`` or an integer
        array of domain positions (``perm[k]`` = position of the image of
        ``domain[k]``).
    pairing : sequence of int, optional
        ``pairing[i]`` is the index of the inverse of ``sigma_i``; defaults to
        consecutive pairs ``(0,1), (2,3), ...``.
    """

    def __init__(self, domain: Sequence[Label], invariant, generators: Sequence,
                 pairing: Sequence[int] | None = None, name: str = ""):
        self.domain = tuple(domain)
        if not self.domain:
            raise InvalidInput("empty domain")
        self.position = {x: k for k, x in enumerate(self.domain)}
        if len(self.position) != len(self.domain):
            raise InvalidInput("domain labels must be distinct")
        self.name = name

        if callable(invariant):
            self.inv_values = tuple(invariant(x) for x in self.domain)
        elif isinstance(invariant, Mapping):
            self.inv_values = tuple(invariant[x] for x in self.domain)
        else:
            vals = tuple(invariant)
            if len(vals) != len(self.domain):
                raise InvalidInput("invariant table has wrong length")
            self.inv_values = vals
        self._inv = dict(zip(self.domain, self.inv_values))

        perms = []
        for g in generators:
            if callable(g):
                perms.append(permutation_indices(self.domain, g))
            else:
                p = np.asarray(g, dtype=np.int64)
                if p.shape != (len(self.domain),) or sorted(p.tolist()) != list(range(len(self.domain))):
                    raise NotBijective("generator array is not a permutation of the domain")
                perms.append(p)
        self.r = len(perms)
        if self.r == 0 or self.r % 2:
            raise InvalidInput(f"need an even, positive number of generators (got {self.r})")
        self.perms = np.array(perms)

        if pairing is None:
            pairing = [i ^ 1 for i in range(self.r)]
        self.pairing = tuple(int(j) for j in pairing)
        if len(self.pairing) != self.r:
            raise InvalidInput("pairing has wrong length")
        ident = np.arange(len(self.domain))
        for i, j in enumerate(self.pairing):
            if not 0 <= j < self.r or self.pairing[j] != i:
                raise InvalidInput("pairing must be an involution on generator indices")
            if not np.array_equal(self.perms[j][self.perms[i]], ident):
                raise InvalidInput(f"generator {j} is not the inverse of generator {i}")

    # ---- basic maps -------------------------------------------------------
    def __len__(self) -> int:
        return len(self.domain)

    def inv(self, x: Label) -> Label:
        return self._inv[x]

    def sigma(self, i: int, x: Label) -> Label:
        if not 0 <= i < self.r:
            raise InvalidPath(f"generator index {i} outside [0, {self.r})")
        return self.domain[self.perms[i][self.position[x]]]

    def preimage(self, y: Label) -> tuple:
        return tuple(x for x, v in zip(self.domain, self.inv_values) if v == y)

    def serials(self) -> list:
        return sorted(set(self.inv_values), key=lambda v: (type(v).__name__, v))

    def permute_amps(self, i: int, amps: np.ndarray) -> np.ndarray:
        """Amplitudes after applying the unitary of ``sigma_i``."""
        out = np.empty_like(amps)
        out[self.perms[i]] = amps
        return out

    def walk_matrix(self) -> np.ndarray:
        """Full ``M = (1/r) sum_i sigma_i`` on the whole domain."""
        n = len(self.domain)
        m = np.zeros((n, n))
        for p in self.perms:
            m[p, np.arange(n)] += 1.0
        return m / self.r

    def check_invariant(self) -> None:
        for i, p in enumerate(self.perms):
            for k in range(len(self.domain)):
                if self.inv_values[p[k]] != self.inv_values[k]:
                    raise InvariantBroken(
                        f"sigma_{i} changes the invariant at {self.domain[k]!r}",
                        witness=(i, self.domain[k]))

    # ---- serialization ----------------------------------------------------
    def to_json(self) -> dict:
        if self.domain != tuple(range(len(self.domain))):
            raise InvalidInput("only domains labelled 0..n-1 serialize")
        return {
            "domain_size": len(self.domain),
            "invariant_table": list(self.inv_values),
            "generators": [p.tolist() for p in self.perms],
            "pairing": list(self.pairing),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "WalkableInvariant":
        n = int(obj["domain_size"])
        return cls(range(n), obj["invariant_table"], obj["generators"], obj.get("pairing"))

    def state(self, amps) -> StateVector:
        return StateVector(self.domain, np.asarray(amps, dtype=complex))


# ---------------------------------------------------------------------------
# toy families
# ---------------------------------------------------------------------------

def cyclic_invariant(n: int, steps: Iterable[int] = (1,),
                     invariant: Callable[[int], Label] | None = None) -> WalkableInvariant:
    """``Z_n`` with generators ``x -> x +- s`` for each step ``s``."""
    gens = []
    for s in steps:
        gens.append(lambda x, s=s: (x + s) % n)
        gens.append(lambda x, s=s: (x - s) % n)
    inv = invariant if invariant is not None else (lambda x: 0)
    return WalkableInvariant(range(n), inv, gens, name=f"Z{n}{tuple(steps)}")


def hypercube_invariant(bits: int, weight_classes: bool = False) -> WalkableInvariant:
    """``{0,1}^bits`` with bit flips (each flip paired with itself, listed twice).

    With ``weight_classes`` the generators are adjacent transpositions of bit
    positions, and the invariant is the Hamming weight.
    """
    n = 1 << bits
    gens = []
    if weight_classes:
        for b in range(bits - 1):
            def swap(x, b=b):
                lo, hi = (x >> b) & 1, (x >> (b + 1)) & 1
                return x ^ ((lo ^ hi) << b) ^ ((lo ^ hi) << (b + 1))
            gens += [swap, swap]
        inv = lambda x: bin(x).count("1")
    else:
        for b in range(bits):
            gens += [lambda x, b=b: x ^ (1 << b)] * 2
        inv = lambda x: 0
    return WalkableInvariant(range(n), inv, gens, name=f"cube{bits}")


def product_invariant(n: int, classes: int, steps: Iterable[int] = (1, 2)) -> WalkableInvariant:
    """Labels ``(a, c)`` with ``a`` in ``Z_n`` and invariant ``c``; walks move ``a``."""
    dom = [(a, c) for c in range(classes) for a in range(n)]
    gens = []
    for s in steps:
        gens.append(lambda x, s=s: ((x[0] + s * (x[1] + 1)) % n, x[1]))
        gens.append(lambda x, s=s: ((x[0] - s * (x[1] + 1)) % n, x[1]))
    return WalkableInvariant(dom, lambda x: x[1], gens, name=f"Z{n}x{classes}")


# ---------------------------------------------------------------------------
# orbit structure
# ---------------------------------------------------------------------------

def compute_orbits(w: WalkableInvariant) -> list[Orbit]:
    """Partition the domain into generator orbits (breadth-first closure).

    Orbits are returned sorted by their minimum label.
    """
    n = len(w.domain)
    seen = np.full(n, -1, dtype=np.int64)
    orbits = []
    for start in range(n):
        if seen[start] >= 0:
            continue
        oid = len(orbits)
        seen[start] = oid
        frontier = [start]
        members = [start]
        y = w.inv_values[start]
        while frontier:
            nxt = []
            for k in frontier:
                for i in range(w.r):
                    j = int(w.perms[i][k])
                    if w.inv_values[j] != y:
                        raise InvariantBroken(
                            f"sigma_{i} maps {w.domain[k]!r} across invariant classes",
                            witness=(i, w.domain[k]))
                    if seen[j] < 0:
                        seen[j] = oid
                        members.append(j)
                        nxt.append(j)
            frontier = nxt
        labels = sorted((w.domain[k] for k in members), key=lambda v: (type(v).__name__, v))
        orbits.append(Orbit(tuple(labels), labels[0]))
    orbits.sort(key=lambda o: (type(o.repr).__name__, o.repr))
    return orbits


def orbit_state(w: WalkableInvariant, o: Orbit) -> StateVector:
    """``|O>``: uniform superposition over the orbit, in the domain basis."""
    amps = np.zeros(len(w.domain), dtype=complex)
    idx = [w.position[x] for x in o.elements]
    amps[idx] = 1.0 / math.sqrt(len(idx))
    return StateVector(w.domain, amps)


def orbits_in(w: WalkableInvariant, y: Label, orbits: Sequence[Orbit] | None = None) -> list[Orbit]:
    orbits = compute_orbits(w) if orbits is None else orbits
    return [o for o in orbits if w.inv(o.repr) == y]


def walk_spectrum(w: WalkableInvariant, o: Orbit) -> WalkSpectrum:
    """Eigen-decomposition of the averaged permutation matrix restricted to ``o``."""
    idx = np.array([w.position[x] for x in o.elements])
    full = w.walk_matrix()
    m = full[np.ix_(idx, idx)]
    vals, vecs = np.linalg.eigh(m)
    order = np.argsort(-vals, kind="stable")
    vals, vecs = vals[order], vecs[:, order]
    if len(vals) == 1:
        lam2 = lam2_abs = 0.0
    else:
        lam2 = float(vals[1])
        lam2_abs = float(np.sort(np.abs(vals))[::-1][1])
    return WalkSpectrum(m, vals, vecs, float(vals[0]), lam2, lam2_abs)


def serial_delta(w: WalkableInvariant, y: Label) -> float:
    """Smallest signed gap ``1 - lambda2`` over the orbits inside ``P_y``."""
    return min(walk_spectrum(w, o).delta for o in orbits_in(w, y))


# ---------------------------------------------------------------------------
# mint and verification
# ---------------------------------------------------------------------------

def mint(w: WalkableInvariant, rng: np.random.Generator) -> BankNote:
    """Prepare ``|X>`` and measure the invariant."""
    res = measure_function(uniform_superposition(w.domain), w.inv, rng)
    return BankNote(res.outcome, res.post)


def mint_branches(w: WalkableInvariant) -> list[tuple[float, BankNote]]:
    """Every mint outcome with its probability."""
    return [(b.prob, BankNote(b.outcome, b.post))
            for b in enumerate_branches(uniform_superposition(w.domain), w.inv)]


def _support_filter(w: WalkableInvariant, y: Label, amps: np.ndarray) -> np.ndarray:
    mask = np.array([v == y for v in w.inv_values])
    return np.where(mask, amps, 0)


def exact_projection(w: WalkableInvariant, note: BankNote) -> StateVector:
    """Unnormalized ``V|psi>`` including the serial support check."""
    s = note.state.reorder(w.domain)
    s = s.with_amps(_support_filter(w, note.serial, s.amps))
    family = [orbit_state(w, o) for o in orbits_in(w, note.serial)]
    return project_family_raw(s, family)


def verify_exact(w: WalkableInvariant, note: BankNote) -> tuple[float, StateVector | None]:
    """Support check on ``P_y`` followed by the orbit projection."""
    raw = exact_projection(w, note)
    p = raw.norm2() / note.state.norm2()
    if p <= 1e-300:
        return 0.0, None
    return p, raw.normalize()


class AncillaCircuit:
    """Joint register ``R ⊗ S`` stored as an ``(r', |X|)`` amplitude array.

    Row ``i`` holds the state-register amplitudes paired with ancilla ``|i>``.
    """

    def __init__(self, w: WalkableInvariant):
        self.w = w
        self.r = w.r
        self.rp = 2 * w.r

    def load(self, amps: np.ndarray) -> np.ndarray:
        """``|1> ⊗ |psi>``."""
        return np.tile(amps / math.sqrt(self.rp), (self.rp, 1)).astype(complex)

    def apply_u(self, joint: np.ndarray, inverse: bool = False) -> np.ndarray:
        out = joint.copy()
        for i in range(self.r):
            g = self.w.pairing[i] if inverse else i
            out[i] = self.w.permute_amps(g, joint[i])
        return out

    def project(self, joint: np.ndarray) -> np.ndarray:
        """``P = |1><1| ⊗ Id`` (unnormalized)."""
        v = joint.sum(axis=0) / math.sqrt(self.rp)
        return np.tile(v / math.sqrt(self.rp), (self.rp, 1))

    def unload(self, joint: np.ndarray) -> np.ndarray:
        """State register of ``|1> ⊗ |phi>`` (the ancilla factor is discarded)."""
        return joint.sum(axis=0) / math.sqrt(self.rp)


def verify_approx(w: WalkableInvariant, note: BankNote, t: int,
                  rng: np.random.Generator | None = None,
                  circuit: str = "repeated") -> VerifyResult:
    """Approximate orbit projection by ``t`` rounds of the ancilla circuit.

    Rounds (``circuit="repeated"``, the default): starting from
    ``|1> ⊗ |psi>``, apply ``U`` then measure ``P``; the accepted branch is
    again of the form ``|1> ⊗ |phi>`` and feeds the next round, so ``t``
    rounds realise ``(PU)^t`` and each eigencomponent is damped by
    ``((1 + l)/2)^t``.

    ``circuit="uncompute"`` additionally applies ``U^{-1}`` after every
    projection but the last (the register is read out from ``|1> ⊗ |phi>``).
    Since ``U U^{-1}`` then cancels between rounds, every round
    after the first accepts with certainty; this variant exists to document
    that behaviour and is not used for verification.

    With ``rng=None`` the accepting branch is followed deterministically and
    ``accepted`` reports whether it has nonzero probability.  With an ``rng``
    each projection outcome is sampled.
    """
    if t < 1:
        raise InvalidInput("t must be >= 1")
    if circuit not in ("repeated", "uncompute"):
        raise InvalidInput(f"unknown circuit {circuit!r}")
    circ = AncillaCircuit(w)
    s = note.state.reorder(w.domain)
    total = s.norm2()
    amps = _support_filter(w, note.serial, s.amps)
    support_p = float(np.vdot(amps, amps).real) / total
    round_probs = [support_p]
    joint = circ.load(amps)
    reject_round = None
    if rng is not None and rng.random() >= support_p:
        reject_round = -1
    for k in range(t):
        if reject_round is not None:
            break
        before = float(np.vdot(joint, joint).real)
        joint = circ.project(circ.apply_u(joint))
        after = float(np.vdot(joint, joint).real)
        cond = after / before if before > 0 else 0.0
        round_probs.append(cond)
        if rng is not None and rng.random() >= cond:
            reject_round = k
            break
        if circuit == "uncompute" and k < t - 1:
            joint = circ.apply_u(joint, inverse=True)
    raw_amps = circ.unload(joint) if reject_round is None else np.zeros_like(amps)
    raw = StateVector(w.domain, raw_amps / math.sqrt(total) if reject_round is None
                      else raw_amps, normalized=False)
    prob = float(np.prod(round_probs))
    if reject_round is None and prob <= 0.0:
        accepted, post = False, None
    elif reject_round is None:
        accepted, post = True, raw.normalize()
    else:
        accepted, post = False, None
    return VerifyResult(accepted, post, prob, raw, reject_round, tuple(round_probs))


def round_operator(w: WalkableInvariant) -> np.ndarray:
    """Fast path for one round: ``(Id + M)/2`` as a dense matrix."""
    return 0.5 * (np.eye(len(w.domain)) + w.walk_matrix())


def eigen_identity_residual(w: WalkableInvariant, psi: np.ndarray, ell: float) -> float:
    """``|| P U (|1> ⊗ psi) - ((1 + ell)/2) |1> ⊗ psi ||`` on the joint register."""
    circ = AncillaCircuit(w)
    joint = circ.load(np.asarray(psi, dtype=complex))
    lhs = circ.project(circ.apply_u(joint))
    return float(np.linalg.norm(lhs - 0.5 * (1.0 + ell) * joint))


def closeness_bound_check(w: WalkableInvariant, s: StateVector, t: int,
                          serial: Label | None = None) -> tuple[float, float]:
    """Return ``(||V|s> - |s'>||^2, (1 - ||V|s>||^2) (1 - delta/2)^{2t})``.

    ``|s'>`` is the unnormalized accepted branch of :func:`verify_approx`;
    ``delta`` is the smallest signed gap over the orbits of the serial.
    """
    s = s.reorder(w.domain)
    if serial is None:
        ys = {w.inv(x) for x in s.support(1e-15)}
        if len(ys) != 1:
            raise InvalidInput("state must be supported on a single invariant class")
        serial = ys.pop()
    note = BankNote(serial, s)
    v = exact_projection(w, note)
    acc = verify_approx(w, note, t)
    lhs = float(np.linalg.norm(v.amps - acc.raw.amps) ** 2)
    delta = serial_delta(w, serial)
    rhs = (s.norm2() - v.norm2()) * (1.0 - delta / 2.0) ** (2 * t)
    return lhs, float(rhs)


# ---------------------------------------------------------------------------
# paths and games
# ---------------------------------------------------------------------------

def apply_path(w: WalkableInvariant, x: Label, p: PathWord) -> Label:
    for i in p.steps:
        x = w.sigma(i, x)
    return x


def verify_path(w: WalkableInvariant, x: Label, z: Label, p: PathWord) -> bool:
    """True iff ``p`` leads from ``x`` to ``z`` or from ``z`` to ``x``."""
    for i in p.steps:
        if not 0 <= i < w.r:
            raise InvalidPath(f"step {i} outside [0, {w.r})")
    return apply_path(w, x, p) == z or apply_path(w, z, p) == x


def challenger_walk_length(w: WalkableInvariant, x: Label,
                           lambda_sec: float = DEFAULT_LAMBDA_SEC) -> int:
    o = next(o for o in compute_orbits(w) if x in o)
    delta = walk_spectrum(w, o).delta
    return max(1, math.ceil(lambda_sec / max(delta, 1e-12)))


def lazy_walk(w: WalkableInvariant, x: Label, length: int,
              rng: np.random.Generator) -> tuple[Label, PathWord]:
    """Walk where each step draws ``i`` uniformly from ``2r`` indices and
    applies ``sigma_i`` only for ``i < r`` (the verifier's own round).

    The laziness makes the walk aperiodic, so it mixes on bipartite orbits.
    """
    steps = []
    for i in rng.integers(0, 2 * w.r, size=length):
        if i < w.r:
            x = w.sigma(int(i), x)
            steps.append(int(i))
    return x, PathWord(steps)


def path_finding_game(w: WalkableInvariant, adversary, rng: np.random.Generator,
                      lambda_sec: float = DEFAULT_LAMBDA_SEC,
                      leak_walk: bool = False) -> GameResult:
    """Path-finding game.

    ``adversary.start()`` returns ``x``; the challenger walks ``L`` lazy
    steps from ``x`` to get ``z`` and calls ``adversary.respond(z)`` (or
    ``respond(z, walk)`` when ``leak_walk`` is set, for white-box tests).
    """
    x = adversary.start()
    if x not in w.position:
        raise InvalidInput(f"start {x!r} not in the domain")
    length = challenger_walk_length(w, x, lambda_sec)
    z, walk = lazy_walk(w, x, length, rng)
    p = adversary.respond(z, walk) if leak_walk else adversary.respond(z)
    try:
        won = verify_path(w, x, z, p)
    except InvalidPath:
        won = False
    return GameResult(won, None, {"x": x, "z": z, "L": length, "path": p.to_json()})


def verification_operator(w: WalkableInvariant, serial: Label, t: int) -> np.ndarray:
    """Linear map of the accepted branch, assembled column-by-column from the
    ancilla circuit (support check included)."""
    n = len(w.domain)
    cols = np.zeros((n, n), dtype=complex)
    mask = np.array([v == serial for v in w.inv_values])
    circ = AncillaCircuit(w)
    for k in np.flatnonzero(mask):
        e = np.zeros(n, dtype=complex)
        e[k] = 1.0
        joint = circ.load(e)
        for _ in range(t):
            joint = circ.project(circ.apply_u(joint))
        cols[:, k] = circ.unload(joint)
    return cols


def lightning_game(w: WalkableInvariant, adversary, t: int,
                   rng: np.random.Generator | None = None) -> GameResult:
    """Two-register lightning game.

    ``adversary()`` returns ``(serial, joint)`` where ``joint`` is a
    :class:`StateVector` whose labels are pairs ``(x1, x2)`` of domain labels.
    Both registers are verified; the exact joint acceptance probability is
    ``||(K ⊗ K) psi||^2`` with ``K`` the accepted-branch map of the verifier.
    With an ``rng`` the win is sampled, otherwise ``won`` means ``prob > 0``.
    """
    serial, joint = adversary()
    if not isinstance(joint, StateVector):
        raise InvalidInput("adversary must return a StateVector")
    n = len(w.domain)
    mat = np.zeros((n, n), dtype=complex)
    for lab, a in zip(joint.basis, joint.amps):
        if not (isinstance(lab, tuple) and len(lab) == 2
                and lab[0] in w.position and lab[1] in w.position):
            raise InvalidInput(f"joint label {lab!r} is not a pair of domain labels")
        mat[w.position[lab[0]], w.position[lab[1]]] = a
    k = verification_operator(w, serial, t)
    out = k @ mat @ k.T
    prob = float(np.vdot(out, out).real / joint.norm2())
    won = (rng.random() < prob) if rng is not None else prob > 1e-15
    return GameResult(bool(won), prob, {"serial": serial})
