"""Toy group-action world built from random lookup-table oracles.

Elements of the encoding set ``S = {0, ..., 2**n0 - 1}`` hide pairs
``(xbar, x)`` with ``xbar`` an ``n1``-bit string and ``x`` in ``Z_p``:

* ``Penc(xbar, x)`` is a random injection into ``S``;
* ``Qenc`` is a random bijection ``{0,1}**n0 -> S`` used by the mint to
  prepare the uniform superposition over ``S``;
* ``H`` is a random function ``{0,1}**n1 -> {0,1}**n2`` giving the serial.

The walk ``R(Penc(xbar, x), g) = Penc(xbar, x + g)`` acts on the hidden
group coordinate only, so ``H(xbar)`` is invariant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidParams, NotAnEncodedPoint, ZeroBranch
from .invariant import BankNote, PathWord, WalkableInvariant
from .statekit import (
    StateVector,
    apply_bijection,
    enumerate_branches,
    measure_function,
    uniform_superposition,
)


def _is_prime(p: int) -> bool:
    return p >= 2 and all(p % d for d in range(2, int(math.isqrt(p)) + 1))


@dataclass(frozen=True)
class OracleWorld:
    n0: int
    n1: int
    n2: int
    p: int
    generators: tuple
    seed: int
    H: np.ndarray          # shape (2**n1,)
    Penc: np.ndarray       # shape (2**n1, p) -> S
    Qenc: np.ndarray       # shape (2**n0,) -> S, a permutation
    h_constant: bool = False

    @property
    def S(self) -> range:
        return range(1 << self.n0)

    @property
    def image(self) -> tuple:
        """``image(Penc)`` in increasing order."""
        return tuple(sorted(int(e) for e in self.Penc.ravel()))

    def pdec(self, e: int) -> tuple[int, int]:
        try:
            return self._pdec[int(e)]
        except KeyError:
            raise NotAnEncodedPoint(f"{e!r} is not in the image of Penc") from None

    def qdec(self, e: int) -> int:
        return int(self._qdec[int(e)])

    def invariant(self, e: int) -> int:
        return int(self.H[self.pdec(e)[0]])

    def __post_init__(self):
        pdec = {int(self.Penc[a, x]): (a, x)
                for a in range(self.Penc.shape[0]) for x in range(self.p)}
        qdec = np.empty_like(self.Qenc)
        qdec[self.Qenc] = np.arange(self.Qenc.shape[0])
        object.__setattr__(self, "_pdec", pdec)
        object.__setattr__(self, "_qdec", qdec)

    def to_json(self) -> dict:
        return {"seed": self.seed, "n0": self.n0, "n1": self.n1, "n2": self.n2,
                "p": self.p, "generators": list(self.generators),
                "h_constant": self.h_constant}

    @classmethod
    def from_json(cls, obj: dict) -> "OracleWorld":
        return build_oracle_world(obj["n0"], obj["n1"], obj["n2"], obj["p"],
                                  obj.get("generators"), obj["seed"],
                                  h_constant=obj.get("h_constant", False))


def build_oracle_world(n0: int, n1: int, n2: int, p: int,
                       generators: Sequence[int] | None, seed: int,
                       h_constant: bool = False) -> OracleWorld:
    """Sample every oracle table from ``numpy.random.default_rng(seed)``.

    ``generators=None`` picks ``{1, s}`` with ``s`` a random unit other than
    ``+-1`` (when ``p > 3``), giving a connected, non-bipartite walk.
    """
    if not _is_prime(p):
        raise InvalidParams(f"p={p} is not prime")
    if min(n0, n1, n2) < 0:
        raise InvalidParams("bit lengths must be non-negative")
    if (1 << n0) < (1 << n1) * p:
        raise InvalidParams(f"need 2^n0 >= 2^n1 * p (n0={n0}, n1={n1}, p={p})")
    rng = np.random.default_rng(seed)
    if generators is None:
        if p > 3:
            s = int(rng.integers(2, p - 1))
            generators = (1, s)
        else:
            generators = (1,)
    generators = tuple(int(g) % p for g in generators)
    if not generators:
        raise InvalidParams("need at least one generator")
    H = np.zeros(1 << n1, dtype=np.int64) if h_constant else \
        rng.integers(0, 1 << n2, size=1 << n1)
    Qenc = rng.permutation(1 << n0)
    Penc = rng.choice(1 << n0, size=((1 << n1) * p), replace=False).reshape(1 << n1, p)
    return OracleWorld(n0, n1, n2, p, generators, int(seed), H, Penc, Qenc, h_constant)


def R(world: OracleWorld, e: int, g: int) -> int:
    """Walk ``Penc(xbar, x) -> Penc(xbar, x + g)``."""
    a, x = world.pdec(e)
    return int(world.Penc[a, (x + g) % world.p])


def as_walkable(world: OracleWorld) -> WalkableInvariant:
    """The induced walkable invariant on ``image(Penc)``.

    Generator ``2j`` is ``R(., +g_j)`` and ``2j+1`` is ``R(., -g_j)``.
    """
    gens = []
    for g in world.generators:
        gens.append(lambda e, g=g: R(world, e, g))
        gens.append(lambda e, g=g: R(world, e, -g))
    return WalkableInvariant(world.image, world.invariant, gens, name=f"oracle-p{world.p}")


def _mint_prepare(world: OracleWorld) -> StateVector:
    """Registers ``(input, output)`` after ``Qenc``, erasure and post-selection."""
    n = 1 << world.n0
    # uniform over the input register, output register |0>
    joint = uniform_superposition([(s, 0) for s in range(n)]).reorder(
        [(s, e) for s in range(n) for e in range(n)])
    # output ^= Qenc(input), then input ^= Qdec(output)
    joint = apply_bijection(joint, lambda l: (l[0], l[1] ^ int(world.Qenc[l[0]])))
    joint = apply_bijection(joint, lambda l: (l[0] ^ world.qdec(l[1]), l[1]))
    # input register is now |0>; keep the output register only
    amps = np.array([joint.amp((0, e)) for e in range(n)])
    out = StateVector(tuple(range(n)), amps)
    image = set(world.image)
    branches = enumerate_branches(out, lambda e: e in image)
    hit = [b for b in branches if b.outcome]
    if not hit:
        raise ZeroBranch("post-selection onto image(Penc) has zero probability")
    post = hit[0].post
    return StateVector(world.image, [post.amp(e) for e in world.image])


def postselect_probability(world: OracleWorld) -> float:
    return len(world.image) / float(1 << world.n0)


def oracle_mint(world: OracleWorld, rng: np.random.Generator) -> BankNote:
    """Mint literally: ``Qenc``, erase the input, post-select, measure ``H∘Pdec``."""
    res = measure_function(_mint_prepare(world), world.invariant, rng)
    return BankNote(res.outcome, res.post)


def oracle_mint_branches(world: OracleWorld) -> list[tuple[float, BankNote]]:
    return [(b.prob, BankNote(b.outcome, b.post))
            for b in enumerate_branches(_mint_prepare(world), world.invariant)]


def path_group_element(world: OracleWorld, path: PathWord) -> int:
    """Sum of signed generator steps of a path in :func:`as_walkable`."""
    tot = 0
    for i in path.steps:
        g = world.generators[i // 2]
        tot += g if i % 2 == 0 else -g
    return tot % world.p


def path_solves_dlog(world: OracleWorld, x: int, z: int, path: PathWord) -> bool:
    """Check that a winning path encodes the hidden offset between ``x`` and ``z``."""
    (a1, u), (a2, v) = world.pdec(x), world.pdec(z)
    if a1 != a2:
        return False
    g = path_group_element(world, path)
    return g == (v - u) % world.p or g == (u - v) % world.p
