"""Exact dense simulation of small quantum registers.

A register is described by an explicit, ordered list of classical labels
(any hashable value; the other modules use ints or tuples of ints) together
with one complex amplitude per label.  Everything is dense: vectors up to a
few ten-thousand entries and density matrices up to a few hundred.

Measurements come in two flavours:

* sampled, driven by an explicit :class:`numpy.random.Generator`;
* enumerated, returning every ``(outcome, prob, post)`` branch in a
  deterministic order (sorted outcomes), which is what property tests use.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Hashable, Iterable, Sequence

import math

import numpy as np

from .errors import (
    DimensionMismatch,
    InvalidInput,
    InvalidProjector,
    NotBijective,
    ZeroBranch,
)

Label = Hashable

#: Default tolerance for state identities.
ATOL = 1e-10


def _sort_key(v):
    """Total order usable on mixed label types (ints, tuples, strings)."""
    return (type(v).__name__, v)


@dataclass(frozen=True)
class StateVector:
    """Pure state over an explicit classical basis.

    Parameters
    ----------
    basis : tuple
        Distinct classical labels, in order.
    amps : ndarray of complex
        One amplitude per label.
    normalized : bool
        ``False`` tags an unnormalized post-measurement branch; such states
        are exempt from the unit-norm invariant.
    """

    basis: tuple
    amps: np.ndarray
    normalized: bool = True
    _index: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        basis = tuple(self.basis)
        amps = np.asarray(self.amps, dtype=complex).reshape(-1)
        if len(basis) != amps.shape[0]:
            raise DimensionMismatch(
                f"{len(basis)} labels but {amps.shape[0]} amplitudes")
        index = {lab: k for k, lab in enumerate(basis)}
        if len(index) != len(basis):
            raise InvalidInput("basis labels must be distinct")
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "amps", amps)
        object.__setattr__(self, "_index", index)
        if self.normalized:
            nrm = float(np.vdot(amps, amps).real)
            if abs(nrm - 1.0) > ATOL:
                raise InvalidInput(
                    f"state not normalized (norm^2={nrm!r}); "
                    "pass normalized=False for a raw branch")

    # ---- basic accessors -------------------------------------------------
    def __len__(self) -> int:
        return len(self.basis)

    def index(self, label: Label) -> int:
        return self._index[label]

    def amp(self, label: Label) -> complex:
        k = self._index.get(label)
        return 0j if k is None else complex(self.amps[k])

    def norm2(self) -> float:
        return float(np.vdot(self.amps, self.amps).real)

    def support(self, atol: float = 0.0) -> list:
        return [lab for lab, a in zip(self.basis, self.amps) if abs(a) > atol]

    def normalize(self) -> "StateVector":
        n2 = self.norm2()
        if n2 <= 0.0:
            raise ZeroBranch("cannot normalize the zero vector")
        return StateVector(self.basis, self.amps / np.sqrt(n2))

    def with_amps(self, amps, normalized: bool = False) -> "StateVector":
        return StateVector(self.basis, amps, normalized=normalized)

    def reorder(self, basis: Sequence[Label]) -> "StateVector":
        """Express the state over another ordering/superset of labels."""
        out = np.zeros(len(basis), dtype=complex)
        idx = {lab: k for k, lab in enumerate(basis)}
        for lab, a in zip(self.basis, self.amps):
            if a != 0:
                if lab not in idx:
                    raise DimensionMismatch(f"label {lab!r} missing in target basis")
                out[idx[lab]] = a
        return StateVector(tuple(basis), out, normalized=self.normalized)

    def density(self) -> "DensityMatrix":
        return DensityMatrix(self.basis, np.outer(self.amps, self.amps.conj()))

    # ---- serialization ---------------------------------------------------
    def to_json(self) -> dict:
        return {
            "basis": [list(b) if isinstance(b, tuple) else b for b in self.basis],
            "amps": [[float(a.real), float(a.imag)] for a in self.amps],
        }

    @classmethod
    def from_json(cls, obj: dict, normalized: bool = True) -> "StateVector":
        basis = [tuple(b) if isinstance(b, list) else b for b in obj["basis"]]
        amps = [complex(re, im) for re, im in obj["amps"]]
        return cls(tuple(basis), np.array(amps), normalized=normalized)


@dataclass(frozen=True)
class DensityMatrix:
    """Mixed state; ``mat`` is Hermitian, PSD, trace one (or sub-normalized)."""

    basis: tuple
    mat: np.ndarray

    def __post_init__(self):
        mat = np.asarray(self.mat, dtype=complex)
        if mat.shape != (len(self.basis), len(self.basis)):
            raise DimensionMismatch("matrix shape does not match basis")
        object.__setattr__(self, "basis", tuple(self.basis))
        object.__setattr__(self, "mat", mat)

    def trace(self) -> float:
        return float(np.trace(self.mat).real)

    def is_valid(self, atol: float = ATOL, subnormalized: bool = False) -> bool:
        m = self.mat
        if np.max(np.abs(m - m.conj().T), initial=0.0) > atol:
            return False
        tr = self.trace()
        if not subnormalized and abs(tr - 1.0) > atol:
            return False
        if subnormalized and tr > 1.0 + atol:
            return False
        return bool(np.linalg.eigvalsh((m + m.conj().T) / 2).min(initial=0.0) >= -1e-9)

    @classmethod
    def mixture(cls, states: Sequence[StateVector], weights: Sequence[float]) -> "DensityMatrix":
        basis = states[0].basis
        mat = np.zeros((len(basis), len(basis)), dtype=complex)
        for s, w in zip(states, weights):
            a = s.reorder(basis).amps
            mat += w * np.outer(a, a.conj())
        return cls(basis, mat)


@dataclass(frozen=True)
class MeasureResult:
    outcome: Label
    prob: float
    post: StateVector


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def basis_state(labels: Sequence[Label], label: Label) -> StateVector:
    """Computational basis state ``|label>`` over ``labels``."""
    labels = tuple(labels)
    amps = np.zeros(len(labels), dtype=complex)
    amps[labels.index(label)] = 1.0
    return StateVector(labels, amps)


def uniform_superposition(labels: Iterable[Label]) -> StateVector:
    """Equal-weight superposition over ``labels``."""
    labels = tuple(labels)
    if not labels:
        raise InvalidInput("uniform superposition over an empty set")
    n = len(labels)
    return StateVector(labels, np.full(n, 1.0 / np.sqrt(n), dtype=complex))


def permutation_indices(basis: Sequence[Label], f: Callable[[Label], Label]) -> np.ndarray:
    """Return ``perm`` with ``basis[perm[k]] == f(basis[k])``.

    Raises :class:`NotBijective` when ``f`` leaves the basis or collides.
    """
    idx = {lab: k for k, lab in enumerate(basis)}
    perm = np.empty(len(basis), dtype=np.int64)
    seen = np.zeros(len(basis), dtype=bool)
    for k, lab in enumerate(basis):
        img = f(lab)
        j = idx.get(img)
        if j is None:
            raise NotBijective(f"f({lab!r})={img!r} is outside the basis")
        if seen[j]:
            raise NotBijective(f"f collides on image {img!r}")
        seen[j] = True
        perm[k] = j
    return perm


def apply_bijection(s: StateVector, f: Callable[[Label], Label]) -> StateVector:
    """Apply the unitary ``|x> -> |f(x)>``."""
    perm = permutation_indices(s.basis, f)
    out = np.zeros_like(s.amps)
    out[perm] = s.amps
    return StateVector(s.basis, out, normalized=s.normalized)


def enumerate_branches(s: StateVector, g: Callable[[Label], Label]) -> list[MeasureResult]:
    """All outcomes of measuring ``g`` with nonzero probability, sorted by outcome.

    Post states are renormalized branches.
    """
    groups: dict = {}
    for k, lab in enumerate(s.basis):
        groups.setdefault(g(lab), []).append(k)
    total = s.norm2()
    out = []
    for v in sorted(groups, key=_sort_key):
        ks = groups[v]
        amps = np.zeros_like(s.amps)
        amps[ks] = s.amps[ks]
        p = float(np.vdot(amps, amps).real)
        if p <= 0.0:
            continue
        out.append(MeasureResult(v, p / total, StateVector(s.basis, amps / np.sqrt(p))))
    return out


def measure_function(s: StateVector, g: Callable[[Label], Label],
                     rng: np.random.Generator) -> MeasureResult:
    """Measure the classical function ``g`` of the register, sampling the outcome."""
    branches = enumerate_branches(s, g)
    probs = np.array([b.prob for b in branches])
    k = int(np.searchsorted(np.cumsum(probs), rng.random() * probs.sum(), side="right"))
    return branches[min(k, len(branches) - 1)]


def _check_orthonormal(family: Sequence[StateVector], basis, atol: float) -> np.ndarray:
    mat = np.array([v.reorder(basis).amps for v in family], dtype=complex)
    gram = mat.conj() @ mat.T
    if np.max(np.abs(gram - np.eye(len(family))), initial=0.0) > atol:
        raise InvalidProjector("projector family is not orthonormal")
    return mat


def project_family_raw(s: StateVector, family: Sequence[StateVector],
                       atol: float = ATOL) -> StateVector:
    """Unnormalized image of ``s`` under ``sum_v |v><v|``."""
    if not family:
        return s.with_amps(np.zeros_like(s.amps))
    mat = _check_orthonormal(family, s.basis, atol)
    coeffs = mat.conj() @ s.amps
    return s.with_amps(mat.T @ coeffs)


def project_family(s: StateVector, family: Sequence[StateVector],
                   atol: float = ATOL) -> tuple[float, StateVector]:
    """Project onto the span of an orthonormal family.

    Returns the acceptance probability and the renormalized post state.
    A zero-probability branch raises :class:`ZeroBranch`.
    """
    raw = project_family_raw(s, family, atol)
    p = raw.norm2()
    if p <= atol * atol:
        raise ZeroBranch("state is orthogonal to the projector family")
    return p / s.norm2(), raw.normalize()


def _aligned(a, b):
    if a.basis == b.basis:
        return a, b
    if set(a.basis) != set(b.basis):
        raise DimensionMismatch("states live on different bases")
    return a, b.reorder(a.basis)


def trace_distance(a: DensityMatrix, b: DensityMatrix) -> float:
    """Half the trace norm of ``a - b``."""
    if a.mat.shape != b.mat.shape:
        raise DimensionMismatch("density matrices of different dimension")
    if a.basis != b.basis:
        if set(a.basis) != set(b.basis):
            raise DimensionMismatch("density matrices on different bases")
        perm = [b.basis.index(lab) for lab in a.basis]
        bm = b.mat[np.ix_(perm, perm)]
    else:
        bm = b.mat
    diff = a.mat - bm
    diff = (diff + diff.conj().T) / 2
    return float(0.5 * np.abs(np.linalg.eigvalsh(diff)).sum())


def state_l2_distance(a: StateVector, b: StateVector) -> float:
    """Euclidean distance of amplitude vectors (no renormalization)."""
    if len(a) != len(b):
        raise DimensionMismatch("states of different dimension")
    a, b = _aligned(a, b)
    return float(np.linalg.norm(a.amps - b.amps))


def pure_trace_distance(a: StateVector, b: StateVector) -> float:
    """Trace distance between two normalized pure states, ``sqrt(1-|<a|b>|^2)``."""
    a, b = _aligned(a, b)
    ov = abs(np.vdot(a.amps, b.amps)) ** 2 / (a.norm2() * b.norm2())
    return float(np.sqrt(max(0.0, 1.0 - ov)))


def embedded_trace_distance(a: StateVector, b: StateVector) -> float:
    """Pure-state trace distance after embedding both states in the union of
    their bases (labels missing from one side carry amplitude zero).

    Evaluated as ``sqrt(x (2 - x))`` with ``x = 1 - |<a|b>|`` obtained from the
    phase-aligned difference ``|| a - e^{i phi} b ||^2 / 2``, which avoids the
    ``sqrt(eps)`` floor of ``sqrt(1 - |<a|b>|^2)``.
    """
    amp_b = dict(zip(b.basis, b.amps / math.sqrt(b.norm2())))
    amp_a = dict(zip(a.basis, a.amps / math.sqrt(a.norm2())))
    ov = sum(complex(x) * complex(np.conj(amp_b[l])) for l, x in amp_a.items() if l in amp_b)
    phase = ov / abs(ov) if abs(ov) > 0 else 1.0
    labels = set(amp_a) | set(amp_b)
    d2 = sum(abs(complex(amp_a.get(l, 0.0)) - phase * complex(amp_b.get(l, 0.0))) ** 2
             for l in labels)
    x = min(1.0, d2 / 2.0)
    return float(math.sqrt(max(0.0, x * (2.0 - x))))
