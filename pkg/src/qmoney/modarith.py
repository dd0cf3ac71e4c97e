"""Exact linear algebra over ``Z_q`` (``q`` prime) and over the integers.

Matrices are small (tens of rows), so everything is plain Gaussian
elimination on Python integers held in ``object`` or ``int64`` arrays.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import InvalidInput


def is_prime(p: int) -> bool:
    return p >= 2 and all(p % d for d in range(2, int(math.isqrt(p)) + 1))


def centered(x, q: int):
    """Representative of ``x mod q`` in ``[-(q-1)/2, (q-1)/2]`` (``q`` odd)."""
    r = np.mod(np.asarray(x, dtype=np.int64), q)
    return np.where(r > q // 2, r - q, r)


def rref_mod(M, q: int) -> tuple[np.ndarray, list[int]]:
    """Reduced row echelon form mod ``q`` and the pivot columns."""
    A = np.mod(np.array(M, dtype=np.int64), q)
    if A.ndim != 2:
        raise InvalidInput("need a matrix")
    rows, cols = A.shape
    pivots: list[int] = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        nz = np.nonzero(A[r:, c])[0]
        if nz.size == 0:
            continue
        p = r + int(nz[0])
        A[[r, p]] = A[[p, r]]
        A[r] = (A[r] * pow(int(A[r, c]), -1, q)) % q
        for i in range(rows):
            if i != r and A[i, c]:
                A[i] = (A[i] - A[i, c] * A[r]) % q
        pivots.append(c)
        r += 1
    return A, pivots


def rank_mod(M, q: int) -> int:
    M = np.atleast_2d(np.asarray(M, dtype=np.int64))
    if M.size == 0:
        return 0
    return len(rref_mod(M, q)[1])


def nullspace_mod(M, q: int) -> np.ndarray:
    """Basis (columns) of the right kernel ``{x : M x = 0 mod q}``."""
    M = np.atleast_2d(np.asarray(M, dtype=np.int64))
    cols = M.shape[1]
    if M.shape[0] == 0:
        return np.eye(cols, dtype=np.int64)
    R, piv = rref_mod(M, q)
    free = [c for c in range(cols) if c not in piv]
    basis = np.zeros((cols, len(free)), dtype=np.int64)
    for k, f in enumerate(free):
        basis[f, k] = 1
        for i, p in enumerate(piv):
            basis[p, k] = (-R[i, f]) % q
    return basis


def inv_mod(M, q: int) -> np.ndarray:
    M = np.atleast_2d(np.asarray(M, dtype=np.int64))
    n = M.shape[0]
    if M.shape != (n, n):
        raise InvalidInput("inverse of a non-square matrix")
    R, piv = rref_mod(np.hstack([M, np.eye(n, dtype=np.int64)]), q)
    if piv[:n] != list(range(n)):
        raise InvalidInput("matrix is singular mod q")
    return R[:, n:]


def random_invertible(k: int, q: int, rng: np.random.Generator) -> np.ndarray:
    while True:
        G = rng.integers(0, q, size=(k, k))
        if rank_mod(G, q) == k:
            return G


def solve_mod(M, b, q: int) -> np.ndarray | None:
    """One solution of ``M x = b mod q`` or ``None``."""
    M = np.atleast_2d(np.asarray(M, dtype=np.int64))
    b = np.asarray(b, dtype=np.int64).reshape(-1, 1)
    R, piv = rref_mod(np.hstack([M, b]), q)
    n = M.shape[1]
    if n in piv:
        return None
    x = np.zeros(n, dtype=np.int64)
    for i, p in enumerate(piv):
        x[p] = R[i, n]
    return x


# ---------------------------------------------------------------------------
# exact integer helpers
# ---------------------------------------------------------------------------

def int_det(M) -> int:
    """Exact determinant of an integer matrix (Bareiss elimination)."""
    A = [[int(v) for v in row] for row in np.atleast_2d(np.asarray(M, dtype=object))]
    n = len(A)
    if n == 0:
        return 1
    sign, prev = 1, 1
    for k in range(n - 1):
        if A[k][k] == 0:
            sw = next((i for i in range(k + 1, n) if A[i][k] != 0), None)
            if sw is None:
                return 0
            A[k], A[sw] = A[sw], A[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                A[i][j] = (A[i][j] * A[k][k] - A[i][k] * A[k][j]) // prev
        prev = A[k][k]
    return sign * A[n - 1][n - 1]


def int_rank(M) -> int:
    """Rank over the rationals of an integer matrix."""
    M = np.atleast_2d(np.asarray(M))
    if M.size == 0:
        return 0
    from fractions import Fraction
    A = [[Fraction(int(v)) for v in row] for row in M]
    rows, cols = len(A), len(A[0])
    r = 0
    for c in range(cols):
        p = next((i for i in range(r, rows) if A[i][c] != 0), None)
        if p is None:
            continue
        A[r], A[p] = A[p], A[r]
        for i in range(r + 1, rows):
            f = A[i][c] / A[r][c]
            if f:
                A[i] = [a - f * b for a, b in zip(A[i], A[r])]
        r += 1
        if r == rows:
            break
    return r
