"""Integer resonance lattices of atom frequencies.

Frequencies are declared exactly: each atom frequency is a vector whose
coordinates are rational combinations of symbolic, pairwise incommensurable
generators.  A resonance is an integer vector ``k`` with ``sum_i k_i w_i = 0``
as a vector identity, which splits into one rational equation per
(axis, generator) pair.  All lattice arithmetic runs on Python integers.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

BRUTE_FORCE_BUDGET = 10**8
TWO_PI = 2.0 * math.pi


def parse_rational(value) -> Fraction:
    """Accept ints and ``"p/q"`` strings; floats are rejected."""
    if isinstance(value, bool):
        raise TypeError("booleans are not rationals")
    if isinstance(value, (int, Fraction)):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value.strip())
    raise TypeError(
        f"frequency coefficient {value!r} must be an integer or a 'p/q' string; "
        "floating-point input cannot certify incommensurability"
    )


@dataclass(frozen=True)
class FrequencySet:
    """Atom frequencies over ``M`` symbolic generators.

    ``coeffs[i][a][m]`` is the rational coefficient of generator ``m`` in
    coordinate ``a`` of frequency ``i``.
    """

    generators: tuple[str, ...]
    coeffs: tuple[tuple[tuple[Fraction, ...], ...], ...]

    def __post_init__(self):
        gens = tuple(str(g) for g in self.generators)
        if not gens:
            raise ValueError("need at least one generator")
        if len(set(gens)) != len(gens):
            raise ValueError(f"duplicate generator names in {gens}")
        coeffs = tuple(
            tuple(tuple(parse_rational(q) for q in axis) for axis in freq) for freq in self.coeffs
        )
        dims = {len(freq) for freq in coeffs}
        if len(dims) > 1:
            raise ValueError("all frequencies need the same number of axes")
        for i, freq in enumerate(coeffs):
            for axis in freq:
                if len(axis) != len(gens):
                    raise ValueError(f"frequency {i}: expected {len(gens)} coefficients per axis")
            if all(q == 0 for axis in freq for q in axis):
                raise ValueError(f"frequency {i} is zero")
        object.__setattr__(self, "generators", gens)
        object.__setattr__(self, "coeffs", coeffs)

    @classmethod
    def scalar(cls, coeffs: Sequence, generators: Sequence[str] | None = None) -> "FrequencySet":
        """One spatial axis; ``coeffs[i]`` is a rational or a per-generator list."""
        rows = [c if isinstance(c, (list, tuple)) else [c] for c in coeffs]
        M = len(rows[0]) if rows else 1
        if generators is None:
            generators = tuple(f"b{m + 1}" for m in range(M))
        return cls(tuple(generators), tuple((tuple(r),) for r in rows))

    @property
    def N(self) -> int:
        return len(self.coeffs)

    @property
    def dim(self) -> int:
        return len(self.coeffs[0]) if self.coeffs else 0

    def constraint_rows(self) -> list[list[int]]:
        """One integer row per (axis, generator) pair, denominators cleared."""
        rows = []
        for a in range(self.dim):
            for m in range(len(self.generators)):
                qs = [self.coeffs[i][a][m] for i in range(self.N)]
                den = math.lcm(*(q.denominator for q in qs)) if qs else 1
                rows.append([int(q * den) for q in qs])
        return rows

    def vanishes(self, k: Sequence[int]) -> bool:
        """Exact rational test of ``sum_i k_i w_i == 0``."""
        for a in range(self.dim):
            for m in range(len(self.generators)):
                if sum(Fraction(int(k[i])) * self.coeffs[i][a][m] for i in range(self.N)) != 0:
                    return False
        return True

    def evaluate(self, generator_values: Sequence[float]) -> np.ndarray:
        """Numerical frequencies, shape ``(N, dim)``."""
        beta = [float(b) for b in generator_values]
        if len(beta) != len(self.generators):
            raise ValueError(f"need {len(self.generators)} generator values")
        return np.array(
            [[sum(float(q) * b for q, b in zip(axis, beta)) for axis in freq] for freq in self.coeffs],
            dtype=float,
        ).reshape(self.N, self.dim)


@dataclass(frozen=True)
class ResonanceLattice:
    basis: tuple[tuple[int, ...], ...]
    N: int

    @property
    def rank(self) -> int:
        return len(self.basis)

    def as_array(self) -> np.ndarray:
        return np.array(self.basis, dtype=np.int64).reshape(self.rank, self.N)

    def contains(self, k: Sequence[int]) -> bool:
        """Membership by reduction against the Hermite basis."""
        v = [int(x) for x in k]
        if len(v) != self.N:
            return False
        for row in self.basis:
            p = next(j for j, x in enumerate(row) if x)
            if v[p] % row[p]:
                return False
            f = v[p] // row[p]
            v = [x - f * y for x, y in zip(v, row)]
        return not any(v)

    @classmethod
    def trivial(cls, N: int) -> "ResonanceLattice":
        return cls((), N)


def _row_echelon(rows: list[list[int]], ncols: int, track: bool):
    """Unimodular row reduction to echelon form.

    Returns ``(H, U)`` with ``U @ A == H``; ``U`` is ``None`` when not tracked.
    Pivots are positive and entries above a pivot are reduced into ``[0, pivot)``.
    """
    A = [list(r) for r in rows]
    m = len(A)
    U = [[int(i == j) for j in range(m)] for i in range(m)] if track else None

    def combine(i, j, a, b, c, d):
        # rows (i, j) <- (a*ri + b*rj, c*ri + d*rj), determinant +-1
        ri, rj = A[i], A[j]
        A[i] = [a * x + b * y for x, y in zip(ri, rj)]
        A[j] = [c * x + d * y for x, y in zip(ri, rj)]
        if track:
            ui, uj = U[i], U[j]
            U[i] = [a * x + b * y for x, y in zip(ui, uj)]
            U[j] = [c * x + d * y for x, y in zip(ui, uj)]

    r = 0
    pivots = []
    for col in range(ncols):
        if r == m:
            break
        for i in range(r + 1, m):
            if A[i][col] == 0:
                continue
            x, y = A[r][col], A[i][col]
            g, s, t = _xgcd(x, y)
            combine(r, i, s, t, -y // g, x // g)
        if A[r][col] == 0:
            continue
        if A[r][col] < 0:
            A[r] = [-x for x in A[r]]
            if track:
                U[r] = [-x for x in U[r]]
        p = A[r][col]
        for i in range(r):
            f = A[i][col] // p
            if f:
                A[i] = [x - f * y for x, y in zip(A[i], A[r])]
                if track:
                    U[i] = [x - f * y for x, y in zip(U[i], U[r])]
        pivots.append(col)
        r += 1
    return A, U, r


def _xgcd(a: int, b: int) -> tuple[int, int, int]:
    """``(g, s, t)`` with ``s a + t b = g = gcd(a, b) > 0``."""
    old_r, rr = a, b
    old_s, s = 1, 0
    old_t, t = 0, 1
    while rr:
        q = old_r // rr
        old_r, rr = rr, old_r - q * rr
        old_s, s = s, old_s - q * s
        old_t, t = t, old_t - q * t
    if old_r < 0:
        old_r, old_s, old_t = -old_r, -old_s, -old_t
    return old_r, old_s, old_t


def hermite_basis(vectors: Sequence[Sequence[int]], N: int) -> tuple[tuple[int, ...], ...]:
    """Hermite normal form of the lattice spanned by ``vectors`` (zero rows dropped)."""
    if not vectors:
        return ()
    H, _, rank = _row_echelon([list(map(int, v)) for v in vectors], N, track=False)
    return tuple(tuple(row) for row in H[:rank])


def kernel_basis(freqs: FrequencySet) -> ResonanceLattice:
    """Saturated integer basis of ``{k in Z^N : sum_i k_i w_i = 0}``, Hermite-reduced."""
    N = freqs.N
    C = freqs.constraint_rows()
    # rows of C^T, one per atom; zero rows of its echelon form map to kernel vectors
    At = [[C[j][i] for j in range(len(C))] for i in range(N)]
    _, U, rank = _row_echelon(At, len(C), track=True)
    kernel = [U[i] for i in range(rank, N)]
    basis = hermite_basis(kernel, N)
    for row in basis:
        if not freqs.vanishes(row):
            raise AssertionError(f"kernel row {row} fails the exact resonance check")
    return ResonanceLattice(basis, N)


def invariant_phases(lattice: ResonanceLattice, phi) -> np.ndarray:
    """``eta_j = (sum_i v^j_i phi_i) mod 2 pi`` for every basis row ``v^j``."""
    phi = np.asarray(phi, dtype=float)
    if phi.shape[-1] != lattice.N:
        raise ValueError(f"expected {lattice.N} phases, got {phi.shape[-1]}")
    if lattice.rank == 0:
        return np.zeros(phi.shape[:-1] + (0,))
    eta = np.mod(phi @ lattice.as_array().T.astype(float), TWO_PI)
    return np.where(eta >= TWO_PI, 0.0, eta)


def brute_force_kernel(freqs: FrequencySet, bound: int) -> list[tuple[int, ...]]:
    """Every resonance with ``max |k_i| <= bound``, by direct enumeration."""
    N = freqs.N
    if bound < 1:
        raise ValueError("bound must be a positive integer")
    candidates = (2 * bound + 1) ** N
    if N * candidates > BRUTE_FORCE_BUDGET:
        raise ValueError(f"enumeration of {candidates} candidates exceeds the budget")
    # exact over a common denominator per constraint; all magnitudes fit int64
    cols = []
    for a in range(freqs.dim):
        for m in range(len(freqs.generators)):
            qs = [freqs.coeffs[i][a][m] for i in range(N)]
            den = math.lcm(*(q.denominator for q in qs))
            cols.append([q.numerator * (den // q.denominator) for q in qs])
    W = np.array(cols, dtype=np.int64).T
    if np.abs(W).sum() * bound >= 2**62:
        raise OverflowError("coefficients too large for exact int64 enumeration")
    grid = np.array(list(itertools.product(range(-bound, bound + 1), repeat=N)), dtype=np.int64)
    hits = grid[np.all(grid @ W == 0, axis=1)]
    return [tuple(int(x) for x in row) for row in hits]
