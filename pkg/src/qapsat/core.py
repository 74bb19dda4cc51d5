"""QAP primitives: instances, clauses, objective evaluation and swap deltas.

Indices are 0-based in memory.  Files and user-facing text use 1-based
indices; the conversion happens in :mod:`qapsat.instance_io`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numba as nb
import numpy as np

from .errors import ContractError, LowerBoundViolation, OverflowRisk, ValidationError

INT64_MAX = 2**63 - 1

#: Base flow block shared by every generated A-clause.
A3 = np.array([[0, 1, 2], [2, 0, 1], [3, 1, 0]], dtype=np.int64)


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=np.int64, copy=True)
    arr.setflags(write=False)
    return arr


def as_square_matrix(m, name: str = "matrix") -> np.ndarray:
    """Validate and return a read-only int64 copy of a square matrix.

    Entries must be non-negative integers and the diagonal must be zero.
    """
    raw = np.asarray(m)
    if raw.ndim != 2 or raw.shape[0] != raw.shape[1] or raw.shape[0] == 0:
        raise ContractError(f"{name} must be a non-empty square matrix, got shape {raw.shape}")
    if raw.dtype.kind == "f":
        if not np.all(np.isfinite(raw)) or not np.all(raw == np.round(raw)):
            raise ContractError(f"{name} must contain integers")
    elif raw.dtype.kind not in "iub":
        raise ContractError(f"{name} must contain integers, got dtype {raw.dtype}")
    arr = _frozen(raw)
    if (arr < 0).any():
        i, j = np.argwhere(arr < 0)[0]
        raise ContractError(f"{name} has negative entry at ({i + 1}, {j + 1})")
    if np.diagonal(arr).any():
        i = int(np.flatnonzero(np.diagonal(arr))[0])
        raise ContractError(f"{name} has non-zero diagonal entry at ({i + 1}, {i + 1})")
    return arr


def as_permutation(sigma, n: int | None = None) -> np.ndarray:
    """Validate a 0-based permutation and return it as an int64 array."""
    p = np.asarray(sigma, dtype=np.int64)
    if p.ndim != 1:
        raise ContractError("permutation must be one-dimensional")
    if n is not None and p.shape[0] != n:
        raise ContractError(f"permutation has length {p.shape[0]}, instance has n={n}")
    if p.size and (p.min() < 0 or p.max() >= p.size or np.bincount(p, minlength=p.size).max() != 1):
        raise ContractError("not a permutation of 0..n-1")
    return p


def swapped(sigma: np.ndarray, r: int, s: int) -> np.ndarray:
    """Return a copy of ``sigma`` with positions r and s exchanged."""
    out = np.array(sigma, copy=True)
    out[r], out[s] = out[s], out[r]
    return out


@dataclass(frozen=True)
class QapInstance:
    """Flow matrix ``A`` and distance matrix ``B`` of a QAP of dimension ``n``."""

    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        A = as_square_matrix(self.A, "A")
        B = as_square_matrix(self.B, "B")
        if A.shape != B.shape:
            raise ContractError(f"A is {A.shape[0]}x{A.shape[0]} but B is {B.shape[0]}x{B.shape[0]}")
        n = A.shape[0]
        # Python ints: exact, no wraparound.
        worst = n * n * int(A.max()) * int(B.max())
        if worst > INT64_MAX:
            raise OverflowRisk(f"n^2*max(A)*max(B) = {worst} exceeds the int64 range")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    def __eq__(self, other):
        if not isinstance(other, QapInstance):
            return NotImplemented
        return np.array_equal(self.A, other.A) and np.array_equal(self.B, other.B)

    __hash__ = None


@dataclass(frozen=True)
class ClauseSpec:
    """A clause on ``k`` distinct variables.

    ``submatrix[a, b]`` is the entry placed at ``(variables[a], variables[b])``
    when the clause is embedded in an n x n matrix.  Variables are stored in
    ascending order (the submatrix is permuted along with them), so two specs
    describing the same embedded matrix compare equal.
    """

    variables: tuple
    submatrix: np.ndarray

    def __post_init__(self):
        vs = tuple(int(v) for v in self.variables)
        if len(set(vs)) != len(vs):
            raise ContractError(f"clause variables must be distinct, got {vs}")
        if any(v < 0 for v in vs):
            raise ContractError(f"clause variables must be non-negative, got {vs}")
        sub = as_square_matrix(self.submatrix, "clause submatrix")
        if sub.shape[0] != len(vs):
            raise ContractError(f"submatrix is {sub.shape[0]}x{sub.shape[0]} for {len(vs)} variables")
        # canonical form: ascending variables, submatrix reordered to match
        order = np.argsort(vs, kind="stable")
        if (order != np.arange(len(vs))).any():
            vs = tuple(vs[i] for i in order)
            sub = _frozen(sub[np.ix_(order, order)])
        object.__setattr__(self, "variables", vs)
        object.__setattr__(self, "submatrix", sub)

    @property
    def k(self) -> int:
        return len(self.variables)

    def is_a_clause(self) -> bool:
        off = ~np.eye(self.k, dtype=bool)
        return bool((self.submatrix[off] > 0).all())

    def embed(self, n: int) -> np.ndarray:
        if max(self.variables) >= n:
            raise ContractError(f"clause variable {max(self.variables) + 1} out of range for n={n}")
        out = np.zeros((n, n), dtype=np.int64)
        idx = np.array(self.variables)
        out[np.ix_(idx, idx)] = self.submatrix
        return out

    def pairs(self):
        """Ordered off-diagonal (i, j) pairs covered by the clause."""
        return [(i, j) for i in self.variables for j in self.variables if i != j]

    def __eq__(self, other):
        if not isinstance(other, ClauseSpec):
            return NotImplemented
        return self.variables == other.variables and np.array_equal(self.submatrix, other.submatrix)

    __hash__ = None


def b_clause(variables: Sequence[int]) -> ClauseSpec:
    """Distance clause: all-ones off-diagonal block on ``variables``."""
    k = len(variables)
    return ClauseSpec(tuple(variables), np.ones((k, k), dtype=np.int64) - np.eye(k, dtype=np.int64))


def clause_lower_bound(clause: ClauseSpec, ell: int = 1) -> int:
    """Smallest value a flow clause can take when the minimum distance is ``ell``."""
    if ell < 1:
        raise ContractError("ell must be a positive integer")
    return int(ell) * int(clause.submatrix.sum())


@dataclass(frozen=True)
class QapSatInstance:
    """A QAP built from flow clauses and distance clauses.

    The constructor checks that ``A`` is exactly the sum of the embedded
    flow clauses, that every pair covered by a distance clause has distance
    1, and that ``global_lower_bound`` is the sum of the clause bounds.
    """

    instance: QapInstance
    a_clauses: tuple
    b_clauses: tuple
    seed: int = 0
    global_lower_bound: int = field(default=None)

    def __post_init__(self):
        n = self.instance.n
        a_clauses = tuple(self.a_clauses)
        b_clauses = tuple(self.b_clauses)
        object.__setattr__(self, "a_clauses", a_clauses)
        object.__setattr__(self, "b_clauses", b_clauses)
        if not 0 <= int(self.seed) < 2**64:
            raise ContractError("seed must be a 64-bit unsigned integer")
        object.__setattr__(self, "seed", int(self.seed))

        A = np.zeros((n, n), dtype=np.int64)
        for c in a_clauses:
            if not c.is_a_clause():
                raise ValidationError(f"flow clause on {[v + 1 for v in c.variables]} has a non-positive off-diagonal entry")
            A += c.embed(n)
        if not np.array_equal(A, self.instance.A):
            raise ValidationError("flow matrix A is not the sum of the embedded A-clauses")

        B = self.instance.B
        for c in b_clauses:
            idx = np.array(c.variables)
            if max(c.variables) >= n:
                raise ValidationError(f"B-clause variable out of range for n={n}")
            block = B[np.ix_(idx, idx)]
            off = ~np.eye(len(idx), dtype=bool)
            if not (block[off] == 1).all():
                raise ValidationError(f"B is not 1 on all pairs of B-clause {[v + 1 for v in c.variables]}")

        lb = sum(clause_lower_bound(c, 1) for c in a_clauses)
        if self.global_lower_bound is None:
            object.__setattr__(self, "global_lower_bound", lb)
        elif int(self.global_lower_bound) != lb:
            raise ValidationError(f"global_lower_bound {self.global_lower_bound} != sum of clause bounds {lb}")
        else:
            object.__setattr__(self, "global_lower_bound", int(self.global_lower_bound))

    @property
    def n(self) -> int:
        return self.instance.n

    @property
    def m(self) -> int:
        return len(self.a_clauses)

    @property
    def m1(self) -> int:
        return len(self.b_clauses)

    @property
    def k(self) -> int:
        sizes = {c.k for c in self.a_clauses + self.b_clauses}
        return sizes.pop() if len(sizes) == 1 else 0


@nb.njit(cache=True)
def _cost(A, B, p):
    n = A.shape[0]
    c = 0
    for i in range(n):
        for j in range(n):
            c += A[i, j] * B[p[i], p[j]]
    return c


@nb.njit(cache=True)
def _full_delta(A, B, p, r, s):
    n = A.shape[0]
    pr = p[r]
    ps = p[s]
    d = (A[r, r] - A[s, s]) * (B[ps, ps] - B[pr, pr]) + (A[r, s] - A[s, r]) * (B[ps, pr] - B[pr, ps])
    for k in range(n):
        if k != r and k != s:
            pk = p[k]
            d += (A[k, r] - A[k, s]) * (B[pk, ps] - B[pk, pr]) + (A[r, k] - A[s, k]) * (B[ps, pk] - B[pr, pk])
    return d


def evaluate(inst: QapInstance, sigma) -> int:
    """Objective value sum_ij A[i, j] * B[sigma[i], sigma[j]]."""
    p = as_permutation(sigma, inst.n)
    return int(_cost(inst.A, inst.B, p))


def delta_swap(inst: QapInstance, sigma, r: int, s: int) -> int:
    """Change in objective when the locations of facilities r and s are exchanged.

    O(n); exact for asymmetric matrices.
    """
    n = inst.n
    p = np.asarray(sigma, dtype=np.int64)
    if p.shape != (n,):
        raise ContractError(f"permutation has shape {p.shape}, instance has n={n}")
    if r == s:
        raise ContractError("swap indices must differ")
    if not (0 <= r < n and 0 <= s < n):
        raise ContractError(f"swap indices ({r}, {s}) out of range for n={n}")
    return int(_full_delta(inst.A, inst.B, p, int(r), int(s)))


def is_satisfied(qs: QapSatInstance, minimum: int) -> bool:
    """True iff the certified minimum reaches the clause lower bound."""
    if minimum < qs.global_lower_bound:
        raise LowerBoundViolation(
            f"minimum {minimum} is below the global lower bound {qs.global_lower_bound}"
        )
    return int(minimum) == qs.global_lower_bound


def flow_dominance(M) -> float:
    """100 * population std / mean over all n^2 entries (0 when the mean is 0)."""
    arr = np.asarray(M, dtype=float)
    if arr.size == 0:
        raise ContractError("matrix must be non-empty")
    mu = arr.mean()
    if mu == 0:
        return 0.0
    return float(100.0 * arr.std() / mu)


def sparsity(M) -> float:
    """Fraction of zero entries among all n^2 entries."""
    arr = np.asarray(M)
    return float(np.count_nonzero(arr == 0) / arr.size)
