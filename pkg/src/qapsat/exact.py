"""Exact QAP solvers: exhaustive enumeration and Gilmore-Lawler branch-and-bound.

Effort is reported through deterministic counters (``nodes_expanded``,
``lap_calls``); wall-clock time is informational only.

Bound used by the search
------------------------
With facilities ``F`` fixed to locations ``phi`` and the rest free, the cost
splits into the fixed-fixed part, the interaction of each free facility
with the fixed ones, and the free-free quadratic part ``Q``.  ``Q`` is the
sum over free facilities of their row contributions and also of their
column contributions, so

    2 Q >= sum_i  msp(A[i, U-i], B[l, W-l]) + msp(A[U-i, i], B[W-l, l])

where ``msp`` is the minimal scalar product (one vector ascending, the
other descending) and ``l`` is the location of ``i``.  Solving a linear
assignment over ``2 * interaction + row msp + column msp`` and halving
(rounded up, objective values are integers) gives the bound.  It never
decreases when another pair is fixed.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass

import numba as nb
import numpy as np

from .core import QapInstance, QapSatInstance, as_permutation, evaluate, is_satisfied
from .errors import ContractError, EnumerationLimitError

ENUMERATION_CAP = 11
_INT_INF = np.int64(2**62)


@dataclass(frozen=True)
class SolveOutcome:
    minimum: int
    argmin: np.ndarray
    nodes_expanded: int
    lap_calls: int
    elapsed: float
    satisfied: bool | None
    proven: bool
    method: str = ""


@dataclass(frozen=True)
class Assignment:
    """Injective facility -> location map (0-based) with its cost."""

    mapping: dict
    cost: int = 0

    def __post_init__(self):
        locs = list(self.mapping.values())
        if len(set(locs)) != len(locs):
            raise ContractError("assignment is not injective")


def _unwrap(inst):
    if isinstance(inst, QapSatInstance):
        return inst, inst.instance
    return None, inst


def _satisfaction(qs, minimum, proven):
    if qs is None or not proven:
        return None
    return is_satisfied(qs, minimum)


# --------------------------------------------------------------------------
# linear assignment


@nb.njit(cache=True)
def _hungarian(cost, inf):
    """Shortest augmenting path Hungarian method, O(n^3).

    Returns (row -> column array, optimal value).
    """
    n = cost.shape[0]
    u = np.zeros(n + 1, dtype=cost.dtype)
    v = np.zeros(n + 1, dtype=cost.dtype)
    p = np.zeros(n + 1, dtype=np.int64)
    way = np.zeros(n + 1, dtype=np.int64)
    minv = np.empty(n + 1, dtype=cost.dtype)
    used = np.zeros(n + 1, dtype=np.bool_)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        for j in range(n + 1):
            minv[j] = inf
            used[j] = False
        while True:
            used[j0] = True
            i0 = p[j0]
            delta = inf
            j1 = 0
            for j in range(1, n + 1):
                if not used[j]:
                    cur = cost[i0 - 1, j - 1] - u[i0] - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break
    rows = np.empty(n, dtype=np.int64)
    total = cost[0, 0] - cost[0, 0]
    for j in range(1, n + 1):
        rows[p[j] - 1] = j - 1
    for i in range(n):
        total += cost[i, rows[i]]
    return rows, total


def lap_solve(cost):
    """Minimum-cost perfect matching of a square cost matrix.

    Returns ``(assignment, value)`` with ``assignment[i]`` the column given
    to row ``i``.  Integer input gives an exact integer value.
    """
    c = np.asarray(cost)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise ContractError(f"cost matrix must be square, got shape {c.shape}")
    if c.shape[0] == 0:
        return np.zeros(0, dtype=np.int64), 0
    if c.dtype.kind in "iub":
        rows, val = _hungarian(np.ascontiguousarray(c, dtype=np.int64), _INT_INF)
        return rows, int(val)
    c = np.ascontiguousarray(c, dtype=np.float64)
    if not np.isfinite(c).all():
        raise ContractError("cost matrix entries must be finite")
    rows, val = _hungarian(c, np.inf)
    return rows, float(val)


# --------------------------------------------------------------------------
# Gilmore-Lawler bound, reference implementation for arbitrary partial maps


def _msp(a, b) -> int:
    """Minimal scalar product of two equal-length vectors."""
    return int(np.dot(np.sort(a), np.sort(b)[::-1]))


def gilmore_lawler_bound(inst, partial=None) -> int:
    """Lower bound on the best completion of a partial assignment.

    ``partial`` maps facilities to locations (0-based); it may be a dict,
    an :class:`Assignment`, or None for the root.
    """
    _, inst = _unwrap(inst)
    if isinstance(partial, Assignment):
        partial = partial.mapping
    partial = dict(partial or {})
    Assignment(partial)
    n = inst.n
    A, B = inst.A, inst.B
    fixed_f = np.array(sorted(partial), dtype=np.int64)
    fixed_l = np.array([partial[f] for f in fixed_f], dtype=np.int64)
    if fixed_f.size and (fixed_f.max() >= n or fixed_l.max() >= n or min(fixed_f.min(), fixed_l.min()) < 0):
        raise ContractError("partial assignment index out of range")
    free_f = np.array([i for i in range(n) if i not in partial], dtype=np.int64)
    free_l = np.array(sorted(set(range(n)) - set(fixed_l.tolist())), dtype=np.int64)

    fixed = int((A[np.ix_(fixed_f, fixed_f)] * B[np.ix_(fixed_l, fixed_l)]).sum()) if fixed_f.size else 0
    s = free_f.size
    if s == 0:
        return fixed
    cost = np.zeros((s, s), dtype=np.int64)
    for a, i in enumerate(free_f):
        others_f = free_f[free_f != i]
        for b, l in enumerate(free_l):
            inter = int(A[i, fixed_f] @ B[l, fixed_l] + A[fixed_f, i] @ B[fixed_l, l]) if fixed_f.size else 0
            others_l = free_l[free_l != l]
            quad = _msp(A[i, others_f], B[l, others_l]) + _msp(A[others_f, i], B[others_l, l])
            cost[a, b] = 2 * inter + quad
    _, val = lap_solve(cost)
    return fixed + (val + 1) // 2


# --------------------------------------------------------------------------
# enumeration


@nb.njit(cache=True)
def _enumerate(A, B):
    n = A.shape[0]
    loc = np.zeros(n, dtype=np.int64)
    used = np.zeros(n, dtype=np.bool_)
    partial = np.zeros(n + 1, dtype=np.int64)
    nxt = np.zeros(n, dtype=np.int64)  # next location to try at each depth
    best = _INT_INF
    best_perm = np.arange(n)
    leaves = 0
    d = 0
    while d >= 0:
        if nxt[d] > 0:
            used[loc[d]] = False
        l = nxt[d]
        while l < n and used[l]:
            l += 1
        if l == n:
            nxt[d] = 0
            d -= 1
            continue
        nxt[d] = l + 1
        loc[d] = l
        used[l] = True
        c = partial[d]
        for f in range(d):
            c += A[d, f] * B[l, loc[f]] + A[f, d] * B[loc[f], l]
        partial[d + 1] = c
        if d == n - 1:
            leaves += 1
            if c < best:
                best = c
                best_perm[:] = loc
            used[l] = False
            nxt[d] = n  # single free location at the last depth
        else:
            d += 1
    return best, best_perm, leaves


def enumerate_min(inst, cap: int = ENUMERATION_CAP) -> SolveOutcome:
    """Exact minimum over all n! permutations (lexicographically first argmin)."""
    qs, inst = _unwrap(inst)
    if inst.n > cap:
        raise EnumerationLimitError(f"n={inst.n} exceeds the enumeration cap {cap}; use branch_and_bound")
    t0 = time.perf_counter()
    best, perm, leaves = _enumerate(np.ascontiguousarray(inst.A), np.ascontiguousarray(inst.B))
    elapsed = time.perf_counter() - t0
    best = int(best)
    return SolveOutcome(best, perm.copy(), int(leaves), 0, elapsed,
                        _satisfaction(qs, best, True), True, "enum")


def brute_force_min(inst) -> tuple[int, np.ndarray]:
    """Pure-Python enumeration; slow, for cross-checking small cases."""
    _, inst = _unwrap(inst)
    best, arg = None, None
    for p in itertools.permutations(range(inst.n)):
        v = evaluate(inst, p)
        if best is None or v < best:
            best, arg = v, np.array(p)
    return best, arg


# --------------------------------------------------------------------------
# branch and bound


@nb.njit(cache=True)
def _sorted_a_rows(A):
    """For each depth d and facility i > d: A[i, j] and A[j, i] over j > d, j != i,
    sorted descending, zero-padded; plus their non-zero counts."""
    n = A.shape[0]
    rows = np.zeros((n, n, n), dtype=np.int64)
    cols = np.zeros((n, n, n), dtype=np.int64)
    nnz_r = np.zeros((n, n), dtype=np.int64)
    nnz_c = np.zeros((n, n), dtype=np.int64)
    buf = np.empty(n, dtype=np.int64)
    for d in range(n):
        for i in range(d + 1, n):
            k = 0
            for j in range(d + 1, n):
                if j != i:
                    buf[k] = A[i, j]
                    k += 1
            s = np.sort(buf[:k])[::-1]
            cnt = 0
            for t in range(k):
                rows[d, i, t] = s[t]
                if s[t] != 0:
                    cnt += 1
            nnz_r[d, i] = cnt
            k = 0
            for j in range(d + 1, n):
                if j != i:
                    buf[k] = A[j, i]
                    k += 1
            s = np.sort(buf[:k])[::-1]
            cnt = 0
            for t in range(k):
                cols[d, i, t] = s[t]
                if s[t] != 0:
                    cnt += 1
            nnz_c[d, i] = cnt
    return rows, cols, nnz_r, nnz_c


@nb.njit(cache=True)
def _sorted_b_rows(B):
    """Each row of B without its diagonal entry, ascending, with column indices."""
    n = B.shape[0]
    vals = np.zeros((n, max(n - 1, 1)), dtype=np.int64)
    locs = np.zeros((n, max(n - 1, 1)), dtype=np.int64)
    buf = np.empty(n - 1, dtype=np.int64)
    cols = np.empty(n - 1, dtype=np.int64)
    for l in range(n):
        k = 0
        for l2 in range(n):
            if l2 != l:
                buf[k] = B[l, l2]
                cols[k] = l2
                k += 1
        idx = np.argsort(buf, kind="mergesort")
        for r in range(n - 1):
            vals[l, r] = buf[idx[r]]
            locs[l, r] = cols[idx[r]]
    return vals, locs


@nb.njit(cache=True)
def _msp_tables(d, free_locs, nfree, arow, nnz, b_sorted, b_locs, rank, pre, suf):
    """Minimal scalar products with one location removed, for every child.

    For facility i > d and free location l, ``b_sorted[l]`` lists the B
    entries of l towards the other free locations in ascending order.
    Removing location x (at rank r in that list) shifts the tail by one, so
    msp = pre[i, l, min(r, nnz)] + suf[i, l, min(r, nnz)].
    """
    n = arow.shape[1]
    for q in range(nfree):
        l = free_locs[q]
        for r in range(nfree - 1):
            rank[l, b_locs[l, r]] = r
    for i in range(d + 1, n):
        nr = nnz[d, i]
        for q in range(nfree):
            l = free_locs[q]
            acc = 0
            pre[i, l, 0] = 0
            for t in range(nr):
                acc += arow[d, i, t] * b_sorted[l, t]
                pre[i, l, t + 1] = acc
            acc = 0
            suf[i, l, nr] = 0
            for t in range(nr - 1, -1, -1):
                acc += arow[d, i, t] * b_sorted[l, t + 1]
                suf[i, l, t] = acc


@nb.njit(cache=True)
def _child_bound(A, B, d, j, fixed, L, free_locs, nfree, nnz_r, nnz_c,
                 rank_r, pre_r, suf_r, rank_c, pre_c, suf_c, cost, incumbent):
    """Bound for placing facility d at location j, given the node at depth d.

    Returns (bound, used_lap).  When the row-minimum relaxation already
    reaches the incumbent the assignment problem is skipped.
    """
    n = A.shape[0]
    fixed_child = fixed + L[d, j]
    s = n - d - 1
    if s == 0:
        return fixed_child, False
    # rows: facilities d+1..n-1; columns: free locations except j
    row_min_total = 0
    for a in range(s):
        i = d + 1 + a
        nr = nnz_r[d, i]
        nc = nnz_c[d, i]
        rowmin = _INT_INF
        b = 0
        for q in range(nfree):
            l = free_locs[q]
            if l == j:
                continue
            c = 2 * (L[i, l] + A[i, d] * B[l, j] + A[d, i] * B[j, l])
            r = min(rank_r[l, j], nr)
            c += pre_r[i, l, r] + suf_r[i, l, r]
            r = min(rank_c[l, j], nc)
            c += pre_c[i, l, r] + suf_c[i, l, r]
            cost[a, b] = c
            if c < rowmin:
                rowmin = c
            b += 1
        row_min_total += rowmin
    if fixed_child + (row_min_total + 1) // 2 >= incumbent:
        return fixed_child + (row_min_total + 1) // 2, False
    _, val = _hungarian(cost[:s, :s], _INT_INF)
    return fixed_child + (val + 1) // 2, True


@nb.njit(cache=True)
def _bnb(A, B, target, has_target, node_cap, upper, debug):
    n = A.shape[0]
    arow, acol, nnz_r, nnz_c = _sorted_a_rows(A)
    srow_v, srow_l = _sorted_b_rows(B)
    scol_v, scol_l = _sorted_b_rows(B.T.copy())
    loc = np.zeros(n, dtype=np.int64)
    used = np.zeros(n, dtype=np.bool_)
    fixed = np.zeros(n + 1, dtype=np.int64)
    node_bound = np.zeros(n + 1, dtype=np.int64)
    Ls = np.zeros((n + 1, n, n), dtype=np.int64)
    order = np.zeros((n, n), dtype=np.int64)
    bounds = np.zeros((n, n), dtype=np.int64)
    count = np.zeros(n, dtype=np.int64)
    pos = np.zeros(n, dtype=np.int64)
    cost = np.zeros((n, n), dtype=np.int64)
    free_locs = np.zeros(n, dtype=np.int64)
    brow_s = np.zeros((n, n), dtype=np.int64)
    bcol_s = np.zeros((n, n), dtype=np.int64)
    brow_l = np.zeros((n, n), dtype=np.int64)
    bcol_l = np.zeros((n, n), dtype=np.int64)
    tmpv = np.zeros(n, dtype=np.int64)
    tmpl = np.zeros(n, dtype=np.int64)
    cb = np.zeros(n, dtype=np.int64)
    rank_r = np.zeros((n, n), dtype=np.int64)
    rank_c = np.zeros((n, n), dtype=np.int64)
    pre_r = np.zeros((n, n, n + 1), dtype=np.int64)
    suf_r = np.zeros((n, n, n + 1), dtype=np.int64)
    pre_c = np.zeros((n, n, n + 1), dtype=np.int64)
    suf_c = np.zeros((n, n, n + 1), dtype=np.int64)

    incumbent = upper
    best_perm = np.full(n, -1, dtype=np.int64)
    expanded = 0
    lap_calls = 0
    capped = False
    monotone_ok = True
    done = False

    d = 0
    expand = True  # True: expand the node at depth d; False: advance to its next child
    while d >= 0 and not done:
        if expand:
            if node_cap > 0 and expanded >= node_cap:
                capped = True
                break
            expanded += 1
            L = Ls[d]
            nfree = 0
            for l in range(n):
                if not used[l]:
                    free_locs[nfree] = l
                    nfree += 1
            # B rows/cols over the free set, ascending, excluding the diagonal:
            # filter the presorted full rows
            for q in range(nfree):
                l = free_locs[q]
                k = 0
                for r in range(n - 1):
                    l2 = srow_l[l, r]
                    if not used[l2]:
                        brow_s[l, k] = srow_v[l, r]
                        brow_l[l, k] = l2
                        k += 1
                k = 0
                for r in range(n - 1):
                    l2 = scol_l[l, r]
                    if not used[l2]:
                        bcol_s[l, k] = scol_v[l, r]
                        bcol_l[l, k] = l2
                        k += 1
            _msp_tables(d, free_locs, nfree, arow, nnz_r, brow_s, brow_l, rank_r, pre_r, suf_r)
            _msp_tables(d, free_locs, nfree, acol, nnz_c, bcol_s, bcol_l, rank_c, pre_c, suf_c)
            m = 0
            for q in range(nfree):
                j = free_locs[q]
                bnd, lap = _child_bound(A, B, d, j, fixed[d], L, free_locs, nfree, nnz_r, nnz_c,
                                        rank_r, pre_r, suf_r, rank_c, pre_c, suf_c, cost, incumbent)
                if lap:
                    lap_calls += 1
                if debug and bnd < node_bound[d]:
                    if lap or d == n - 1:
                        monotone_ok = False
                cb[m] = bnd
                tmpl[m] = j
                m += 1
            # ascending bound, ties by ascending location (stable sort on location-ordered list)
            idx = np.argsort(cb[:m], kind="mergesort")
            for r in range(m):
                order[d, r] = tmpl[idx[r]]
                bounds[d, r] = cb[idx[r]]
            count[d] = m
            pos[d] = 0
            expand = False
            continue

        # advance at depth d
        if pos[d] > 0:
            used[loc[d]] = False
        if pos[d] >= count[d] or bounds[d, pos[d]] >= incumbent:
            d -= 1
            continue
        j = order[d, pos[d]]
        bnd = bounds[d, pos[d]]
        pos[d] += 1
        loc[d] = j
        used[j] = True
        val = fixed[d] + Ls[d][d, j]
        if d == n - 1:
            if val < incumbent:
                incumbent = val
                best_perm[:] = loc
                if has_target and incumbent <= target:
                    done = True
            continue
        fixed[d + 1] = val
        node_bound[d + 1] = bnd
        Lc = Ls[d + 1]
        Lp = Ls[d]
        for i in range(d + 1, n):
            for l in range(n):
                if not used[l]:
                    Lc[i, l] = Lp[i, l] + A[i, d] * B[l, j] + A[d, i] * B[j, l]
        d += 1
        expand = True
    proven = (not capped) and best_perm[0] >= 0
    if done:
        proven = True
    return incumbent, best_perm, expanded, lap_calls, proven, monotone_ok


def branch_and_bound(inst, target: int | None = None, node_cap: int | None = None,
                     debug: bool = False) -> SolveOutcome:
    """Depth-first Gilmore-Lawler branch-and-bound.

    Facilities are placed in the fixed order 0..n-1; the children of a node
    are visited by ascending bound, ties by ascending location.  A node is
    pruned when its bound is >= the incumbent.  With ``target`` the search
    stops as soon as the incumbent reaches it (decision mode; the target
    must be a valid lower bound, e.g. the clause bound, for ``proven`` to be
    meaningful).  ``nodes_expanded`` counts nodes whose children were
    generated; ``lap_calls`` counts assignment problems solved.  Hitting
    ``node_cap`` returns the incumbent with ``proven=False``.

    With ``debug`` set, a child bound below its parent's raises
    AssertionError.
    """
    qs, inst = _unwrap(inst)
    n = inst.n
    t0 = time.perf_counter()
    best, perm, expanded, laps, proven, mono = _bnb(
        np.ascontiguousarray(inst.A), np.ascontiguousarray(inst.B),
        np.int64(0 if target is None else target), target is not None,
        np.int64(node_cap or 0), _INT_INF, debug)
    elapsed = time.perf_counter() - t0
    if debug and not mono:
        raise AssertionError("bound decreased along a branch")
    if perm[0] < 0:
        # node cap hit before the first leaf
        perm = np.arange(n)
        best = evaluate(inst, perm)
    best = int(best)
    perm = as_permutation(perm.copy(), n)
    return SolveOutcome(best, perm, int(expanded), int(laps), elapsed,
                        _satisfaction(qs, best, proven), bool(proven), "bnb")


def solve(inst, method: str = "bnb", **kwargs) -> SolveOutcome:
    if method == "enum":
        return enumerate_min(inst, **kwargs)
    if method == "bnb":
        return branch_and_bound(inst, **kwargs)
    raise ContractError(f"unknown method {method!r}")
