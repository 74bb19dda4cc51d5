"""Robust tabu search (Taillard) for the QAP and repeated-run success rates.

Move selection follows Taillard's scheme: the full swap neighbourhood is
scanned every iteration using a maintained delta matrix.  ``tabu[i, l]``
holds the iteration until which facility ``i`` may not return to location
``l``.  A swap is forbidden when both facilities would return to forbidden
locations.  A swap is aspired when either of its entries expired more than
``aspiration`` iterations ago, or when it improves on the best value seen.
Aspired moves take precedence; among moves of the same class the smallest
delta wins, ties going to the first pair in (r, s) lexicographic order.
Tenures are drawn per entry, uniformly in
``[floor(0.9 * duration), ceil(1.1 * duration)]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba as nb
import numpy as np

from .core import QapInstance, QapSatInstance, _cost, _full_delta
from .errors import ContractError
from .generator import make_rng


@dataclass(frozen=True)
class RotsConfig:
    """Search parameters; ``None`` durations resolve to 8n and 5n^2."""

    tabu_duration_mean: int | None = None
    aspiration: int | None = None
    max_iterations: int = 1000
    runs: int = 30
    seed: int = 0

    def __post_init__(self):
        for name in ("tabu_duration_mean", "aspiration"):
            v = getattr(self, name)
            if v is not None and v <= 0:
                raise ContractError(f"{name} must be positive")
        if self.max_iterations <= 0 or self.runs <= 0:
            raise ContractError("max_iterations and runs must be positive")
        if not 0 <= self.seed < 2**64:
            raise ContractError("seed must be a 64-bit unsigned integer")

    def duration(self, n: int) -> int:
        return 8 * n if self.tabu_duration_mean is None else self.tabu_duration_mean

    def aspiration_for(self, n: int) -> int:
        return 5 * n * n if self.aspiration is None else self.aspiration


@dataclass(frozen=True)
class RotsResult:
    success: bool
    iterations_to_optimum: int | None
    best_value: int


@nb.njit(cache=True)
def _rots(A, B, p, tenures, optimum, max_iter, aspiration, debug):
    """One run.  Returns (reached, iteration, best_value, consistent)."""
    n = A.shape[0]
    delta = np.zeros((n, n), dtype=np.int64)
    tabu = np.zeros((n, n), dtype=np.int64)
    for i in range(n):
        for j in range(n):
            tabu[i, j] = -(n * (i + 1) + j + 1)
    for i in range(n - 1):
        for j in range(i + 1, n):
            delta[i, j] = _full_delta(A, B, p, i, j)
    current = _cost(A, B, p)
    best = current
    consistent = True
    if best <= optimum:
        return True, 0, best, consistent
    big = np.int64(2**62)
    for it in range(1, max_iter + 1):
        ri = -1
        rj = -1
        min_delta = big
        already_aspired = False
        for i in range(n - 1):
            for j in range(i + 1, n):
                dij = delta[i, j]
                authorized = tabu[i, p[j]] < it or tabu[j, p[i]] < it
                aspired = (tabu[i, p[j]] < it - aspiration or tabu[j, p[i]] < it - aspiration
                           or current + dij < best)
                if ((aspired and not already_aspired)
                        or (aspired and already_aspired and dij < min_delta)
                        or (not aspired and not already_aspired and dij < min_delta and authorized)):
                    ri = i
                    rj = j
                    min_delta = dij
                    if aspired:
                        already_aspired = True
        if ri < 0:
            # every move tabu: take the best one regardless
            for i in range(n - 1):
                for j in range(i + 1, n):
                    if delta[i, j] < min_delta:
                        ri = i
                        rj = j
                        min_delta = delta[i, j]
        tmp = p[ri]
        p[ri] = p[rj]
        p[rj] = tmp
        current += delta[ri, rj]
        tabu[ri, p[rj]] = it + tenures[it - 1, 0]
        tabu[rj, p[ri]] = it + tenures[it - 1, 1]
        if debug and current != _cost(A, B, p):
            consistent = False
        if current < best:
            best = current
            if best <= optimum:
                return True, it, best, consistent
        r = ri
        s = rj
        for i in range(n - 1):
            for j in range(i + 1, n):
                if i != r and i != s and j != r and j != s:
                    delta[i, j] = (delta[i, j]
                                   + (A[r, i] - A[r, j] + A[s, j] - A[s, i])
                                   * (B[p[s], p[i]] - B[p[s], p[j]] + B[p[r], p[j]] - B[p[r], p[i]])
                                   + (A[i, r] - A[j, r] + A[j, s] - A[i, s])
                                   * (B[p[i], p[s]] - B[p[j], p[s]] + B[p[j], p[r]] - B[p[i], p[r]]))
                else:
                    delta[i, j] = _full_delta(A, B, p, i, j)
                if debug and delta[i, j] != _full_delta(A, B, p, i, j):
                    consistent = False
    return False, max_iter, best, consistent


def run_seed(config: RotsConfig, run: int) -> int:
    ss = np.random.SeedSequence(int(config.seed), spawn_key=(int(run),))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def rots_run(inst, optimum: int, config: RotsConfig | None = None, seed: int = 0,
             debug: bool = False) -> RotsResult:
    """One run from a uniformly random permutation.

    Stops when the value reaches ``optimum`` or after
    ``config.max_iterations`` moves.
    """
    config = config or RotsConfig()
    if isinstance(inst, QapSatInstance):
        inst = inst.instance
    n = inst.n
    if n < 2:
        raise ContractError("tabu search needs n >= 2")
    rng = make_rng(seed)
    p = rng.permutation(n).astype(np.int64)
    dur = config.duration(n)
    lo, hi = math.floor(0.9 * dur), math.ceil(1.1 * dur)
    tenures = rng.integers(lo, hi + 1, size=(config.max_iterations, 2), dtype=np.int64)
    reached, it, best, ok = _rots(np.ascontiguousarray(inst.A), np.ascontiguousarray(inst.B), p,
                                  tenures, np.int64(optimum), config.max_iterations,
                                  np.int64(config.aspiration_for(n)), debug)
    if debug and not ok:
        raise AssertionError("incremental evaluation diverged from full evaluation")
    if best < optimum:
        raise ContractError(f"found value {best} below the claimed optimum {optimum}")
    return RotsResult(bool(reached), int(it) if reached else None, int(best))


def rots_runs(inst, optimum: int, config: RotsConfig | None = None) -> list[RotsResult]:
    config = config or RotsConfig()
    return [rots_run(inst, optimum, config, run_seed(config, r)) for r in range(config.runs)]


def success_rate(inst, optimum: int, config: RotsConfig | None = None) -> float:
    """Fraction of ``config.runs`` independent runs that reach ``optimum``."""
    results = rots_runs(inst, optimum, config)
    return sum(r.success for r in results) / len(results)


def summarize(results: list[RotsResult], max_iterations: int) -> tuple[float, float]:
    """(success rate, mean iterations) with failed runs counted at the budget."""
    rate = sum(r.success for r in results) / len(results)
    iters = [r.iterations_to_optimum if r.success else max_iterations for r in results]
    return rate, float(np.mean(iters))
