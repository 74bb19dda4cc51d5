"""Random QAP-k-SAT instance generator.

Each instance is driven by a single ``numpy.random.Generator`` (PCG64)
seeded with a 64-bit integer.  Draw order is fixed: the ``m`` flow clauses,
then the ``m1`` distance clauses, then one shuffle of the free off-diagonal
positions of B.  Changing that order changes every instance.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from functools import reduce
from pathlib import Path
from typing import Iterable

import numpy as np

from .core import A3, ClauseSpec, QapInstance, QapSatInstance, b_clause
from .errors import ContractError, GenerationError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class GeneratorConfig:
    n: int
    m: int
    m1: int
    seed: int
    k: int = 3
    a_submatrix: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        if not self.n >= self.k >= 2:
            raise ContractError(f"need n >= k >= 2, got n={self.n}, k={self.k}")
        if self.m < 1 or self.m1 < 1:
            raise ContractError(f"need m >= 1 and m1 >= 1, got m={self.m}, m1={self.m1}")
        if not 0 <= self.seed < 2**64:
            raise ContractError("seed must be a 64-bit unsigned integer")
        if self.a_submatrix is None and self.k != 3:
            raise ContractError("only the k=3 flow block is built in; pass a_submatrix for other k")

    @property
    def base(self) -> np.ndarray:
        return A3 if self.a_submatrix is None else np.asarray(self.a_submatrix, dtype=np.int64)


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed)))


def cell_seed(master_seed: int, n: int, m1: int, m: int, replicate: int) -> int:
    """64-bit seed for one suite cell replicate.

    Mixes the coordinates through ``numpy.random.SeedSequence`` with
    ``entropy=master_seed`` and ``spawn_key=(n, m1, m, replicate)``.
    """
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(n), int(m1), int(m), int(replicate)))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def conjugate(base: np.ndarray, perm) -> np.ndarray:
    """Simultaneous row/column reorder ``base[perm][:, perm]``."""
    perm = np.asarray(perm)
    return np.asarray(base)[np.ix_(perm, perm)]


def gen_a_clause(rng: np.random.Generator, n: int, base: np.ndarray = A3) -> ClauseSpec:
    """Flow clause on k distinct uniformly drawn variables.

    The returned clause lists its variables in ascending order; its
    submatrix is ``base`` conjugated by a uniformly random k-permutation.
    """
    k = base.shape[0]
    if n < k:
        raise ContractError(f"n={n} is smaller than the clause size {k}")
    variables = np.sort(rng.choice(n, size=k, replace=False))
    perm = rng.permutation(k)
    return ClauseSpec(tuple(int(v) for v in variables), conjugate(base, perm))


def gen_b_clause(rng: np.random.Generator, n: int, k: int = 3) -> ClauseSpec:
    variables = np.sort(rng.choice(n, size=k, replace=False))
    return b_clause(tuple(int(v) for v in variables))


def min_compose(*matrices) -> np.ndarray:
    """Element-wise minimum of equally shaped matrices."""
    return reduce(np.minimum, (np.asarray(m, dtype=np.int64) for m in matrices))


def ones_mask(b_clauses: Iterable[ClauseSpec], n: int) -> np.ndarray:
    mask = np.zeros((n, n), dtype=bool)
    for c in b_clauses:
        idx = np.array(c.variables)
        mask[np.ix_(idx, idx)] = True
    np.fill_diagonal(mask, False)
    return mask


def compose_distance(b_clauses: Iterable[ClauseSpec], C) -> np.ndarray:
    """B = B_1 (.) ... (.) B_m1 (.) C where (.) is the element-wise minimum.

    Each distance clause is 1 on its off-diagonal pairs and larger than
    every entry of ``C`` elsewhere, so the result is 1 on covered pairs and
    ``C`` on the rest.  The diagonal is 0.
    """
    C = np.asarray(C, dtype=np.int64)
    n = C.shape[0]
    off = ~np.eye(n, dtype=bool)
    if (C[off] <= 1).any():
        raise ContractError("complementary matrix must exceed 1 off the diagonal")
    big = int(C.max()) + 1
    clause_mats = []
    for c in b_clauses:
        M = np.full((n, n), big, dtype=np.int64)
        M[c.embed(n) == 1] = 1
        clause_mats.append(M)
    B = min_compose(*clause_mats, C)
    np.fill_diagonal(B, 0)
    return B


def geometric_counts(n: int, ones_count: int) -> list[int]:
    """Counts n_2, n_3, ... of each distance value d >= 2.

    n_d = max(1, ceil(p1 * (N - sum_{delta<d} n_delta))) with N = n(n-1) and
    p1 = ones_count / N, capped at the number of positions still free.
    Integer arithmetic: ceil(a*r/N) is computed exactly.
    """
    total = n * (n - 1)
    if ones_count <= 0:
        raise GenerationError("no distance clause placed: cannot derive p1")
    if ones_count > total:
        raise ContractError(f"{ones_count} ones exceed the {total} off-diagonal positions")
    counts = []
    remaining = total - ones_count
    while remaining > 0:
        nd = max(1, -(-ones_count * remaining // total))
        nd = min(nd, remaining)
        counts.append(nd)
        remaining -= nd
    return counts


def fill_geometric(rng: np.random.Generator, mask: np.ndarray):
    """Complementary distance matrix for the positions not set by clauses.

    ``mask`` marks off-diagonal entries already equal to 1.  Returns
    ``(C, counts)`` where ``counts[d]`` is the number of entries given value
    ``d``.  Positions are drawn uniformly: one shuffle of the free positions,
    consumed in value order.  Entries of C under the mask (and the diagonal)
    hold ``max value + 1`` and ``0`` respectively so that C > 1 off-diagonal.
    """
    n = mask.shape[0]
    off = ~np.eye(n, dtype=bool)
    free = np.flatnonzero((off & ~mask).ravel())
    counts = geometric_counts(n, int(mask.sum()))
    order = rng.permutation(free)
    C = np.zeros(n * n, dtype=np.int64)
    start = 0
    hist = {}
    for d, nd in enumerate(counts, start=2):
        C[order[start:start + nd]] = d
        hist[d] = nd
        start += nd
    C = C.reshape(n, n)
    top = (len(counts) + 2) if counts else 2
    C[mask] = top
    return C, hist


def generate(config: GeneratorConfig) -> QapSatInstance:
    """Build one random QAP-k-SAT instance; a pure function of ``config``."""
    n, k = config.n, config.k
    base = config.base
    if base.shape != (k, k):
        raise ContractError(f"flow block shape {base.shape} does not match k={k}")
    rng = make_rng(config.seed)
    a_clauses = [gen_a_clause(rng, n, base) for _ in range(config.m)]
    b_clauses = [gen_b_clause(rng, n, k) for _ in range(config.m1)]

    A = np.zeros((n, n), dtype=np.int64)
    for c in a_clauses:
        A += c.embed(n)
    mask = ones_mask(b_clauses, n)
    C, _ = fill_geometric(rng, mask)
    B = compose_distance(b_clauses, C)
    inst = QapInstance(A, B)
    lb = int(base.sum()) * config.m
    return QapSatInstance(inst, a_clauses, b_clauses, seed=config.seed, global_lower_bound=lb)


def instance_stem(n: int, m1: int, m: int, replicate: int) -> str:
    return f"qapsat_n{n:02d}_m1-{m1:02d}_m{m:02d}_r{replicate:03d}"


def generate_suite(cells: Iterable[tuple[int, int, int]], instances_per_cell: int,
                   master_seed: int, out_dir, k: int = 3):
    """Generate and write every replicate of every (n, m1, m) cell.

    Returns the list of written :class:`~qapsat.instance_io.InstanceFilePair`
    and writes ``manifest.json`` listing cell coordinates, seeds and paths.
    """
    from .instance_io import InstanceFilePair, write_instance

    cells = list(cells)
    if not cells:
        raise ContractError("empty design grid")
    if instances_per_cell < 1:
        raise ContractError("instances_per_cell must be >= 1")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    pairs = []
    entries = []
    for n, m1, m in cells:
        for rep in range(instances_per_cell):
            seed = cell_seed(master_seed, n, m1, m, rep)
            qs = generate(GeneratorConfig(n=n, m=m, m1=m1, seed=seed, k=k))
            stem = instance_stem(n, m1, m, rep)
            pair = InstanceFilePair(out / f"{stem}.dat", out / f"{stem}.json")
            write_instance(qs, pair)
            pairs.append(pair)
            entries.append({"n": n, "k": k, "m1": m1, "m": m, "replicate": rep, "seed": seed,
                            "data": pair.data_path.name, "meta": pair.meta_path.name})
        log.info("generated cell n=%d m1=%d m=%d (%d instances)", n, m1, m, instances_per_cell)
    manifest = {"format_version": 1, "master_seed": int(master_seed),
                "instances_per_cell": instances_per_cell, "instances": entries}
    with open(out / "manifest.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=1)
        fh.write("\n")
    return pairs
