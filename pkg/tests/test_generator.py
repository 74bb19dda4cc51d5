"""Instance generator: clause placement, distance fill, reproducibility."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qapsat.core import A3, b_clause
from qapsat.errors import ContractError, GenerationError
from qapsat.exact import branch_and_bound
from qapsat.generator import (
    GeneratorConfig, cell_seed, compose_distance, conjugate, fill_geometric, gen_a_clause,
    generate, generate_suite, geometric_counts, make_rng, min_compose, ones_mask,
)


def test_geometric_counts_hand_applied():
    # n=5, one clause: 6 ones out of 20 positions, p1 = 0.3
    # 14 left -> ceil(4.2)=5, 9 -> ceil(2.7)=3, 6 -> 2, 4 -> 2, 2 -> 1, 1 -> 1
    assert geometric_counts(5, 6) == [5, 3, 2, 2, 1, 1]


def test_geometric_counts_integer_exact():
    # p1 * remaining is an exact integer here; float arithmetic would round up past it
    assert geometric_counts(10, 18)[0] == 15
    with pytest.raises(GenerationError):
        geometric_counts(5, 0)


@settings(max_examples=50, deadline=None)
@given(st.integers(3, 15), st.data())
def test_geometric_counts_cover_free_positions(n, data):
    ones = data.draw(st.integers(1, n * (n - 1)))
    counts = geometric_counts(n, ones)
    assert sum(counts) == n * (n - 1) - ones
    assert all(c >= 1 for c in counts)


@pytest.mark.parametrize("seed", range(25))
def test_fill_histogram_every_seed(seed):
    rng = make_rng(seed)
    c = b_clause(sorted(rng.choice(5, 3, replace=False)))
    mask = ones_mask([c], 5)
    C, hist = fill_geometric(rng, mask)
    B = compose_distance([c], C)
    values, counts = np.unique(B[~np.eye(5, dtype=bool)], return_counts=True)
    assert dict(zip(values.tolist(), counts.tolist())) == {1: 6, 2: 5, 3: 3, 4: 2, 5: 2, 6: 1, 7: 1}
    assert hist == {2: 5, 3: 3, 4: 2, 5: 2, 6: 1, 7: 1}


def test_min_compose():
    X = np.array([[0, 4], [2, 0]])
    Y = np.array([[0, 3], [5, 0]])
    assert min_compose(X, Y).tolist() == [[0, 3], [2, 0]]


def test_conjugate_keeps_block_sum():
    perm = [2, 0, 1]
    M = conjugate(A3, perm)
    assert M.sum() == A3.sum()
    assert sorted(M.ravel()) == sorted(A3.ravel())


def test_a_clause_distinct_variables():
    rng = make_rng(1)
    for _ in range(200):
        c = gen_a_clause(rng, 6)
        assert len(set(c.variables)) == 3 and max(c.variables) < 6
        assert c.submatrix.sum() == 10


def test_generated_structure():
    qs = generate(GeneratorConfig(n=9, m=7, m1=5, seed=3))
    A, B = qs.instance.A, qs.instance.B
    assert A.sum() == 70
    covered = {p for c in qs.b_clauses for p in c.pairs()}
    off = ~np.eye(9, dtype=bool)
    for i, j in zip(*np.nonzero(off)):
        if (i, j) in covered:
            assert B[i, j] == 1
        else:
            assert B[i, j] >= 2
    assert qs.global_lower_bound == 70


def test_satisfied_flag_consistent():
    qs = generate(GeneratorConfig(n=6, m=1, m1=1, seed=7))
    out = branch_and_bound(qs)
    assert out.minimum >= qs.global_lower_bound
    assert out.satisfied == (out.minimum == qs.global_lower_bound)


def test_reproducible_and_seed_sensitive():
    a = generate(GeneratorConfig(n=8, m=6, m1=4, seed=99))
    b = generate(GeneratorConfig(n=8, m=6, m1=4, seed=99))
    c = generate(GeneratorConfig(n=8, m=6, m1=4, seed=100))
    assert a.instance == b.instance and a.a_clauses == b.a_clauses
    assert not (a.instance == c.instance)


def test_cell_seed_independent_streams():
    seeds = {cell_seed(1, n, m1, m, r) for n in (8, 9) for m1 in (3, 6) for m in range(5) for r in range(3)}
    assert len(seeds) == 2 * 2 * 5 * 3
    assert cell_seed(1, 8, 3, 2, 0) == cell_seed(1, 8, 3, 2, 0)


@pytest.mark.parametrize("kwargs", [
    dict(n=2, m=1, m1=1, seed=0),
    dict(n=6, m=0, m1=1, seed=0),
    dict(n=6, m=1, m1=0, seed=0),
    dict(n=6, m=1, m1=1, seed=-1),
    dict(n=6, m=1, m1=1, seed=0, k=4),
])
def test_config_rejects(kwargs):
    with pytest.raises(ContractError):
        generate(GeneratorConfig(**kwargs))


def test_suite_files_and_manifest(tmp_path):
    pairs = generate_suite([(6, 2, 3), (7, 3, 1)], 2, 5, tmp_path)
    assert len(pairs) == 4
    assert (tmp_path / "manifest.json").exists()
    again = tmp_path / "again"
    generate_suite([(6, 2, 3), (7, 3, 1)], 2, 5, again)
    for p in pairs:
        assert p.data_path.read_bytes() == (again / p.data_path.name).read_bytes()
        assert p.meta_path.read_bytes() == (again / p.meta_path.name).read_bytes()
