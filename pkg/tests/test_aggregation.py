import itertools

import numpy as np
import pytest
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from socamg.aggregation import aggregate, tentative_prolongator, write_aggregates
from socamg.mesh import assemble, build_mesh, tensor_spec
from socamg.strength import DropConfig, StrengthGraph, build_strength

from _support import VX_J, VX_K, close_pair_1d


def path_graph(n):
    return StrengthGraph(sp.csr_matrix(sp.diags([np.ones(n - 1), np.ones(n - 1)], [-1, 1])))


def test_path_of_nine():
    agg = aggregate(path_graph(9))
    assert agg.sets() == [{0, 1}, {2, 3, 4}, {5, 6, 7, 8}]
    assert list(agg.roots) == [0, 3, 6]


def test_empty_graph_gives_singletons():
    agg = aggregate(StrengthGraph(sp.csr_matrix((6, 6))))
    assert agg.n_aggregates == 6
    assert np.array_equal(tentative_prolongator(agg).toarray(), np.eye(6))


def test_close_pair_sa_any_order():
    s = close_pair_1d()
    G = build_strength(s.A, s.coords, DropConfig("DLap", "SA", "Val", 0.5))
    for order in itertools.permutations(range(6)):
        a = aggregate(G, np.array(order)).assignment
        assert a[VX_J] == a[VX_K]


def test_order_validation():
    with pytest.raises(ValueError):
        aggregate(path_graph(4), np.array([0, 0, 1, 2]))


def test_tentative_prolongator():
    agg = aggregate(path_graph(9))
    P = tentative_prolongator(agg)
    assert P.shape == (9, 3)
    assert np.array_equal(P @ np.ones(3), np.ones(9))
    agg.assignment[0] = -1
    with pytest.raises(ValueError):
        tentative_prolongator(agg)


def test_three_by_three_blocks():
    # three disjoint triangles: each root takes its whole clique
    blocks = sp.block_diag([np.ones((3, 3)) - np.eye(3)] * 3)
    agg = aggregate(StrengthGraph(sp.csr_matrix(blocks)))
    P = tentative_prolongator(agg)
    assert np.array_equal(np.asarray(P.sum(axis=0)).ravel(), [3, 3, 3])


@pytest.mark.parametrize("seed", range(5))
def test_partition_and_connectivity(seed):
    rng = np.random.default_rng(seed)
    n = 80
    R = sp.random(n, n, density=0.04, random_state=seed, format="csr")
    R.setdiag(0)
    R.eliminate_zeros()
    R.data[:] = 1
    G = StrengthGraph(R)
    agg = aggregate(G, rng.permutation(n))
    a = agg.assignment
    assert a.min() == 0 and a.max() == agg.n_aggregates - 1
    assert sum(len(s) for s in agg.sets()) == n
    U = (R + R.T).tocsr()
    for members in agg.sets():
        idx = np.array(sorted(members))
        if len(idx) > 1:
            ncomp, _ = connected_components(U[idx][:, idx], directed=False)
            assert ncomp == 1
    again = aggregate(G, np.random.default_rng(seed).permutation(n))
    assert np.array_equal(a, again.assignment)


def test_aggregates_on_mesh_cover(tmp_path):
    s = assemble(build_mesh(tensor_spec(2, 2.0, 5.0)))
    agg = aggregate(build_strength(s.A, s.coords, DropConfig()))
    assert np.all(agg.assignment >= 0)
    write_aggregates(tmp_path / "a.txt", agg)
    assert np.array_equal(np.loadtxt(tmp_path / "a.txt", dtype=int), agg.assignment)
