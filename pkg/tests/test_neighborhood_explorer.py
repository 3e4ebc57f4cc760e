import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_small_digraph
from oracles import out_paths
from pagerank_mixing.degree_model import build_degree_sequence, dirac, entropic_time, mu_in, regular_sequence, uniform
from pagerank_mixing.errors import EtaTooLarge
from pagerank_mixing.graph_gen import Digraph, sample_dcm
from pagerank_mixing.neighborhood_explorer import (
    annulus,
    ball_is_tree,
    default_lambda_set,
    explore_out_tree,
    k_constant,
    kappa_bound,
    mu_lambda_decomposition,
    path_annulus_intersections,
    read_tree_nodes,
    singularity_diagnostic,
    tree_like_vertices,
    w_min,
    walk_in_tree_probability,
)
from pagerank_mixing.walk_engine import WalkParams, evolve, sample_walk_paths, srw_kernel, stationary_pagerank, tv


def adjacency_of(g):
    return [[int(y) for y in g.out_neighbors(x)] for x in range(g.n)]


def binary_tree_graph(depth):
    """Complete binary out-tree; node i points to 2i+1, 2i+2; leaves have no out-edges."""
    size = 2 ** (depth + 1) - 1
    return Digraph.from_adjacency([[2 * i + 1, 2 * i + 2] if 2 * i + 2 < size else [] for i in range(size)])


def test_thresholds():
    assert w_min(10**4, 0.3) == pytest.approx(1e4 ** -0.91)
    assert kappa_bound(10**4, 0.3) == pytest.approx(1e4**0.955)
    assert k_constant(3, 0.3) == pytest.approx(152.8, abs=0.05)
    assert math.ceil(k_constant(3, 0.3)) == 153


def test_regular_tree_like_gives_full_tree():
    n, d = 20_000, 3
    g = sample_dcm(regular_sequence(n, d), 12)
    t = 4
    assert t <= (1 - 0.1**2) * math.log(n) / math.log(d)
    z = next(z for z in range(n) if ball_is_tree(g, z, t))
    tree = explore_out_tree(g, z, t, 0.1)
    assert tree.size == sum(d**h for h in range(t + 1))
    for h, D in zip(tree.height, tree.denom):
        assert D == d**h
    assert tree.kappa == tree.size - 1


def test_hand_built_mixed_degrees_matches_enumeration():
    rng = np.random.default_rng(2024)
    seq, g = random_small_digraph(rng, 50, "DCM")
    adj = adjacency_of(g)
    eta = 0.3
    wm = w_min(50, eta)
    t = math.ceil(math.log2(1 / wm))  # no path longer than this can qualify
    for z in range(50):
        tree = explore_out_tree(g, z, t, eta, check_kappa=False)
        verts, edges = out_paths(adj, z, t, Fraction(wm))
        assert tree.vertex_set() == verts
        assert set(tree.revealed) == {int(g.indptr[x]) + i for x, i in edges}


def test_weight_law_exact():
    rng = np.random.default_rng(5)
    _, g = random_small_digraph(rng, 40, "OCM")
    tree = explore_out_tree(g, 0, 5, 0.2, check_kappa=False)
    for i in range(1, tree.size):
        w = Fraction(1)
        j = i
        while tree.parent[j] != -1:
            j = tree.parent[j]
            w /= int(g.out_degrees[tree.mark[j]])
        assert Fraction(1, tree.denom[i]) == w
        assert 1 / tree.denom[i] >= tree.w_min and tree.height[i] <= 5


def test_annulus_examples():
    g = binary_tree_graph(3)
    tree = explore_out_tree(g, 0, 3, 0.45, check_kappa=False)
    assert annulus(tree, 0) == {0}
    assert annulus(tree, 3) == set(range(7, 15))
    # regular graph: heaviest path = shortest qualifying path
    rng = np.random.default_rng(1)
    g = sample_dcm(regular_sequence(50, 2), 3)
    adj = adjacency_of(g)
    wm = Fraction(w_min(50, 0.2))
    tree = explore_out_tree(g, 4, 6, 0.2, check_kappa=False)
    for h in range(7):
        shorter = out_paths(adj, 4, h - 1, wm)[0] if h else set()
        assert annulus(tree, h) == out_paths(adj, 4, h, wm)[0] - shorter


def test_tree_file_roundtrip(tmp_path):
    g = binary_tree_graph(2)
    tree = explore_out_tree(g, 0, 2, 0.3, check_kappa=False)
    tree.write(tmp_path / "t.txt")
    rows = read_tree_nodes(tmp_path / "t.txt")
    assert [r[2] for r in rows] == tree.mark
    assert [r[1] for r in rows] == tree.parent
    assert [r[4] for r in rows] == list(tree.weights)


def test_walk_in_tree_is_one_on_tree_region():
    g = binary_tree_graph(5)
    tree = explore_out_tree(g, 0, 4, 0.45, check_kappa=False)
    assert walk_in_tree_probability(g, tree, 4) == 1.0


def test_walk_in_tree_against_sampled_walks():
    rng = np.random.default_rng(11)
    out = rng.integers(2, 5, size=10_000)
    seq = build_degree_sequence(out, rng.permutation(out), "DCM")
    g = sample_dcm(seq, 3)
    _, T_ent = entropic_time(seq)
    t = math.ceil(0.8 * T_ent)
    tree = explore_out_tree(g, 0, t, 0.3)
    p = walk_in_tree_probability(g, tree, t)
    walks = 100_000
    _, edges = sample_walk_paths(g, 0, t, walks, seed=9, return_edges=True)
    in_tree = np.isin(edges, np.fromiter(tree.tree_edges(), dtype=np.int64)).all(axis=1)
    emp = float(in_tree.mean())
    assert abs(emp - p) <= 3.5 * math.sqrt(max(p * (1 - p), 1e-12) / walks) + 1e-12
    assert 0 < p < 1


def test_decomposition():
    n = 20_000
    seq = regular_sequence(n, 3)
    g = sample_dcm(seq, 4)
    k = srw_kernel(g)
    _, T_ent = entropic_time(seq)
    alpha, eta, t = 1 / T_ent, 0.2, 2
    res = mu_lambda_decomposition(k, dirac(n, 7), alpha, t, eta, T_ent)
    cut = math.floor((1 - eta) * T_ent) - t
    assert res.cut == cut
    assert res.A == pytest.approx(sum(alpha * (1 - alpha) ** j for j in range(cut + 1)), rel=1e-12)
    assert abs(res.mu_lambda.sum() - 1) < 1e-12
    assert res.reconstruction_gap <= 1e-9
    with pytest.raises(EtaTooLarge):
        mu_lambda_decomposition(k, dirac(n, 7), alpha, math.floor((1 - 2 * eta) * T_ent) + 1, eta, T_ent)


def test_path_annulus_examples():
    # two disjoint binary trees
    a = binary_tree_graph(3)
    adj = adjacency_of(a)
    off = a.n
    both = Digraph.from_adjacency(adj + [[y + off for y in row] for row in adj])
    assert path_annulus_intersections(both, 0, off, 2, 3, 0.45, check_kappa=False) == 0
    assert path_annulus_intersections(a, 0, 0, 3, 3, 0.45, check_kappa=False) == 1


def test_tree_like_vertices():
    g = binary_tree_graph(4)
    assert np.array_equal(tree_like_vertices(g, 2), np.arange(g.n))
    loop = Digraph.from_adjacency([[0, 1], [2, 0], [1, 2]])
    assert 0 not in set(tree_like_vertices(loop, 2).tolist())
    assert not ball_is_tree(loop, 0, 1)


def test_singularity_against_dense():
    rng = np.random.default_rng(6)
    seq, g = random_small_digraph(rng, 40, "DCM")
    k = srw_kernel(g)
    lams = default_lambda_set(seq, [3, 9])
    res = singularity_diagnostic(k, 0.2, 3, lams, [0, 5, 11])
    P = k.dense()
    P3 = np.linalg.matrix_power(P, 3)
    vals = []
    for lam in lams.values():
        pi = np.linalg.solve((np.eye(40) - 0.8 * P).T, 0.2 * lam)
        vals += [0.5 * np.abs(P3[x] - pi @ P3).sum() for x in (0, 5, 11)]
    assert res.minimum == pytest.approx(min(vals), abs=1e-10)
    assert len(res.rows) == 3 * len(lams)


@st.composite
def explorations(draw):
    rng = np.random.default_rng(draw(st.integers(0, 2**32)))
    n = draw(st.integers(10, 60))
    _, g = random_small_digraph(rng, n, draw(st.sampled_from(["DCM", "OCM"])))
    return g, draw(st.integers(0, n - 1)), draw(st.integers(0, 8)), draw(st.floats(0.05, 0.45))


@given(explorations())
@settings(max_examples=150, deadline=None)
def test_property_tree_within_enumeration(case):
    g, z, t, eta = case
    tree = explore_out_tree(g, z, t, eta, check_kappa=False)
    wm = Fraction(tree.w_min)
    verts, edges = out_paths(adjacency_of(g), z, t, wm)
    assert tree.vertex_set() <= verts
    assert len(tree.mark) == len(set(tree.mark))
    assert all(Fraction(1, D) >= wm for D in tree.denom)
    if t >= math.log2(1 / tree.w_min):
        assert tree.vertex_set() == verts
        assert set(tree.revealed) == {int(g.indptr[x]) + i for x, i in edges}
