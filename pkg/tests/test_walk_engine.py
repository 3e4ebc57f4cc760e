import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_small_digraph
from oracles import dense_pagerank_kernel, dense_srw, pagerank_solve, stationary_solve
from pagerank_mixing.degree_model import dirac, regular_sequence, uniform
from pagerank_mixing.errors import AlphaZero, HorizonTooShort, InvariantViolation, LengthMismatch
from pagerank_mixing.graph_gen import Digraph, sample_dcm
from pagerank_mixing.walk_engine import (
    WalkParams,
    check_universal_bound,
    distance_profile,
    evolve,
    kernel_from_dense,
    mixing_time,
    mixing_time_bound,
    sample_pagerank_walks,
    sample_walk_paths,
    srw_kernel,
    stationary_pagerank,
    stationary_srw,
    teleport_identity_residuals,
    truncation_level,
    tv,
    verify_teleport_identity,
)


def test_kernel_examples(complete3):
    P = srw_kernel(complete3).dense()
    assert np.array_equal(P, np.array([[0, 0.5, 0.5], [0.5, 0, 0.5], [0.5, 0.5, 0]]))
    # vertex 0 with out-edges {1, 1, 2}; vertex 3 has no out-edges
    g = Digraph.from_adjacency([[1, 1, 2], [0, 2], [3, 0], []])
    P = srw_kernel(g).dense()
    assert P[0, 1] == pytest.approx(2 / 3) and P[0, 2] == pytest.approx(1 / 3)
    assert P[3, 3] == 1.0
    assert np.allclose(P, dense_srw([[1, 1, 2], [0, 2], [3, 0], []]), atol=1e-15)


def test_evolve_examples(complete3):
    k = srw_kernel(complete3)
    mu = np.array([0.2, 0.3, 0.5])
    assert np.array_equal(evolve(mu, k, 0), mu)
    assert np.allclose(evolve(dirac(3, 0), k, 1), [0, 0.5, 0.5])
    params = WalkParams(0.3, dirac(3, 2))
    assert np.array_equal(evolve(mu, k, 4, params, alpha_one=True), dirac(3, 2))
    with pytest.raises(LengthMismatch):
        evolve(np.ones(4) / 4, k, 1)
    with pytest.raises(ValueError):
        WalkParams(1.0, uniform(3))


def test_stationary_examples(complete3):
    k = srw_kernel(complete3)
    assert np.allclose(stationary_srw(k), 1 / 3, atol=1e-12)
    two = kernel_from_dense([[0.5, 0.5], [1.0, 0.0]])
    assert np.allclose(stationary_srw(two), [2 / 3, 1 / 3], atol=1e-11)
    pr = stationary_pagerank(k, WalkParams(0.5, dirac(3, 0)))
    assert np.allclose(pr, [0.6, 0.2, 0.2], atol=1e-12)
    with pytest.raises(AlphaZero):
        stationary_pagerank(k, WalkParams(0.0, uniform(3)))


def test_pagerank_of_pi0_is_pi0():
    # non-uniform pi0 via a non-regular graph
    rng = np.random.default_rng(1)
    seq, g = random_small_digraph(rng, 120, "OCM")
    k = srw_kernel(g)
    pi0 = stationary_srw(k, tol=1e-14)
    assert tv(pi0, stationary_solve(k.dense())) <= 1e-9
    for a in (0.05, 0.3, 0.8):
        assert tv(stationary_pagerank(k, WalkParams(a, pi0)), pi0) <= 1e-9


def test_tv_examples():
    assert tv([0.3, 0.7], [0.3, 0.7]) == 0.0
    assert tv([1, 0, 0], [0, 0.5, 0.5]) == 1.0
    assert tv([1, 0], [0.5, 0.5]) == 0.5


def test_mixing_time_examples(complete3):
    k = srw_kernel(complete3)
    prof = distance_profile(k, WalkParams(0.0, uniform(3)), 0, range(6))
    assert prof.value_at(0) == pytest.approx(2 / 3) and prof.value_at(1) == pytest.approx(1 / 3)
    assert mixing_time(prof, 0.4) == 1
    assert mixing_time(prof, 0.7) == 0
    with pytest.raises(HorizonTooShort):
        mixing_time(distance_profile(k, WalkParams(0.0, uniform(3)), 0, [0, 1]), 0.01)


def test_universal_bound_is_enforced():
    with pytest.raises(InvariantViolation):
        check_universal_bound(np.array([0.5, 0.6]), np.array([0, 1]), 0.5)


def test_truncation_level_and_doubling():
    assert truncation_level(0.5, 1e-3) == 10
    rng = np.random.default_rng(3)
    _, g = random_small_digraph(rng, 80, "DCM")
    k = srw_kernel(g)
    for a in (0.05, 0.2, 0.6):
        p = WalkParams(a, rng.dirichlet(np.ones(80)))
        K = truncation_level(a, 1e-4)
        gap = tv(stationary_pagerank(k, p, terms=K), stationary_pagerank(k, p, terms=2 * K))
        assert gap <= (1 - a) ** (K + 1)


def test_teleport_identity_examples():
    rng = np.random.default_rng(4)
    _, g = random_small_digraph(rng, 60, "DCM")
    k = srw_kernel(g)
    p = WalkParams(0.2, rng.dirichlet(np.ones(60)))
    pi = stationary_pagerank(k, p)
    left, right = teleport_identity_residuals(k, p, 3, 0, pi)
    assert left[0] == right[0] == tv(dirac(60, 3), pi)
    pi0 = stationary_srw(k, tol=1e-14)
    q = WalkParams(0.2, pi0)
    left, _ = teleport_identity_residuals(k, q, 5, 20, pi0)
    walk = dirac(60, 5)
    for t in range(21):
        assert left[t] == pytest.approx(0.8**t * tv(walk, pi0), abs=1e-10)
        walk = k.step(walk)
    assert verify_teleport_identity(k, p, 7, 30) <= 1e-10


def test_threads_and_batching_bit_identical():
    g = sample_dcm(regular_sequence(5000, 3), 8)
    k1, k4 = srw_kernel(g, 1), srw_kernel(g, 4)
    rng = np.random.default_rng(0)
    M = rng.dirichlet(np.ones(5000), size=6).T
    a, b = k1.step(M), k4.step(M)
    assert a.tobytes() == b.tobytes()
    for j in range(6):
        assert k1.step(np.ascontiguousarray(M[:, j])).tobytes() == np.ascontiguousarray(a[:, j]).tobytes()
    p = WalkParams(0.1, uniform(5000))
    P1 = distance_profile(k1, p, [0, 1, 2], range(10))
    P4 = distance_profile(k4, p, [0, 1, 2], range(10), batch=1)
    assert P1.per_start.tobytes() == P4.per_start.tobytes()


def test_profile_bound_and_mixing_bound():
    g = sample_dcm(regular_sequence(3000, 2), 2)
    k = srw_kernel(g)
    for a in (0.05, 0.2):
        prof = distance_profile(k, WalkParams(a, uniform(3000)), [0, 17], range(80))
        assert np.all(prof.values <= (1 - a) ** prof.times + 1e-12)
        for eps in (0.25, 0.5, 0.75):
            assert mixing_time(prof, eps) <= mixing_time_bound(a, eps) <= math.ceil(math.log(1 / eps) / a)


def test_geometric_teleport_law():
    g = sample_dcm(regular_sequence(200, 3), 1)
    a, t, walks = 0.15, 12, 50_000
    _, first = sample_pagerank_walks(g, WalkParams(a, uniform(200)), 0, t, walks, seed=77)
    for s in range(t + 1):
        p = (1 - a) ** s
        emp = float(np.mean(first > s))
        assert abs(emp - p) <= 3 * math.sqrt(p * (1 - p) / walks) + 1e-12


def test_walk_sampler_matches_evolution():
    g = sample_dcm(regular_sequence(30, 2), 6)
    k = srw_kernel(g)
    paths = sample_walk_paths(g, 4, 5, 40_000, seed=5)
    emp = np.bincount(paths[:, -1], minlength=30) / 40_000
    exact = evolve(dirac(30, 4), k, 5)
    assert np.all(np.abs(emp - exact) <= 3.5 * np.sqrt(exact * (1 - exact) / 40_000) + 1e-12)


@st.composite
def instances(draw):
    seed = draw(st.integers(0, 2**32))
    rng = np.random.default_rng(seed)
    n = draw(st.integers(5, 60))
    model = draw(st.sampled_from(["DCM", "OCM"]))
    _, g = random_small_digraph(rng, n, model)
    alpha = draw(st.floats(0.01, 0.9))
    kind = draw(st.sampled_from(["uniform", "dirac", "random"]))
    lam = {"uniform": uniform(n), "dirac": dirac(n, int(rng.integers(n))), "random": rng.dirichlet(np.ones(n))}[kind]
    return g, alpha, lam, rng


@given(instances())
@settings(max_examples=60, deadline=None)
def test_property_series_matches_dense_solve(inst):
    g, a, lam, _ = inst
    k = srw_kernel(g)
    P = dense_srw([list(map(int, r)) for r in g.out_adjacency])
    assert tv(stationary_pagerank(k, WalkParams(a, lam)), pagerank_solve(P, a, lam)) <= 1e-10


@given(instances())
@settings(max_examples=40, deadline=None)
def test_property_evolution_matches_dense_power(inst):
    g, a, lam, rng = inst
    k = srw_kernel(g)
    P = dense_srw([list(map(int, r)) for r in g.out_adjacency])
    K = dense_pagerank_kernel(P, a, lam)
    mu = rng.dirichlet(np.ones(g.n))
    nu = mu.copy()
    for t in range(1, 15):
        nu = nu @ K
        got = evolve(mu, k, t, WalkParams(a, lam))
        assert abs(got.sum() - 1) <= g.n * 1e-15 + 1e-13
        assert np.allclose(got, nu, atol=1e-12)


@given(instances())
@settings(max_examples=40, deadline=None)
def test_property_tv_contraction_and_triangle(inst):
    g, a, lam, rng = inst
    k = srw_kernel(g)
    mu, nu = rng.dirichlet(np.ones(g.n)), rng.dirichlet(np.ones(g.n))
    prev = tv(mu, nu)
    for _ in range(20):
        mu, nu = k.step(mu), k.step(nu)
        cur = tv(mu, nu)
        assert cur <= prev + 1e-14
        prev = cur
    # |D_{a,lam}(t) - D_{a,pi0}(t)| <= ||pi_{a,lam} - pi0||
    try:
        pi0 = stationary_srw(k, tol=1e-13, max_sweeps=20_000)
    except Exception:
        return
    if tv(pi0, k.step(pi0)) > 1e-12:
        return
    x = int(rng.integers(g.n))
    pl = distance_profile(k, WalkParams(a, lam), x, range(25))
    pz = distance_profile(k, WalkParams(a, pi0), x, range(25), pi=pi0)
    gap = tv(stationary_pagerank(k, WalkParams(a, lam)), pi0)
    assert np.all(np.abs(pl.values - pz.values) <= gap + 1e-10)
