import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import ocm_delta0_second_moment
from pagerank_mixing.degree_model import (
    Model,
    build_degree_sequence,
    dirac,
    entropic_time,
    gamma_lambda,
    limit_mixing_time,
    limit_profile,
    load_degree_sequence,
    mu_in,
    regular_sequence,
    rho_and_C,
    save_degree_sequence,
    theta,
    uniform,
    widespread_report,
)
from pagerank_mixing.errors import DiscontinuityPoint, MinDegree, MissingInDegrees, SumMismatch


def test_regular_dcm_constants():
    seq = regular_sequence(1000, 3)
    assert (seq.n, seq.m, seq.delta, seq.mean_degree) == (1000, 3000, 3, 3.0)


def test_build_errors():
    with pytest.raises(SumMismatch):
        build_degree_sequence([2, 3], [3, 3], "DCM")
    for model in ("DCM", "OCM"):
        with pytest.raises(MinDegree):
            build_degree_sequence([1, 2, 2, 2], [2, 2, 2, 1] if model == "DCM" else None, model)
    with pytest.raises(MissingInDegrees):
        build_degree_sequence([2, 2], None, "DCM")


def test_mu_in_examples():
    seq = build_degree_sequence([3, 3, 3, 3], [2, 4, 2, 4], "DCM")
    assert np.allclose(mu_in(seq), [1 / 6, 1 / 3, 1 / 6, 1 / 3])
    ocm = build_degree_sequence([2, 3, 4, 2, 5], None, "OCM")
    assert np.allclose(mu_in(ocm), 0.2)
    assert np.allclose(mu_in(regular_sequence(7, 4)), 1 / 7)


def test_entropic_time_examples():
    H, T = entropic_time(regular_sequence(1000, 3))
    assert H == pytest.approx(math.log(3), abs=1e-12)
    assert T == pytest.approx(6.2877, abs=1e-4)
    assert entropic_time(regular_sequence(1024, 2))[1] == pytest.approx(10.0, abs=1e-12)


def test_widespread_examples():
    r = widespread_report(uniform(10_000), delta=0.4, c1=1, c2=1)
    assert r.pass_i and r.pass_ii and r.ell2_statistic == 0.0
    assert not widespread_report(dirac(50, 3)).pass_i
    n = 10_000
    k = math.ceil(n**0.6)
    lam = np.zeros(n)
    lam[:k] = 1.0 / k
    r = widespread_report(lam, delta=0.1, c1=1, c2=10)
    assert r.pass_i and not r.pass_ii
    # hand value: (k (n/k - 1)^2 + (n - k)) / n with k = 252
    assert k == 252
    assert r.ell2_statistic == pytest.approx((k * (n / k - 1) ** 2 + (n - k)) / n, rel=1e-12)
    assert r.ell2_statistic == pytest.approx(38.6825, abs=1e-4)


def test_limit_profile_examples():
    assert limit_profile(0, 0.5) == 1.0 and limit_profile(0, 1.5) == 0.0
    assert limit_profile(1, 0.5) == pytest.approx(0.60653, abs=1e-5)
    assert limit_profile(1, 1.5) == 0.0
    assert limit_profile(math.inf, 0.7) == pytest.approx(0.49659, abs=1e-5)
    with pytest.raises(DiscontinuityPoint):
        limit_profile(0, 1.0)
    with pytest.raises(DiscontinuityPoint):
        limit_profile(2.0, 2.0)
    with pytest.raises(DiscontinuityPoint):
        theta(1)


def test_limit_mixing_time_examples():
    assert limit_mixing_time(2, 0.5) == (pytest.approx(0.34657, abs=1e-5), "T_ent")
    assert limit_mixing_time(2, 0.1) == (1.0, "T_ent")
    assert limit_mixing_time(math.inf, 0.1) == (pytest.approx(2.30259, abs=1e-5), "1/alpha")
    assert limit_mixing_time(0, 0.3) == (1.0, "T_ent")


def test_rho_and_C_examples():
    rho, C = rho_and_C(regular_sequence(100, 4))
    assert rho == pytest.approx(0.25) and C == 0.0
    rho, C = rho_and_C(regular_sequence(1000, 3, "OCM"))
    assert rho == pytest.approx(1 / 3)
    assert C == pytest.approx((1 / 3 - 1e-3) / (2 / 3), rel=1e-12)
    assert C == pytest.approx(0.49850, abs=1e-5)


def test_ocm_C_against_enumeration():
    # E[Delta_0^2] = C (1 - rho) for a uniform root; OCM root mark is irrelevant
    d = [2, 3, 2, 4, 3, 2, 5, 2]
    seq = build_degree_sequence(d, None, "OCM")
    rho, C = rho_and_C(seq)
    assert float(ocm_delta0_second_moment(d)) == pytest.approx(C * (1 - rho), rel=1e-12)


def test_gamma_lambda_examples():
    seq = regular_sequence(40, 3, "OCM")
    assert gamma_lambda(mu_in(seq), seq) == 0.0
    assert gamma_lambda(uniform(40), seq) == 0.0
    n = 40
    direct = 0.5 * n * sum((float(j == 1) - 1 / n) ** 2 for j in range(n))
    assert gamma_lambda(dirac(n, 1), seq) == pytest.approx(direct, rel=1e-12)
    assert gamma_lambda(dirac(n, 1), seq) == pytest.approx((n - 1) / 2, rel=1e-12)


def test_degree_file_roundtrip(tmp_path):
    seq = build_degree_sequence([2, 3, 4], [3, 4, 2], "DCM")
    save_degree_sequence(seq, tmp_path / "d.txt")
    back = load_degree_sequence(tmp_path / "d.txt")
    assert back.model is Model.DCM
    assert np.array_equal(back.out_degrees, seq.out_degrees)
    assert np.array_equal(back.in_degrees, seq.in_degrees)


degrees = st.lists(st.integers(2, 9), min_size=2, max_size=40)


@given(degrees, st.randoms(use_true_random=False))
@settings(max_examples=100, deadline=None)
def test_property_entropy_and_rho(out, rnd):
    ins = list(out)
    rnd.shuffle(ins)
    # OCM needs d+ <= n
    ocm = build_degree_sequence([min(d, len(out)) for d in out], None, "OCM")
    for seq in (build_degree_sequence(out, ins, "DCM"), ocm):
        H, T = entropic_time(seq)
        assert H >= math.log(2) - 1e-12
        assert T <= math.log2(seq.n) + 1e-9
        rho, C = rho_and_C(seq)
        assert rho <= 0.5 + 1e-15
        assert C >= 0
        assert seq.delta == max(seq.out_degrees.max(), max(ins) if seq.model is Model.DCM else 0)
        assert seq.mean_degree == pytest.approx(seq.out_degrees.mean())


@given(degrees, st.integers(0, 10**6))
@settings(max_examples=100, deadline=None)
def test_property_gamma_zero_iff_mu_in(out, s):
    ins = list(np.random.default_rng(s).permutation(out))
    seq = build_degree_sequence(out, ins, "DCM")
    mu = mu_in(seq)
    assert gamma_lambda(mu, seq) == 0.0
    lam = np.random.default_rng(s).random(seq.n) + 0.01
    lam /= lam.sum()
    assert (gamma_lambda(lam, seq) == 0.0) == bool(np.array_equal(lam, mu))


@given(st.sampled_from([0.0, 0.5, 1.0, 3.0, math.inf]), st.lists(st.floats(0.01, 5.0), min_size=2, max_size=10))
def test_property_limit_profile_monotone(gamma, ss):
    ss = sorted(s for s in ss if s != 1.0 and s != gamma)
    vals = [limit_profile(gamma, s) for s in ss]
    assert all(a >= b for a, b in zip(vals, vals[1:]))


@given(st.sampled_from([0.0, 0.5, 2.0, math.inf]), st.lists(st.floats(0.001, 0.999), min_size=2, max_size=10))
def test_property_limit_mixing_monotone(gamma, eps):
    eps = sorted(eps)
    vals = [limit_mixing_time(gamma, e)[0] for e in eps]
    assert all(a >= b - 1e-15 for a, b in zip(vals, vals[1:]))


@given(st.integers(2, 5000), st.floats(0.01, 0.5), st.floats(1.0, 10.0), st.floats(1e-6, 10.0))
def test_property_uniform_is_widespread(n, delta, c1, c2):
    r = widespread_report(uniform(n), delta, c1, c2)
    assert r.pass_i == (r.max_mass <= r.max_bound)
    assert r.pass_ii == (r.ell2_statistic <= c2)
    assert r.widespread
