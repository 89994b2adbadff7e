import itertools

import numpy as np
import pytest

from cspsketch.alpha import (
    alpha_numeric,
    alpha_prime,
    beta_sk,
    closed_form_alpha,
    ex_mid_alpha,
    ex_mid_p,
    family_spec,
    maxmin_lower,
    positive_root,
    region_vertices,
    simplex_lattice,
    support2_search,
    three_and_proxy_ratio,
    uniqueness_scan_3and,
    verify_max_min,
    P1,
    P3,
)
from cspsketch.errors import InvalidWitnessError, ValidationError
from cspsketch.predicates import (
    SymmetricDist,
    beta,
    epsilons,
    exact_weight,
    gamma_curve,
    kand,
    lam,
    make_predicate,
    mu,
    threshold,
)


def test_alpha_prime_exact_values():
    assert alpha_prime(3) == pytest.approx(2 / 9, abs=1e-16)
    assert alpha_prime(5) == pytest.approx(2**-4 * (24 / 25) ** 2, abs=1e-16)
    with pytest.raises(ValidationError):
        alpha_prime(4)


@pytest.mark.parametrize("spec,expected", [
    (kand(2), 4 / 9),
    (kand(3), 2 / 9),
    (kand(4), 2 * 2**-4 * (24 / 25) ** 2),
    (threshold(3, 4), 4 / 9),
    (make_predicate(3, {2, 3}), 0.5 + np.sqrt(3) / 18),
    (make_predicate(2, {1, 2}), 0.75),
])
def test_closed_form_values(spec, expected):
    cf = closed_form_alpha(spec)
    assert cf is not None
    assert cf.alpha == pytest.approx(expected, abs=1e-12)


def test_closed_form_3and_witness():
    cf = closed_form_alpha(kand(3))
    assert cf.dist.tolist() == [0, 0, 1, 0]
    assert cf.p_star == pytest.approx(2 / 3)


def test_closed_form_absent_for_uncatalogued():
    assert closed_form_alpha(exact_weight(3, 4)) is None
    assert closed_form_alpha(make_predicate(6, {4, 5, 6})) is None


def test_mirrored_predicate_shares_alpha():
    a = closed_form_alpha(make_predicate(3, {0}))
    b = closed_form_alpha(kand(3))
    assert a.alpha == pytest.approx(b.alpha)
    assert a.dist.tolist() == b.dist.tolist()[::-1]


def test_table_roots():
    assert 8 * positive_root(P1) == pytest.approx(0.2831, abs=1e-4)
    assert 8 * positive_root(P3) == pytest.approx(0.2394, abs=1e-4)


def test_family_spec():
    assert family_spec("kand", 4).S == frozenset({4})
    assert family_spec("th-k-1", 6).S == frozenset({5, 6})
    assert family_spec("ex-mid", 5).S == frozenset({3})
    for fam, k in (("th-k-1", 5), ("ex-mid", 4), ("nope", 3)):
        with pytest.raises(ValidationError):
            family_spec(fam, k)


# --- max-min certification


def test_verify_3and():
    cert = verify_max_min(kand(3), (0, 0, 1, 0), 2 / 3)
    assert cert.verified and cert.method == "max_min_verified"
    assert cert.alpha == pytest.approx(2 / 9, abs=1e-12)
    assert all(v.lhs >= v.rhs - 1e-9 for v in cert.vertex_report)


def test_verify_th34():
    cert = verify_max_min(threshold(3, 4), (0, 0, 4 / 5, 1 / 5, 0), 0.5 + 1 / 6)
    assert cert.verified
    assert cert.alpha == pytest.approx(4 / 9, abs=1e-12)


def test_verify_rejects_suboptimal_witness():
    cert = verify_max_min(make_predicate(4, {3}), (0.25, 0, 0, 0, 0.75), beta(make_predicate(4, {3}), (0.25, 0, 0, 0, 0.75))[1])
    assert not cert.verified
    assert 0.3209 - 1e-3 <= cert.notes["lower_bound"] <= cert.notes["upper_bound"] <= 0.3295 + 1e-3


def test_verify_rejects_wrong_p():
    assert not verify_max_min(kand(3), (0, 0, 1, 0), 0.6).verified


def test_verify_errors():
    with pytest.raises(ValidationError):
        verify_max_min(kand(3), (0, 1, 0), 0.5)
    with pytest.raises(InvalidWitnessError):
        verify_max_min(kand(3), (1, 0, 0, 0), 0.5)


def test_kand_vertex_inequalities_match_closed_form_shape():
    # odd k: lambda(D_i, p*)/alpha = (1/2)(k-1) r^(i-(k-1)/2) vs i, with r = (k+1)/(k-1)
    k = 5
    cf = closed_form_alpha(kand(k))
    r = (k + 1) / (k - 1)
    for i in range(1, k + 1):
        m = np.zeros(k + 1)
        m[i] = 1
        lhs = lam(kand(k), m, cf.p_star) / cf.alpha
        rhs = gamma_curve(kand(k), mu(m))
        assert (lhs >= rhs - 1e-12) == (0.5 * (k - 1) * r ** (i - (k - 1) / 2) >= i - 1e-12)


def test_region_vertices_are_distributions_on_knees():
    spec = make_predicate(5, {3, 4})
    for _, v in region_vertices(spec):
        assert v.masses.min() >= 0 and v.masses.sum() == pytest.approx(1.0)
        assert int((v.masses > 0).sum()) in (1, 2)


def test_maxmin_lower_never_exceeds_alpha():
    for spec in (kand(3), threshold(3, 4), make_predicate(5, {4, 5})):
        a = closed_form_alpha(spec).alpha
        for p in np.linspace(0, 1, 11):
            assert maxmin_lower(spec, p) <= a + 1e-9


# --- numeric alpha


def test_beta_sk_against_lattice_oracle():
    # inf of beta_S over lattice points of Delta_3 with marginal near mu
    spec = kand(3)
    pts = simplex_lattice(4, 40)
    mus = pts @ epsilons(3)
    ps = np.linspace(0, 1, 401)
    from cspsketch.predicates import lam_grid
    betas = lam_grid(spec, pts, ps).max(axis=1)
    for m in (-0.5, 0.0, 1 / 3, 0.6):
        sel = np.abs(mus - m) <= 1e-9
        if sel.any():
            assert beta_sk(spec, m).value <= betas[sel].min() + 1e-5  # p-grid spacing 1/400
            assert beta_sk(spec, m).value >= betas[np.abs(mus - m) <= 0.05].min() - 1e-3


@pytest.mark.parametrize("spec,expected", [(kand(2), 4 / 9), (kand(3), 2 / 9), (make_predicate(5, {4}), 0.2394)])
def test_alpha_numeric_examples(spec, expected):
    cert = alpha_numeric(spec, grid=200)
    assert cert.method == "numeric_only" and not cert.verified
    assert cert.alpha == pytest.approx(expected, abs=1e-3)
    assert cert.alpha <= 2 * spec.rho + 1e-6


def test_alpha_numeric_threads_deterministic():
    spec = make_predicate(3, {2, 3})
    a = alpha_numeric(spec, grid=40, threads=1)
    b = alpha_numeric(spec, grid=40, threads=3)
    assert a.alpha == b.alpha and a.notes["scan"] == b.notes["scan"]


def test_alpha_numeric_records_skipped_samples():
    cert = alpha_numeric(kand(2), grid=20)
    assert -1.0 in cert.notes["skipped_mu"]


@pytest.mark.parametrize("spec", [kand(3), make_predicate(4, {3}), make_predicate(5, {3, 5})])
def test_maxmin_inequality_and_support2_consistency(spec):
    a = alpha_numeric(spec, grid=100).alpha
    for p in np.linspace(0, 1, 7):
        assert maxmin_lower(spec, p) <= a + 1e-6
    s2 = support2_search(spec, resolution=200)
    assert s2.upper >= a - 1e-6
    assert s2.lower <= s2.upper + 1e-9


def test_certified_alpha_agrees_with_numeric():
    for spec in (kand(5), threshold(5, 6), exact_weight(3, 5)):
        cf = closed_form_alpha(spec)
        cert = verify_max_min(spec, cf.dist, cf.p_star)
        assert cert.verified
        assert abs(alpha_numeric(spec, grid=100).alpha - cert.alpha) <= 2e-3


def test_trivial_bound_over_many_predicates():
    for k in range(2, 5):
        for r in range(1, k + 2):
            for S in itertools.combinations(range(k + 1), r):
                spec = make_predicate(k, S)
                assert alpha_numeric(spec, grid=10, refine_iters=0).alpha <= 2 * spec.rho + 1e-6


def test_kand_ratio_to_trivial_bound_monotone():
    vals = [closed_form_alpha(kand(k)).alpha / 2.0 ** -(k - 1) for k in range(2, 16)]
    assert all(b >= a - 1e-15 for a, b in zip(vals, vals[1:]))
    assert vals[-1] > 0.95


def test_ex_mid_ratio_approaches_rho():
    from math import comb
    r = [ex_mid_alpha(k) / (comb(k, (k + 1) // 2) / 2**k) for k in range(3, 53, 2)]
    assert all(x > 1 for x in r)
    assert all(b < a for a, b in zip(r, r[1:]))
    assert p_in_range(ex_mid_p(51))


def p_in_range(p):
    return 0.5 < p < 1


# --- support-2 search


def test_support2_3and():
    r = support2_search(kand(3), resolution=200)
    assert r.dist.tolist() == pytest.approx([0, 0, 1, 0], abs=1e-6)
    assert r.lower == pytest.approx(2 / 9, abs=1e-4) and r.upper == pytest.approx(2 / 9, abs=1e-4)


@pytest.mark.parametrize("S,k,dist,lo,hi", [
    ({3}, 4, (0.25, 0, 0, 0, 0.75), 0.3209, 0.3295),
    ({3, 5}, 5, (0.25, 0, 0, 0, 0.75, 0), 0.3416, 0.3635),
])
def test_support2_brackets(S, k, dist, lo, hi):
    r = support2_search(make_predicate(k, S), dist=dist)
    assert lo - 1e-3 <= r.lower <= r.upper <= hi + 1e-3
    assert not r.verified


def test_support2_validation():
    with pytest.raises(ValidationError):
        support2_search(kand(3), resolution=50)


# --- 3AND uniqueness


def test_proxy_ratio_points():
    assert three_and_proxy_ratio(np.array([0, 0, 1, 0.0]))[0] == pytest.approx(2 / 9)
    assert three_and_proxy_ratio(np.array([0, 0, 0, 1.0]))[0] == pytest.approx(1.0)


def test_simplex_lattice_counts():
    assert len(simplex_lattice(4, 10)) == 286
    assert len(simplex_lattice(3, 10)) == 66
    assert np.allclose(simplex_lattice(4, 7).sum(axis=1), 1)


def test_uniqueness_scan_small_grid():
    rep = uniqueness_scan_3and(grid=100)
    assert rep["min"] == pytest.approx(2 / 9, abs=1e-9)
    assert rep["argmin"] == [0, 0, 1, 0]
    assert rep["margin"] > 0
    rep2 = uniqueness_scan_3and(grid=100, threads=3)
    assert rep2["min"] == rep["min"] and rep2["margin"] == rep["margin"]
