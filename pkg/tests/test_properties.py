"""Property tests for the invariants each module promises."""

import json
import math

import mpmath
import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from tamepairs.cli import dumps
from tamepairs.intmaps import MonotoneIntMap
from tamepairs.operators import (QuasiDiagonalOperator, build_embedding_triple,
                                 continuity_characteristic, qd_norm)
from tamepairs.ratio_analysis import check_piszczek, estimate_limit_points
from tamepairs.sequences import analytic_stability, check_stability, merge, parse_sequence
from tamepairs.spaces import FiniteVector, GradedSpace, log_lp, vector_norm
from tamepairs.verdicts import Verdict3
from tamepairs.witnesses import (FailureCertificate, InfiniteTypeWitness, build_infinite_type_witness,
                                 search_tameness_failure)

P = parse_sequence

affine = st.builds(lambda a, b: f"{a}*n+{b}", st.integers(1, 5), st.integers(0, 5))
power = st.builds(lambda p: f"n^{p}", st.sampled_from(["0.5", "1", "1.5", "2", "3"]))
geometric = st.builds(lambda q: f"{q}^n", st.sampled_from(["1.5", "2", "3"]))
logs = st.builds(lambda c: f"ln(n+{c})", st.integers(1, 4))
descriptors = st.one_of(affine, power, geometric, logs, st.just("n!"), st.just("exp(n^2)"))
polynomial = st.one_of(affine, power, logs)


@given(descriptors)
def test_sequences_monotone_positive(text):
    seq = P(text)
    logv = seq.log_values(60)
    assert np.all(np.diff(logv) >= 0)
    assert np.all(np.isfinite(logv))


@given(polynomial, polynomial, st.integers(5, 200))
def test_merge_complete_and_embedded(a, b, depth):
    left, right = P(a), P(b)
    m = merge(left, right, depth)
    g = m.gamma.values(2 * depth)
    assert np.all(np.diff(g) >= 0)
    assert sorted(m.t + m.s) == list(range(1, 2 * depth + 1))
    assert all(x < y for x, y in zip(m.t, m.t[1:]))
    assert all(x < y for x, y in zip(m.s, m.s[1:]))
    # bit-equal placement
    assert np.array_equal(g[np.array(m.t) - 1], left.values(depth))
    assert np.array_equal(g[np.array(m.s) - 1], right.values(depth))


@given(descriptors)
def test_stability_report_consistent(text):
    seq = P(text)
    rep = check_stability(seq, 400)
    assert rep.sup_ratio_observed >= 1
    rule = analytic_stability(seq)
    if rule is not None:
        assert rep.analytic
        assert rep.verdict.value is not Verdict3.INCONCLUSIVE
        if math.isfinite(rule[1]):
            assert rep.sup_ratio_observed <= rule[1] * (1 + 1e-9)


@given(polynomial, st.integers(1, 8), st.integers(1, 8), st.integers(1, 200))
def test_basis_norm_independent_of_p(text, k, _, n):
    space = GradedSpace.infinite(P(text))
    e = FiniteVector.basis(n)
    vals = [vector_norm(space, e, k, p) for p in (1, 2, math.inf)]
    assert vals[0] == pytest.approx(vals[1], abs=1e-12) == pytest.approx(vals[2], abs=1e-12)


@given(polynomial, st.dictionaries(st.integers(1, 40), st.floats(0.1, 10), min_size=1, max_size=6),
       st.integers(1, 6))
def test_norm_grade_monotone_and_logsumexp(text, coeffs, k):
    for make in (GradedSpace.infinite, GradedSpace.finite):
        space = make(P(text))
        x = FiniteVector.from_dict(coeffs)
        a, b = vector_norm(space, x, k), vector_norm(space, x, k + 1)
        assert b >= a - 1e-12
        plain = mpmath.fsum(abs(c) * mpmath.exp(space.log_weight(j, k)) for j, c in coeffs.items())
        assert a == pytest.approx(float(mpmath.log(plain)), rel=1e-12, abs=1e-12)


@given(st.lists(st.floats(-50, 50), min_size=1, max_size=20))
def test_log_lp_matches_plain_sums(terms):
    assert log_lp(terms, 1) == pytest.approx(math.log(sum(math.exp(t) for t in terms)), abs=1e-9)
    assert log_lp(terms, math.inf) == max(terms)


@given(polynomial)
def test_self_ratio_has_limit_point_one(text):
    seq = P(text)
    est = estimate_limit_points(seq, seq, depth=400)
    assert any(abs(c.center - 1) <= est.cluster_eps for c in est.clusters)


@given(st.sampled_from([("n", "n^2"), ("n", "2*n"), ("n^2", "n"), ("2*n", "n")]),
       st.floats(2, 20), st.floats(1.1, 3))
def test_cutoff_monotone(pair, c1, factor):
    beta, alpha = P(pair[0]), P(pair[1])
    lo = estimate_limit_points(beta, alpha, depth=300, cutoff=c1, cluster_eps=1e-2)
    hi = estimate_limit_points(beta, alpha, depth=300, cutoff=c1 * factor, cluster_eps=1e-2)
    for c in lo.clusters:
        if c.hi < c1 - 1e-2:
            assert any(abs(c.center - d.center) <= 1e-2 for d in hi.clusters)


@given(st.sampled_from(["n", "k^2", "2^k"]), st.integers(1, 3))
def test_piszczek_constants_non_decreasing(phi, m):
    A = GradedSpace.finite(P("n"))
    run = check_piszczek(A, A, MonotoneIntMap.parse("2*k"), MonotoneIntMap.parse(phi.replace("n", "k")),
                         m, [10, 40, 80], 4)
    logs = [c for _, _, c in run.constants]
    assert logs == sorted(logs)


def _random_operator(rng, space, depth, size):
    src = np.sort(rng.choice(np.arange(1, depth + 1), size=size, replace=False))
    tgt = rng.choice(np.arange(1, depth + 1), size=size, replace=False)
    logt = rng.uniform(-5, 5, size)
    return QuasiDiagonalOperator(src, tgt, logt, space, space)


@given(st.integers(0, 2**32 - 1), st.sampled_from(["n", "n^2", "ln(n+1)"]),
       st.integers(1, 6), st.integers(1, 6))
def test_qd_norm_grade_monotone(seed, text, k, r):
    rng = np.random.default_rng(seed)
    space = GradedSpace.infinite(P(text))
    T = _random_operator(rng, space, 80, 15)
    v = qd_norm(T, k, r)
    assert qd_norm(T, k, r + 1) <= v + 1e-12
    assert qd_norm(T, k + 1, r) >= v - 1e-12


@given(st.integers(0, 2**32 - 1), st.floats(-10, 10))
def test_scalar_shift(seed, log_c):
    rng = np.random.default_rng(seed)
    space = GradedSpace.infinite(P("n"))
    T = _random_operator(rng, space, 60, 10)
    for k, r in ((1, 1), (2, 5), (4, 2)):
        assert qd_norm(T.scaled(log_c), k, r) == pytest.approx(qd_norm(T, k, r) + log_c, abs=1e-9)
    p1 = continuity_characteristic(T, 3, 12)
    p2 = continuity_characteristic(T.scaled(log_c), 3, 12)
    assert [g.pi for g in p1.grades] == [g.pi for g in p2.grades]


@given(st.integers(0, 2**32 - 1), st.sampled_from([("n", "n^2"), ("n", "2*n"), ("ln(n+1)", "n")]),
       st.sampled_from(["finite", "infinite"]), st.integers(1, 4), st.integers(1, 4))
def test_conjugate_composition_bound(seed, pair, kind, k, r):
    rng = np.random.default_rng(seed)
    alpha, beta = P(pair[0]), P(pair[1])
    depth = 50
    trip = build_embedding_triple(alpha, beta, kind, depth)
    src = np.sort(rng.choice(np.arange(1, depth + 1), size=10, replace=False))
    tgt = rng.choice(np.arange(1, depth + 1), size=10, replace=False)
    T = QuasiDiagonalOperator(src, tgt, rng.uniform(-3, 3, 10), trip.alpha_space, trip.beta_space)
    R = trip.conjugate(T)
    assert qd_norm(R, k, r) <= qd_norm(T, k, r) + 1e-9


@given(st.integers(0, 2**32 - 1), st.sampled_from(["finite", "infinite"]), st.integers(1, 5))
def test_triple_norm_identities(seed, kind, k):
    rng = np.random.default_rng(seed)
    trip = build_embedding_triple(P("n"), P("n^2"), kind, 40)
    y = FiniteVector.from_dict({int(i): float(c) for i, c in
                                zip(rng.choice(np.arange(1, 41), 5, replace=False),
                                    rng.uniform(0.5, 4, 5))})
    assert vector_norm(trip.gamma_space, trip.T2.apply(y), k) == \
        pytest.approx(vector_norm(trip.beta_space, y, k), abs=1e-12)
    u = FiniteVector.from_dict({int(i): float(c) for i, c in
                                zip(rng.choice(np.arange(1, 81), 6, replace=False),
                                    rng.uniform(0.5, 4, 6))})
    assert vector_norm(trip.alpha_space, trip.T1.apply(u), k) <= \
        vector_norm(trip.gamma_space, u, k) + 1e-12


@given(st.integers(0, 2**32 - 1))
def test_operator_json_roundtrip(seed):
    T = _random_operator(np.random.default_rng(seed), GradedSpace.infinite(P("n!")), 40, 8)
    back = QuasiDiagonalOperator.from_json(json.loads(dumps(T.to_json())))
    assert back.entries == T.entries


@given(st.sampled_from(["k^2", "2^k"]))
def test_certificate_roundtrip(phi):
    A = GradedSpace.finite(P("n"))
    cert = search_tameness_failure(A, A, MonotoneIntMap.parse("2*k"), MonotoneIntMap.parse(phi),
                                   6, 2000)
    assume(isinstance(cert, FailureCertificate))
    text = dumps(cert.to_json())
    assert dumps(FailureCertificate.from_json(json.loads(text)).to_json()) == text


def test_witness_roundtrip():
    w = build_infinite_type_witness(P("n"), P("n"), MonotoneIntMap.parse("k^2"), 3, 2000)
    text = dumps(w.to_json())
    assert dumps(InfiniteTypeWitness.from_json(json.loads(text)).to_json()) == text


@given(st.sampled_from([("n", "n"), ("n^2", "n"), ("n!", "n!")]))
def test_worker_count_does_not_change_results(pair):
    beta, alpha = P(pair[0]), P(pair[1])
    one = estimate_limit_points(beta, alpha, depth=300, workers=1)
    four = estimate_limit_points(beta, alpha, depth=300, workers=4)
    assert dumps(one.to_dict()) == dumps(four.to_dict())
