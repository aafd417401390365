import json
import math

import numpy as np
import pytest

from tamepairs.errors import InvalidCertificate, InvalidS, PreconditionFailed
from tamepairs.intmaps import MonotoneIntMap
from tamepairs.operators import QuasiDiagonalOperator
from tamepairs.sequences import parse_sequence
from tamepairs.spaces import GradedSpace
from tamepairs.witnesses import (FailureCertificate, FailureRow, InfiniteTypeWitness,
                                 LinearTameCertificate, NotFound, Refuted, block_interval,
                                 build_infinite_type_witness, build_qd_witness, chain_violations,
                                 linear_tame_certificate, search_tameness_failure, upward_bound,
                                 verify_failure_certificate, verify_infinite_type_witness,
                                 verify_linear_tame_certificate, witness_continuity_excess,
                                 witness_row_ratios)

P = parse_sequence
K2 = MonotoneIntMap.parse("k^2")
LinfN, L0N = GradedSpace.infinite(P("n")), GradedSpace.finite(P("n"))


def test_search_matches_bruteforce_oracle(oracles):
    cert = search_tameness_failure(LinfN, L0N, MonotoneIntMap.affine(1, 1), K2, 6, 200, m_range=[2])
    assert [[r.n, r.i_n, r.nu_n] for r in cert.rows] == oracles["e2_nontame_k2_m2"]
    tame = search_tameness_failure(L0N, L0N, MonotoneIntMap.affine(2),
                                   MonotoneIntMap.from_table([2 ** k for k in range(1, 11)]),
                                   4, 400, m_range=[3])
    assert [[r.n, r.i_n, r.nu_n] for r in tame.rows] == oracles["e2_tame_2k_m3"]


def test_single_row_always_found():
    cert = search_tameness_failure(L0N, L0N, MonotoneIntMap.affine(2), MonotoneIntMap.affine(1), 1, 10)
    assert isinstance(cert, FailureCertificate) and len(cert.rows) == 1
    T = build_qd_witness(cert)
    assert len(T) == 1 and witness_row_ratios(T, cert)[0] >= -1e-9


def test_qd_witness_from_certificate():
    cert = search_tameness_failure(LinfN, L0N, MonotoneIntMap.affine(1, 1), K2, 12, 2000)
    T = build_qd_witness(cert)
    ratios = witness_row_ratios(T, cert)
    assert all(r >= math.log(n) - 1e-9 for n, r in zip(range(1, 13), ratios))
    assert witness_continuity_excess(T, cert) <= 1e-9
    back = FailureCertificate.from_json(json.loads(json.dumps(cert.to_json())))
    assert back.rows == cert.rows and verify_failure_certificate(back) == []


def test_tampered_certificate_rejected():
    cert = search_tameness_failure(LinfN, L0N, MonotoneIntMap.affine(1, 1), K2, 5, 500)
    rows = list(cert.rows)
    r = rows[3]
    rows[3] = FailureRow(r.n, r.k, r.m_k, r.i_n, r.nu_n + 400, r.log_lhs, r.log_rhs)
    bad = FailureCertificate(cert.psi, cert.phi, tuple(rows), cert.domain, cert.codomain)
    with pytest.raises(InvalidCertificate):
        build_qd_witness(bad)


def test_tame_pair_linear_phi_not_found():
    res = search_tameness_failure(L0N, L0N, MonotoneIntMap.affine(2), MonotoneIntMap.affine(1), 20, 2000)
    assert isinstance(res, NotFound)


def test_infinite_witness_intervals(oracles):
    assert [list(block_interval(K2, k)) for k in range(1, 6)] == oracles["intervals_k2"]


def test_infinite_witness_identity_and_growth():
    w = build_infinite_type_witness(P("n"), P("n"), K2, 5, 10**4)
    assert isinstance(w, InfiniteTypeWitness)
    assert all(len(b.members) >= 5 for b in w.blocks)
    assert verify_infinite_type_witness(w) == []
    for b in w.blocks:
        g = w.growth(b.k)
        assert g == sorted(g) and len(set(g)) == len(g)
        d = K2(b.k + 1) - K2(b.k)
        assert g == pytest.approx([d * n for n, _ in b.members], rel=1e-12)


def test_downward_chain_holds_upward_bound_needed():
    w = build_infinite_type_witness(P("n"), P("n"), K2, 5, 10**4)
    bad = chain_violations(w)
    # only grades above the block fail the S(j+1) bound; the interval-derived bound covers them
    assert bad and all(j > k for k, _, j in bad)
    assert upward_bound(K2, 3) >= K2(4)


def test_infinite_witness_json_roundtrip():
    w = build_infinite_type_witness(P("n"), P("n^2"), K2, 3, 2000)
    back = InfiniteTypeWitness.from_json(json.loads(json.dumps(w.to_json())))
    assert back.to_json() == w.to_json() and verify_infinite_type_witness(back) == []


def test_factorial_misses_large_intervals():
    res = build_infinite_type_witness(P("n!"), P("n!"), K2, 20, 10**4)
    assert isinstance(res, NotFound) and res.detail["short_blocks"]


def test_convexity_precondition():
    with pytest.raises(InvalidS):
        build_infinite_type_witness(P("n"), P("n"), MonotoneIntMap.parse("table:[1,1,2,3,4,5]"), 3, 100)
    with pytest.raises(InvalidS):
        build_infinite_type_witness(P("n"), P("n"), MonotoneIntMap.parse("table:[1,5,6,20,40,80]"), 3, 100)


def test_linear_certificate_factorial_identity():
    X = GradedSpace.infinite(P("n!"))
    T = QuasiDiagonalOperator.identity(X, 200)
    cert = linear_tame_certificate(T, 1.5, 5, 200)
    assert isinstance(cert, LinearTameCertificate)
    assert cert.B == 1 and cert.exceptional == () and cert.log_D == (0.0,) * 5
    assert all(p["I1"] == 200 for p in cert.partition.values())
    assert verify_linear_tame_certificate(cert, T) == []
    back = LinearTameCertificate.from_json(json.loads(json.dumps(cert.to_json())))
    assert back == cert


def test_linear_certificate_exceptional_entry():
    X = GradedSpace.infinite(P("n!"))
    entries = [(n, n, 0.0) for n in range(1, 41) if n != 3] + [(3, 41, 0.0)]
    T = QuasiDiagonalOperator.from_entries(entries, X, X)
    cert = linear_tame_certificate(T, 1.5, 4, 40)
    # beta_41 / alpha_3 is enormous, so the entry falls in I_2 and C_{k+1} absorbs it
    assert isinstance(cert, LinearTameCertificate)
    assert all(p["I2"] == 1 for p in cert.partition.values())
    assert verify_linear_tame_certificate(cert, T) == []


def test_linear_certificate_dense_ratios():
    T = QuasiDiagonalOperator.identity(LinfN, 200)
    with pytest.raises(PreconditionFailed):
        linear_tame_certificate(T, 1.5, 5, 200)


def test_linear_certificate_small_A():
    X = GradedSpace.infinite(P("2*n!"))
    Y = GradedSpace.infinite(P("n!"))
    T = QuasiDiagonalOperator(np.arange(1, 41), np.arange(1, 41), np.zeros(40), Y, X)
    with pytest.raises(PreconditionFailed):
        linear_tame_certificate(T, 1.5, 3, 40)
