import numpy as np
import pytest

from tamepairs.intmaps import MonotoneIntMap
from tamepairs.ratio_analysis import (analytic_limit_points, check_piszczek, estimate_limit_points,
                                      greedy_clusters, window_ratios)
from tamepairs.sequences import parse_sequence
from tamepairs.spaces import GradedSpace

P = parse_sequence


def centers(est):
    return sorted(c.center for c in est.clusters)


def test_factorial_clusters():
    est = estimate_limit_points(P("n!"), P("n!"), depth=40)
    assert est.verdict.value.value == "Bounded"
    assert centers(est) == pytest.approx([0.0, 1.0], abs=1e-6)
    assert est.sup_finite == pytest.approx(1.0, abs=1e-6)


def test_scaled_factorial():
    est = estimate_limit_points(P("2*n!"), P("n!"), depth=40)
    assert est.sup_finite == pytest.approx(2.0, abs=1e-6)
    assert centers(est) == pytest.approx([0.0, 2.0], abs=1e-6)


def test_dense_ratios_unbounded():
    est = estimate_limit_points(P("n"), P("n"), depth=2000, cutoff=10)
    assert est.verdict.value.value == "Unbounded"
    assert est.verdict.evidence["numeric_verdict"] == "Unbounded"
    # candidate centres fill (0, cutoff)
    assert max(centers(est)) > 9.0 and len(est.clusters) > 100


def test_numeric_path_without_rules():
    # tables carry no analytic rule, so the numeric estimator decides alone
    a = P("table:[" + ",".join(str(2 ** k) for k in range(1, 61)) + "]")
    assert analytic_limit_points(a, a) is None
    est = estimate_limit_points(a, a, depth=60, cutoff=10)
    assert not est.analytic
    assert est.verdict.value.value in ("Unbounded", "Inconclusive")


def test_window_ratios_match_oracle(oracles):
    w = window_ratios(P("n!"), P("n!"), 40, 10)
    got = sorted({float(v) for v in w if v >= 1e-6})
    assert got == pytest.approx(oracles["factorial_ratios_below_10"], rel=1e-12)


def test_greedy_clusters_zero_first():
    cl = greedy_clusters(np.array([0.0, 0.001, 1.0, 1.0005, 3.0]), 0.01)
    assert cl[0].center == 0.0 and [c.mass for c in cl] == [2, 2, 1]


def test_piszczek_small_depth_oracle(oracles):
    L0, Li = GradedSpace.finite(P("n")), GradedSpace.infinite(P("n"))
    k = MonotoneIntMap.affine(1)
    run = check_piszczek(L0, L0, MonotoneIntMap.affine(2), k, 2, [50], 4)
    assert run.constants[-1][2] == pytest.approx(oracles["piszczek_tame_N50"], abs=1e-12)
    run = check_piszczek(Li, L0, MonotoneIntMap.affine(2), MonotoneIntMap.parse("k^2"), 3, [60, 120], 16)
    assert run.constants[0][2] == pytest.approx(oracles["piszczek_nontame_N60"], abs=1e-12)
    assert run.constants[1][2] == pytest.approx(oracles["piszczek_nontame_N120"], abs=1e-12)


def test_piszczek_degenerate_bound():
    L0 = GradedSpace.finite(P("n"))
    k = MonotoneIntMap.affine(1)
    run = check_piszczek(L0, L0, k, k, 3, [100, 200], 4)
    assert all(c[2] <= 1e-12 for c in run.constants)
    assert run.verdict.value.value == "Bounded"


def test_piszczek_constants_monotone():
    Li, L0 = GradedSpace.infinite(P("n")), GradedSpace.finite(P("n"))
    run = check_piszczek(Li, L0, MonotoneIntMap.affine(2), MonotoneIntMap.parse("k^2"), 3,
                         [10, 50, 200, 400], 16)
    logs = [c[2] for c in run.constants]
    assert logs == sorted(logs)
