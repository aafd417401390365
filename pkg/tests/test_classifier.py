import pytest

from tamepairs.classifier import classify_pair, classify_product
from tamepairs.errors import UnsupportedSpace
from tamepairs.sequences import parse_sequence
from tamepairs.spaces import GradedSpace

P = parse_sequence
L0 = lambda s: GradedSpace.finite(P(s))  # noqa: E731
Li = lambda s: GradedSpace.infinite(P(s))  # noqa: E731


def test_spec_examples():
    r = classify_pair(L0("ln(n+1)"), L0("n!"))
    assert (r.cell, r.confidence) == ("Tame", "Proven") and "4.3" in r.citation
    r = classify_pair(Li("n"), L0("n!"))
    assert r.cell == "NonTame" and "T4" in r.citation
    r = classify_pair(Li("n!"), Li("n!"))
    assert r.cell == "Tame" and "T1" in r.citation


def test_stable_infinite_pair_is_conditional_but_resolved():
    r = classify_pair(Li("n"), Li("n!"))
    assert r.cell == "TameIffBounded" and r.citation == "Proposition P2"
    assert r.resolved == "NonTame"
    assert r.sub_verdicts["limit_points"]["verdict"]["value"] == "Unbounded"


def test_table_inputs_are_numerical():
    t = "table:[" + ",".join(str(n * n) for n in range(1, 400)) + "]"
    r = classify_pair(Li(t), L0("n"))
    assert r.confidence == "Numerical"


def test_general_kothe_rejected():
    K = GradedSpace.kothe([[0.0, 1.0], [1.0, 2.0]])
    with pytest.raises(UnsupportedSpace):
        classify_pair(K, L0("n"))


def test_products():
    assert classify_product(L0("n"), L0("n!")).verdict == "Tame"
    prod = classify_product(L0("n!"), Li("n!"))
    assert prod.verdict == "Tame"
    assert set(prod.ratio_sets) == {"(alpha_i/beta_j)", "(beta_i/beta_j)"}
    assert classify_product(Li("n"), Li("n")).verdict == "NonTame"
    assert classify_product(Li("n!"), Li("exp(n^2)")).verdict == "Tame"
