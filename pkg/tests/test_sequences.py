import math

import numpy as np
import pytest

from tamepairs.dsl import format_node, parse_expression
from tamepairs.errors import IndexOutOfRange, InvalidDescriptor, ParseError
from tamepairs.sequences import (Affine, ExpPower, Factorial, Geometric, Log, Merge, Power, Table,
                                 check_stability, eval_term, merge, parse_sequence,
                                 sequence_from_json, table_from_json)


@pytest.mark.parametrize("text,family", [
    ("n", Affine), ("3*n", Affine), ("2*n-1", Affine), ("n^2", Power), ("ln(n+1)", Log),
    ("2^n", Geometric), ("n!", Factorial), ("exp(n^2)", ExpPower), ("e^(n^2)", ExpPower),
    ("merge(n,n^2)", Merge), ("table:[1,2,5]", Table),
])
def test_recognized_families(text, family):
    assert isinstance(parse_sequence(text), family)


def test_spot_values():
    assert eval_term(parse_sequence("n!"), 4) == 24
    assert eval_term(parse_sequence("ln(n+1)"), 1) == pytest.approx(math.log(2))
    assert parse_sequence("merge(2*n, 2*n-1)").eval(5) == 5


def test_factorial_log_domain():
    f = parse_sequence("n!")
    assert f.log_eval(200) == pytest.approx(math.lgamma(201))
    assert math.isinf(f.eval(200)) or f.eval(200) > 1e300


@pytest.mark.parametrize("bad", ["n(", "2**", "foo(n)", "merge(n)", "", "n+)"])
def test_parse_errors_carry_position(bad):
    with pytest.raises(ParseError) as err:
        parse_sequence(bad)
    assert err.value.position is not None


@pytest.mark.parametrize("bad", ["-n", "1/n", "table:[3,2,5]", "table:[1,1]", "5-n"])
def test_invalid_sequences(bad):
    with pytest.raises(InvalidDescriptor):
        parse_sequence(bad)


def test_table_bounds():
    t = parse_sequence("table:[1,2,3]")
    with pytest.raises(IndexOutOfRange):
        t.values(5)
    with pytest.raises(IndexOutOfRange):
        eval_term(t, 0)


def test_format_roundtrip():
    for text in ["n^2+3*n", "ln(n+1)", "exp(sqrt(n))", "2^n", "n!"]:
        node = parse_expression(text)
        assert parse_expression(format_node(node)) == node


def test_json_roundtrip():
    for text in ["n", "n^2", "ln(n+1)", "2^n", "n!", "exp(n^2)", "merge(n,n^2)", "3*n!"]:
        s = parse_sequence(text)
        back = sequence_from_json(s.to_json())
        assert np.array_equal(back.log_values(50), s.log_values(50))
    t = table_from_json({"table": [1, 2, 4]})
    assert sequence_from_json(t.to_json()).values(3).tolist() == [1, 2, 4]


def test_stability_examples(oracles):
    g = check_stability(parse_sequence("2^n"))
    assert g.verdict.value.value == "Bounded" and g.sup_ratio_observed == 2 and g.analytic
    f = check_stability(parse_sequence("n!"))
    assert f.verdict.value.value == "Unbounded" and f.analytic
    lg = check_stability(parse_sequence("ln(n+1)"), 10**5)
    assert lg.sup_ratio_observed == pytest.approx(oracles["log_stability_sup"], rel=1e-12)
    assert lg.verdict.evidence["argmax_n"] == 1


def test_table_stability_is_numeric():
    rep = check_stability(parse_sequence("table:[1,2,4,8,16,40,100]"))
    assert rep.verdict.value.value == "Inconclusive" and not rep.analytic
    assert rep.sup_ratio_observed == pytest.approx(2.5)


def test_merge_examples(oracles):
    m = merge(parse_sequence("n"), parse_sequence("n^2"), 3)
    o = oracles["merge_n_n2_3"]
    assert m.gamma.values(6).tolist() == o["gamma"]
    assert list(m.t) == o["t"] and list(m.s) == o["s"]
    d = merge(parse_sequence("n"), parse_sequence("n"), 3)
    assert list(d.t) == oracles["merge_n_n_3"]["t"] and list(d.s) == oracles["merge_n_n_3"]["s"]
    i = merge(parse_sequence("2*n"), parse_sequence("2*n-1"), 10)
    assert list(i.t) == [2 * n for n in range(1, 11)]
    assert list(i.s) == [2 * n - 1 for n in range(1, 11)]
