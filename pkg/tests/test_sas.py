from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from samplan.domains import GENERATORS, load_bundled, toy3
from samplan.sas import (UNDEFINED, ParseError, UnsupportedFeature, decode_facts, encode_state, encode_states,
                         mean_effect_size, num_facts, parse_sas, write_sas)

TOY3 = write_sas(toy3())


def test_parse_toy3():
    t = parse_sas(TOY3, "toy3")
    assert len(t.variables) == 2 and len(t.operators) == 2
    assert num_facts(t) == 4
    assert t.s0 == (0, 0)
    assert t.goal == (1, UNDEFINED)
    assert t.operators[0].pre == (0, UNDEFINED) and t.operators[0].eff == (1, UNDEFINED)
    assert [op.cost for op in t.operators] == [1, 1]


def test_missing_end_goal_names_section():
    text = TOY3.replace("end_goal\n", "")
    with pytest.raises(ParseError) as err:
        parse_sas(text)
    assert err.value.section == "goal"


def test_truncated_file():
    with pytest.raises(ParseError):
        parse_sas(TOY3[: len(TOY3) // 2])


def test_rejects_other_versions():
    with pytest.raises(ParseError):
        parse_sas(TOY3.replace("begin_version\n3", "begin_version\n2"))


def test_value_out_of_range():
    with pytest.raises(ParseError):
        parse_sas(TOY3.replace("begin_state\n0\n0", "begin_state\n0\n5"))


def test_rejects_conditional_effects():
    text = TOY3.replace("1\n0 0 0 1\n1\nend_operator", "1\n1 1 0 0 0 1\n1\nend_operator", 1)
    with pytest.raises(UnsupportedFeature):
        parse_sas(text)


def test_prevail_goes_to_pre_only():
    # op1 gets prevail B=b0
    text = TOY3.replace("op1\n0\n1\n0 0 0 1", "op1\n1\n1 0\n1\n0 0 0 1")
    t = parse_sas(text)
    assert t.operators[0].pre == (0, 0)
    assert t.operators[0].eff == (1, UNDEFINED)


def test_pre_minus_one_gives_no_precondition():
    text = TOY3.replace("0 0 0 1\n1\nend_operator", "0 0 -1 1\n1\nend_operator", 1)
    t = parse_sas(text)
    assert t.operators[0].pre == (UNDEFINED, UNDEFINED)


def test_metric_zero_means_unit_cost():
    text = TOY3.replace("0 0 0 1\n1\nend_operator", "0 0 0 1\n7\nend_operator", 1)
    assert parse_sas(text).operators[0].cost == 1
    text = text.replace("begin_metric\n0", "begin_metric\n1")
    assert parse_sas(text).operators[0].cost == 7


def test_parse_is_deterministic_and_round_trips():
    for name in GENERATORS:
        t = load_bundled(name)
        again = parse_sas(write_sas(t), t.name)
        assert again.variables == t.variables
        assert again.operators == t.operators
        assert again.mutexes == t.mutexes
        assert (again.s0, again.goal) == (t.s0, t.goal)


def test_mean_effect_size():
    assert mean_effect_size(load_bundled("toy3")) == 1
    t = load_bundled("toy3")
    ops = (t.operators[0], t.operators[1].__class__("big", (UNDEFINED, UNDEFINED), (1, 1), 1))
    t2 = t.__class__(t.variables, ops, (), t.s0, t.goal)
    # effect sizes {1, 2}
    assert mean_effect_size(t2) == Fraction(3, 2)


def test_mean_effect_size_no_operators():
    t = load_bundled("toy3")
    empty = t.__class__(t.variables, (), (), t.s0, t.goal)
    with pytest.raises(ValueError):
        mean_effect_size(empty)


@pytest.mark.parametrize("state,bits", [((1, 0), [0, 1, 1, 0]), ((UNDEFINED, 1), [0, 0, 0, 1]),
                                        ((0, 0), [1, 0, 1, 0])])
def test_encode_toy3(state, bits):
    assert encode_state(load_bundled("toy3"), state).tolist() == bits


def test_single_variable_facts():
    from samplan.sas import Operator, Task, VariableDef

    v = VariableDef(0, "x", 5, tuple("abcde"))
    t = Task((v,), (Operator("o", (0,), (1,)),), (), (0,), (1,))
    assert num_facts(t) == 5


@given(st.data())
def test_encoding_round_trip_and_block_popcount(data):
    t = load_bundled("blocks-4")
    s = tuple(data.draw(st.integers(-1, var.domain_size - 1)) for var in t.variables)
    bits = encode_state(t, s)
    for off, var in zip(t.fact_offsets, t.variables):
        block = bits[off: off + var.domain_size]
        assert block.sum() <= 1
    assert all(bits[o: o + v.domain_size].sum() == 1 for o, v in zip(t.fact_offsets, t.variables)) == (UNDEFINED not in s)
    assert decode_facts(t, bits) == s
    assert np.array_equal(encode_states(t, [s])[0], bits)
