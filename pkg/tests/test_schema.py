import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sscomp.errors import ParseError, UnsupportedFeature
from sscomp.schema import (
    BOTTOM, INTEGER, LOGUNIFORM, TOP, AllOf, AnyOf, Enum, Not, Range, Record,
    enumerate_discretized, interior_points, make_enum, make_range, parse_schema,
    serialize_schema, validate_instance, values_equal,
)

PCA_DOC = {
    "type": "object",
    "properties": {"N": {"anyOf": [
        {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        {"enum": ["mle"]},
    ]}},
}


def test_parse_enum():
    assert parse_schema('{"enum":["mle"]}') == Enum(("mle",))


def test_parse_pca_document():
    s = parse_schema(json.dumps(PCA_DOC))
    assert s == Record((("N", AnyOf((Range(0, 1), Enum(("mle",))))),))


def test_parse_not():
    assert parse_schema('{"not":{"enum":[true]}}') == Not(Enum((True,)))


@pytest.mark.parametrize("text,expected", [
    ("true", TOP),
    ("false", BOTTOM),
    ("{}", TOP),
    ('{"type":"boolean"}', Enum((True, False))),
    ('{"type":"integer","minimum":1,"maximum":3}', Range(1, 3, False, False, INTEGER)),
    ('{"minimum":0}', Range(0, math.inf, False)),
    ('{"enum":[]}', BOTTOM),
    ('{"type":"number","minimum":2,"maximum":1}', BOTTOM),
    ('{"type":"string","enum":["a",1]}', Enum(("a",))),
])
def test_parse_cases(text, expected):
    assert parse_schema(text) == expected


def test_keywords_in_one_object_conjoin():
    s = parse_schema('{"enum":["a","b"],"not":{"enum":["a"]}}')
    assert s == AllOf((Enum(("a", "b")), Not(Enum(("a",)))))


@pytest.mark.parametrize("text,error", [
    ('{"pattern":"x"}', UnsupportedFeature),
    ('{"type":"array"}', UnsupportedFeature),
    ('{"type":"string"}', UnsupportedFeature),
    ('{"enum":"a"}', ParseError),
    ('{"enum":[1,1.0]}', ParseError),
    ('{"minimum":0,"exclusiveMinimum":0}', ParseError),
    ('{"type":"number","minimum":0,"maximum":1,"distribution":"loguniform"}', ParseError),
    ('{"distribution":"uniform"}', ParseError),
    ('{"anyOf":[]}', ParseError),
    ('{"minimum": NaN}', ParseError),
    ("[1]", ParseError),
    ('{"enum": [', ParseError),
])
def test_parse_rejects(text, error):
    with pytest.raises(error):
        parse_schema(text)


def test_parse_error_carries_position():
    with pytest.raises(ParseError) as info:
        parse_schema('{"properties":{"k":{"bogus":1}}}')
    assert info.value.position == "/properties/k"


def test_invariants():
    with pytest.raises(ValueError):
        Enum(())
    with pytest.raises(ValueError):
        Enum(("a", "a"))
    with pytest.raises(ValueError):
        Range(1, 0)
    with pytest.raises(ValueError):
        Range(0, 1, distribution=LOGUNIFORM)
    with pytest.raises(ValueError):
        Record((("a", TOP), ("a", TOP)))
    assert make_enum([]) is BOTTOM
    assert make_range(1, 1) is BOTTOM
    assert make_range(0.2, 0.8, kind=INTEGER) is BOTTOM


def test_value_kinds():
    assert values_equal(1, 1.0)
    assert not values_equal(True, 1)
    assert not values_equal("1", 1)
    assert 1 not in Enum((True,))
    assert True not in Range(0, 2)


def test_serialize_trivial():
    assert serialize_schema(TOP) == "true"
    assert serialize_schema(BOTTOM) == "false"
    s = Record((("N", Enum(("mle",))),))
    assert parse_schema(serialize_schema(s)) == s


# ---------------------------------------------------------------------------
# validation


def test_validate_membership(example_reg):
    assert validate_instance(Enum(("mle",)), "mle")
    j48 = example_reg["J48"].hyperparams
    bad = validate_instance(j48, {"R": True, "C": 0.5})
    assert not bad and bad.construct == "anyOf"
    lr = example_reg["LR"].hyperparams
    assert validate_instance(lr, {"S": "sag", "P": "l2"})
    assert not validate_instance(lr, {"S": "sag", "P": "l1"})


def test_validate_structured_failure():
    s = Record((("a", Record((("b", Range(0, 1)),))),))
    result = validate_instance(s, {"a": {"b": 2}})
    assert not result
    assert result.path == ("a", "b")
    assert result.construct == "range"


def test_validate_records():
    s = Record((("a", Enum((1,))),))
    assert validate_instance(s, {"a": 1, "extra": 5})
    assert not validate_instance(s, {})
    assert not validate_instance(s, 1)


def test_range_exclusivity_and_integers():
    r = Range(0, 1)
    assert 0 not in r and 1 not in r and 0.5 in r
    closed = Range(0, 1, False, False)
    assert 0 in closed and 1 in closed
    ints = Range(0, 3, False, True, INTEGER)
    assert 2 in ints and 2.0 in ints and 2.5 not in ints and 3 not in ints


def test_not_is_complement():
    s = Not(Range(0, 1))
    assert validate_instance(s, 2) and validate_instance(s, "x")
    assert not validate_instance(s, 0.5)
    assert validate_instance(Not(BOTTOM), {"any": "thing"})
    assert not validate_instance(Not(TOP), 1)


# ---------------------------------------------------------------------------
# generated corpus

leaf = st.one_of(
    st.lists(st.sampled_from(["a", "b", "c", 0, 1, 2.5, True, False]), min_size=1, max_size=3,
             unique_by=lambda v: (type(v) is bool, v)).map(lambda vs: make_enum(vs)),
    st.tuples(st.sampled_from([0, 0.5, 1]), st.sampled_from([1, 2, 3]), st.booleans(),
              st.booleans(), st.sampled_from(["real", "integer"]))
    .map(lambda t: make_range(t[0], t[1], t[2], t[3], t[4])),
    st.sampled_from([TOP, BOTTOM]),
)
schemas = st.recursive(leaf, lambda inner: st.one_of(
    st.lists(inner, min_size=1, max_size=3).map(lambda cs: AnyOf(tuple(cs))),
    st.lists(inner, min_size=1, max_size=3).map(lambda cs: AllOf(tuple(cs))),
    inner.map(Not),
    st.dictionaries(st.sampled_from(["x", "y"]), inner, max_size=2)
    .map(lambda d: Record(tuple(d.items()))),
), max_leaves=8)
instances = st.one_of(
    st.sampled_from(["a", "b", "z", 0, 1, 2, 2.5, 0.75, True, False]),
    st.dictionaries(st.sampled_from(["x", "y"]),
                    st.sampled_from(["a", 0, 1, 2.5, True, 0.75]), max_size=2),
)


@settings(max_examples=300, deadline=None)
@given(schemas)
def test_roundtrip(s):
    assert parse_schema(serialize_schema(s)) == s


@settings(max_examples=300, deadline=None)
@given(schemas, schemas, instances)
def test_de_morgan(a, b, x):
    lhs = validate_instance(Not(AnyOf((a, b))), x).ok
    assert lhs == validate_instance(AllOf((Not(a), Not(b))), x).ok


@settings(max_examples=300, deadline=None)
@given(schemas, schemas, schemas, instances)
def test_order_insensitive(a, b, c, x):
    for cls in (AnyOf, AllOf):
        assert validate_instance(cls((a, b, c)), x).ok == validate_instance(cls((c, a, b)), x).ok


# ---------------------------------------------------------------------------
# discretization


def test_interior_points():
    assert interior_points(Range(0, 1), 2) == [1 / 3, 2 / 3]
    assert interior_points(Range(0, 10, kind=INTEGER), 3) == [2, 5, 8]


def test_enumerate_pca():
    # independent oracle: (0..1) with 2 cuts -> k/3 for k = 1, 2; plus the enum
    oracle = [{"N": k / 3} for k in (1, 2)] + [{"N": "mle"}]
    got = enumerate_discretized(parse_schema(json.dumps(PCA_DOC)), 2)
    assert sorted(map(str, got)) == sorted(map(str, oracle))


def test_enumerate_bottom():
    assert enumerate_discretized(BOTTOM, 3) == []


def test_enumerate_j48_filters(example_reg):
    schema = example_reg["J48"].hyperparams
    got = enumerate_discretized(schema, 2)
    # candidate pool: R in {true,false}; C in {1/3, 2/3, 0.25}
    oracle = [{"R": r, "C": c} for r in (True, False) for c in (1 / 3, 2 / 3, 0.25)
              if not r or c == 0.25]
    assert len(got) == len(oracle) == 4
    assert all(validate_instance(schema, x) for x in got)
    assert {(x["R"], x["C"]) for x in got} == {(x["R"], x["C"]) for x in oracle}
