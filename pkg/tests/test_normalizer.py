import random

import pytest

from generators import random_schema
from sscomp.errors import ExplosionError, NotNormalizable
from sscomp.normalizer import (
    NormalizedSpace, Normalizer, hoist, normalize, same_disjuncts, simplify,
)
from sscomp.operators import default_registry
from sscomp.schema import (
    BOTTOM, INTEGER, TOP, AllOf, AnyOf, Enum, Not, Range, Record, enumerate_discretized,
    parse_schema, schema_size, serialize_schema, validate_instance,
)


def rec(**props):
    return Record(tuple(props.items()))


@pytest.mark.parametrize("before,after", [
    (AllOf((Enum((True, False)), Not(Enum((True,))))), Enum((False,))),
    (AllOf((Range(0, 1), TOP)), Range(0, 1)),
    (AllOf((Enum(("l1", "l2")), Enum(("l2",)))), Enum(("l2",))),
    (AnyOf((Range(0, 1), BOTTOM)), Range(0, 1)),
    (AnyOf((Range(0, 1), TOP)), TOP),
    (AllOf((Range(0, 1), BOTTOM)), BOTTOM),
    (AllOf((Range(0, 2), Range(1, 3, False))), Range(1, 2, False)),
    (AllOf((Enum((0.5, 2, "x")), Range(0, 1))), Enum((0.5,))),
    (AllOf((Enum(("a",)), Enum(("b",)))), BOTTOM),
])
def test_simplify_examples(before, after):
    assert simplify(before) == after


def test_simplify_de_morgan():
    s = AllOf((Enum(("a", "b", "c")), Not(AnyOf((Enum(("a",)), Enum(("b",)))))))
    assert simplify(s) == Enum(("c",))


def test_simplify_record_merge():
    s = AllOf((rec(k0=Enum((1, 2)), k1=Range(0, 1)), rec(k0=Enum((2, 3)))))
    assert simplify(s) == rec(k0=Enum((2,)), k1=Range(0, 1))


def test_hoist_pca():
    s = rec(N=AnyOf((Range(0, 1), Enum(("mle",)))))
    assert hoist(s) == AnyOf((rec(N=Range(0, 1)), rec(N=Enum(("mle",)))))


def test_hoist_distributes():
    a, b, c, d = (rec(k=Enum((v,))) for v in "abcd")
    out = hoist(AllOf((AnyOf((a, b)), AnyOf((c, d)))))
    assert isinstance(out, AnyOf) and len(out.children) == 4


def test_hoist_identity():
    s = rec(a=Enum((1,)), b=Range(0, 1))
    assert hoist(s) == s


def test_hoist_cap():
    many = AllOf(tuple(AnyOf(tuple(rec(**{f"k{i}": Enum((j,))}) for j in range(4)))
                       for i in range(5)))
    with pytest.raises(ExplosionError):
        hoist(many, cap=100)


def test_cap_env_override(monkeypatch):
    s = rec(a=AnyOf((Enum((1,)), Range(5, 6))), b=AnyOf((Enum((1,)), Range(5, 6))))
    assert len(normalize(s)) == 4
    monkeypatch.setenv("SSCOMP_DISJUNCT_CAP", "3")
    with pytest.raises(ExplosionError):
        normalize(s)


def test_running_example_forms(example_reg):
    pca = normalize(example_reg["PCA"].hyperparams)
    assert same_disjuncts(pca, [{"N": Range(0, 1)}, {"N": Enum(("mle",))}])
    j48 = normalize(example_reg["J48"].hyperparams)
    assert same_disjuncts(j48, [{"R": Enum((False,)), "C": Range(0, 1)},
                                {"R": Enum((True, False)), "C": Enum((0.25,))}])
    lr = normalize(example_reg["LR"].hyperparams)
    assert same_disjuncts(lr, [{"S": Enum(("linear",)), "P": Enum(("l1", "l2"))},
                               {"S": Enum(("linear", "sag", "lbfgs")), "P": Enum(("l2",))}])


@pytest.mark.parametrize("s", [
    Not(Range(0, 1)),
    rec(a=Not(Range(0, 1))),
    rec(a=AllOf((Range(0, 5), Not(Enum((2,)))))),
])
def test_not_normalizable(s):
    with pytest.raises(NotNormalizable):
        normalize(s)


def test_enum_range_negation_extensions():
    s = rec(a=AllOf((Range(0, 5), Not(Enum(("x",))))))
    assert same_disjuncts(normalize(s), [{"a": Range(0, 5)}])
    s = rec(a=AllOf((Enum((1, 7)), Not(Range(0, 5)))))
    assert same_disjuncts(normalize(s), [{"a": Enum((7,))}])


def test_mixed_key_sets_rejected():
    with pytest.raises(NotNormalizable):
        normalize(AnyOf((rec(a=Enum((1,))), rec(b=Enum((1,))))))


def test_empty_space():
    s = AllOf((rec(a=Enum((1,))), rec(a=Enum((2,)))))
    assert len(normalize(s)) == 0


def test_duplicates_removed():
    s = rec(a=AnyOf((Enum((1,)), Enum((1,)))))
    assert len(normalize(s)) == 1


def test_bundled_operators_reach_normal_form():
    reg = default_registry()
    for name, spec in reg.items():
        space = spec.normalized()
        assert len(space) >= 1, name
        keys = set(spec.hyperparameter_names())
        assert all(set(g) == keys for g in space), name


def test_visit_count_linear():
    r = random.Random(7)
    for _ in range(100):
        s = random_schema(r)
        n = Normalizer()
        n.normalize(s)
        assert n.visits <= 2 * schema_size(s)


def test_idempotent():
    r = random.Random(11)
    for _ in range(100):
        space = normalize(random_schema(r))
        again = normalize(parse_schema(serialize_schema(space.to_schema())))
        assert same_disjuncts(space, again)
        assert NormalizedSpace.from_json(space.to_json()) == space


def test_oracle_equivalence_sample():
    r = random.Random(3)
    for _ in range(50):
        s = random_schema(r)
        n = normalize(s).to_schema()
        for cuts in (2, 3):
            assert all(validate_instance(n, x) for x in enumerate_discretized(s, cuts))
            assert all(validate_instance(s, x) for x in enumerate_discretized(n, cuts))


def test_integer_ranges_intersect():
    s = AllOf((Range(0, 10, False, False, INTEGER), Range(2.5, 20)))
    assert simplify(s) == Range(2.5, 10, True, False, INTEGER)
