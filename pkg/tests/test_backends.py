import itertools
import math
import random
import warnings
from collections import Counter

import numpy as np
import pytest
from scipy import stats

from generators import random_pipeline, random_registry
from sscomp.backends import (
    FlatSpace, GridSpace, NestedChoice, NestedLeaf, NestedRecord, cardinality, compile_flat,
    compile_grid, compile_nested, flatten_nested, parse_space, serialize_space, space_contains,
)
from sscomp.errors import DegenerateRange, EmptySpace, ExplosionError, NameCollision
from sscomp.normalizer import same_disjuncts
from sscomp.operators.registry import OperatorSpec, Registry
from sscomp.pipeline import Step
from sscomp.sampling import draw_distinct
from sscomp.schema import (
    INTEGER, LOGUNIFORM, Enum, Range, Record, interior_points, validate_instance,
)

J48_D = Enum(("J48",))
LR_D = Enum(("LR",))
N_CONT, N_MLE = Range(0, 1), Enum(("mle",))
J48_GRIDS = [{"J48__R": Enum((False,)), "J48__C": Range(0, 1)},
             {"J48__R": Enum((True, False)), "J48__C": Enum((0.25,))}]
LR_GRIDS = [{"LR__S": Enum(("linear",)), "LR__P": Enum(("l1", "l2"))},
            {"LR__S": Enum(("linear", "sag", "lbfgs")), "LR__P": Enum(("l2",))}]

# the eight rows of the flat (SMAC-style) table, with our mangling
RUNNING_TABLE = [
    {"PCA__N": n, "1__D": d, **g}
    for n in (N_CONT, N_MLE)
    for d, grids in ((J48_D, J48_GRIDS), (LR_D, LR_GRIDS))
    for g in grids
]


def test_flat_running_example(reg, running):
    space = compile_flat(running, reg)
    assert len(space) == 8
    assert same_disjuncts(space.disjuncts, RUNNING_TABLE)


def test_flat_single_step(reg):
    space = compile_flat(Step("PCA"), reg)
    assert same_disjuncts(space.disjuncts, [{"PCA__N": N_CONT}, {"PCA__N": N_MLE}])


def test_flat_product_of_singletons():
    a = OperatorSpec("A", Record((("x", Enum((1,))),)), {"x": 1})
    b = OperatorSpec("B", Record((("y", Enum((2,))),)), {"y": 2})
    space = compile_flat(Step("A") >> Step("B"), Registry({"A": a, "B": b}))
    assert space.disjuncts == ({"A__x": Enum((1,)), "B__y": Enum((2,))},)


def test_bound_steps_become_singletons(reg):
    p = Step("PCA", {"N": "mle"}) >> Step("LR")
    space = compile_flat(p, reg)
    assert len(space) == 2
    assert all(g["PCA__N"] == N_MLE for g in space)


def test_discriminant_invariant(reg):
    p = Step("PCA") >> (Step("J48") | (Step("LR") >> Step("Stump")))
    for g in compile_flat(p, reg):
        assert len(g["1__D"].values) == 1
    assert {g["1__D"].values[0] for g in compile_flat(p, reg)} == {"J48", "1_1"}


def test_root_choice_key(reg):
    space = compile_flat(Step("J48") | Step("LR"), reg)
    assert all("__D" in g for g in space)


def test_nested_running_example(reg, running):
    space = compile_nested(running, reg)
    root = space.root
    assert isinstance(root, NestedRecord) and len(root.entries) == 2
    pca, choice = root.entries
    assert isinstance(pca, NestedLeaf)
    assert same_disjuncts(pca.grids, [{"PCA__N": N_CONT}, {"PCA__N": N_MLE}])
    assert isinstance(choice, NestedChoice) and choice.key == "1__D"
    j48, lr = choice.alternatives
    assert same_disjuncts(j48.grids, [{**g, "1__D": J48_D} for g in J48_GRIDS])
    assert same_disjuncts(lr.grids, [{**g, "1__D": LR_D} for g in LR_GRIDS])


def test_nested_single_step(reg):
    space = compile_nested(Step("PCA"), reg)
    assert len(space.root.entries) == 1
    assert len(space.root.entries[0].grids) == 2


def test_nested_choice_in_choice(reg):
    p = Step("J48") | (Step("LR") | Step("KNN"))
    space = compile_nested(p, reg)
    outer = space.root.entries[0]
    assert outer.key == "__D"
    inner = outer.alternatives[1]
    assert inner.key == "1__D" and inner.fixed == {"__D": Enum(("1",))}
    keys = {k for g in space.flat() for k in g if k.endswith("__D")}
    assert keys == {"__D", "1__D"}


def test_cardinality_law(reg, running):
    assert len(compile_flat(running, reg)) == cardinality(running, reg) == 2 * (2 + 2)


def test_name_collision():
    spec = OperatorSpec("A", Record((("x", Enum((1,))),)), {"x": 1})
    reg = Registry({"A": spec})
    # an explicit display name equal to a generated one
    p = Step("A") >> Step("A") >> Step("A", name="A_1")
    with pytest.raises(NameCollision):
        compile_flat(p, reg)


def test_empty_space_serialization():
    with pytest.raises(EmptySpace):
        serialize_space(FlatSpace(()))


def test_explosion(reg):
    p = Step("LR") >> Step("LR") >> Step("LR") >> Step("LR")
    with pytest.raises(ExplosionError):
        compile_flat(p, reg, cap=10)


# ---------------------------------------------------------------------------
# grid backend


def test_grid_shape(reg, running):
    space = compile_grid(running, reg, cuts=3, seed=0)
    assert isinstance(space, GridSpace) and len(space) == 8
    for g, src in zip(space, compile_flat(running, reg)):
        assert set(g) == set(src)
        for k, dim in src.items():
            if isinstance(dim, Range):
                assert len(g[k].values) == 3
                assert all(v in dim for v in g[k].values)
            else:
                assert g[k] == dim


def test_grid_erases_to_flat(reg, running):
    grid = compile_grid(running, reg, cuts=3, seed=5)
    flat = compile_flat(running, reg)
    for g, src in zip(grid, flat):
        erased = {k: src[k] if isinstance(src[k], Range) else v for k, v in g.items()}
        assert erased == src


def test_grid_without_ranges_equals_flat(reg):
    p = Step("LR") >> Step("Scaler")
    assert compile_grid(p, reg).disjuncts == compile_flat(p, reg).disjuncts


def test_grid_deterministic(reg, running):
    a = serialize_space(compile_grid(running, reg, 3, 7))
    assert a == serialize_space(compile_grid(running, reg, 3, 7))
    assert a != serialize_space(compile_grid(running, reg, 3, 8))


def test_grid_integer_ranges():
    r = Range(1, 15, False, False, INTEGER)
    vals = draw_distinct(r, 3, np.random.default_rng(0))
    assert len(set(vals)) == 3 and all(isinstance(v, int) and v in r for v in vals)
    with pytest.warns(DegenerateRange):
        assert draw_distinct(Range(0, 1, False, False, INTEGER), 3, np.random.default_rng(0)) == [0, 1]


def test_grid_exclusive_bounds():
    r = Range(0, 1)
    rng = np.random.default_rng(0)
    for _ in range(200):
        assert all(0 < v < 1 for v in draw_distinct(r, 3, rng))


def test_loguniform_sampling():
    r = Range(1e-4, 1e2, False, False, distribution=LOGUNIFORM)
    rng = np.random.default_rng(42)
    draws = np.array([draw_distinct(r, 3, rng) for _ in range(10_000 // 3 + 1)]).ravel()
    assert draws.min() >= 1e-4 and draws.max() <= 1e2
    logs = (np.log(draws) - math.log(1e-4)) / (math.log(1e2) - math.log(1e-4))
    assert stats.kstest(logs, "uniform").pvalue > 0.001
    assert stats.kstest(draws / 1e2, "uniform").pvalue < 1e-6


# ---------------------------------------------------------------------------
# wire format


def test_golden_flat(reg, running, golden):
    text = serialize_space(compile_flat(running, reg))
    assert text == serialize_space(compile_flat(running, reg))
    assert text == (golden / "running_flat.json").read_text()


def test_golden_nested(reg, running, golden):
    text = serialize_space(compile_nested(running, reg))
    assert text == (golden / "running_nested.json").read_text()


def test_golden_grid(reg, running, golden):
    text = serialize_space(compile_grid(running, reg, 3, 7))
    assert text == (golden / "running_grid_s7.json").read_text()


def test_space_roundtrip(reg, running):
    for space in (compile_flat(running, reg), compile_grid(running, reg),
                  compile_nested(running, reg)):
        assert parse_space(serialize_space(space)) == space


def test_format_mismatch(reg, running):
    with pytest.raises(ValueError):
        serialize_space(compile_flat(running, reg), "nested")


# ---------------------------------------------------------------------------
# properties over random pipelines


def _discretized(space, cuts):
    out = []
    for g in space.flat():
        pools = {k: list(d.values) if isinstance(d, Enum) else interior_points(d, cuts)
                 for k, d in g.items()}
        keys = sorted(pools)
        for combo in itertools.product(*(pools[k] for k in keys)):
            out.append(tuple(zip(keys, combo)))
    return Counter(out)


def test_flat_nested_agreement():
    r = random.Random(5)
    reg = random_registry(r)
    for _ in range(20):
        p = random_pipeline(r, list(reg))
        flat = compile_flat(p, reg)
        nested = compile_nested(p, reg)
        assert same_disjuncts(flat.disjuncts, flatten_nested(nested.root))
        assert _discretized(flat, 2) == _discretized(nested, 2)


def test_discretized_points_are_members(reg, running):
    space = compile_flat(running, reg)
    for point in _discretized(space, 2):
        assert space_contains(space, dict(point))


def test_point_soundness_via_enumeration(example_reg, running):
    space = compile_flat(running, example_reg)
    for point in _discretized(space, 3):
        for op in ("PCA", "J48", "LR"):
            config = {k.split("__", 1)[1]: v for k, v in point if k.startswith(op + "__")}
            if config:
                assert validate_instance(example_reg[op].hyperparams, config)


def test_warnings_clean(reg, running):
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        compile_grid(running, reg)
