import numpy as np
import pytest

from sscomp.errors import (
    ArityError, ConfigError, LifecycleError, ParseError, SchemaViolation, TrainingError,
    UnknownOperator,
)
from sscomp.operators import make_ablation_data
from sscomp.pipeline import (
    Choice, LifecycleState, Par, Seq, Step, configure, configure_all, display_names, fit, items,
    parse_expression, parse_pipeline, pipeline_from_json, pipeline_to_json, predict,
    serialize_pipeline, state, steps, transform,
)


def test_combinators():
    a, b, c = Step("A"), Step("B"), Step("C")
    assert a >> b == Seq(a, b)
    assert a & b == Par(a, b)
    assert (a | b | c) == Choice((a, b, c))
    assert items((a >> b) >> c) == items(a >> (b >> c)) == [a, b, c]
    with pytest.raises(ArityError):
        Choice((a,))


def test_display_names_deduplicate():
    p = Step("A") >> (Step("A") | Step("B")) >> Step("A")
    assert sorted(display_names(p).values()) == ["A_1", "A_2", "A_3", "B"]


def test_lifecycle(reg):
    planned = Step("KNN") >> Step("Stump")
    assert state(planned) == LifecycleState.PLANNED
    trainable = configure_all(planned, reg)
    assert state(trainable) == LifecycleState.TRAINABLE
    assert state(Step("PCA") >> (Step("J48") | Step("LR"))) == LifecycleState.PLANNED
    half = configure(planned, {"KNN": {"n_neighbors": 3}}, reg)
    assert state(half) == LifecycleState.PLANNED
    data = make_ablation_data(60)
    trained = fit(configure_all(Step("Scaler") >> Step("KNN"), reg), data.X, data.y, reg)
    assert state(trained) == LifecycleState.TRAINED
    # minimum semantics: one trainable step keeps the composite trainable
    mixed = Seq(trained, configure_all(Step("Stump"), reg))
    assert state(mixed) == LifecycleState.TRAINABLE


def test_configure_validates(reg):
    with pytest.raises(SchemaViolation):
        configure(Step("LR"), {"S": "sag", "P": "l1"}, reg)
    with pytest.raises(SchemaViolation):
        configure(Step("LR"), {"bogus": 1}, reg)
    with pytest.raises(SchemaViolation):
        configure(Step("A") >> Step("LR"), {"Nope": {}}, reg)
    lr = configure(Step("LR"), {"S": "sag"}, reg)
    assert lr.config == {"S": "sag", "P": "l2"}


def test_configure_is_pure(reg):
    p = Step("LR")
    configure(p, {"S": "linear"}, reg)
    assert p.bindings is None


def test_fit_predict(reg):
    data = make_ablation_data(90)
    p = configure_all(Step("Scaler") >> Step("LogReg"), reg)
    model = fit(p, data.X, data.y, reg)
    assert np.mean(predict(model, data.X, reg) == data.y) > 0.85
    assert transform(fit(configure_all(Step("Scaler"), reg), data.X, data.y, reg),
                     data.X, reg).shape == data.X.shape


def test_parallel_then_vote(reg):
    data = make_ablation_data(90)
    p = configure_all((Step("KNN") & Step("Stump") & Step("LogReg")) >> Step("MajorityVote"), reg)
    model = fit(p, data.X, data.y, reg)
    assert predict(model, data.X, reg).shape == data.y.shape
    features = configure_all((Step("Scaler") & Step("Projector")) >> Step("ConcatFeatures")
                             >> Step("KNN"), reg)
    fit(features, data.X, data.y, reg)


def test_fit_errors(reg):
    data = make_ablation_data(30)
    with pytest.raises(LifecycleError):
        fit(Step("KNN"), data.X, data.y, reg)
    with pytest.raises(ConfigError):
        fit(configure_all(Step("PCA") >> Step("KNN"), reg), data.X, data.y, reg)
    with pytest.raises(LifecycleError):
        predict(configure_all(Step("KNN"), reg), data.X)
    bad = Step("KNN", {"n_neighbors": 3, "weights": "distance", "metric": "cosine"})
    with pytest.raises(TrainingError):
        fit(bad, data.X, data.y, reg)


def test_trained_steps_stay_frozen(reg):
    data = make_ablation_data(60)
    scaler = fit(configure_all(Step("Scaler"), reg), data.X, data.y, reg)
    p = Seq(scaler, configure_all(Step("KNN"), reg))
    model = fit(p, data.X[:30], data.y[:30], reg)
    assert model.left.learned is scaler.learned


def test_json_roundtrip(reg):
    p = Step("PCA") >> (Step("J48", {"R": False, "C": 0.5}) | Step("LR", name="Logit")) >> Step("A")
    doc = pipeline_to_json(p)
    assert pipeline_from_json(doc) == p
    assert parse_pipeline(serialize_pipeline(p)) == p


def test_json_rejects(reg):
    with pytest.raises(ParseError):
        pipeline_from_json({"step": "A", "seq": []})
    with pytest.raises(ParseError):
        pipeline_from_json({"seq": [{"step": "A"}]})
    with pytest.raises(ParseError):
        pipeline_from_json({"step": "A", "extra": 1})
    with pytest.raises(UnknownOperator):
        pipeline_from_json({"step": "Nope"}, reg)
    with pytest.raises(SchemaViolation):
        pipeline_from_json({"step": "LR", "bindings": {"S": "sag", "P": "l1"}}, reg)


def test_expression_precedence():
    p = parse_expression("A >> B & C | D")
    assert p == Choice((Par(Seq(Step("A"), Step("B")), Step("C")), Step("D")))
    assert parse_expression("PCA >> (J48 | LR)") == Step("PCA") >> (Step("J48") | Step("LR"))
    assert str(parse_expression("A >> (B | C)")) == "A >> (B | C)"


@pytest.mark.parametrize("text", ["A >>", "(A | B", "A $ B", "A B", ""])
def test_expression_errors(text):
    with pytest.raises(ParseError):
        parse_expression(text)


def test_fit_twice_independent_and_pure(reg):
    data = make_ablation_data(60)
    p = configure_all(Step("Scaler") >> Step("KNN"), reg)
    before = pipeline_to_json(p)
    a = fit(p, data.X, data.y, reg)
    b = fit(p, data.X[:30], data.y[:30], reg)
    assert a.left.learned is not b.left.learned
    assert pipeline_to_json(p) == before and state(p) == LifecycleState.TRAINABLE


def test_knn_memorizes(reg):
    data = make_ablation_data(60)
    model = fit(Step("KNN", {**reg["KNN"].defaults, "n_neighbors": 1}), data.X, data.y, reg)
    assert (predict(model, data.X, reg) == data.y).all()


def test_transform_composes(reg):
    data = make_ablation_data(60)
    both = fit(configure_all(Step("Scaler") >> Step("Projector"), reg), data.X, data.y, reg)
    scaled = transform(both.left, data.X, reg)
    assert np.allclose(transform(both, data.X, reg), transform(both.right, scaled, reg))
    assert np.allclose(scaled.mean(axis=0), 0, atol=1e-9)


def test_par_is_ordered():
    a, b = Step("A"), Step("B")
    assert a & b != b & a


def test_topology_preserved(reg):
    data = make_ablation_data(60)
    p = configure_all((Step("Scaler") & Step("Projector")) >> Step("ConcatFeatures") >> Step("Stump"), reg)
    model = fit(p, data.X, data.y, reg)
    assert [s.op for _, s in steps(model)] == [s.op for _, s in steps(p)]
    assert type(model) is type(p) and type(model.left) is type(p.left)
