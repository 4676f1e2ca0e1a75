"""Search-space compiler for typed hyperparameter schemas and ML pipelines."""

from .backends import (
    FlatSpace, GridSpace, NestedSpace, cardinality, compile_flat, compile_grid, compile_nested,
    compile_space, parse_space, serialize_space,
)
from .decode import decode_point, encode_config
from .errors import (
    CompileError, ConsistencyError, DecodeError, EmptySpace, ExplosionError, NotNormalizable,
    ParseError, SchemaViolation, SscompError, TrainingError, UnsupportedFeature,
)
from .normalizer import NormalizedSpace, hoist, normalize, simplify
from .operators import (
    Dataset, OperatorSpec, Registry, default_registry, load_csv, load_registry, make_ablation_data,
)
from .pipeline import (
    Choice, LifecycleState, Par, Seq, Step, configure, fit, parse_pipeline, predict,
    serialize_pipeline, state,
)
from .schema import (
    BOTTOM, TOP, AllOf, AnyOf, Enum, Not, Range, Record, enumerate_discretized, parse_schema,
    serialize_schema, validate_instance,
)
from .search import (
    WORST, CashSearch, Objective, SearchHistory, Trial, cross_validate, grid_search,
    random_search, sample_point,
)

__version__ = "0.1.0"
