"""``sscomp`` command line.

Exit status: 0 on success, 1 on user errors (bad input, invalid
configuration, unknown flags), 2 when a compiled space yields a point its
source schema rejects.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .backends import check_point, compile_space, parse_space, serialize_space
from .decode import decode_point
from .errors import ConsistencyError, ParseError, SchemaViolation, SscompError
from .operators.dataset import load_csv
from .operators.registry import Registry, default_registry, load_registry
from .pipeline import (
    Step, configure_step, parse_pipeline, pipeline_from_json, serialize_pipeline,
)
from .search import Objective, grid_search, random_search, sample_point


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _read(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    return Path(path).read_text()


def _in_file(path: str, parse):
    try:
        return parse(_read(path))
    except ParseError as e:
        raise ParseError(f"{path}: {e.position}", e.message) from None


def _json(text: str, source: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"{source}:{e.lineno}:{e.colno}", e.msg) from None


def _registry(args) -> Registry:
    reg = default_registry() if args.registry is None else load_registry(args.registry)
    return reg.unconstrained() if getattr(args, "no_constraints", False) else reg


def _pipeline(arg: str, reg: Registry):
    """A pipeline file, or the expression text itself when no such file exists."""
    if arg == "-" or Path(arg).is_file():
        return _in_file(arg, lambda t: parse_pipeline(t, reg))
    return parse_pipeline(arg, reg)


def _write(text: str, out: str | None):
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def cmd_compile(args) -> int:
    reg = _registry(args)
    p = _pipeline(args.pipeline, reg)
    space = compile_space(p, reg, args.backend, args.cuts, args.seed)
    _write(serialize_space(space), args.output)
    return 0


def cmd_validate(args) -> int:
    """Missing hyperparameters take their defaults, as when configuring."""
    reg = _registry(args)
    doc = _json(_read(args.config), args.config)
    try:
        if args.op is not None:
            if not isinstance(doc, dict):
                raise ParseError(args.config, "configuration must be a JSON object")
            configure_step(Step(args.op), doc, reg)
        else:
            pipeline_from_json(doc, reg)
    except SchemaViolation as e:
        print(f"invalid: {e}", file=sys.stderr)
        return 1
    print("valid")
    return 0


def cmd_normalize(args) -> int:
    reg = _registry(args)
    space = reg[args.op].normalized()
    if args.json:
        _write(json.dumps(space.to_json(), indent=2, sort_keys=True) + "\n", args.output)
    else:
        _write(str(space) + "\n", args.output)
    return 0


def cmd_sample(args) -> int:
    space = _in_file(args.space, parse_space)
    rng = np.random.default_rng(args.seed)
    lines = [json.dumps(sample_point(space, rng), sort_keys=True) for _ in range(args.n)]
    _write("".join(line + "\n" for line in lines), args.output)
    return 0


def cmd_decode(args) -> int:
    reg = _registry(args)
    p = _pipeline(args.pipeline, reg)
    space = _in_file(args.space, parse_space)
    point = check_point(_json(_read(args.point), args.point))
    _write(serialize_pipeline(decode_point(p, space, point, reg)) + "\n", args.output)
    return 0


def _search_common(args):
    reg = _registry(args)
    p = _pipeline(args.pipeline, reg)
    data = load_csv(args.data)
    objective = Objective(data, args.metric, args.folds, args.seed)
    return reg, p, objective


def _report(history, args, objective) -> int:
    _write(history.to_jsonl(args.timings), args.output)
    if args.convergence:
        Path(args.convergence).write_text(history.convergence_csv())
    best = history.best_trial
    if best is None:
        print("no trials", file=sys.stderr)
        return 0
    target = sys.stderr if args.output in (None, "-") else sys.stdout
    print(f"best trial {best.index}: loss {best.loss!r} "
          f"({objective.metric} {objective.score(best.loss)!r}) "
          f"failures {history.failures}/{len(history)}", file=target)
    print(json.dumps(best.point, sort_keys=True), file=target)
    return 0


def cmd_search(args) -> int:
    reg, p, objective = _search_common(args)
    space = compile_space(p, reg, args.backend, args.cuts, args.seed)
    history = random_search(p, space, objective, args.iters, args.seed, reg)
    return _report(history, args, objective)


def cmd_grid_search(args) -> int:
    reg, p, objective = _search_common(args)
    space = compile_space(p, reg, "grid", args.cuts, args.seed)
    history = grid_search(p, space, objective, reg)
    return _report(history, args, objective)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sscomp", description="Compile hyperparameter schemas and pipelines "
                     "into search spaces, and search them.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def registry_flags(sp, constraints=True):
        sp.add_argument("-r", "--registry", default=None,
                        help="operator registry file, or 'example' / 'builtin' for a bundled one "
                        "(default: both bundled registries)")
        if constraints:
            sp.add_argument("--no-constraints", action="store_true",
                            help="drop every conjunct after each operator's leading record")

    def output_flag(sp):
        sp.add_argument("-o", "--output", default=None, help="output file (default: stdout)")

    sp = sub.add_parser("compile", help="compile a pipeline into a search space")
    sp.add_argument("pipeline", help="pipeline file (JSON or expression) or expression text")
    registry_flags(sp)
    sp.add_argument("--backend", choices=["flat", "grid", "nested"], default="flat")
    sp.add_argument("--cuts", type=int, default=3, help="values per continuous dimension (grid)")
    sp.add_argument("--seed", type=int, default=0)
    output_flag(sp)
    sp.set_defaults(func=cmd_compile)

    sp = sub.add_parser("validate", help="check a configuration against its schemas")
    sp.add_argument("config", help="JSON file: a pipeline with bindings, or a record with --op")
    sp.add_argument("--op", default=None, help="validate CONFIG as this operator's hyperparameters")
    registry_flags(sp)
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("normalize", help="print an operator's normal form")
    sp.add_argument("op")
    registry_flags(sp)
    sp.add_argument("--json", action="store_true", help="emit the JSON form")
    output_flag(sp)
    sp.set_defaults(func=cmd_normalize)

    sp = sub.add_parser("sample", help="draw points from a compiled space")
    sp.add_argument("space")
    sp.add_argument("-n", type=int, default=10)
    sp.add_argument("--seed", type=int, default=0)
    output_flag(sp)
    sp.set_defaults(func=cmd_sample)

    sp = sub.add_parser("decode", help="turn a point into a configured pipeline")
    sp.add_argument("pipeline")
    sp.add_argument("space")
    sp.add_argument("point", help="JSON object file")
    registry_flags(sp)
    output_flag(sp)
    sp.set_defaults(func=cmd_decode)

    for name, func, help_ in (("search", cmd_search, "random search with cross-validation"),
                              ("grid-search", cmd_grid_search, "exhaustive grid search")):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("pipeline")
        sp.add_argument("data", help="CSV file (label last), or 'ablation' for the bundled set")
        registry_flags(sp)
        sp.add_argument("--folds", type=int, default=5)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--cuts", type=int, default=3)
        sp.add_argument("--metric", choices=["accuracy", "error-rate"], default="accuracy")
        if name == "search":
            sp.add_argument("--iters", type=int, default=100)
            sp.add_argument("--backend", choices=["flat", "grid", "nested"], default="flat")
        sp.add_argument("--convergence", default=None, help="write iteration,best_loss CSV here")
        sp.add_argument("--timings", action="store_true", help="record trial durations")
        output_flag(sp)
        sp.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConsistencyError as e:
        print(f"sscomp: internal consistency error: {e}", file=sys.stderr)
        return 2
    except (SscompError, OSError, ValueError) as e:
        print(f"sscomp: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
