"""Command line front end.

Exit codes: 0 success, 1 domain failure (no convergence, row budget),
2 usage error (bad arguments, unparsable input, unreadable file).  Nothing
is written on exit code 2.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .dataset import DatasetError, read_dataset_csv
from .ingest import (
    binarize,
    enrich_negatives,
    generate_table,
    load_nominal_csv,
    project_columns,
)
from .logic import (
    FormulaSyntaxError,
    LogicGrain,
    RowBudgetExceeded,
    Var,
    format_formula,
    formula_valuation,
    parse_formula,
    variables,
)
from .network import NetworkError, compile_formula, save_network
from .neuron import (
    NeuronConfig,
    lambda_similarity,
    parse_neuron_spec,
    rank_decompositions,
)
from .pipeline import PipelineConfig, load_pipeline_config, reverse_engineer

log = logging.getLogger("lukanet")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _out(args, given: str | None, default: str) -> Path:
    path = Path(given) if given else Path(args.out_dir) / default
    return path


def _parse(text: str):
    try:
        return parse_formula(text)
    except FormulaSyntaxError as exc:
        raise UsageError(str(exc)) from exc


def cmd_compile(args) -> int:
    f = _parse(args.formula)
    net = compile_formula(f)
    path = _out(args, args.output, "network.json")
    path.parent.mkdir(parents=True, exist_ok=True)
    save_network(net, path)
    for i, (units, fan_in) in enumerate(net.shapes, 1):
        print(f"layer {i}: {units} x {fan_in}")
    print(f"wrote {path}")
    return EXIT_OK


def cmd_table(args) -> int:
    f = _parse(args.formula)
    if args.n < 1:
        raise UsageError("n must be >= 1")
    if args.noise < 0:
        raise UsageError("noise must be >= 0")
    try:
        data = generate_table(f, LogicGrain(args.n), args.noise, args.seed)
    except RowBudgetExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    path = _out(args, args.output, "table.csv")
    path.parent.mkdir(parents=True, exist_ok=True)
    data.to_csv(path)
    print(f"{len(data)} rows over {', '.join(data.column_names) or '(no variables)'}")
    print(f"wrote {path}")
    return EXIT_OK


def cmd_reveng(args) -> int:
    try:
        data = read_dataset_csv(args.table, target=args.target)
        cfg = load_pipeline_config(args.config) if args.config else PipelineConfig()
    except (OSError, DatasetError, ValueError, TypeError) as exc:
        raise UsageError(str(exc)) from exc
    if args.seed is not None:
        cfg.train.seed = args.seed
    if args.mse_target is not None:
        cfg.train.mse_target = args.mse_target
    if args.hidden_layers is not None:
        cfg.hidden_layers = args.hidden_layers
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    result = reverse_engineer(data, cfg)
    result.attempts_csv(out / "attempts.csv")
    if result.report is None:
        print(f"no network passed the crystallization gate after {len(result.attempts_log)} attempts",
              file=sys.stderr)
        return EXIT_FAIL
    save_network(result.network, out / "network.json")
    result.report.save(out / "report.json")
    r = result.report
    print(f"formula: {r.formula_text}")
    print(f"unicode: {format_formula(r.formula, unicode=True)}")
    print(f"lambda: {r.similarity:.4f}")
    print(f"mse: {r.mse:.6g}")
    print(f"accuracy: {r.accuracy:.4f}")
    return EXIT_OK


def _valuation(text: str, names: tuple[str, ...] | None):
    """A neuron spec ``"b; ±x,..."`` or a formula, as (valuation, names)."""
    if ";" in text:
        try:
            cfg, spec_names = parse_neuron_spec(text)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        if names is not None and set(spec_names) != set(names):
            raise UsageError("both configurations must use the same input names")
        order = names or spec_names
        if names is not None:
            # reorder weights to the first configuration's input order
            w = dict(zip(spec_names, cfg.weights))
            cfg = NeuronConfig(tuple(w[n] for n in order), cfg.bias)
        return cfg, tuple(order)
    f = _parse(text)
    if names is None:
        raise UsageError("the first argument must be a neuron spec 'b; ±x,±y,...'")
    extra = set(variables(f)) - set(names)
    if extra:
        raise UsageError(f"formula uses unknown inputs {sorted(extra)}")
    return formula_valuation(f, names), names


def cmd_similar(args) -> int:
    if args.n < 1:
        raise UsageError("n must be >= 1")
    a, names = _valuation(args.config_a, None)
    b, _ = _valuation(args.config_b, names)
    grain = LogicGrain(args.n)
    lam = lambda_similarity(a, b, grain, len(names))
    print(f"lambda: {lam:.{args.digits}f}")
    if args.rank:
        literals = [Var(n) for n in names]
        for tree, l in rank_decompositions(a, grain):
            text = format_formula(tree.to_formula(literals), unicode=True)
            print(f"{l:.{args.digits}f}  {text}")
    return EXIT_OK


def cmd_prep(args) -> int:
    bmap = None
    try:
        if args.binarize:
            if args.positive is None:
                raise UsageError("--binarize needs --positive LABEL")
            table = load_nominal_csv(args.csv, args.target, args.positive)
            data, bmap = binarize(table)
            print(f"{len(table)} rows, {table.positive_count()} positive; "
                  f"{len(bmap)} binary columns")
        else:
            data = read_dataset_csv(args.csv, target=args.target)
        if args.project:
            data = project_columns(data, [c.strip() for c in args.project.split(",") if c.strip()])
    except (OSError, DatasetError) as exc:
        raise UsageError(str(exc)) from exc
    if args.enrich:
        data = enrich_negatives(data, args.factor)
    path = _out(args, args.output, "dataset.csv")
    path.parent.mkdir(parents=True, exist_ok=True)
    data.to_csv(path)
    if bmap is not None:
        bmap.save(path.with_suffix(".map.json"))
    print(f"wrote {path} ({len(data)} rows, {data.n_inputs} inputs)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lukanet", description=__doc__.splitlines()[0])
    p.add_argument("--seed", type=int, default=None, help="seed for every random choice")
    p.add_argument("--verbose", "-v", action="count", default=0)
    p.add_argument("--out-dir", default=".", help="directory for default output files")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("compile", help="compile a formula into a network JSON file")
    s.add_argument("formula")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_compile)

    s = sub.add_parser("table", help="write a formula's truth sub-table as CSV")
    s.add_argument("formula")
    s.add_argument("-n", type=int, required=True, help="grain: truth values 0, 1/n, ..., 1")
    s.add_argument("--noise", type=float, default=0.0, help="Gaussian noise sigma on targets")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_table)

    s = sub.add_parser("reveng", help="learn a network from a table and extract a formula")
    s.add_argument("table")
    s.add_argument("--config", help="pipeline config JSON")
    s.add_argument("--target", default="target", help="name of the target column")
    s.add_argument("--mse-target", type=float)
    s.add_argument("--hidden-layers", type=int)
    s.set_defaults(func=cmd_reveng)

    s = sub.add_parser("similar", help="λ-similarity of two neuron configurations")
    s.add_argument("config_a", help="neuron spec 'b; ±x,±y,...'")
    s.add_argument("config_b", help="neuron spec or formula over the same inputs")
    s.add_argument("-n", type=int, default=1)
    s.add_argument("--rank", action="store_true", help="also rank every rule-R decomposition of A")
    s.add_argument("--digits", type=int, default=4)
    s.set_defaults(func=cmd_similar)

    s = sub.add_parser("prep", help="binarize, enrich and project a CSV dataset")
    s.add_argument("csv")
    s.add_argument("--target", required=True)
    s.add_argument("--positive", help="target label mapped to 1")
    s.add_argument("--binarize", action="store_true")
    s.add_argument("--enrich", action="store_true")
    s.add_argument("--factor", type=float, default=0.5)
    s.add_argument("--project", help="comma-separated columns to keep")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_prep)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    if args.command == "table" and args.seed is None:
        args.seed = 0
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NetworkError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
