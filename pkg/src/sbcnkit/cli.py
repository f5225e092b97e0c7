"""Command-line front end: ``sbcn <subcommand> ...``.

Every subcommand that writes with ``--out`` also writes ``<out>.manifest.json``
recording the command, parameters, seeds, input digests, tool version and
wall-clock time.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import time
import warnings
from datetime import datetime, timezone
from pathlib import Path

import yaml

from . import __version__
from .community import walktrap
from .dataset import ContingencyTable, Schema, contingency, load_and_binarize
from .datasets import BUILTIN, adult_csv, berkeley_csv, german_csv, schema_text
from .errors import IngestionError, SbcnError, SchemaError
from .pagerank import PprConfig, RecordScore, score_records
from .sbcn import HillClimbConfig, Sbcn, learn, to_dot
from .synth import sample_dag, sample_data, to_csv
from .walker import (ExplainableScore, WalkConfig, explainable_fraction,
                     group_score, group_scores_tsv, score_all)

log = logging.getLogger("sbcnkit")

EXIT_OK, EXIT_COMPUTE, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    """Bad invocation: unknown node, missing file, malformed input."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


# -- inputs -----------------------------------------------------------------

class Inputs:
    """Loads inputs once and remembers their digests for the manifest."""

    def __init__(self):
        self.digests: dict[str, str] = {}

    def read_bytes(self, spec: str, builtin=None, kind: str = "data") -> bytes:
        key = spec
        if spec.startswith("builtin:"):
            name = spec.split(":", 1)[1]
            if builtin is None or name not in builtin:
                raise UsageError(f"unknown builtin {spec!r}")
            data = builtin[name]()
            # the same builtin name may denote both a CSV and a schema
            key = f"builtin:{kind}/{name}"
        else:
            try:
                data = Path(spec).read_bytes()
            except OSError as exc:
                raise UsageError(f"cannot read {spec}: {exc.strerror}") from None
        self.digests[key] = hashlib.sha256(data).hexdigest()
        return data

    def data(self, spec: str) -> bytes:
        return self.read_bytes(spec, {"berkeley": berkeley_csv})

    def schema(self, spec: str) -> Schema:
        builtin = {name: (lambda n=name: schema_text(n).encode()) for name in BUILTIN}
        text = self.read_bytes(spec, builtin, kind="schema").decode("utf-8")
        return Schema.from_yaml(text)

    def sbcn(self, spec: str) -> Sbcn:
        return Sbcn.from_json(self.read_bytes(spec).decode("utf-8"))


def _node(sbcn: Sbcn, spec: str) -> int:
    try:
        return sbcn.resolve(spec)
    except KeyError as exc:
        raise UsageError(exc.args[0]) from None


def _matrix_key(matrix, spec: str) -> int:
    try:
        return matrix.index(spec)
    except KeyError as exc:
        raise UsageError(exc.args[0]) from None


# -- outputs ----------------------------------------------------------------

def _emit(text: str, out: str | None) -> list[str]:
    if out is None:
        sys.stdout.write(text)
        return []
    Path(out).write_text(text, encoding="utf-8")
    return [out]


def _manifest(args, argv, inputs: Inputs, artifacts: list[str], seconds: float) -> None:
    if not artifacts:
        return
    params = {k: v for k, v in vars(args).items() if k not in ("func",)}
    doc = {
        "command": args.command,
        "argv": list(argv),
        "params": params,
        "seeds": {k: params[k] for k in ("seed",) if k in params},
        "inputs": inputs.digests,
        "outputs": {a: hashlib.sha256(Path(a).read_bytes()).hexdigest() for a in artifacts},
        "version": __version__,
        "started": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "wall_clock_seconds": round(seconds, 6),
    }
    Path(artifacts[0] + ".manifest.json").write_text(json.dumps(doc, indent=2) + "\n",
                                                     encoding="utf-8")


def _walk_config(args) -> WalkConfig:
    return WalkConfig(n_walks=args.walks, max_total_steps=args.max_steps,
                      rng_seed=args.seed, workers=args.threads)


# -- subcommands ------------------------------------------------------------

def cmd_learn(args, inputs):
    schema = inputs.schema(args.schema)
    matrix = load_and_binarize(inputs.data(args.data), schema)
    config = HillClimbConfig(rng_seed=args.seed, max_iterations=args.max_iterations,
                             patience=args.patience, restarts=args.restarts)
    net = learn(matrix, config, matrix.schema)
    out = _emit(net.to_json(), args.out)
    if args.dot:
        Path(args.dot).write_text(to_dot(net), encoding="utf-8")
        out.append(args.dot)
    return out


def cmd_score_group(args, inputs):
    net = inputs.sbcn(args.sbcn)
    config = _walk_config(args)
    rows = [(net.nodes[_node(net, n)].id, group_score(net, _node(net, n), config))
            for n in args.node]
    return _emit(group_scores_tsv(rows), args.out)


def cmd_score_all(args, inputs):
    net = inputs.sbcn(args.sbcn)
    return _emit(group_scores_tsv(score_all(net, _walk_config(args))), args.out)


def cmd_explain(args, inputs):
    net = inputs.sbcn(args.sbcn)
    via = [_node(net, v) for v in args.via]
    for attr in args.via_attribute:
        hits = [i for i, n in enumerate(net.nodes) if n.attribute == attr]
        if not hits:
            raise UsageError(f"no node of attribute {attr!r}")
        via.extend(hits)
    if not via:
        raise UsageError("explain needs --via or --via-attribute")
    config = _walk_config(args)
    lines = [ExplainableScore.TSV_HEADER]
    for n in args.node:
        lines.append(explainable_fraction(net, _node(net, n), sorted(set(via)), config).tsv_row())
    return _emit("\n".join(lines) + "\n", args.out)


def cmd_score_records(args, inputs):
    net = inputs.sbcn(args.sbcn)
    schema = inputs.schema(args.schema) if args.schema else None
    config = PprConfig(damping=args.damping, tolerance=args.tolerance,
                       max_iterations=args.max_iterations)
    scores = score_records(net, inputs.data(args.data), schema, config, args.include_decision)
    lines = [RecordScore.TSV_HEADER] + [r.tsv_row() for r in scores]
    return _emit("\n".join(lines) + "\n", args.out)


def cmd_communities(args, inputs):
    net = inputs.sbcn(args.sbcn)
    part = walktrap(net, steps=args.steps, weighted=not args.unweighted)
    log.info("modularity %.6f over %d communities", part.modularity, len(part.communities))
    out = _emit(part.tsv(net), args.out)
    if args.dot:
        Path(args.dot).write_text(to_dot(net, part.membership()), encoding="utf-8")
        out.append(args.dot)
    return out


def cmd_contingency(args, inputs):
    schema = inputs.schema(args.schema)
    matrix = load_and_binarize(inputs.data(args.data), schema)
    neg, pos = matrix.decision_indices()
    lines = [ContingencyTable.TSV_HEADER]
    for g in args.group:
        lines.append(contingency(matrix, _matrix_key(matrix, g), neg, pos).tsv_row())
    return _emit("\n".join(lines) + "\n", args.out)


def cmd_export(args, inputs):
    net = inputs.sbcn(args.sbcn)
    text = net.to_json() if args.format == "json" else to_dot(net)
    return _emit(text, args.out)


def cmd_synth(args, inputs):
    dag = sample_dag(args.nodes, args.levels, args.density, args.seed,
                     args.false_positive_rate, args.false_negative_rate)
    matrix = sample_data(dag, args.samples, args.seed, total_order=args.total_order,
                         drop_constant=False)
    prefix = args.out
    paths = {"csv": f"{prefix}.csv", "schema": f"{prefix}.schema.yaml",
             "truth": f"{prefix}.truth.json"}
    Path(paths["csv"]).write_text(to_csv(matrix), encoding="utf-8")
    Path(paths["schema"]).write_text(
        yaml.safe_dump(dag.schema(args.total_order).to_dict(), sort_keys=False), encoding="utf-8")
    Path(paths["truth"]).write_text(dag.to_graph_json(), encoding="utf-8")
    return list(paths.values())


def cmd_dataset(args, inputs):
    if args.name == "berkeley":
        data = berkeley_csv()
    else:
        if not args.raw:
            raise UsageError(f"dataset {args.name} needs --raw files")
        for p in args.raw:
            inputs.read_bytes(p)
        data = adult_csv(*args.raw) if args.name == "adult" else german_csv(args.raw[0])
    if args.out is None:
        sys.stdout.write(data.decode("utf-8"))
        return []
    Path(args.out).write_bytes(data)
    return [args.out]


# -- parser -----------------------------------------------------------------

def _walk_flags(p):
    p.add_argument("--walks", type=int, default=10_000, help="number of walks per node")
    p.add_argument("--max-steps", type=int, default=10_000,
                   help="step budget per walk before it is counted as non-terminating")
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sbcn", description="Suppes-Bayes causal networks for "
                                              "discrimination discovery.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=1, help="cap on worker threads")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    add = sub.add_parser

    def sub_add_parser(name, **kw):
        return add(name, parents=[common], **kw)

    sub.add_parser = sub_add_parser

    p = sub.add_parser("learn", help="learn a network from a CSV and schema")
    p.add_argument("--data", required=True, help="CSV path or builtin:berkeley")
    p.add_argument("--schema", required=True, help="YAML path or builtin:NAME")
    p.add_argument("--out")
    p.add_argument("--dot", help="also write Graphviz DOT here")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--restarts", type=int, default=1)
    p.add_argument("--patience", type=int, default=2_000)
    p.add_argument("--max-iterations", type=int, default=100_000)
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("score-group", help="walk-based ds/as scores of given nodes")
    p.add_argument("--sbcn", required=True)
    p.add_argument("--node", required=True, action="append", help="attr=value or node id")
    p.add_argument("--out")
    _walk_flags(p)
    p.set_defaults(func=cmd_score_group)

    p = sub.add_parser("score-all", help="walk-based scores of every node")
    p.add_argument("--sbcn", required=True)
    p.add_argument("--out")
    _walk_flags(p)
    p.set_defaults(func=cmd_score_all)

    p = sub.add_parser("explain", help="explainable fraction through intermediate nodes")
    p.add_argument("--sbcn", required=True)
    p.add_argument("--node", required=True, action="append")
    p.add_argument("--via", action="append", default=[])
    p.add_argument("--via-attribute", action="append", default=[],
                   help="use every node of this attribute as an intermediate")
    p.add_argument("--out")
    _walk_flags(p)
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("score-records", help="PageRank-based score of each CSV record")
    p.add_argument("--sbcn", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--schema", help="defaults to the schema stored in the network")
    p.add_argument("--damping", type=float, default=0.85)
    p.add_argument("--tolerance", type=float, default=1e-9)
    p.add_argument("--max-iterations", type=int, default=1000)
    p.add_argument("--include-decision", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_score_records)

    p = sub.add_parser("communities", help="walktrap communities of the network")
    p.add_argument("--sbcn", required=True)
    p.add_argument("--steps", type=int, default=8)
    p.add_argument("--unweighted", action="store_true")
    p.add_argument("--out")
    p.add_argument("--dot", help="also write DOT coloured by community")
    p.set_defaults(func=cmd_communities)

    p = sub.add_parser("contingency", help="risk difference of groups")
    p.add_argument("--data", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--group", required=True, action="append")
    p.add_argument("--out")
    p.set_defaults(func=cmd_contingency)

    p = sub.add_parser("export", help="convert a network to JSON or DOT")
    p.add_argument("--sbcn", required=True)
    p.add_argument("--format", choices=("json", "dot"), default="dot")
    p.add_argument("--out")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("synth", help="sample a synthetic truth and noisy data")
    p.add_argument("--nodes", type=int, default=8)
    p.add_argument("--levels", type=int, default=4)
    p.add_argument("--density", type=float, default=0.3)
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--false-positive-rate", type=float, default=0.0)
    p.add_argument("--false-negative-rate", type=float, default=0.0)
    p.add_argument("--total-order", action="store_true",
                   help="give every node its own level in the schema")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="prefix for .csv, .schema.yaml, .truth.json")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("dataset", help="write a bundled or converted dataset CSV")
    p.add_argument("name", choices=BUILTIN)
    p.add_argument("--raw", nargs="*", default=[], help="raw UCI files for adult/german")
    p.add_argument("--out")
    p.set_defaults(func=cmd_dataset)
    return parser


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"sbcn: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.threads < 1:
        print("sbcn: error: --threads must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    os.environ.setdefault("OMP_NUM_THREADS", str(args.threads))
    inputs = Inputs()
    t0 = time.perf_counter()
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            artifacts = args.func(args, inputs)
        _manifest(args, argv, inputs, artifacts, time.perf_counter() - t0)
    except (UsageError, SchemaError, IngestionError, FileNotFoundError) as exc:
        print(f"sbcn: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SbcnError, ValueError) as exc:
        print(f"sbcn: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    return EXIT_OK


def main() -> None:
    try:
        code = run()
        sys.stdout.flush()
    except BrokenPipeError:
        # downstream reader (e.g. head) closed early
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        code = EXIT_OK
    sys.exit(code)


if __name__ == "__main__":
    main()
