"""entrex command line: one subcommand per pipeline stage.

Exit codes: 0 ok, 2 config error, 3 missing artifact, 4 input parse error,
5 internal error. Logs go to stderr; data goes to files or stdout.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from . import config as config_mod
from . import evaluation, pipeline
from .clustering import ALGORITHMS
from .rdf import IngestIOError, RdfSyntaxError
from .retrieval import MODES, EmptyQuery
from .synth import SynthSpec
from .text_index import BODY_ONLY, BOTH, TITLE_ONLY

EXIT_OK, EXIT_CONFIG, EXIT_MISSING, EXIT_PARSE, EXIT_INTERNAL = 0, 2, 3, 4, 5
FIELDS = {"title": TITLE_ONLY, "body": BODY_ONLY, "both": BOTH}

log = logging.getLogger("entrex")


def _add_mode_args(p, with_mode=True):
    if with_mode:
        p.add_argument("--mode", choices=MODES, default="B")
    p.add_argument("--field", choices=sorted(FIELDS), default="title")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="entrex", description=__doc__.splitlines()[0])
    parser.add_argument("--config", "-c", help="JSON config file (default: built-in defaults, paths relative to cwd)")
    parser.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config key, e.g. ranking.per_cluster=2 (repeatable)")
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("ingest", help="parse the corpus into the entity store")
    sub.add_parser("stats", help="per-graph explicit-similarity vs object-property counts (TSV)")
    sub.add_parser("index", help="build the BM25F inverted index")
    sub.add_parser("features", help="build per-type feature vectors")
    sub.add_parser("buckets", help="MinHash/LSH bucketing of feature vectors")
    p = sub.add_parser("cluster", help="cluster every bucket")
    p.add_argument("--algo", choices=ALGORITHMS, required=True)
    sub.add_parser("train-affinity", help="fit the query-type affinity model")

    p = sub.add_parser("search", help="rank entities for one query")
    p.add_argument("query")
    p.add_argument("--type", dest="query_type", help="annotated query type IRI")
    p.add_argument("-k", type=int, default=10)
    _add_mode_args(p)

    p = sub.add_parser("batch", help="rank every query and write a TREC run file")
    _add_mode_args(p)
    p.add_argument("--out", help="run file (default: <runs>/<tag>.run)")

    p = sub.add_parser("eval", help="metric table and paired t-tests for run files")
    p.add_argument("runs", nargs="+")
    p.add_argument("--qrels", help="qrels file (default: from config)")
    p.add_argument("--json", dest="json_out", help="also write a JSON summary here")

    p = sub.add_parser("synth", help="generate a synthetic corpus with planted clusters")
    p.add_argument("--out", required=True, help="output directory")
    for f in dataclasses.fields(SynthSpec):
        flag = "--" + f.name.replace("_", "-")
        if f.type in ("bool", bool):
            p.add_argument(flag, dest=f.name, action=argparse.BooleanOptionalAction, default=f.default)
        else:
            kind = {"int": int, "float": float}.get(f.type, type(f.default))
            p.add_argument(flag, dest=f.name, type=kind, default=f.default)
    return parser


def _configure_logging(verbose: int):
    level = logging.WARNING if verbose == 0 else logging.INFO if verbose == 1 else logging.DEBUG
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")


def _dispatch(args, cfg) -> int:
    cmd = args.command
    threads = max(1, args.threads)
    if cmd == "ingest":
        report = pipeline.ingest(cfg)
        print(f"lines={report.lines_total} quads={report.quads_ok} skipped={report.skipped_total}", file=sys.stderr)
    elif cmd == "stats":
        sys.stdout.write(pipeline.stats(cfg))
    elif cmd == "index":
        pipeline.index(cfg)
    elif cmd == "features":
        pipeline.build_features(cfg, threads)
    elif cmd == "buckets":
        pipeline.build_buckets(cfg, threads)
    elif cmd == "cluster":
        pipeline.build_clusters(cfg, args.algo, threads)
    elif cmd == "train-affinity":
        pipeline.train_affinity(cfg)
    elif cmd == "search":
        results = pipeline.search(cfg, args.query, args.mode, FIELDS[args.field], args.k, args.query_type)
        for r in results:
            print(f"{r.rank}\t{r.alpha:.6f}\t{r.origin}\t{r.uri}")
    elif cmd == "batch":
        out = pipeline.batch(cfg, args.mode, FIELDS[args.field], args.out, threads)
        print(out)
    elif cmd == "eval":
        reports, comparisons = pipeline.evaluate_runs(cfg, args.runs, args.qrels)
        sys.stdout.write(evaluation.format_table(reports))
        if comparisons:
            sys.stdout.write("\n" + evaluation.format_comparisons(comparisons))
        if args.json_out:
            Path(args.json_out).write_text(evaluation.summary_json(reports, comparisons), encoding="utf-8")
    return EXIT_OK


def _synth(args) -> int:
    values = {f.name: getattr(args, f.name) for f in dataclasses.fields(SynthSpec)}
    try:
        spec = SynthSpec(**values)
    except ValueError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(pipeline.run_synth(spec, args.out))
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _configure_logging(args.verbose)
    try:
        if args.command == "synth":
            return _synth(args)
        cfg = config_mod.load(args.config, args.overrides)
        return _dispatch(args, cfg)
    except config_mod.ConfigError as exc:
        print(f"error: config key {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except pipeline.MissingArtifact as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except (RdfSyntaxError, IngestIOError, EmptyQuery, ValueError) as exc:
        print(f"error: input: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except Exception:  # noqa: BLE001 - last-resort classification
        log.exception("internal error")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
