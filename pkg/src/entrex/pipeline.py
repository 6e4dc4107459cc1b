"""Stage functions behind the command line.

Each stage reads the artifacts of its prerequisites through the config's
paths, raising :class:`MissingArtifact` naming the stage to run first, and
writes its own artifacts deterministically.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import affinity as affinity_mod
from . import bucketing, clustering, evaluation, features, retrieval, synth
from .config import Config
from .rdf import IngestReport, iter_quads
from .store import EntityStore, assemble, corpus_stats, format_stats
from .text_index import INDEX_FILES, InvertedIndex, build_index

log = logging.getLogger(__name__)

FEATURES_MANIFEST = "features.json"
INGEST_REPORT = "ingest.json"


class MissingArtifact(FileNotFoundError):
    def __init__(self, path, stage: str):
        super().__init__(f"missing {path}; run `entrex {stage}` first")
        self.path = str(path)
        self.stage = stage


def _require(path: Path, stage: str) -> Path:
    if not Path(path).exists():
        raise MissingArtifact(path, stage)
    return Path(path)


def _pmap(fn, items, threads: int):
    """Ordered map; results come back in input order regardless of threads."""
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _corpus(cfg: Config) -> list:
    paths = cfg.corpus_paths()
    for p in paths:
        _require(p, "synth")
    return paths


# --- stages ---------------------------------------------------------------------

def ingest(cfg: Config) -> IngestReport:
    report = IngestReport()
    quads = iter_quads(_corpus(cfg), strict=cfg.strict_parse, report=report)
    manifest = assemble(quads, cfg.path("store"), cfg.title_predicates)
    (cfg.path("store") / INGEST_REPORT).write_text(
        json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    log.info("ingest: %d lines, %d quads, %d skipped, %d entities",
             report.lines_total, report.quads_ok, report.skipped_total, manifest.entity_count)
    return report


def stats(cfg: Config) -> str:
    return format_stats(corpus_stats(iter_quads(_corpus(cfg), strict=cfg.strict_parse)))


def open_store(cfg: Config) -> EntityStore:
    _require(cfg.path("store") / "manifest.json", "ingest")
    return EntityStore(cfg.path("store"))


def index(cfg: Config) -> InvertedIndex:
    idx = build_index(open_store(cfg))
    idx.save(cfg.path("index"))
    log.info("index: %d documents", len(idx.uris))
    return idx


def open_index(cfg: Config) -> InvertedIndex:
    for name in INDEX_FILES:
        _require(cfg.path("index") / name, "index")
    return InvertedIndex.load(cfg.path("index"))


def build_features(cfg: Config, threads: int = 1) -> dict:
    store = open_store(cfg)
    out = cfg.path("vectors")
    out.mkdir(parents=True, exist_ok=True)

    def one(t):
        vecs = features.build_vectors(list(store.iterate_by_type(t)))
        vecs = features.prune(vecs, cfg.features.min_entity_freq, cfg.features.max_df_fraction)
        features.write_vectors(vecs, features.vectors_path(out, t))
        return len(vecs)

    types = store.types()
    counts = _pmap(one, types, threads)
    manifest = {features.type_hash(t): t for t in types}
    (out / FEATURES_MANIFEST).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    log.info("features: %d types, %d vectors", len(types), sum(counts))
    return manifest


def feature_types(cfg: Config) -> dict:
    """type hash -> type IRI, as written by the features stage."""
    path = _require(cfg.path("vectors") / FEATURES_MANIFEST, "features")
    return json.loads(path.read_text(encoding="utf-8"))


def build_buckets(cfg: Config, threads: int = 1) -> int:
    types = feature_types(cfg)
    out = cfg.path("buckets")
    out.mkdir(parents=True, exist_ok=True)

    def one(h):
        vecs = features.read_vectors(_require(cfg.path("vectors") / f"vectors-{h}.tsv", "features"))
        buckets = bucketing.bucket_entities(types[h], bucketing.signatures(vecs, cfg.lsh), cfg.lsh)
        bucketing.write_buckets(buckets, bucketing.buckets_path(out, h))
        return len(buckets)

    total = sum(_pmap(one, sorted(types), threads))
    log.info("buckets: %d over %d types", total, len(types))
    return total


def build_clusters(cfg: Config, algorithm: str, threads: int = 1) -> list:
    if algorithm not in clustering.ALGORITHMS:
        raise ValueError(f"unknown algorithm {algorithm!r}")
    types = feature_types(cfg)
    tasks = []
    for h in sorted(types):
        path = _require(bucketing.buckets_path(cfg.path("buckets"), h), "buckets")
        vecs = {v.uri: v for v in features.read_vectors(cfg.path("vectors") / f"vectors-{h}.tsv")}
        tasks.extend((b, vecs) for b in bucketing.read_buckets(path, types[h]))

    def one(task):
        bucket, vecs = task
        return clustering.cluster_bucket(bucket, vecs, algorithm, cfg.xmeans, cfg.seed,
                                         cfg.spectral.k_max, cfg.spectral.max_n)

    records = [r for group in _pmap(one, tasks, threads) for r in group]
    clustering.write_clusters(records, cfg.path("clusters"), algorithm)
    log.info("cluster %s: %d clusters from %d buckets", algorithm, len(records), len(tasks))
    return records


def train_affinity(cfg: Config) -> affinity_mod.AffinityModel:
    store = open_store(cfg)
    path = _require(cfg.path("judgments"), "synth")
    rows = affinity_mod.read_training_file(path, store, cfg.affinity.min_grade)
    model = affinity_mod.train(rows, cfg.affinity.alpha, store.types())
    out = cfg.path("affinity")
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(model.to_json(), encoding="utf-8")
    log.info("affinity: %d judgments, %d query types", len(rows), len(model.query_types))
    return model


# --- query time -------------------------------------------------------------------

def make_retriever(cfg: Config, mode: str) -> retrieval.Retriever:
    store = open_store(cfg)
    idx = open_index(cfg)
    model = None
    if cfg.path("affinity").exists():
        model = affinity_mod.AffinityModel.from_json(cfg.path("affinity").read_text(encoding="utf-8"))
    else:
        log.warning("no affinity model at %s; gamma fixed at 1", cfg.path("affinity"))
    if mode in retrieval.MODE_ALGORITHM:
        algo = retrieval.MODE_ALGORITHM[mode]
        _require(clustering.clusters_path(cfg.path("clusters"), algo), f"cluster --algo {algo}")
        feature_types(cfg)
    return retrieval.Retriever(store, idx, cfg.ranking, cfg.bm25f, model,
                               cfg.path("vectors"), cfg.path("clusters"))


def search(cfg: Config, text: str, mode: str, field_mode: str, k: int = 10, query_type=None) -> list:
    r = make_retriever(cfg, mode)
    return r.rank(retrieval.QueryRecord("q", text, query_type), mode, field_mode, k)


def batch(cfg: Config, mode: str, field_mode: str, out=None, threads: int = 1, k=None) -> Path:
    queries = retrieval.read_queries(_require(cfg.path("queries"), "synth"))
    r = make_retriever(cfg, mode)
    k = k or cfg.eval.depth
    tag = retrieval.run_tag(mode, field_mode, cfg.config_hash())
    # warm the lazy caches before threads share the retriever
    r.title_set()
    r.store.similarity_links()
    results = _pmap(lambda q: r.rank(q, mode, field_mode, k), queries, threads)
    out = Path(out) if out else cfg.path("runs") / f"{tag}.run"
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8", newline="\n") as fh:
        for q, res in sorted(zip(queries, results), key=lambda x: x[0].id):
            fh.write(retrieval.format_run(q.id, res, tag))
    log.info("batch %s: %d queries -> %s", tag, len(queries), out)
    return out


def evaluate_runs(cfg: Config, run_paths, qrels_path=None) -> tuple:
    qrels = evaluation.read_qrels(_require(Path(qrels_path) if qrels_path else cfg.path("qrels"), "synth"))
    reports = []
    for p in run_paths:
        p = _require(Path(p), "batch")
        name = evaluation.run_tag_of(p) or p.stem
        reports.append(evaluation.evaluate(evaluation.read_run(p), qrels, name, cfg.eval.relevant_grade))
    return reports, evaluation.compare(reports)


def run_synth(spec: synth.SynthSpec, out_dir, config_overrides=None) -> Path:
    """Generate a corpus plus a ready-to-use ``config.json`` next to it."""
    corpus = synth.generate(spec)
    paths = synth.write_corpus(corpus, spec, out_dir)
    data = {"paths": {"corpus": ["corpus.nq"], "queries": "queries.tsv", "qrels": "qrels.txt",
                      "judgments": "train.tsv"}, "seed": spec.seed}
    for key, value in (config_overrides or {}).items():
        data[key] = value
    cfg_path = Path(out_dir) / "config.json"
    cfg_path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    log.info("synth: %d quads, %d queries -> %s", len(corpus.quads), len(corpus.queries), paths["corpus"])
    return cfg_path
