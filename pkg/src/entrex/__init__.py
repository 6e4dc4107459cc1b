"""Entity retrieval over RDF data: BM25F, cluster-based result expansion and
query-type affinity re-ranking, plus an evaluation harness."""

__version__ = "0.1.0"
