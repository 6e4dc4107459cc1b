"""Single JSON configuration for every pipeline stage.

Unknown keys are rejected with the dotted key path. Relative paths are
resolved against the directory holding the config file.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .bucketing import LshParams
from .clustering import XMeansConfig
from .retrieval import RankingParams
from .store import DEFAULT_TITLE_PREDICATES
from .text_index import Bm25fParams


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass
class Paths:
    corpus: list = field(default_factory=lambda: ["corpus.nq"])
    store: str = "work/store"
    index: str = "work/index"
    vectors: str = "work/vectors"
    buckets: str = "work/buckets"
    clusters: str = "work/clusters"
    affinity: str = "work/affinity.json"
    runs: str = "work/runs"
    queries: str = "queries.tsv"
    qrels: str = "qrels.txt"
    judgments: str = "train.tsv"


@dataclass
class FeatureParams:
    min_entity_freq: int = 2
    max_df_fraction: float = 0.5


@dataclass
class SpectralParams:
    k_max: int = 50
    max_n: int = 2000


@dataclass
class AffinityParams:
    alpha: float = 1.0
    min_grade: int = 3


@dataclass
class EvalParams:
    relevant_grade: int = 3
    depth: int = 10


@dataclass
class Config:
    paths: Paths = field(default_factory=Paths)
    title_predicates: list = field(default_factory=lambda: list(DEFAULT_TITLE_PREDICATES))
    strict_parse: bool = False
    bm25f: Bm25fParams = field(default_factory=Bm25fParams)
    features: FeatureParams = field(default_factory=FeatureParams)
    lsh: LshParams = field(default_factory=LshParams)
    xmeans: XMeansConfig = field(default_factory=XMeansConfig)
    spectral: SpectralParams = field(default_factory=SpectralParams)
    affinity: AffinityParams = field(default_factory=AffinityParams)
    ranking: RankingParams = field(default_factory=RankingParams)
    eval: EvalParams = field(default_factory=EvalParams)
    seed: int = 0
    base_dir: str = field(default=".", metadata={"internal": True})

    def path(self, name: str) -> Path:
        p = Path(getattr(self.paths, name))
        return p if p.is_absolute() else Path(self.base_dir) / p

    def corpus_paths(self) -> list:
        base = Path(self.base_dir)
        return [Path(p) if Path(p).is_absolute() else base / p for p in self.paths.corpus]

    def to_dict(self) -> dict:
        data = dataclasses.asdict(self)
        data.pop("base_dir")
        return data

    def config_hash(self) -> str:
        """First 8 hex chars of sha256 over the canonical JSON (paths excluded,
        so moving a work directory keeps run tags stable)."""
        data = self.to_dict()
        data.pop("paths")
        blob = json.dumps(data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:8]


def _build(cls, data, prefix: str):
    if not isinstance(data, dict):
        raise ConfigError(prefix or "<root>", "expected an object")
    known = {f.name: f for f in dataclasses.fields(cls) if not f.metadata.get("internal")}
    kwargs = {}
    for key, value in data.items():
        dotted = f"{prefix}.{key}" if prefix else key
        if key not in known:
            raise ConfigError(dotted, "unknown key")
        f = known[key]
        default = f.default_factory() if f.default_factory is not dataclasses.MISSING else f.default
        if dataclasses.is_dataclass(default):
            kwargs[key] = _build(type(default), value, dotted)
        else:
            kwargs[key] = _coerce(dotted, default, value)
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(prefix or "<root>", str(exc)) from None


def _coerce(key, default, value):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(key, "expected a boolean")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(key, "expected an integer")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(key, "expected a number")
        return float(value)
    if isinstance(default, list):
        if isinstance(value, str):
            value = [value]
        if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
            raise ConfigError(key, "expected a list of strings")
        return value
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(key, "expected a string")
        return value
    return value


def _set_dotted(data: dict, dotted: str, raw: str):
    parts = dotted.split(".")
    node = data
    for p in parts[:-1]:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise ConfigError(dotted, "not a section")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    node[parts[-1]] = value


def from_dict(data: dict, base_dir=".", overrides=()) -> Config:
    data = json.loads(json.dumps(data))  # deep copy
    for item in overrides:
        if "=" not in item:
            raise ConfigError(item, "override must look like section.key=value")
        key, raw = item.split("=", 1)
        _set_dotted(data, key.strip(), raw)
    cfg = _build(Config, data, "")
    cfg.base_dir = str(base_dir)
    return cfg


def load(path=None, overrides=()) -> Config:
    if path is None:
        return from_dict({}, ".", overrides)
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError("--config", f"{path} not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("--config", f"invalid JSON: {exc}") from None
    return from_dict(data, path.parent, overrides)


def dump(cfg: Config) -> str:
    return json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n"
