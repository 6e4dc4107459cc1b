import pytest

from entrex import pipeline, synth
from entrex import config as config_mod

MODES = ("B", "S1", "XM", "SP")


def run_pipeline(spec, workdir, threads=1):
    """synth -> ingest -> ... -> batch for all four modes; returns (cfg, run paths)."""
    cfg_path = pipeline.run_synth(spec, workdir)
    cfg = config_mod.load(cfg_path)
    pipeline.ingest(cfg)
    pipeline.index(cfg)
    pipeline.build_features(cfg, threads)
    pipeline.build_buckets(cfg, threads)
    pipeline.build_clusters(cfg, "xmeans", threads)
    pipeline.build_clusters(cfg, "spectral", threads)
    pipeline.train_affinity(cfg)
    runs = {m: pipeline.batch(cfg, m, "title_only", threads=threads) for m in MODES}
    return cfg, runs


@pytest.fixture(scope="session")
def small_pipeline(tmp_path_factory):
    spec = synth.SynthSpec(num_types=2, clusters_per_type=4, entities_per_cluster=4,
                           hidden_fraction=0.75, sameas_fraction=0.3, seed=11)
    work = tmp_path_factory.mktemp("small")
    cfg, runs = run_pipeline(spec, work)
    return spec, cfg, runs


@pytest.fixture
def write_lines(tmp_path):
    def _write(lines, name="data.nq"):
        p = tmp_path / name
        p.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return p
    return _write


ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """Record one pass/fail line for an acceptance criterion."""
    lines = request.config.stash.setdefault(ACCEPTANCE_KEY, [])

    def _record(number, title, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {title} | {detail}"
        lines.append((number, line))
        print(line)
        return ok
    return _record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
