import json
from pathlib import Path

from click.testing import CliRunner

from attnet.cli import main

PERIOD = 14 * 86400

CONFIG = f"""
[paths]
out = "{{out}}"

[window]
start = 0
end = {PERIOD}

[synth]
seed = 11
n_retweets = 8000
originals_per_user = 1

{{blocks}}

[[synth.segments]]
start = 0
end = {PERIOD}
rates = [
  [1.0, 0.02, 0.02, 0.02],
  [0.02, 1.0, 0.02, 0.02],
  [0.02, 0.02, 1.0, 0.02],
  [0.02, 0.02, 0.02, 1.0],
]

[louvain]
runs = 4
seed = 1

[cohort]
k = 20

[bootstrap]
resamples = 50

[stats]
x_min = 1
"""

BLOCK = '[[synth.blocks]]\nsize = 150\ncategories = {Other = 1.0}\n'


def write_config(dir_path: Path, out="out") -> Path:
    cfg = dir_path / "run.toml"
    cfg.write_text(CONFIG.format(out=out, blocks=BLOCK * 4), encoding="utf-8")
    return cfg


def run(*args):
    return CliRunner().invoke(main, list(args), catch_exceptions=False)


def test_all_runs_pipeline(tmp_path):
    cfg = write_config(tmp_path)
    res = run("--config", str(cfg), "all")
    assert res.exit_code == 0, res.output
    out = tmp_path / "out"
    for rel in (
        "synth/events.jsonl",
        "ingest/events.jsonl",
        "graph/giant.npz",
        "communities/partition.csv",
        "profile/supercommunities.csv",
        "dynamics/attention.csv",
        "attention/trajectories.csv",
        "stats/powerlaw.json",
        "manifest.json",
    ):
        assert (out / rel).exists(), rel
    meta = json.loads((out / "communities" / "consensus_meta.json").read_text())
    assert meta["runs"] == 4 and meta["n_communities"] >= 4
    report = json.loads((out / "ingest" / "report.json").read_text())
    r = report["report"]
    assert r["kept"] + r["malformed"] + r["out_of_window"] + r["duplicates"] == r["lines_in"]


def test_cached_rerun_skips_stages(tmp_path):
    cfg = write_config(tmp_path)
    assert run("--config", str(cfg), "all").exit_code == 0
    res = run("--config", str(cfg), "all")
    assert res.exit_code == 0
    assert res.output.count("cached, skipping") == 8


def test_deterministic_across_out_dirs(tmp_path):
    (tmp_path / "a").mkdir()
    (tmp_path / "b").mkdir()
    ca = write_config(tmp_path / "a")
    cb = write_config(tmp_path / "b")
    assert run("--config", str(ca), "all").exit_code == 0
    assert run("--config", str(cb), "all").exit_code == 0
    skip = {"report.json", "manifest.json"}  # these embed absolute paths
    files_a = sorted(
        p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*")
        if p.is_file() and p.name not in skip
    )
    files_b = sorted(
        p.relative_to(tmp_path / "b") for p in (tmp_path / "b").rglob("*")
        if p.is_file() and p.name not in skip
    )
    assert files_a == files_b and files_a
    for rel in files_a:
        assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes(), rel


def test_config_error_exit_code(tmp_path):
    cfg = tmp_path / "bad.toml"
    cfg.write_text('[paths]\nout = "out"\n', encoding="utf-8")  # no window
    res = run("--config", str(cfg), "graph")
    assert res.exit_code == 1
    assert "config error" in res.output


def test_missing_config_exit_code():
    res = run("graph")
    assert res.exit_code == 1


def test_dependency_error_exit_code(tmp_path):
    cfg = write_config(tmp_path)
    res = run("--config", str(cfg), "communities")
    assert res.exit_code == 2
    assert "dependency error" in res.output


def test_ingest_flag_form(tmp_path):
    src = tmp_path / "ev.jsonl"
    src.write_text(
        '{"id":"t1","author_id":"a","ts":5,"kind":"tweet"}\n'
        '{"id":"r1","author_id":"b","ts":6,"kind":"retweet","rt_author_id":"a"}\n'
        "not json\n",
        encoding="utf-8",
    )
    out = tmp_path / "out"
    res = run("ingest", "--events", str(src), "--from", "0", "--to", "100",
              "--out", str(out))
    assert res.exit_code == 0, res.output
    assert (out / "ingest" / "events.jsonl").exists()
    report = json.loads((out / "ingest" / "report.json").read_text())
    assert report["report"]["kept"] == 2
    assert report["report"]["malformed"] == 1


def test_ingest_flag_form_requires_all_flags(tmp_path):
    res = run("ingest", "--events", str(tmp_path / "x.jsonl"))
    assert res.exit_code == 1
