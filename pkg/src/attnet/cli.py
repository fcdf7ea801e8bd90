"""Pipeline orchestration: subcommands over a shared run directory.

Each stage reads its prerequisites from the run directory, writes outputs
plus a JSON report atomically, and records content hashes in a manifest so
rerunning a completed stage with unchanged inputs is a no-op. All
randomness is pinned through the config; identical (inputs, config, seeds)
give bit-identical outputs.

Exit codes: 0 ok, 1 config error, 2 dependency error, 3 runtime error.
"""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import os
import sys

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import click
import numpy as np

from . import __version__, attention as attn, dynamics as dyn, graph as gr
from . import ingest as ing
from . import profiles as prof
from . import stats as st
from . import synth as sy
from .community import ConsensusPartition, LouvainConfig, consensus, rank_communities

logger = logging.getLogger(__name__)

STAGES = ("synth", "ingest", "graph", "communities", "profile", "dynamics", "attention", "stats")
DEPS = {
    "synth": (),
    "ingest": (),
    "graph": ("ingest",),
    "communities": ("graph",),
    "profile": ("communities",),
    "dynamics": ("profile",),
    "attention": ("profile",),
    "stats": ("graph",),
}

_DATA_DIR = Path(__file__).parent / "data"


class ConfigError(Exception):
    pass


class DependencyError(Exception):
    pass


# ---------------------------------------------------------------------------
# config


@dataclass
class RunConfig:
    raw: dict
    path: Optional[Path]
    out_dir: Path
    seed_override: Optional[int] = None

    @classmethod
    def load(cls, path: Path, seed_override: Optional[int] = None) -> "RunConfig":
        try:
            with open(path, "rb") as fh:
                raw = tomllib.load(fh)
        except (OSError, tomllib.TOMLDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        paths = raw.get("paths", {})
        if "out" not in paths:
            raise ConfigError("config needs paths.out")
        out_dir = (path.parent / paths["out"]).resolve()
        cfg = cls(raw=raw, path=path, out_dir=out_dir, seed_override=seed_override)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        win = self.raw.get("window")
        if win is None or "start" not in win or "end" not in win:
            raise ConfigError("config needs window.start and window.end")
        if self.window()[0] >= self.window()[1]:
            raise ConfigError("window.start must precede window.end")
        for key in ("events", "categories"):
            for p in self._path_list(key):
                if not p.exists():
                    raise ConfigError(f"paths.{key}: {p} does not exist")
        gz = self.raw.get("paths", {}).get("gazetteer")
        if gz not in (None, "builtin") and not (self._rel(gz)).exists():
            raise ConfigError(f"paths.gazetteer: {gz} does not exist")

    def _rel(self, p: str) -> Path:
        base = self.path.parent if self.path else Path.cwd()
        return (base / p).resolve()

    def _path_list(self, key: str) -> list[Path]:
        val = self.raw.get("paths", {}).get(key)
        if val is None:
            return []
        if isinstance(val, str):
            val = [val]
        return [self._rel(v) for v in val]

    def window(self) -> tuple[int, int]:
        win = self.raw["window"]
        return ing._parse_ts(win["start"]), ing._parse_ts(win["end"])

    def events_paths(self) -> list[Path]:
        paths = self._path_list("events")
        if not paths:
            synth_events = self.out_dir / "synth" / "events.jsonl"
            if synth_events.exists() or "synth" in self.raw:
                return [synth_events]
            raise ConfigError("no paths.events configured and no synth stage output")
        return paths

    def categories_path(self) -> Optional[Path]:
        paths = self._path_list("categories")
        if paths:
            return paths[0]
        synth_cats = self.out_dir / "synth" / "categories.csv"
        return synth_cats if synth_cats.exists() else None

    def gazetteer_path(self) -> Path:
        gz = self.raw.get("paths", {}).get("gazetteer")
        if gz in (None, "builtin"):
            return _DATA_DIR / "gazetteer.tsv"
        return self._rel(gz)

    def rulebook(self) -> prof.Rulebook:
        rb = self.raw.get("paths", {}).get("rulebook")
        if rb in (None, "builtin"):
            return prof.Rulebook.default()
        return prof.Rulebook.load(self._rel(rb))

    def _seed(self, section: str, default: int) -> int:
        if self.seed_override is not None:
            return self.seed_override
        return int(self.raw.get(section, {}).get("seed", default))

    def louvain(self) -> dict:
        sec = self.raw.get("louvain", {})
        return {
            "gamma": float(sec.get("gamma", 1.0)),
            "runs": int(sec.get("runs", 50)),
            "seed": self._seed("louvain", 0),
            "min_community_size": int(sec.get("min_community_size", 1)),
            "max_passes": int(sec.get("max_passes", 50)),
            "tolerance": float(sec.get("tolerance", 1e-7)),
        }

    def windows(self) -> dict:
        sec = self.raw.get("windows", {})
        return {
            "weekly": int(sec.get("weekly_days", 7)) * 86400,
            "rolling_width": int(sec.get("rolling_width_days", 28)) * 86400,
            "rolling_step": int(sec.get("rolling_step_days", 7)) * 86400,
        }

    def cohort_k(self) -> int:
        return int(self.raw.get("cohort", {}).get("k", 1000))

    def bootstrap(self) -> dict:
        sec = self.raw.get("bootstrap", {})
        return {
            "resamples": int(sec.get("resamples", 1000)),
            "level": float(sec.get("level", 0.95)),
            "seed": self._seed("bootstrap", 0),
        }

    def stats_x_min(self) -> Optional[int]:
        x = self.raw.get("stats", {}).get("x_min")
        return int(x) if x is not None else None

    def synth_config(self) -> sy.SynthConfig:
        if "synth" not in self.raw:
            raise ConfigError("config has no [synth] section")
        obj = dict(self.raw["synth"])
        if self.seed_override is not None:
            obj["seed"] = self.seed_override
        return sy.SynthConfig.from_json_obj(obj)

    def config_hash(self) -> str:
        return hashlib.sha256(
            json.dumps(self.raw, sort_keys=True, default=str).encode()
        ).hexdigest()


# ---------------------------------------------------------------------------
# manifest / atomic io


def _hash_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _atomic_write_text(path: Path, text: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _write_json(path: Path, obj) -> None:
    _atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


class Manifest:
    def __init__(self, out_dir: Path):
        self.path = out_dir / "manifest.json"
        self.data = {}
        if self.path.exists():
            self.data = json.loads(self.path.read_text())

    def is_fresh(self, stage: str, config_hash: str, input_hashes: dict) -> bool:
        entry = self.data.get(stage)
        if entry is None:
            return False
        if entry["config_hash"] != config_hash or entry["input_hashes"] != input_hashes:
            return False
        return all(Path(p).exists() for p in entry["outputs"])

    def record(self, stage: str, config_hash: str, input_hashes: dict, outputs: list) -> None:
        self.data[stage] = {
            "config_hash": config_hash,
            "input_hashes": input_hashes,
            "outputs": [str(p) for p in outputs],
        }
        _write_json(self.path, self.data)

    def completed(self, stage: str) -> bool:
        entry = self.data.get(stage)
        return entry is not None and all(Path(p).exists() for p in entry["outputs"])


# ---------------------------------------------------------------------------
# pipeline context with lazy artifact loading


class Pipeline:
    def __init__(self, cfg: RunConfig, threads: int = 0):
        self.cfg = cfg
        self.threads = threads
        self.manifest = Manifest(cfg.out_dir)
        self._events = None
        self._giant = None  # (registry, graph)

    def stage_dir(self, stage: str) -> Path:
        d = self.cfg.out_dir / stage
        d.mkdir(parents=True, exist_ok=True)
        return d

    def require(self, stage: str) -> None:
        for dep in DEPS[stage]:
            if not self.manifest.completed(dep):
                raise DependencyError(
                    f"stage {stage!r} requires {dep!r}; run `attnet {dep}` first"
                )

    def clean_events(self) -> list:
        if self._events is None:
            path = self.cfg.out_dir / "ingest" / "events.jsonl"
            self._events, _ = ing.parse_events_files([path], self.cfg.window())
        return self._events

    def giant(self):
        if self._giant is None:
            self._giant = gr.load_snapshot(self.cfg.out_dir / "graph" / "giant.npz")
        return self._giant

    def user_countries(self) -> dict:
        out = {}
        path = self.cfg.out_dir / "ingest" / "user_countries.csv"
        with open(path, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                out[row["user_id"]] = row["country"] or None
        return out

    def partition_labels(self) -> dict:
        """user_id -> community letter label (incl. 'residual')."""
        out = {}
        path = self.cfg.out_dir / "communities" / "partition.csv"
        with open(path, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                out[row["user_id"]] = row["community_label"]
        return out

    def super_map(self) -> dict:
        """community label -> super-community name."""
        out = {}
        path = self.cfg.out_dir / "profile" / "supercommunities.csv"
        with open(path, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                out[row["community_label"]] = row["super_community"]
        return out

    def user_groups(self) -> dict:
        """user_id -> super-community; residual users route to Other."""
        smap = self.super_map()
        return {
            uid: smap.get(lab, "Other") for uid, lab in self.partition_labels().items()
        }


# ---------------------------------------------------------------------------
# stages


def stage_synth(p: Pipeline) -> dict:
    scfg = p.cfg.synth_config()
    out = p.stage_dir("synth")
    result = sy.generate(scfg)
    ing.write_events_jsonl(result.events, out / "events.jsonl")
    with open(out / "categories.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["user_id", "category"])
        for uid in sorted(result.user_categories):
            w.writerow([uid, result.user_categories[uid]])
    with open(out / "blocks.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["user_id", "block"])
        for uid in sorted(result.block_of):
            w.writerow([uid, result.block_of[uid]])
    _write_json(
        out / "expected_mixing.json",
        [
            {"start": seg.start, "end": seg.end, "expected": m.tolist()}
            for seg, m in result.expected_mixing
        ],
    )
    return {
        "events": len(result.events),
        "users": len(result.block_of),
        "blocks": len(scfg.blocks),
        "min_components": result.n_components_lower_bound,
    }


def stage_ingest(p: Pipeline) -> dict:
    out = p.stage_dir("ingest")
    events, report = ing.parse_events_files(p.cfg.events_paths(), p.cfg.window())
    gaz = ing.Gazetteer.load(p.cfg.gazetteer_path())
    countries = ing.assign_user_countries(events, gaz)
    ing.write_events_jsonl(events, out / "events.jsonl")
    with open(out / "user_countries.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["user_id", "country"])
        for uid in sorted(countries):
            w.writerow([uid, countries[uid] or ""])
    p._events = events
    return {"report": report.to_dict(), "located_users": len(countries)}


def stage_graph(p: Pipeline) -> dict:
    out = p.stage_dir("graph")
    events = p.clean_events()
    registry, g = gr.build_graph(events)
    gr.save_snapshot(out / "full.npz", registry, g)
    sub, sub_reg, comp_report, _ = gr.giant_component(g, registry)
    gr.save_snapshot(out / "giant.npz", sub_reg, sub)
    gr.export_edge_list(out / "edges.tsv", sub_reg, sub)
    dist = gr.degree_distribution(g)
    with open(out / "degree_hist.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["out_degree", "users"])
        for deg, cnt in sorted(dist.histogram().items()):
            w.writerow([deg, cnt])
    _write_json(out / "component_report.json", comp_report.to_dict())
    p._giant = (sub_reg, sub)
    return {
        "nodes": g.n,
        "edges": g.n_edges,
        "total_weight": g.total_weight,
        "giant_nodes": sub.n,
        "giant_edges": sub.n_edges,
    }


def stage_communities(p: Pipeline) -> dict:
    out = p.stage_dir("communities")
    registry, g = p.giant()
    sym = gr.symmetrize(g)
    lv = p.cfg.louvain()
    lcfg = LouvainConfig(lv["gamma"], lv["seed"], lv["max_passes"], lv["tolerance"])
    cp = consensus(sym, lcfg, lv["runs"])
    ranked = rank_communities(cp, lv["min_community_size"])
    with open(out / "partition.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["user_id", "community_label", "agreement"])
        for i in range(g.n):
            w.writerow(
                [registry.id_of(i), ranked.labels[int(cp.assignment[i])], f"{cp.agreement[i]:.6g}"]
            )
    _write_json(
        out / "consensus_meta.json",
        {
            "runs": cp.n_runs,
            "seeds": cp.run_seeds,
            "gamma": lv["gamma"],
            "q_per_run": cp.run_q,
            "reference_run": cp.reference_run,
            "n_communities": cp.n_communities,
            "labeled": ranked.label_order,
            "coverage": ranked.coverage,
            "warnings": ranked.warnings,
        },
    )
    return {
        "communities": cp.n_communities,
        "labeled": len(ranked.label_order),
        "coverage": ranked.coverage,
        "best_q": max(cp.run_q),
    }


def stage_profile(p: Pipeline) -> dict:
    out = p.stage_dir("profile")
    registry, g = p.giant()
    cats_path = p.cfg.categories_path()
    categories = ing.load_categories(cats_path) if cats_path else {}
    countries = p.user_countries()
    labels_by_user = p.partition_labels()
    user_ids = [registry.id_of(i) for i in range(g.n)]
    assignment = np.zeros(g.n, dtype=np.int64)
    label_to_cid: dict[str, int] = {}
    cid_to_label: dict[int, str] = {}
    for i, uid in enumerate(user_ids):
        lab = labels_by_user.get(uid, "residual")
        cid = label_to_cid.setdefault(lab, len(label_to_cid))
        cid_to_label[cid] = lab
        assignment[i] = cid
    profiles = prof.profile_communities(
        assignment, cid_to_label, user_ids, categories, countries, g.out_degrees()
    )
    if len(profiles) < 2:
        raise ConfigError(
            "fewer than 2 labeled communities; lower louvain.min_community_size"
        )
    fm = prof.standardize(profiles)
    dend = prof.ward_cluster(fm)
    rulebook = p.cfg.rulebook()
    k_override = p.cfg.raw.get("profile", {}).get("k")
    if k_override is not None:
        k = int(k_override)
        knee = None
    else:
        knee = prof.knee_point(dend)
        k = knee.k
    smap = prof.assign_super_communities(fm, dend, k, rulebook)
    with open(out / "profiles.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(
            ["community_label", "size"]
            + [f"share:{c}" for c in ing.CATEGORIES]
            + ["retweet_share", "internationality"]
        )
        for pr in profiles:
            w.writerow(
                [pr.label, pr.size]
                + [f"{pr.category_share[c]:.6g}" for c in ing.CATEGORIES]
                + [
                    f"{pr.retweet_share:.6g}",
                    "" if pr.internationality is None else f"{pr.internationality:.6g}",
                ]
            )
    _write_json(out / "dendrogram.json", dend.to_json_obj())
    with open(out / "supercommunities.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["community_label", "super_community"])
        for lab in fm.labels:
            w.writerow([lab, smap[lab]])
    _write_json(
        out / "feature_matrix.json",
        {
            "labels": fm.labels,
            "columns": list(fm.columns),
            "raw": fm.raw.tolist(),
            "z": fm.z.tolist(),
            "imputed": fm.imputed,
            "warnings": fm.warnings,
        },
    )
    return {
        "communities": len(profiles),
        "k": k,
        "no_clear_knee": bool(knee.no_clear_knee) if knee else False,
        "super_map": smap,
    }


def _window_slices(events: list, windows: list) -> list:
    ts = np.array([e.timestamp for e in events], dtype=np.int64)
    out = []
    for w in windows:
        lo = int(np.searchsorted(ts, w.start, side="left"))
        hi = int(np.searchsorted(ts, w.end, side="left"))
        out.append(events[lo:hi])
    return out


def stage_dynamics(p: Pipeline) -> dict:
    out = p.stage_dir("dynamics")
    events = p.clean_events()
    group_of = p.user_groups()
    wcfg = p.cfg.windows()
    windows, warns = dyn.window_series(p.cfg.window(), wcfg["weekly"], wcfg["weekly"])
    slices = _window_slices(events, windows)
    mixing = []
    rows_out = []
    for window, ev in zip(windows, slices):
        m = dyn.mixing_matrix(ev, group_of, window=window)
        act = dyn.activity_counts(ev, group_of, window=window)
        mixing.append(m.to_json_obj())
        for row in dyn.attention_metrics(m, act.original_counts, act.active_posters):
            rows_out.append((window.start, row))
    with open(out / "attention.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["window_start", "super_community", "N", "A_u", "a_ext", "a_int", "activity"])
        for start, row in rows_out:
            fmt = lambda v: "" if v is None else f"{float(v):.10g}"  # noqa: E731
            w.writerow(
                [start, row.group, row.n_users, fmt(row.attention_per_user),
                 fmt(row.a_ext), fmt(row.a_int), fmt(row.activity)]
            )
    _write_json(out / "mixing.json", mixing)
    return {"windows": len(windows), "warnings": warns}


def stage_attention(p: Pipeline) -> dict:
    out = p.stage_dir("attention")
    events = p.clean_events()
    group_of = p.user_groups()
    records, tally_report = attn.tally_attention(events, group_of)
    cohort = attn.select_top_users(records, p.cfg.cohort_k(), prof.SUPER_COMMUNITIES)
    rt_table = attn.rank_cohort(cohort, "retweets")
    h_table = attn.rank_cohort(cohort, "h_index")
    with open(out / "cohort.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["user_id", "super_community", "retweets", "h_index", "r_rt", "r_h"])
        for i, rec in enumerate(cohort.records):
            w.writerow(
                [rec.user_id, rec.group, rec.retweets_received, rec.h_index,
                 int(rt_table.ranks[i]), int(h_table.ranks[i])]
            )
    wcfg = p.cfg.windows()
    windows, _ = dyn.window_series(p.cfg.window(), wcfg["rolling_width"], wcfg["rolling_step"])
    boot = p.cfg.bootstrap()
    points, notes = attn.rolling_attention(
        events, cohort, windows, group_of,
        n_resamples=boot["resamples"], level=boot["level"], seed=boot["seed"],
        groups=prof.SUPER_COMMUNITIES,
    )
    with open(out / "trajectories.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(
            ["window_start", "super_community", "mean_r_rt", "ci_lo", "ci_hi",
             "mean_r_h", "ci_lo", "ci_hi"]
        )
        for pt in points:
            w.writerow(
                [pt.window.start, pt.group, f"{pt.mean_r_rt:.6g}",
                 f"{pt.rt_ci[0]:.6g}", f"{pt.rt_ci[1]:.6g}", f"{pt.mean_r_h:.6g}",
                 f"{pt.h_ci[0]:.6g}", f"{pt.h_ci[1]:.6g}"]
            )
    return {
        "cohort": len(cohort.records),
        "cohort_retweet_share": cohort.retweet_share,
        "missing_tweet_id": tally_report.missing_tweet_id,
        "windows": len(windows),
        "notes": notes,
        "warnings": cohort.warnings,
    }


def stage_stats(p: Pipeline) -> dict:
    out = p.stage_dir("stats")
    registry, g = gr.load_snapshot(p.cfg.out_dir / "graph" / "full.npz")
    degrees = g.out_degrees()
    samples = degrees[degrees > 0]
    fit = st.fit_powerlaw_cutoff(samples, x_min=p.cfg.stats_x_min())
    _write_json(out / "powerlaw.json", fit.to_dict())
    with open(out / "degree_hist.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["out_degree", "users"])
        vals, counts = np.unique(samples, return_counts=True)
        for v, c in zip(vals, counts):
            w.writerow([int(v), int(c)])
    return {"fit": fit.to_dict()}


STAGE_FUNCS = {
    "synth": stage_synth,
    "ingest": stage_ingest,
    "graph": stage_graph,
    "communities": stage_communities,
    "profile": stage_profile,
    "dynamics": stage_dynamics,
    "attention": stage_attention,
    "stats": stage_stats,
}


def _stage_inputs(p: Pipeline, stage: str) -> dict:
    """Content hashes of the files a stage consumes."""
    cfg = p.cfg
    files: list[Path] = []
    if stage == "ingest":
        files += cfg.events_paths()
        files.append(cfg.gazetteer_path())
    elif stage == "graph":
        files.append(cfg.out_dir / "ingest" / "events.jsonl")
    elif stage == "communities":
        files.append(cfg.out_dir / "graph" / "giant.npz")
    elif stage == "profile":
        files.append(cfg.out_dir / "communities" / "partition.csv")
        files.append(cfg.out_dir / "ingest" / "user_countries.csv")
        cp = cfg.categories_path()
        if cp:
            files.append(cp)
    elif stage in ("dynamics", "attention"):
        files.append(cfg.out_dir / "ingest" / "events.jsonl")
        files.append(cfg.out_dir / "profile" / "supercommunities.csv")
        files.append(cfg.out_dir / "communities" / "partition.csv")
    elif stage == "stats":
        files.append(cfg.out_dir / "graph" / "full.npz")
    return {str(f): _hash_file(f) for f in files if f.exists()}


def run_stage(p: Pipeline, stage: str, force: bool = False) -> dict:
    """Run one stage with manifest-based caching. Returns the stage report."""
    p.require(stage)
    cfg_hash = p.cfg.config_hash()
    inputs = _stage_inputs(p, stage)
    report_path = p.stage_dir(stage) / "report.json"
    if not force and p.manifest.is_fresh(stage, cfg_hash, inputs):
        report = json.loads(report_path.read_text())
        report["cache_hit"] = True
        click.echo(f"[{stage}] cached, skipping")
        return report
    info = STAGE_FUNCS[stage](p)
    report = {
        "stage": stage,
        "attnet_version": __version__,
        "config_hash": cfg_hash,
        "input_hashes": inputs,
        "cache_hit": False,
        **info,
    }
    _write_json(report_path, report)
    outputs = [q for q in p.stage_dir(stage).iterdir() if q.suffix != ".tmp"]
    p.manifest.record(stage, cfg_hash, inputs, sorted(outputs))
    click.echo(f"[{stage}] done")
    return report


# ---------------------------------------------------------------------------
# CLI


@click.group()
@click.option("--config", "config_path", type=click.Path(path_type=Path), default=None)
@click.option("--threads", type=int, default=0, help="Global worker cap (0 = auto).")
@click.option("--seed-override", type=int, default=None)
@click.option("--verbose", is_flag=True)
@click.pass_context
def main(ctx, config_path, threads, seed_override, verbose):
    """attnet: temporal retweet-network analytics pipeline."""
    logging.basicConfig(level=logging.DEBUG if verbose else logging.WARNING)
    ctx.ensure_object(dict)
    ctx.obj["config_path"] = config_path
    ctx.obj["threads"] = threads
    ctx.obj["seed_override"] = seed_override


def _pipeline(ctx) -> Pipeline:
    path = ctx.obj.get("config_path")
    if path is None:
        raise ConfigError("missing --config")
    cfg = RunConfig.load(path, ctx.obj.get("seed_override"))
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    return Pipeline(cfg, ctx.obj.get("threads", 0))


def _run(ctx, stage: str) -> None:
    try:
        p = _pipeline(ctx)
        run_stage(p, stage)
    except (ConfigError, ing.IngestError) as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(1)
    except DependencyError as exc:
        click.echo(f"dependency error: {exc}", err=True)
        sys.exit(2)
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        logger.exception("stage %s failed", stage)
        click.echo(f"runtime error in {stage}: {exc}", err=True)
        sys.exit(3)


def _make_stage_command(stage_name: str):
    @main.command(name=stage_name)
    @click.pass_context
    def _cmd(ctx):
        _run(ctx, stage_name)

    _cmd.__doc__ = f"Run the {stage_name} stage."
    return _cmd


for _s in STAGES:
    if _s not in ("ingest",):
        _make_stage_command(_s)


@main.command(name="ingest")
@click.option("--events", "events", multiple=True, type=click.Path(path_type=Path))
@click.option("--from", "t_from", default=None, help="Window start (ISO or epoch).")
@click.option("--to", "t_to", default=None, help="Window end (ISO or epoch).")
@click.option("--gazetteer", type=click.Path(path_type=Path), default=None)
@click.option("--out", "out_dir", type=click.Path(path_type=Path), default=None)
@click.pass_context
def ingest_cmd(ctx, events, t_from, t_to, gazetteer, out_dir):
    """Run the ingest stage (config-driven, or via explicit flags)."""
    if events or t_from or t_to or out_dir:
        try:
            if not (events and t_from and t_to and out_dir):
                raise ConfigError("ingest flags require --events, --from, --to, --out")
            raw = {
                "paths": {
                    "events": [str(e) for e in events],
                    "out": str(out_dir),
                    "gazetteer": str(gazetteer) if gazetteer else "builtin",
                },
                "window": {"start": t_from, "end": t_to},
            }
            cfg = RunConfig(raw=raw, path=Path.cwd() / "cli", out_dir=Path(out_dir).resolve(),
                            seed_override=ctx.obj.get("seed_override"))
            cfg.validate()
            cfg.out_dir.mkdir(parents=True, exist_ok=True)
            run_stage(Pipeline(cfg), "ingest")
        except (ConfigError, ing.IngestError) as exc:
            click.echo(f"config error: {exc}", err=True)
            sys.exit(1)
        except Exception as exc:  # noqa: BLE001
            click.echo(f"runtime error in ingest: {exc}", err=True)
            sys.exit(3)
    else:
        _run(ctx, "ingest")


@main.command(name="all")
@click.pass_context
def all_cmd(ctx):
    """Run every stage in dependency order."""
    try:
        p = _pipeline(ctx)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(1)
    order = [s for s in STAGES if s != "synth"]
    if "synth" in p.cfg.raw:
        order = ["synth"] + order
    for stage in order:
        try:
            run_stage(p, stage)
        except (ConfigError, ing.IngestError) as exc:
            click.echo(f"config error: {exc}", err=True)
            sys.exit(1)
        except DependencyError as exc:
            click.echo(f"dependency error: {exc}", err=True)
            sys.exit(2)
        except Exception as exc:  # noqa: BLE001
            logger.exception("stage %s failed", stage)
            click.echo(f"runtime error in {stage}: {exc}", err=True)
            sys.exit(3)


if __name__ == "__main__":
    main()
