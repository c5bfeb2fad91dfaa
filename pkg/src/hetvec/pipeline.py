"""End-to-end orchestration: ingest, walks, embeddings, features, classifiers.

Stages read their inputs from files written by earlier stages, so a re-run
skips any stage whose outputs exist and whose config hash matches, and the
remaining stages still compose. The config is a flat key/value file; every
CLI flag has a config twin.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import classify as clf
from . import docembed, features, projection, sampling, sgns, synth
from .errors import ConfigError, StageError
from .graph import (
    HetGraph,
    NodeRef,
    NodeType,
    build_graph,
    ingest_submission_records,
    load_snapshot,
    project_author_degrees,
    read_records,
    save_snapshot,
)
from .util import derive_seed, fmt_float

DEFAULT_CONFIG: dict[str, str] = {
    "seed": "0",
    "synth.enabled": "true",
    "synth.n_communities": "3",
    "synth.subreddits_per_community": "10",
    "synth.authors_per_community": "200",
    "synth.submissions_per_author": "4",
    "synth.p_in": "0.85",
    "synth.target_community": "0",
    "synth.topic_vocab_size": "60",
    "synth.shared_vocab_size": "140",
    "synth.words_per_doc": "30",
    "synth.text_noise": "0.25",
    "synth.label_rule": "graph_and_text",
    "input.records": "",
    "input.labels": "",
    "fire.enabled": "false",
    "fire.burn_prob": "0.7",
    "fire.target_size": "1000",
    "fire.seeds": "",
    "fire.max_restarts": "10",
    "walks.schema": "r,s,a,s,r",
    "walks.per_start": "50",
    "walks.length": "60",
    "walks.min_emit": "2",
    "embed.dim": "64",
    "embed.window": "7",
    "embed.negatives": "5",
    "embed.epochs": "10",
    "embed.min_count": "5",
    "embed.mode": "mp2v",
    "docs.dim": "50",
    "docs.window": "10",
    "docs.negatives": "5",
    "docs.min_count": "2",
    "docs.epochs": "12",
    "docs.infer_epochs": "40",
    "features.target": "auto",
    "features.use_stds": "false",
    "clf.test_fraction": "0.3",
    "clf.ratio": "1.0",
    "clf.lr": "0.1",
    "clf.l2": "0.0001",
    "clf.max_iters": "3000",
    "clf.tol": "1e-6",
    "project.max_tokens": "400",
}


def read_config(path: str | Path) -> dict[str, str]:
    """Parse a flat 'key = value' file; '#' starts a comment line."""
    out: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            out[key.strip()] = value.strip()
    return out


def write_config(cfg: dict[str, str], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for key in sorted(cfg):
            fh.write(f"{key} = {cfg[key]}\n")


def merge_config(overrides: dict[str, str] | None) -> dict[str, str]:
    cfg = dict(DEFAULT_CONFIG)
    for key, value in (overrides or {}).items():
        if key not in DEFAULT_CONFIG:
            raise ConfigError(f"unknown config key {key!r}")
        cfg[key] = str(value)
    return cfg


def _as_bool(value: str) -> bool:
    if value.lower() in ("true", "1", "yes"):
        return True
    if value.lower() in ("false", "0", "no"):
        return False
    raise ConfigError(f"expected a boolean, got {value!r}")


@dataclass
class PipelineResult:
    out_dir: Path
    stages_run: list = field(default_factory=list)
    stages_skipped: list = field(default_factory=list)
    metrics: dict = field(default_factory=dict)
    report_path: Path | None = None


class _Context:
    def __init__(self, cfg: dict[str, str], out_dir: Path):
        self.cfg = cfg
        self.out = out_dir
        self.seed = int(cfg["seed"])
        self._graph: HetGraph | None = None
        self._models: dict = {}

    def path(self, name: str) -> Path:
        return self.out / name

    def active_graph(self) -> HetGraph:
        if self._graph is None:
            snap = self.path("graph_fire.snap")
            if not (_as_bool(self.cfg["fire.enabled"]) and snap.exists()):
                snap = self.path("graph.snap")
            self._graph = load_snapshot(snap)
        return self._graph

    def doc_model(self, variant: str) -> docembed.DocModel:
        if variant not in self._models:
            self._models[variant] = docembed.load_doc_model(self.path(f"{variant}.model"))
        return self._models[variant]

    def target_token(self) -> str:
        value = self.cfg["features.target"]
        if value != "auto":
            return value
        if not _as_bool(self.cfg["synth.enabled"]):
            raise ConfigError("features.target must be set when synth is disabled")
        return "r:" + synth.target_subreddit(self._synth_config())

    def _synth_config(self) -> synth.SynthConfig:
        c = self.cfg
        return synth.SynthConfig(
            n_communities=int(c["synth.n_communities"]),
            subreddits_per_community=int(c["synth.subreddits_per_community"]),
            authors_per_community=int(c["synth.authors_per_community"]),
            submissions_per_author=int(c["synth.submissions_per_author"]),
            p_in=float(c["synth.p_in"]),
            target_community=int(c["synth.target_community"]),
            topic_vocab_size=int(c["synth.topic_vocab_size"]),
            shared_vocab_size=int(c["synth.shared_vocab_size"]),
            words_per_doc=int(c["synth.words_per_doc"]),
            text_noise=float(c["synth.text_noise"]),
            label_rule=c["synth.label_rule"],
            rng_seed=derive_seed(self.seed, "synth"),
        )

    def records_path(self) -> Path:
        if _as_bool(self.cfg["synth.enabled"]):
            return self.path("records.jsonl")
        return Path(self.cfg["input.records"])

    def labels_path(self) -> Path:
        if _as_bool(self.cfg["synth.enabled"]):
            return self.path("labels.csv")
        return Path(self.cfg["input.labels"])


def _stage_synth(ctx: _Context) -> None:
    cfg = ctx._synth_config()
    dataset = synth.synth_generate(cfg, ctx.out)
    with open(ctx.path("synth_stats.txt"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"authors {dataset.n_authors}\n")
        fh.write(f"submissions {dataset.n_submissions}\n")
        fh.write(f"positive_authors {dataset.n_positive}\n")


def _stage_graph(ctx: _Context) -> None:
    ingest = ingest_submission_records(read_records(ctx.records_path()))
    graph = build_graph(ingest.edges)
    save_snapshot(graph, ctx.path("graph.snap"))
    docembed.write_doc_records(ingest.documents, ctx.path("docs.jsonl"))
    stats = project_author_degrees(graph)
    with open(ctx.path("degree_stats.txt"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"authors_projected_mean {fmt_float(stats.mean)}\n")
        fh.write(f"authors_projected_std {fmt_float(stats.std_dev)}\n")
        fh.write(f"nodes {graph.n_nodes}\n")
        fh.write(f"edges {graph.edge_count}\n")
        fh.write(f"ingest_skipped {ingest.skipped}\n")
        for degree, count in stats.histogram.items():
            fh.write(f"degree {degree} {count}\n")
    ctx._graph = None


def _stage_fire(ctx: _Context) -> None:
    graph = load_snapshot(ctx.path("graph.snap"))
    seeds_cfg = ctx.cfg["fire.seeds"].strip()
    if seeds_cfg:
        seeds = tuple(NodeRef.from_token(t) for t in seeds_cfg.split(","))
    else:
        seeds = (NodeRef.from_token(ctx.target_token()),)
    fire_cfg = sampling.ForestFireConfig(
        burn_prob=float(ctx.cfg["fire.burn_prob"]),
        target_size=int(ctx.cfg["fire.target_size"]),
        seed_nodes=seeds,
        max_restarts=int(ctx.cfg["fire.max_restarts"]),
        rng_seed=derive_seed(ctx.seed, "fire"),
    )
    burned = sampling.forest_fire_sample(graph, fire_cfg)
    from .graph import subgraph

    save_snapshot(subgraph(graph, burned), ctx.path("graph_fire.snap"))
    ctx._graph = None


def _stage_walks(ctx: _Context) -> None:
    graph = ctx.active_graph()
    schema = sampling.MetapathSchema.parse(ctx.cfg["walks.schema"])
    cfg = sampling.WalkConfig(
        walks_per_start=int(ctx.cfg["walks.per_start"]),
        walk_length=int(ctx.cfg["walks.length"]),
        min_emit_length=int(ctx.cfg["walks.min_emit"]),
        rng_seed=derive_seed(ctx.seed, "walks"),
    )
    stats = sampling.metapath_walks(graph, schema, cfg, ctx.path("corpus.txt"))
    with open(ctx.path("walk_stats.txt"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"emitted {stats.emitted}\n")
        fh.write(f"truncated {stats.truncated}\n")
        fh.write(f"dropped {stats.dropped}\n")
        fh.write(f"steps {stats.steps}\n")


def _stage_embed_graph(ctx: _Context) -> None:
    cfg = sgns.SgnsConfig(
        dimension=int(ctx.cfg["embed.dim"]),
        window=int(ctx.cfg["embed.window"]),
        negatives=int(ctx.cfg["embed.negatives"]),
        epochs=int(ctx.cfg["embed.epochs"]),
        min_count=int(ctx.cfg["embed.min_count"]),
        mode=ctx.cfg["embed.mode"],
        rng_seed=derive_seed(ctx.seed, "embed-graph"),
    )
    result = sgns.train_skipgram(ctx.path("corpus.txt"), cfg)
    sgns.save_embeddings(result.embedding, result.vocab, ctx.path("graph_emb.txt"))


def _doc_config(ctx: _Context, seed_tag: str) -> docembed.DocConfig:
    return docembed.DocConfig(
        dimension=int(ctx.cfg["docs.dim"]),
        window=int(ctx.cfg["docs.window"]),
        negatives=int(ctx.cfg["docs.negatives"]),
        min_count=int(ctx.cfg["docs.min_count"]),
        epochs=int(ctx.cfg["docs.epochs"]),
        infer_epochs=int(ctx.cfg["docs.infer_epochs"]),
        rng_seed=derive_seed(ctx.seed, seed_tag),
    )


def _stage_embed_docs(ctx: _Context) -> None:
    records = docembed.read_doc_records(ctx.path("docs.jsonl"))
    docs, _ = docembed.tag_documents(records)
    dbow = docembed.train_dbow(docs, _doc_config(ctx, "embed-dbow"))
    docembed.save_doc_model(dbow, ctx.path("dbow.model"))
    dmm = docembed.train_dmm(docs, _doc_config(ctx, "embed-dmm"))
    docembed.save_doc_model(dmm, ctx.path("dmm.model"))
    ctx._models.clear()


def _stage_profiles(ctx: _Context) -> None:
    records = docembed.read_doc_records(ctx.path("docs.jsonl"))
    docs, _ = docembed.tag_documents(records)
    docs_by_author: dict[str, list] = {}
    for doc in docs:
        author = doc.tags[1].partition(":")[2]
        docs_by_author.setdefault(author, []).append(list(doc.tokens))
    dbow = ctx.doc_model("dbow")
    dmm = ctx.doc_model("dmm")
    target = ctx.target_token()
    profiles = []
    for author in sorted(docs_by_author):
        prof = features.author_target_similarity(
            dbow,
            dmm,
            author,
            docs_by_author[author],
            target,
            seed=derive_seed(ctx.seed, "profiles", author),
        )
        if prof is not None:
            profiles.append(prof)
    features.write_profile_csv(profiles, ctx.path("profiles.csv"))


def _stage_features(ctx: _Context) -> None:
    emb, vocab = sgns.load_embeddings(ctx.path("graph_emb.txt"))
    labels = synth.read_labels(ctx.labels_path())
    profiles = features.read_profile_csv(ctx.path("profiles.csv"))
    graph_vectors = {}
    for author in labels:
        token = f"a:{author}"
        if token in vocab:
            graph_vectors[author] = emb.input_vectors[vocab.id_of(token)]
    # one shared author set keeps the three modes comparable
    authors = sorted(a for a in labels if a in graph_vectors and a in profiles)
    use_stds = _as_bool(ctx.cfg["features.use_stds"])
    for mode in features.MODES:
        rows, _ = features.build_feature_table(
            authors, labels, graph_vectors, profiles, mode, use_stds
        )
        features.write_feature_csv(rows, ctx.path(f"features_{mode}.csv"))
    target = ctx.target_token()
    with open(ctx.path("sims.csv"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("author,graph_sim,dbow_mean,dmm_mean\n")
        for author in authors:
            gsim = features.graph_target_similarity(emb, vocab, f"a:{author}", target)
            p = profiles[author]
            fh.write(
                f"{author},{fmt_float(gsim)},{fmt_float(p.dbow_mean)},{fmt_float(p.dmm_mean)}\n"
            )
    dropped = len(labels) - len(authors)
    with open(ctx.path("feature_stats.txt"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"authors {len(authors)}\n")
        fh.write(f"dropped {dropped}\n")


def _stage_classify(ctx: _Context) -> None:
    seed = derive_seed(ctx.seed, "classify")
    ref_rows = features.read_feature_csv(ctx.path("features_integrated.csv"), "integrated")
    train_ref, test_ref = clf.split_dataset(
        ref_rows, float(ctx.cfg["clf.test_fraction"]), seed
    )
    train_authors = {r.author for r in train_ref}
    test_authors = {r.author for r in test_ref}
    for mode in features.MODES:
        rows = features.read_feature_csv(ctx.path(f"features_{mode}.csv"), mode)
        by_author = {r.author: r for r in rows}
        train = [by_author[r.author] for r in train_ref if r.author in by_author]
        test = [by_author[r.author] for r in test_ref if r.author in by_author]
        if {r.author for r in train} != train_authors or {r.author for r in test} != test_authors:
            raise ConfigError(f"feature table for {mode} does not cover the shared author set")
        pos = [r for r in train if r.label == 1]
        neg = [r for r in train if r.label == 0]
        balanced = clf.balanced_subsample(
            pos, neg, float(ctx.cfg["clf.ratio"]), derive_seed(seed, "balance", mode)
        )
        model = clf.train_logreg(
            balanced,
            lr=float(ctx.cfg["clf.lr"]),
            l2=float(ctx.cfg["clf.l2"]),
            max_iters=int(ctx.cfg["clf.max_iters"]),
            tol=float(ctx.cfg["clf.tol"]),
            seed=seed,
        )
        clf.save_model(model, ctx.path(f"model_{mode}.txt"))
        _, preds = clf.predict(model, test)
        cm = clf.evaluate(preds, [r.label for r in test])
        with open(ctx.path(f"metrics_{mode}.txt"), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(clf.metrics_report(cm))
    labels = [r.label for r in test_ref]
    baseline = max(labels.count(0), labels.count(1)) / len(labels)
    with open(ctx.path("baseline.txt"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"majority_class_accuracy {fmt_float(baseline)}\n")
        fh.write(f"test_rows {len(labels)}\n")
        fh.write(f"test_positive {labels.count(1)}\n")


def _stage_project(ctx: _Context) -> None:
    emb, vocab = sgns.load_embeddings(ctx.path("graph_emb.txt"))
    limit = int(ctx.cfg["project.max_tokens"])
    subreddits = [t for t in vocab.tokens if t.startswith("r:")]
    authors = [t for t in vocab.tokens if t.startswith("a:")]
    tokens = sorted(subreddits) + sorted(authors)[: max(0, limit - len(subreddits))]
    proj = projection.pca_project_2d(emb, vocab, tokens)
    projection.write_projection_csv(proj, ctx.path("projection.csv"))


def _stage_report(ctx: _Context) -> None:
    emb, vocab = sgns.load_embeddings(ctx.path("graph_emb.txt"))
    target = ctx.target_token()
    lines: list[str] = ["== pipeline report ==", ""]

    lines.append("-- graph --")
    lines.extend(
        open(ctx.path("degree_stats.txt"), encoding="utf-8").read().splitlines()[:4]
    )
    lines.append("")

    lines.append(f"-- 10 nearest subreddits to {target} (graph embedding) --")
    if target in vocab:
        for tok, sim in features.nearest_neighbors(emb, vocab, target, 10, NodeType.SUBREDDIT):
            lines.append(f"{tok} {sim:.4f}")
    else:
        lines.append("target not in graph vocabulary")
    lines.append("")

    for variant in ("dbow", "dmm"):
        model = ctx.doc_model(variant)
        lines.append(f"-- 15 nearest subreddit tags to {target} ({variant}) --")
        sub_tags = [t for t in model.tag_names if t.startswith("r:") and t != target]
        if target in model.tag_index:
            tv = model.tag_vector(target)
            sims = sorted(
                ((features.cosine(model.tag_vector(t), tv), t) for t in sub_tags),
                key=lambda st: (-st[0], st[1]),
            )
            for sim, tok in sims[:15]:
                lines.append(f"{tok} {sim:.4f}")
        else:
            lines.append("target tag not in model")
        lines.append("")

    lines.append("-- similarity correlations --")
    cols: dict[str, list[float]] = {"graph_sim": [], "dbow_mean": [], "dmm_mean": []}
    with open(ctx.path("sims.csv"), encoding="utf-8") as fh:
        next(fh)
        for line in fh:
            _, g, b, m = line.strip().split(",")
            cols["graph_sim"].append(float(g))
            cols["dbow_mean"].append(float(b))
            cols["dmm_mean"].append(float(m))
    names, mat = features.pearson_matrix(cols)
    lines.append("columns " + " ".join(names))
    for name, row in zip(names, mat):
        lines.append(name + " " + " ".join(f"{x:.4f}" for x in row))
    lines.append("")

    lines.extend(open(ctx.path("baseline.txt"), encoding="utf-8").read().splitlines())
    lines.append("")
    for mode in features.MODES:
        lines.append(f"-- confusion matrix: {mode} --")
        lines.extend(
            open(ctx.path(f"metrics_{mode}.txt"), encoding="utf-8").read().splitlines()
        )
        lines.append("")
    lines.append(f"projection: {ctx.path('projection.csv').name}")
    with open(ctx.path("report.txt"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


_STAGES: list[tuple[str, tuple, object]] = [
    ("synth", ("records.jsonl", "labels.csv", "synth_stats.txt"), _stage_synth),
    ("graph", ("graph.snap", "docs.jsonl", "degree_stats.txt"), _stage_graph),
    ("fire", ("graph_fire.snap",), _stage_fire),
    ("walks", ("corpus.txt", "walk_stats.txt"), _stage_walks),
    ("embed_graph", ("graph_emb.txt",), _stage_embed_graph),
    ("embed_docs", ("dbow.model", "dmm.model"), _stage_embed_docs),
    ("profiles", ("profiles.csv",), _stage_profiles),
    (
        "features",
        tuple(f"features_{m}.csv" for m in features.MODES) + ("sims.csv", "feature_stats.txt"),
        _stage_features,
    ),
    (
        "classify",
        tuple(f"metrics_{m}.txt" for m in features.MODES)
        + tuple(f"model_{m}.txt" for m in features.MODES)
        + ("baseline.txt",),
        _stage_classify,
    ),
    ("project", ("projection.csv",), _stage_project),
    ("report", ("report.txt",), _stage_report),
]


def _config_hash(cfg: dict[str, str], stage: str) -> str:
    blob = stage + "\n" + "\n".join(f"{k}={cfg[k]}" for k in sorted(cfg))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def run_pipeline(
    config: dict[str, str] | str | Path | None, out_dir: str | Path
) -> PipelineResult:
    """Run every enabled stage, memoizing on (outputs exist, config hash matches)."""
    if isinstance(config, (str, Path)):
        config = read_config(config)
    cfg = merge_config(config)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stamps = out / "stamps"
    stamps.mkdir(exist_ok=True)
    write_config(cfg, out / "config.resolved")

    ctx = _Context(cfg, out)
    result = PipelineResult(out)
    for name, outputs, fn in _STAGES:
        if name == "synth" and not _as_bool(cfg["synth.enabled"]):
            continue
        if name == "fire" and not _as_bool(cfg["fire.enabled"]):
            continue
        digest = _config_hash(cfg, name)
        stamp = stamps / f"{name}.hash"
        outputs_ok = all(ctx.path(o).exists() for o in outputs)
        if outputs_ok and stamp.exists() and stamp.read_text(encoding="utf-8").strip() == digest:
            result.stages_skipped.append(name)
            continue
        try:
            fn(ctx)
        except Exception as exc:
            raise StageError(name, exc) from exc
        stamp.write_text(digest + "\n", encoding="utf-8")
        result.stages_run.append(name)

    for mode in features.MODES:
        path = ctx.path(f"metrics_{mode}.txt")
        if path.exists():
            result.metrics[mode] = clf.parse_metrics_report(path.read_text(encoding="utf-8"))
    baseline_path = ctx.path("baseline.txt")
    if baseline_path.exists():
        for line in baseline_path.read_text(encoding="utf-8").splitlines():
            key, _, value = line.partition(" ")
            if key == "majority_class_accuracy":
                result.metrics["baseline"] = float(value)
    result.report_path = ctx.path("report.txt")
    return result
