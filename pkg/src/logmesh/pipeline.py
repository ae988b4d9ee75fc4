"""End-to-end orchestration: parse, group, embed, build graphs, split,
train, score, explain, and report, driven by one JSON config with
reproducible seeds and per-stage timing."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import evalkit, io
from .digcn import ModelConfig
from .errors import ConfigError, LogmeshError
from .explain import explain_graph, export_dot
from .graphbuild import build_graph
from .grouping import ANOMALOUS, group_by_identifier, label_groups, window_split
from .logparse import Drain, FormatDescriptor, MaskRule, parse_file
from .ocsvdd import TrainConfig, new_model, save_model, score_graphs, train
from .semantics import TemplateEmbeddingTable, load_vectors, onehot_table, semantic_table

log = logging.getLogger(__name__)

SEED_ENV = "LOGMESH_SEED"


@dataclass
class DrainOptions:
    depth: int = 4
    similarity: float = 0.4
    max_children: int = 100


@dataclass
class SourceConfig:
    """Either a raw log file (with its format) or a synthetic benchmark."""

    log: str | None = None
    format: str | None = None
    masks: list[str] = field(default_factory=list)
    id_field: str | None = None
    id_pattern: str | None = None
    labels: str | None = None
    drain: DrainOptions = field(default_factory=DrainOptions)
    synthetic: dict | None = None


@dataclass
class GroupingConfig:
    by: str = "id"  # "id" or "id-window"
    window: int = 100


@dataclass
class EmbeddingConfig:
    mode: str = "semantic"  # or "onehot"
    vectors: str | None = None


@dataclass
class SplitConfig:
    ratios: tuple[float, float, float] = (0.70, 0.05, 0.25)
    seed: int = 0


@dataclass
class PipelineConfig:
    source: SourceConfig
    out_dir: str
    grouping: GroupingConfig = field(default_factory=GroupingConfig)
    embedding: EmbeddingConfig = field(default_factory=EmbeddingConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    split: SplitConfig = field(default_factory=SplitConfig)
    contamination: float = 0.0
    report_quantile: float = 0.99
    explain_top: int = 3


def config_from_dict(data: dict) -> PipelineConfig:
    """Build a PipelineConfig from plain JSON data; unknown keys are
    rejected so typos do not silently disable options."""

    def pick(cls, payload, where):
        if not isinstance(payload, dict):
            raise ConfigError(f"{where}: expected an object")
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(payload) - known
        if unknown:
            raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
        return cls(**payload)

    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    known_top = {"source", "out_dir", "grouping", "embedding", "model", "train", "split",
                 "contamination", "report_quantile", "explain_top"}
    unknown = set(data) - known_top
    if unknown:
        raise ConfigError(f"config: unknown keys {sorted(unknown)}")
    if "source" not in data or "out_dir" not in data:
        raise ConfigError("config needs 'source' and 'out_dir'")
    src = dict(data["source"])
    drain_opts = pick(DrainOptions, src.pop("drain", {}), "source.drain")
    source = pick(SourceConfig, src, "source")
    source.drain = drain_opts
    split_data = dict(data.get("split", {}))
    if "ratios" in split_data:
        split_data["ratios"] = tuple(split_data["ratios"])
    return PipelineConfig(
        source=source,
        out_dir=data["out_dir"],
        grouping=pick(GroupingConfig, data.get("grouping", {}), "grouping"),
        embedding=pick(EmbeddingConfig, data.get("embedding", {}), "embedding"),
        model=pick(ModelConfig, data.get("model", {}), "model"),
        train=pick(TrainConfig, data.get("train", {}), "train"),
        split=pick(SplitConfig, split_data, "split"),
        contamination=data.get("contamination", 0.0),
        report_quantile=data.get("report_quantile", 0.99),
        explain_top=data.get("explain_top", 3),
    )


def load_config(path: str) -> PipelineConfig:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    cfg = config_from_dict(data)
    seed_override = os.environ.get(SEED_ENV)
    if seed_override is not None:
        try:
            seed = int(seed_override)
        except ValueError as exc:
            raise ConfigError(f"{SEED_ENV}={seed_override!r} is not an integer") from exc
        cfg.train.seed = seed
        cfg.split.seed = seed
        if cfg.source.synthetic is not None:
            cfg.source.synthetic = {**cfg.source.synthetic, "seed": seed}
    return cfg


def validate_config(cfg: PipelineConfig) -> list[str]:
    errors = []
    src = cfg.source
    if (src.log is None) == (src.synthetic is None):
        errors.append("source: exactly one of 'log' or 'synthetic' must be set")
    if src.log is not None:
        if not os.path.isfile(src.log):
            errors.append(f"source.log: no such file {src.log!r}")
        if not src.format:
            errors.append("source.format is required with source.log")
        if src.labels is not None and not os.path.isfile(src.labels):
            errors.append(f"source.labels: no such file {src.labels!r}")
    if src.synthetic is not None:
        errors.extend(evalkit.SyntheticSpec(**src.synthetic).validate())
    if cfg.grouping.by not in ("id", "id-window"):
        errors.append("grouping.by must be 'id' or 'id-window'")
    if cfg.grouping.window < 1:
        errors.append("grouping.window must be >= 1")
    if cfg.embedding.mode not in ("semantic", "onehot"):
        errors.append("embedding.mode must be 'semantic' or 'onehot'")
    if cfg.embedding.mode == "semantic" and src.log is not None:
        if cfg.embedding.vectors is None:
            errors.append("embedding.vectors is required in semantic mode")
        elif not os.path.isfile(cfg.embedding.vectors):
            errors.append(f"embedding.vectors: no such file {cfg.embedding.vectors!r}")
    errors.extend(f"model.{e}" for e in cfg.model.validate())
    errors.extend(f"train.{e}" for e in cfg.train.validate())
    ratios = cfg.split.ratios
    if len(ratios) != 3 or abs(sum(ratios) - 1.0) > 1e-9 or min(ratios) < 0:
        errors.append(f"split.ratios {ratios} must be three non-negatives summing to 1")
    if not 0.0 <= cfg.contamination <= 0.5:
        errors.append("contamination must be in [0, 0.5]")
    if not 0.0 < cfg.report_quantile <= 1.0:
        errors.append("report_quantile must be in (0, 1]")
    if cfg.explain_top < 1:
        errors.append("explain_top must be >= 1")
    return errors


def _config_fingerprint(cfg: PipelineConfig) -> str:
    blob = json.dumps(asdict(cfg), sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()


class _StageClock:
    def __init__(self):
        self.timings: dict[str, float] = {}

    def run(self, name: str, fn):
        start = time.perf_counter()
        try:
            return fn()
        except LogmeshError as exc:
            first = exc.args[0] if exc.args else str(exc)
            exc.args = (f"[stage {name}] {first}",) + tuple(exc.args[1:])
            raise
        finally:
            self.timings[name] = round(time.perf_counter() - start, 6)


def _descriptor(src: SourceConfig) -> FormatDescriptor:
    return FormatDescriptor(
        src.format,
        id_field=src.id_field,
        id_pattern=src.id_pattern,
        masks=[MaskRule(p) for p in src.masks],
    )


def run_pipeline(cfg: PipelineConfig) -> dict:
    """Execute every stage, writing each intermediate artifact under
    cfg.out_dir; returns the run report (also written as report.json)."""
    problems = validate_config(cfg)
    if problems:
        raise ConfigError("; ".join(problems))
    out = cfg.out_dir
    os.makedirs(out, exist_ok=True)
    os.makedirs(os.path.join(out, "dot"), exist_ok=True)
    clock = _StageClock()
    counts: dict[str, int] = {}

    if cfg.source.synthetic is not None:
        spec = evalkit.SyntheticSpec(**cfg.source.synthetic)
        graphs = clock.run("graphs", lambda: evalkit.gen_synthetic(spec))
        graphs = [g.canonical() for g in graphs]
        catalog_templates = [["A"], ["B"], ["C"], ["D"]]
        with open(os.path.join(out, "catalog.json"), "w") as fh:
            json.dump(catalog_templates, fh)
    else:
        fmt = _descriptor(cfg.source)
        drain = Drain(cfg.source.drain.depth, cfg.source.drain.similarity, cfg.source.drain.max_children)
        parsed = clock.run("parse", lambda: parse_file(cfg.source.log, fmt, drain))
        io.write_records(parsed.records, os.path.join(out, "records.jsonl"))
        io.write_catalog(parsed.catalog, os.path.join(out, "catalog.json"))
        counts["records"] = len(parsed.records)
        counts["templates"] = len(parsed.catalog)
        counts["malformed"] = parsed.malformed
        catalog_templates = parsed.catalog.templates

        def _group():
            groups = group_by_identifier(parsed.records)
            if cfg.grouping.by == "id-window":
                groups = [w for g in groups for w in window_split(g, cfg.grouping.window)]
            labels = io.read_line_labels(cfg.source.labels) if cfg.source.labels else None
            return label_groups(groups, labels)

        groups = clock.run("group", _group)
        io.write_groups(groups, os.path.join(out, "groups.jsonl"))
        counts["groups"] = len(groups)

        def _embed() -> TemplateEmbeddingTable:
            if cfg.embedding.mode == "onehot":
                return onehot_table(len(parsed.catalog))
            return semantic_table(parsed.catalog, load_vectors(cfg.embedding.vectors))

        table = clock.run("embed", _embed)
        io.write_embeddings(table.matrix, os.path.join(out, "embeddings.json"))

        graphs = clock.run("graphs", lambda: [build_graph(g, table).canonical() for g in groups])

    io.write_graphs(graphs, os.path.join(out, "graphs.jsonl"), canonical=False)
    counts["graphs"] = len(graphs)

    parts = evalkit.split(graphs, cfg.split.ratios, cfg.split.seed)
    train_graphs, val_graphs, test_graphs = parts.train, parts.val, parts.test
    if cfg.contamination > 0:
        pool = [g for g in test_graphs if g.label == ANOMALOUS]
        mixed = evalkit.contaminate(train_graphs, pool, cfg.contamination, cfg.split.seed)
        injected = {id(g) for g in mixed} - {id(g) for g in train_graphs}
        test_graphs = [g for g in test_graphs if id(g) not in injected]
        train_graphs = mixed
    counts.update(train=len(train_graphs), val=len(val_graphs), test=len(test_graphs))

    d_attr = graphs[0].attrs.shape[1] if graphs else 0
    model = new_model(cfg.model, d_attr, cfg.train.seed)
    val_labels = [1 if g.label == ANOMALOUS else 0 for g in val_graphs]
    result = clock.run(
        "train",
        lambda: train(train_graphs, model, cfg.train, val_graphs or None, val_labels or None),
    )
    save_model(result.model, os.path.join(out, "model.json"))

    scores = clock.run("score", lambda: score_graphs(test_graphs, result.model))
    entries = [
        {"group_key": g.group_key, "label": g.label, "score": s}
        for g, s in zip(test_graphs, scores)
    ]
    io.write_scores(entries, os.path.join(out, "scores.jsonl"))

    labels = [1 if g.label == ANOMALOUS else 0 for g in test_graphs]
    metrics = evalkit.evaluate(scores, labels) if scores else None

    def _explain():
        if not scores:
            return []
        if cfg.model.readout not in ("mean", "sum"):
            log.warning("readout %r is not attributable; skipping explanations", cfg.model.readout)
            return []
        cut = float(np.quantile(scores, cfg.report_quantile))
        flagged = [
            (g, s) for g, s in zip(test_graphs, scores) if s >= cut and s > 0
        ]
        templates = [" ".join(t) for t in catalog_templates]
        explanations = []
        for g, _ in flagged:
            expl = explain_graph(g, result.model, templates)
            export_dot(g, expl, os.path.join(out, "dot", f"{_safe_name(g.group_key)}.dot"))
            explanations.append(expl)
        return explanations

    explanations = clock.run("explain", _explain)
    io.write_explanations(explanations, os.path.join(out, "explanations.jsonl"))
    counts["explained"] = len(explanations)

    report = {
        "metrics": metrics,
        "counts": counts,
        "timings_s": clock.timings,
        "loss_trace": result.loss_trace,
        "artifacts": sorted(os.listdir(out)),
    }
    with open(os.path.join(out, "report.json"), "w") as fh:
        json.dump(report, fh, indent=2)
    manifest = {
        "config": asdict(cfg),
        "config_sha256": _config_fingerprint(cfg),
        "seeds": {"train": cfg.train.seed, "split": cfg.split.seed},
        "stages": ["parse", "group", "embed", "graphs", "train", "score", "explain"],
        "version": 1,
    }
    with open(os.path.join(out, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, default=str)
    return report


def _safe_name(key: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in key)[:80]
