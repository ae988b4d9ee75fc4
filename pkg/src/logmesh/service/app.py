"""FastAPI service wrapping the core package.

Every pipeline stage is exposed as one POST endpoint working on inline
JSON payloads; `/run` executes a whole pipeline from a config whose paths
resolve on the server. The handler functions are plain callables so the
CLI can invoke them in-process without a running server.
"""

from __future__ import annotations

import numpy as np
from fastapi import FastAPI, HTTPException

from .. import evalkit
from ..digcn import ModelConfig
from ..errors import LogmeshError
from ..explain import dot_source, explain_graph, top_nodes
from ..graphbuild import build_graph
from ..grouping import group_by_identifier, label_groups, window_split
from ..io import embeddings_from_dict
from ..logparse import Drain, FormatDescriptor, MaskRule, TemplateCatalog, parse_lines
from ..ocsvdd import (
    TrainConfig,
    model_from_dict,
    model_to_dict,
    new_model,
    score_graphs,
    train,
)
from ..pipeline import config_from_dict, run_pipeline
from ..semantics import (
    TemplateEmbeddingTable,
    WordVectorTable,
    onehot_table,
    semantic_table,
)
from . import schemas as s


def handle_parse(req: s.ParseRequest) -> s.ParseResponse:
    fmt = FormatDescriptor(
        req.format,
        id_field=req.id_field,
        id_pattern=req.id_pattern,
        masks=[MaskRule(p) for p in req.masks],
    )
    drain = Drain(req.drain.depth, req.drain.similarity, req.drain.max_children)
    result = parse_lines(req.lines, fmt, drain)
    return s.ParseResponse(
        records=[s.RecordModel.from_domain(r) for r in result.records],
        catalog=result.catalog.templates,
        malformed=result.malformed,
    )


def handle_group(req: s.GroupRequest) -> s.GroupResponse:
    records = [r.to_domain() for r in req.records]
    groups = group_by_identifier(records)
    if req.by == "id-window":
        groups = [w for g in groups for w in window_split(g, req.window)]
    groups = label_groups(groups, req.line_labels)
    return s.GroupResponse(groups=[s.GroupModel.from_domain(g) for g in groups])


def handle_embed(req: s.EmbedRequest) -> s.EmbedResponse:
    catalog = TemplateCatalog([list(t) for t in req.catalog], [0] * len(req.catalog))
    if req.onehot:
        table = onehot_table(len(catalog))
    else:
        if req.vectors is None:
            raise LogmeshError("semantic embedding needs a word-vector table")
        dims = {len(v) for v in req.vectors.values()}
        if len(dims) != 1:
            raise LogmeshError(f"word vectors must share one dimension, got {dims}")
        wv = WordVectorTable({w: np.asarray(v, dtype=np.float64) for w, v in req.vectors.items()}, dims.pop())
        table = semantic_table(catalog, wv)
    return s.EmbedResponse(
        embeddings={str(i): table.matrix[i].tolist() for i in range(len(table))},
        mode=table.mode,
    )


def handle_graphs(req: s.GraphsRequest) -> s.GraphsResponse:
    matrix = embeddings_from_dict(req.embeddings, origin="request.embeddings")
    table = TemplateEmbeddingTable(matrix)
    graphs = [build_graph(g.to_domain(), table).canonical() for g in req.groups]
    return s.GraphsResponse(graphs=[s.GraphModel.from_domain(g) for g in graphs])


def _model_config(m: s.ModelConfigModel) -> ModelConfig:
    return ModelConfig(m.layers, m.proximity, m.dim, m.teleport, m.fusion, m.readout)


def handle_train(req: s.TrainRequest) -> s.TrainResponse:
    graphs = [g.to_domain() for g in req.graphs]
    cfg = _model_config(req.model)
    problems = cfg.validate()
    tcfg = TrainConfig(**req.train.model_dump())
    problems += tcfg.validate()
    if problems:
        raise LogmeshError("; ".join(problems))
    if not graphs:
        raise LogmeshError("no training graphs supplied")
    model = new_model(cfg, graphs[0].attrs.shape[1], tcfg.seed)
    val = [g.to_domain() for g in req.val_graphs] if req.val_graphs else None
    val_labels = [1 if g.label == "anomalous" else 0 for g in val] if val else None
    result = train(graphs, model, tcfg, val, val_labels)
    return s.TrainResponse(model=model_to_dict(result.model), loss_trace=result.loss_trace)


def handle_score(req: s.ScoreRequest) -> s.ScoreResponse:
    model = model_from_dict(req.model)
    graphs = [g.to_domain() for g in req.graphs]
    scores = score_graphs(graphs, model)
    return s.ScoreResponse(
        scores=[
            s.ScoreEntry(group_key=g.group_key, label=g.label, score=sc)
            for g, sc in zip(graphs, scores)
        ]
    )


def handle_explain(req: s.ExplainRequest) -> s.ExplainResponse:
    model = model_from_dict(req.model)
    graphs = [g.to_domain() for g in req.graphs]
    explanations = []
    top = {}
    dot = {}
    for g in graphs:
        expl = explain_graph(g, model, req.templates)
        explanations.append(s.ExplanationModel.from_domain(expl))
        top[g.group_key] = [ni.node for ni in top_nodes(expl, req.top)]
        if req.include_dot:
            dot[g.group_key] = dot_source(g, expl)
    return s.ExplainResponse(explanations=explanations, top=top, dot=dot)


def handle_eval(req: s.EvalRequest) -> s.EvalResponse:
    if len(req.scores) != len(req.labels):
        raise LogmeshError("scores and labels must have equal length")
    return s.EvalResponse(**evalkit.evaluate(req.scores, req.labels))


def handle_bench_synth(req: s.BenchSynthRequest) -> s.BenchSynthResponse:
    spec = evalkit.SyntheticSpec(
        n_normal=req.spec.n_normal,
        n_per_anomaly=req.spec.n_per_anomaly,
        anomaly_types=tuple(req.spec.anomaly_types),
        seed=req.spec.seed,
    )
    graphs = evalkit.gen_synthetic(spec)
    return s.BenchSynthResponse(graphs=[s.GraphModel.from_domain(g) for g in graphs])


def handle_run(req: s.RunRequest) -> s.RunResponse:
    cfg = config_from_dict(req.config)
    return s.RunResponse(report=run_pipeline(cfg))


def create_app() -> FastAPI:
    app = FastAPI(title="logmesh", description="Log anomaly detection on directed event graphs")

    def wrap(handler, req):
        try:
            return handler(req)
        except LogmeshError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok"}

    @app.post("/parse", response_model=s.ParseResponse)
    def parse(req: s.ParseRequest):
        return wrap(handle_parse, req)

    @app.post("/group", response_model=s.GroupResponse)
    def group(req: s.GroupRequest):
        return wrap(handle_group, req)

    @app.post("/embed", response_model=s.EmbedResponse)
    def embed(req: s.EmbedRequest):
        return wrap(handle_embed, req)

    @app.post("/graphs", response_model=s.GraphsResponse)
    def graphs(req: s.GraphsRequest):
        return wrap(handle_graphs, req)

    @app.post("/train", response_model=s.TrainResponse)
    def train_(req: s.TrainRequest):
        return wrap(handle_train, req)

    @app.post("/score", response_model=s.ScoreResponse)
    def score(req: s.ScoreRequest):
        return wrap(handle_score, req)

    @app.post("/explain", response_model=s.ExplainResponse)
    def explain(req: s.ExplainRequest):
        return wrap(handle_explain, req)

    @app.post("/eval", response_model=s.EvalResponse)
    def eval_(req: s.EvalRequest):
        return wrap(handle_eval, req)

    @app.post("/bench-synth", response_model=s.BenchSynthResponse)
    def bench_synth(req: s.BenchSynthRequest):
        return wrap(handle_bench_synth, req)

    @app.post("/run", response_model=s.RunResponse)
    def run(req: s.RunRequest):
        return wrap(handle_run, req)

    return app


app = create_app()
