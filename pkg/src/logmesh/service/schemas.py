"""Pydantic request/response models for the logmesh service, plus the
converters between wire models and the core domain objects."""

from __future__ import annotations

from typing import Literal

import numpy as np
from pydantic import BaseModel, Field

from ..explain import Explanation
from ..graphbuild import LogGraph
from ..grouping import LogGroup
from ..logparse import LogRecord


class DrainOptionsModel(BaseModel):
    depth: int = 4
    similarity: float = 0.4
    max_children: int = 100


class RecordModel(BaseModel):
    line_no: int
    ts: str = ""
    id: str = ""
    template_id: int = -1

    @classmethod
    def from_domain(cls, rec: LogRecord) -> "RecordModel":
        return cls(line_no=rec.line_no, ts=rec.ts, id=rec.identifier, template_id=rec.template_id)

    def to_domain(self) -> LogRecord:
        return LogRecord(self.line_no, self.ts, self.id, [], self.template_id)


class ParseRequest(BaseModel):
    lines: list[str]
    format: str
    masks: list[str] = Field(default_factory=list)
    id_field: str | None = None
    id_pattern: str | None = None
    drain: DrainOptionsModel = Field(default_factory=DrainOptionsModel)


class ParseResponse(BaseModel):
    records: list[RecordModel]
    catalog: list[list[str]]
    malformed: int


class GroupModel(BaseModel):
    group_key: str
    label: str = "unknown"
    records: list[RecordModel]
    meta: dict = Field(default_factory=dict)

    @classmethod
    def from_domain(cls, group: LogGroup) -> "GroupModel":
        return cls(
            group_key=group.group_key,
            label=group.label,
            records=[RecordModel.from_domain(r) for r in group.records],
            meta=group.meta,
        )

    def to_domain(self) -> LogGroup:
        return LogGroup(self.group_key, [r.to_domain() for r in self.records], self.label, dict(self.meta))


class GroupRequest(BaseModel):
    records: list[RecordModel]
    by: Literal["id", "id-window"] = "id"
    window: int = 100
    line_labels: dict[int, bool] | None = None


class GroupResponse(BaseModel):
    groups: list[GroupModel]


class EmbedRequest(BaseModel):
    catalog: list[list[str]]
    onehot: bool = False
    vectors: dict[str, list[float]] | None = None


class EmbedResponse(BaseModel):
    embeddings: dict[str, list[float]]  # keyed by template id
    mode: str


class GraphModel(BaseModel):
    group_key: str
    label: str = "unknown"
    nodes: list[int]
    edges: list[tuple[int, int, int]]
    x: list[list[float]]
    meta: dict = Field(default_factory=dict)

    @classmethod
    def from_domain(cls, graph: LogGraph) -> "GraphModel":
        return cls(
            group_key=graph.group_key,
            label=graph.label,
            nodes=list(graph.nodes),
            edges=graph.edge_list(),
            x=graph.attrs.tolist(),
            meta=graph.meta,
        )

    def to_domain(self) -> LogGraph:
        n = len(self.nodes)
        weights = np.zeros((n, n), dtype=np.int64)
        for i, j, w in self.edges:
            weights[i, j] = w
        return LogGraph(
            self.group_key,
            list(self.nodes),
            (weights > 0).astype(np.int64),
            weights,
            np.asarray(self.x, dtype=np.float64).reshape(n, -1),
            self.label,
            dict(self.meta),
        )


class GraphsRequest(BaseModel):
    groups: list[GroupModel]
    embeddings: dict[str, list[float]]


class GraphsResponse(BaseModel):
    graphs: list[GraphModel]


class ModelConfigModel(BaseModel):
    layers: int = 1
    proximity: int = 1
    dim: int = 128
    teleport: float = 0.1
    fusion: Literal["sum", "concat"] = "sum"
    readout: Literal["mean", "sum", "max"] = "mean"


class TrainConfigModel(BaseModel):
    batch_size: int = 128
    optimizer: Literal["sgd", "adam"] = "sgd"
    learning_rate: float = 0.01
    weight_decay: float = 1e-4
    epochs: int = 100
    seed: int = 0
    shuffle: bool = True


class TrainRequest(BaseModel):
    graphs: list[GraphModel]
    model: ModelConfigModel = Field(default_factory=ModelConfigModel)
    train: TrainConfigModel = Field(default_factory=TrainConfigModel)
    val_graphs: list[GraphModel] | None = None


class TrainResponse(BaseModel):
    model: dict  # persisted model schema (version, config, theta, center, meta)
    loss_trace: list[float]


class ScoreRequest(BaseModel):
    model: dict
    graphs: list[GraphModel]


class ScoreEntry(BaseModel):
    group_key: str
    label: str
    score: float


class ScoreResponse(BaseModel):
    scores: list[ScoreEntry]


class NodeImportanceModel(BaseModel):
    node: int
    template_id: int
    template: str
    importance: float


class ExplanationModel(BaseModel):
    group_key: str
    score: float
    nodes: list[NodeImportanceModel]
    ranked: list[int]

    @classmethod
    def from_domain(cls, expl: Explanation) -> "ExplanationModel":
        return cls(
            group_key=expl.group_key,
            score=expl.score,
            nodes=[
                NodeImportanceModel(
                    node=ni.node,
                    template_id=ni.template_id,
                    template=ni.template,
                    importance=ni.importance,
                )
                for ni in expl.nodes
            ],
            ranked=expl.ranked,
        )


class ExplainRequest(BaseModel):
    model: dict
    graphs: list[GraphModel]
    top: int = 3
    templates: list[str] | None = None
    include_dot: bool = False


class ExplainResponse(BaseModel):
    explanations: list[ExplanationModel]
    top: dict[str, list[int]]  # group_key -> node indices
    dot: dict[str, str] = Field(default_factory=dict)


class EvalRequest(BaseModel):
    scores: list[float]
    labels: list[int]


class EvalResponse(BaseModel):
    roc_auc: float | None
    ap: float | None
    n_pos: int
    n_neg: int


class SyntheticSpecModel(BaseModel):
    n_normal: int = 10000
    n_per_anomaly: int = 200
    anomaly_types: list[Literal["S1", "S2", "S3", "S4"]] = ["S1", "S2", "S3", "S4"]
    seed: int = 0


class BenchSynthRequest(BaseModel):
    spec: SyntheticSpecModel = Field(default_factory=SyntheticSpecModel)


class BenchSynthResponse(BaseModel):
    graphs: list[GraphModel]


class RunRequest(BaseModel):
    config: dict  # full pipeline config; paths resolve on the server


class RunResponse(BaseModel):
    report: dict
