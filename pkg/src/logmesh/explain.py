"""Per-node importance for anomalous graphs, and DOT export with
importance-shaded nodes for human inspection."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import IoError, UnattributableReadout, ZeroScore
from .graphbuild import LogGraph
from .ocsvdd import OneClassModel, forward_graph

SCORE_FLOOR = 1e-12


@dataclass
class NodeImportance:
    node: int
    template_id: int
    importance: float
    template: str = ""


@dataclass
class Explanation:
    group_key: str
    score: float
    nodes: list[NodeImportance]
    ranked: list[int]  # node indices, most important first


def node_importance(graph: LogGraph, model: OneClassModel) -> tuple[np.ndarray, float]:
    """Relative change of the anomaly score when one node's embedding is
    left out of the readout.

    The propagation operators are not rebuilt; only the readout input
    shrinks by one row (mean over n-1 rows, or sum minus the row). Returns
    (importance vector, graph score).
    """
    mode = model.config.readout
    if mode not in ("mean", "sum"):
        raise UnattributableReadout(f"readout {mode!r} cannot be decomposed per node")
    fp = forward_graph(graph, model)
    score = float(np.linalg.norm(fp.z - model.center))
    n = fp.node_embeddings.shape[0]
    if n == 1:
        return np.array([1.0]), score
    if score < SCORE_FLOOR:
        raise ZeroScore(f"graph {graph.group_key!r} scores {score:g}; importance undefined")
    total = fp.node_embeddings.sum(axis=0)
    imps = np.empty(n)
    for j in range(n):
        rest = total - fp.node_embeddings[j]
        z_wo = rest / (n - 1) if mode == "mean" else rest
        imps[j] = abs(score - float(np.linalg.norm(z_wo - model.center))) / score
    return imps, score


def explain_graph(
    graph: LogGraph, model: OneClassModel, templates: list[str] | None = None
) -> Explanation:
    imps, score = node_importance(graph, model)
    ranked = sorted(range(len(imps)), key=lambda j: (-imps[j], j))
    nodes = [
        NodeImportance(
            j,
            graph.nodes[j],
            float(imps[j]),
            templates[graph.nodes[j]] if templates else f"T{graph.nodes[j]}",
        )
        for j in range(len(imps))
    ]
    return Explanation(graph.group_key, score, nodes, ranked)


def top_nodes(explanation: Explanation, k: int) -> list[NodeImportance]:
    """The k most important nodes; ties broken towards the lower node index."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return [explanation.nodes[j] for j in explanation.ranked[:k]]


def _dot_escape(text: str, limit: int = 48) -> str:
    if len(text) > limit:
        text = text[: limit - 1] + "…"
    return text.replace("\\", "\\\\").replace('"', '\\"')


def dot_source(graph: LogGraph, explanation: Explanation) -> str:
    """DOT digraph with node fill saturation proportional to normalized
    importance (uniform light fill when all importances are zero)."""
    imps = np.array([ni.importance for ni in explanation.nodes])
    max_imp = imps.max() if imps.size else 0.0
    sat = imps / max_imp * 0.85 if max_imp > 0 else np.full_like(imps, 0.12)
    lines = [f'digraph "{_dot_escape(graph.group_key)}" {{']
    lines.append("  node [style=filled, shape=box];")
    for ni, s in zip(explanation.nodes, sat):
        label = _dot_escape(ni.template)
        lines.append(f'  n{ni.node} [label="{label}", fillcolor="0.000 {s:.3f} 1.000"];')
    for i, j, w in graph.edge_list():
        lines.append(f'  n{i} -> n{j} [label="{w}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def export_dot(graph: LogGraph, explanation: Explanation, path: str) -> None:
    try:
        with open(path, "w") as fh:
            fh.write(dot_source(graph, explanation))
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
