"""Turn each log group into an attributed, directed, edge-weighted graph,
plus the event count vectors used by the baseline detectors."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import MissingEmbedding
from .grouping import UNKNOWN, LogGroup
from .semantics import TemplateEmbeddingTable


@dataclass
class LogGraph:
    """One log group as (A, X, Y).

    `nodes[i]` is the template id of node i (unique per graph). `adj` is
    the 0/1 adjacency, `weights` counts how often template i was
    immediately followed by template j, and `attrs` holds one attribute
    row per node.
    """

    group_key: str
    nodes: list[int]
    adj: np.ndarray
    weights: np.ndarray
    attrs: np.ndarray
    label: str = UNKNOWN
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.nodes)

    def edge_list(self) -> list[tuple[int, int, int]]:
        rows, cols = np.nonzero(self.weights)
        return [(int(i), int(j), int(self.weights[i, j])) for i, j in zip(rows, cols)]

    def permuted(self, perm: np.ndarray) -> "LogGraph":
        """Relabel nodes so that new node p is old node perm[p]."""
        perm = np.asarray(perm)
        return LogGraph(
            self.group_key,
            [self.nodes[p] for p in perm],
            self.adj[np.ix_(perm, perm)].copy(),
            self.weights[np.ix_(perm, perm)].copy(),
            self.attrs[perm].copy(),
            self.label,
            dict(self.meta),
        )

    def canonical(self) -> "LogGraph":
        """Reorder nodes by ascending template id so structurally equal
        groups produce identical matrices."""
        return self.permuted(np.argsort(np.array(self.nodes), kind="stable"))


def build_graph(group: LogGroup, embeddings: TemplateEmbeddingTable) -> LogGraph:
    """Nodes are the distinct template ids of the group in first-occurrence
    order; each consecutive record pair adds 1 to the corresponding edge
    weight (consecutive repeats become self-loops)."""
    if not group.records:
        raise ValueError(f"group {group.group_key!r} has no records")
    seq = group.template_ids()
    index: dict[int, int] = {}
    for tid in seq:
        if tid not in index:
            if tid >= len(embeddings) or tid < 0:
                raise MissingEmbedding(f"template {tid} has no embedding row")
            index[tid] = len(index)
    n = len(index)
    weights = np.zeros((n, n), dtype=np.int64)
    for a, b in zip(seq, seq[1:]):
        weights[index[a], index[b]] += 1
    nodes = list(index)
    attrs = embeddings.matrix[nodes].astype(np.float64).copy()
    adj = (weights > 0).astype(np.int64)
    return LogGraph(group.group_key, nodes, adj, weights, attrs, group.label, dict(group.meta))


def count_vector(group: LogGroup, catalog_size: int) -> np.ndarray:
    """Occurrence count of each template id within the group."""
    counts = np.zeros(catalog_size, dtype=np.int64)
    for tid in group.template_ids():
        if not 0 <= tid < catalog_size:
            raise ValueError(f"template id {tid} out of range 0..{catalog_size - 1}")
        counts[tid] += 1
    return counts


def count_matrix(groups: list[LogGroup], catalog_size: int) -> np.ndarray:
    return np.array([count_vector(g, catalog_size) for g in groups], dtype=np.int64)
