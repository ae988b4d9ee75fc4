import re

import numpy as np
import pytest

from conftest import make_group
from logmesh.digcn import ModelConfig
from logmesh.errors import UnattributableReadout, ZeroScore
from logmesh.explain import (
    Explanation,
    NodeImportance,
    dot_source,
    explain_graph,
    export_dot,
    node_importance,
    top_nodes,
)
from logmesh.graphbuild import LogGraph, build_graph
from logmesh.ocsvdd import forward_graph, new_model
from logmesh.semantics import onehot_table

TABLE = onehot_table(6)


def two_cycle_identical_attrs():
    """Both nodes carry the same attribute row, so their embeddings match."""
    adj = np.array([[0, 1], [1, 0]])
    attrs = np.array([[1.0, 0.0], [1.0, 0.0]])
    return LogGraph("twin", [0, 1], adj, adj.copy(), attrs)


class TestNodeImportance:
    def test_identical_rows_mean_readout_all_zero(self):
        graph = two_cycle_identical_attrs()
        model = new_model(ModelConfig(dim=4), 2, seed=1)
        model.center = np.zeros(4)
        imps, score = node_importance(graph, model)
        assert score > 0
        np.testing.assert_allclose(imps, [0.0, 0.0], atol=1e-12)

    def test_single_node_convention(self):
        graph = build_graph(make_group("solo", [2]), TABLE)
        model = new_model(ModelConfig(dim=4), TABLE.dim, seed=1)
        model.center = np.ones(4)
        imps, _ = node_importance(graph, model)
        np.testing.assert_array_equal(imps, [1.0])

    def test_two_node_matches_direct_reevaluation(self):
        graph = build_graph(make_group("pair", [0, 3]), TABLE)
        model = new_model(ModelConfig(dim=4), TABLE.dim, seed=2)
        model.center = np.full(4, 0.1)
        imps, score = node_importance(graph, model)
        fp = forward_graph(graph, model)
        # direct oracle: drop each row, re-apply the readout, recompute
        for j in range(2):
            kept = np.delete(fp.node_embeddings, j, axis=0).mean(axis=0)
            expected = abs(score - np.linalg.norm(kept - model.center)) / score
            assert imps[j] == pytest.approx(expected, abs=1e-12)

    def test_sum_readout_removal(self):
        graph = build_graph(make_group("pair", [0, 3, 1]), TABLE)
        model = new_model(ModelConfig(dim=4, readout="sum"), TABLE.dim, seed=3)
        model.center = np.zeros(4)
        imps, score = node_importance(graph, model)
        fp = forward_graph(graph, model)
        for j in range(3):
            kept = np.delete(fp.node_embeddings, j, axis=0).sum(axis=0)
            expected = abs(score - np.linalg.norm(kept - model.center)) / score
            assert imps[j] == pytest.approx(expected, abs=1e-12)

    def test_zero_score_raises(self):
        graph = build_graph(make_group("pair", [0, 3]), TABLE)
        model = new_model(ModelConfig(dim=4), TABLE.dim, seed=2)
        model.center = forward_graph(graph, model).z  # score exactly 0
        with pytest.raises(ZeroScore):
            node_importance(graph, model)

    def test_max_readout_unattributable(self):
        graph = build_graph(make_group("pair", [0, 3]), TABLE)
        model = new_model(ModelConfig(dim=4, readout="max"), TABLE.dim, seed=2)
        model.center = np.zeros(4)
        with pytest.raises(UnattributableReadout):
            node_importance(graph, model)

    def test_importance_permutes_with_nodes(self):
        graph = build_graph(make_group("g", [0, 1, 2, 0, 3]), TABLE)
        model = new_model(ModelConfig(dim=5), TABLE.dim, seed=4)
        model.center = np.full(5, 0.05)
        imps, _ = node_importance(graph, model)
        perm = np.array([2, 0, 3, 1])
        imps_p, _ = node_importance(graph.permuted(perm), model)
        np.testing.assert_allclose(imps_p, imps[perm], atol=1e-9)

    def test_ranking_invariant_under_positive_scaling(self):
        # with center 0, scaling the last layer scales all deviations by c
        graph = build_graph(make_group("g", [0, 1, 2, 0, 3]), TABLE)
        model = new_model(ModelConfig(dim=5), TABLE.dim, seed=5)
        model.center = np.zeros(5)
        expl = explain_graph(graph, model)
        for theta in model.layers[-1].thetas:
            theta *= 7.5
        expl_scaled = explain_graph(graph, model)
        assert expl_scaled.ranked == expl.ranked
        np.testing.assert_allclose(
            [n.importance for n in expl_scaled.nodes],
            [n.importance for n in expl.nodes],
            atol=1e-9,
        )


class TestTopNodes:
    def expl(self, imps):
        nodes = [NodeImportance(i, i, v) for i, v in enumerate(imps)]
        ranked = sorted(range(len(imps)), key=lambda j: (-imps[j], j))
        return Explanation("g", 1.0, nodes, ranked)

    def test_k_larger_than_n_returns_all(self):
        assert len(top_nodes(self.expl([0.3, 0.1]), 5)) == 2

    def test_k1_picks_argmax(self):
        assert top_nodes(self.expl([0.1, 0.9, 0.5]), 1)[0].node == 1

    def test_tie_broken_by_lower_index(self):
        picked = top_nodes(self.expl([0.5, 0.9, 0.9]), 2)
        assert [n.node for n in picked] == [1, 2]
        picked = top_nodes(self.expl([0.9, 0.1, 0.9]), 1)
        assert picked[0].node == 0

    def test_k_must_be_positive(self):
        with pytest.raises(ValueError):
            top_nodes(self.expl([0.1]), 0)


NODE_RE = re.compile(r'^\s*n\d+ \[label=".*", fillcolor="0\.000 \d\.\d{3} 1\.000"\];$')
EDGE_RE = re.compile(r'^\s*n\d+ -> n\d+ \[label="\d+"\];$')


def parse_dot(text):
    """Tiny well-formedness checker for the emitted DOT dialect: returns
    (node statements, edge statements) or raises ValueError."""
    lines = text.strip().splitlines()
    if not lines[0].startswith("digraph ") or not lines[0].endswith("{"):
        raise ValueError("missing digraph header")
    if lines[-1] != "}":
        raise ValueError("missing closing brace")
    nodes, edges = [], []
    for line in lines[1:-1]:
        if line.strip().startswith("node ["):
            continue
        if NODE_RE.match(line):
            nodes.append(line)
        elif EDGE_RE.match(line):
            edges.append(line)
        else:
            raise ValueError(f"unparseable statement: {line!r}")
    return nodes, edges


class TestDotExport:
    def graph_and_expl(self, seed=6):
        graph = build_graph(make_group("demo/1", [0, 1, 2, 0, 3]), TABLE)
        model = new_model(ModelConfig(dim=5), TABLE.dim, seed=seed)
        model.center = np.full(5, 0.02)
        return graph, explain_graph(graph, model, [f"template {i} text" for i in range(6)])

    def test_output_parses_and_covers_graph(self, tmp_path):
        graph, expl = self.graph_and_expl()
        path = tmp_path / "g.dot"
        export_dot(graph, expl, str(path))
        nodes, edges = parse_dot(path.read_text())
        assert len(nodes) == graph.n
        assert len(edges) == len(graph.edge_list())

    def test_max_importance_gets_darkest_shade(self):
        graph, expl = self.graph_and_expl()
        src = dot_source(graph, expl)
        sats = {}
        for m in re.finditer(r'n(\d+) \[label=.*fillcolor="0\.000 (\d\.\d{3})', src):
            sats[int(m.group(1))] = float(m.group(2))
        best = expl.ranked[0]
        assert sats[best] == max(sats.values())
        assert sats[best] == pytest.approx(0.85, abs=1e-3)

    def test_zero_importances_give_uniform_fill(self):
        graph = two_cycle_identical_attrs()
        model = new_model(ModelConfig(dim=4), 2, seed=1)
        model.center = np.zeros(4)
        expl = explain_graph(graph, model)
        src = dot_source(graph, expl)
        sats = re.findall(r'fillcolor="0\.000 (\d\.\d{3})', src)
        assert len(set(sats)) == 1
