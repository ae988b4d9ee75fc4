"""Acceptance suite: one test per exit criterion of the toolkit.

Each test prints a single "[acceptance] ..." PASS/FAIL line (visible with
pytest -s or in the captured output of failures) and then asserts, so the
suite documents exactly which guarantees hold at which tolerances.
"""

import os
from collections import Counter

import numpy as np
import pytest

from conftest import make_group, random_digraph
from logmesh.digcn import ModelConfig, batch_gradients, build_operators, forward
from logmesh.errors import LogmeshError
from logmesh.evalkit import (
    SyntheticSpec,
    average_precision,
    contaminate,
    gen_synthetic,
    roc_auc,
    rotation_fixture,
)
from logmesh.explain import explain_graph, top_nodes
from logmesh.graphbuild import build_graph
from logmesh.grouping import ANOMALOUS
from logmesh.ocsvdd import TrainConfig, init_params, new_model, score_graphs, train
from logmesh.semantics import onehot_table

from test_digcn import max_rel_err, numeric_gradients
from test_evalkit import pairwise_auc, step_sum_ap


def verdict(criterion: str, ok: bool, detail: str) -> bool:
    print(f"[acceptance] {criterion}: {'PASS' if ok else 'FAIL'} ({detail})")
    return ok


class Benchmark:
    """Desk-scale structural benchmark: 1000 normal 4-cycles for training,
    250 held-out normals plus 50 anomalies per type for testing, trained
    with the suggested defaults (1 layer, order 1, teleport 0.1, dim 128,
    mean readout, SGD lr 0.01, decay 1e-4, batch 128, 100 epochs)."""

    def __init__(self):
        graphs = gen_synthetic(SyntheticSpec(n_normal=1250, n_per_anomaly=50, seed=7))
        normals = [g for g in graphs if g.label != ANOMALOUS]
        self.anomalies = [g for g in graphs if g.label == ANOMALOUS]
        self.train_graphs = normals[:1000]
        self.test_normals = normals[1000:]
        self.model_cfg = ModelConfig()
        self.train_cfg = TrainConfig()
        self.model = new_model(self.model_cfg, 4, seed=self.train_cfg.seed)
        train(self.train_graphs, self.model, self.train_cfg)
        self.normal_scores = score_graphs(self.test_normals, self.model)
        self.anomaly_scores = score_graphs(self.anomalies, self.model)

    def by_type(self, kind):
        return [
            (g, s)
            for g, s in zip(self.anomalies, self.anomaly_scores)
            if g.meta["anomaly"] == kind
        ]


@pytest.fixture(scope="session")
def benchmark():
    return Benchmark()


def test_criterion_1_synthetic_benchmark_auc(benchmark):
    aucs = {}
    for kind in ("S1", "S2", "S3", "S4"):
        scores = [s for _, s in benchmark.by_type(kind)]
        labels = [1] * len(scores) + [0] * len(benchmark.normal_scores)
        aucs[kind] = roc_auc(scores + benchmark.normal_scores, labels)
    ok = all(a >= 0.99 for a in aucs.values())
    verdict(
        "criterion 1: per-type ROC AUC >= 0.99 on the structural benchmark",
        ok,
        ", ".join(f"{k}={v:.4f}" for k, v in aucs.items()),
    )
    assert ok


def test_criterion_2_rotation_generalization():
    train_groups, test_groups = rotation_fixture(copies=1000)
    table = onehot_table(4)
    train_graphs = [build_graph(g, table).canonical() for g in train_groups]
    test_graphs = [build_graph(g, table).canonical() for g in test_groups]
    model = new_model(ModelConfig(), 4, seed=0)
    train(train_graphs, model, TrainConfig(epochs=10))
    train_scores = score_graphs(train_graphs, model)
    test_scores = score_graphs(test_graphs, model)
    gap = max(abs(t - r) for t in test_scores for r in set(train_scores))
    threshold = max(train_scores)
    fpr = sum(1 for s in test_scores if s > threshold) / len(test_scores)
    ok = gap <= 1e-9 and fpr == 0.0
    verdict(
        "criterion 2: unseen rotation scores equal training scores, FPR 0",
        ok,
        f"max |test-train| = {gap:.3e}, FPR = {fpr:.2%}",
    )
    assert ok


def test_criterion_3_gradient_correctness():
    worst = 0.0
    for seed in range(20):
        rng = np.random.default_rng(1000 + seed)
        k = 1 + seed % 2
        cfg = ModelConfig(
            layers=1,
            proximity=k,
            dim=int(rng.integers(2, 9)),
            fusion="sum",
            readout="mean",
        )
        d_attr = int(rng.integers(2, 9))
        batch = []
        for _ in range(int(rng.integers(1, 3))):
            adj, weights = random_digraph(rng, int(rng.integers(2, 7)))
            ops = build_operators(adj, weights, 0.1, k)
            batch.append((ops, rng.normal(size=(ops.n, d_attr))))
        layers = init_params(cfg, d_attr, rng)
        center = rng.normal(size=cfg.output_dim())
        _, analytic = batch_gradients(batch, layers, cfg, center, 1e-3)
        numeric = numeric_gradients(batch, layers, cfg, center, 1e-3)
        worst = max(worst, max_rel_err(analytic, numeric))
    ok = worst < 1e-4
    verdict(
        "criterion 3: analytic gradients match central finite differences",
        ok,
        f"max relative error over 20 seeded instances = {worst:.3e}",
    )
    assert ok


def test_criterion_4_operator_properties():
    rng = np.random.default_rng(42)
    worst_row = worst_resid = worst_sym = worst_sum = 0.0
    floor_ok = True
    for _ in range(100):
        n = int(rng.integers(2, 14))
        adj, weights = random_digraph(rng, n)
        alpha = float(rng.uniform(0.05, 0.3))
        ops = build_operators(adj, weights, alpha, order=2)
        worst_row = max(worst_row, float(np.abs(ops.p1.sum(axis=1) - 1.0).max()))
        p_ppr = (1 - alpha) * ops.p1 + alpha / n
        worst_resid = max(worst_resid, float(np.abs(ops.pi @ p_ppr - ops.pi).sum()))
        worst_sum = max(worst_sum, abs(float(ops.pi.sum()) - 1.0))
        floor_ok = floor_ok and bool(np.all(ops.pi >= alpha / n))
        worst_sym = max(
            worst_sym,
            float(np.abs(ops.psi - ops.psi.T).max()),
            float(np.abs(ops.phi - ops.phi.T).max()),
        )
    ok = worst_row <= 1e-12 and worst_resid < 1e-10 and worst_sym < 1e-9 and floor_ok and worst_sum < 1e-12
    verdict(
        "criterion 4: proximity/stationary/normalization properties on 100 digraphs",
        ok,
        f"row sum err {worst_row:.1e}, residual {worst_resid:.1e}, "
        f"|sum(pi)-1| {worst_sum:.1e}, pi floor {floor_ok}, asymmetry {worst_sym:.1e}",
    )
    assert ok


def test_criterion_5_permutation_invariance():
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(20):
        n = int(rng.integers(3, 11))
        adj, weights = random_digraph(rng, n)
        x = rng.normal(size=(n, 4))
        cfg = ModelConfig(dim=8)
        layers = init_params(cfg, 4, rng)
        center = rng.normal(size=cfg.output_dim())
        ops = build_operators(adj, weights, cfg.teleport)
        base = float(np.linalg.norm(forward(x, ops, layers, cfg).z - center))
        for _ in range(50):
            perm = rng.permutation(n)
            ops_p = build_operators(
                adj[np.ix_(perm, perm)], weights[np.ix_(perm, perm)], cfg.teleport
            )
            score = float(np.linalg.norm(forward(x[perm], ops_p, layers, cfg).z - center))
            worst = max(worst, abs(score - base))
    ok = worst <= 1e-9
    verdict(
        "criterion 5: scores invariant under 50 node permutations x 20 graphs",
        ok,
        f"max |score difference| = {worst:.3e}",
    )
    assert ok


def test_criterion_6_graph_construction_oracle():
    rng = np.random.default_rng(11)
    table = onehot_table(8)
    ok = True
    for i in range(1000):
        seq = rng.integers(0, 8, size=int(rng.integers(1, 60))).tolist()
        graph = build_graph(make_group(f"g{i}", seq), table)
        built = Counter(
            {(graph.nodes[a], graph.nodes[b]): w for a, b, w in graph.edge_list()}
        )
        ok = ok and built == Counter(zip(seq, seq[1:])) and graph.weights.sum() == len(seq) - 1
    verdict(
        "criterion 6: weighted edge multisets equal brute-force bigram counts",
        ok,
        "1000 random event sequences",
    )
    assert ok


def test_criterion_7_metric_oracles():
    rng = np.random.default_rng(13)
    worst_auc = worst_ap = 0.0
    for _ in range(200):
        n = int(rng.integers(2, 30))
        scores = (rng.integers(0, 7, size=n) / 6.0).tolist()
        labels = (rng.random(n) < 0.4).astype(int)
        labels[0], labels[1 % n] = 1, 0
        labels = labels.tolist()
        worst_auc = max(worst_auc, abs(roc_auc(scores, labels) - pairwise_auc(scores, labels)))
        worst_ap = max(
            worst_ap, abs(average_precision(scores, labels) - step_sum_ap(scores, labels))
        )
    ok = worst_auc <= 1e-12 and worst_ap <= 1e-12
    verdict(
        "criterion 7: rank metrics equal exhaustive oracles on 200 fixtures",
        ok,
        f"max AUC gap {worst_auc:.1e}, max AP gap {worst_ap:.1e}",
    )
    assert ok


def test_criterion_8_explanation_endpoints(benchmark):
    s4 = [g for g, _ in benchmark.by_type("S4")]
    hits = 0
    for g in s4:
        expl = explain_graph(g, benchmark.model)
        top2 = {ni.node for ni in top_nodes(expl, 2)}
        tid_i, tid_j = g.meta["edge"]
        endpoints = {g.nodes.index(tid_i), g.nodes.index(tid_j)}
        hits += endpoints <= top2
    rate = hits / len(s4)
    ok = rate >= 0.80
    verdict(
        "criterion 8: added-edge endpoints rank in the top-2 importances",
        ok,
        f"hit rate {rate:.2%} over {len(s4)} added-edge anomalies (required >= 80%)",
    )
    # Known red: the removal-based score decomposition ranks nodes by their
    # static distance to the hypersphere center, which dominates the
    # structural perturbation signal on this benchmark (the per-node
    # embedding *change* does localize the edit, but that quantity is not
    # what the decomposition rule measures). Kept failing rather than
    # substituting a different attribution rule.
    assert ok


def test_criterion_9_contamination_trend(benchmark):
    labels = [0] * len(benchmark.normal_scores) + [1] * len(benchmark.anomaly_scores)
    auc_clean = roc_auc(benchmark.normal_scores + benchmark.anomaly_scores, labels)
    pool = gen_synthetic(SyntheticSpec(n_normal=0, n_per_anomaly=50, seed=99))
    mixed = contaminate(benchmark.train_graphs, pool, 0.10, seed=1)
    model = new_model(benchmark.model_cfg, 4, seed=benchmark.train_cfg.seed)
    train(mixed, model, benchmark.train_cfg)
    scores = score_graphs(benchmark.test_normals + benchmark.anomalies, model)
    auc_dirty = roc_auc(scores, labels)
    ok = auc_dirty <= auc_clean
    verdict(
        "criterion 9: ROC AUC at 10% contamination <= clean-training AUC",
        ok,
        f"clean {auc_clean:.4f} vs contaminated {auc_dirty:.4f}",
    )
    assert ok


HDFS_SAMPLE_ENV = "LOGMESH_HDFS_SAMPLE"


def test_criterion_10_hdfs_sample_smoke(tmp_path):
    sample = os.environ.get(HDFS_SAMPLE_ENV)
    if not sample or not os.path.isfile(sample):
        print(
            "[acceptance] criterion 10: SKIP (full-corpus results are out of desk "
            f"scope; set {HDFS_SAMPLE_ENV} to a raw HDFS sample to run the smoke check)"
        )
        pytest.skip(f"{HDFS_SAMPLE_ENV} not supplied")
    from logmesh.pipeline import config_from_dict, run_pipeline

    cfg = config_from_dict(
        {
            "source": {
                "log": sample,
                "format": "<Date> <Time> <Pid> <Level> <Component>: <Content>",
                "masks": [r"blk_-?\d+", r"(\d+\.){3}\d+(:\d+)?", r"(?<=\s)\d+(?=\s|$)"],
                "id_pattern": r"blk_-?\d+",
            },
            "embedding": {"mode": "onehot"},
            "model": {"dim": 32},
            "train": {"epochs": 5, "batch_size": 32},
            "out_dir": str(tmp_path / "hdfs-smoke"),
        }
    )
    try:
        report = run_pipeline(cfg)
    except LogmeshError as exc:
        verdict("criterion 10: HDFS sample smoke run", False, str(exc))
        raise
    templates = report["counts"]["templates"]
    ok = 10 <= templates <= 80
    verdict(
        "criterion 10: HDFS sample parses end-to-end with a plausible catalog",
        ok,
        f"{templates} templates (expected 10..80)",
    )
    assert ok
