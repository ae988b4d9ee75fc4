"""Evaluation machinery: rank metrics, the synthetic structural benchmark,
training-set contamination, the normal-ratio split protocol, and the two
count-matrix baseline detectors."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NoPositives, OneClassOnly, PoolTooSmall
from .graphbuild import LogGraph
from .grouping import ANOMALOUS, NORMAL, LogGroup
from .logparse import LogRecord

log = logging.getLogger(__name__)


# -- rank metrics ---------------------------------------------------------


def _as_arrays(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if s.shape != y.shape or s.ndim != 1:
        raise ValueError("scores and labels must be parallel 1-d sequences")
    return s, y


def _average_ranks(scores: np.ndarray) -> np.ndarray:
    """1-based ranks with ties sharing their average rank."""
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(len(scores))
    i = 0
    while i < len(order):
        j = i
        while j < len(order) and scores[order[j]] == scores[order[i]]:
            j += 1
        ranks[order[i:j]] = (i + j + 1) / 2.0  # average of ranks i+1 .. j
        i = j
    return ranks


def roc_auc(scores, labels) -> float:
    """Mann-Whitney statistic: P(anomaly score > normal score) with ties
    counted half."""
    s, y = _as_arrays(scores, labels)
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise OneClassOnly(f"need both classes, got {n_pos} positives / {n_neg} negatives")
    ranks = _average_ranks(s)
    u = ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def average_precision(scores, labels) -> float:
    """Step-summed AP over the descending ranking; tied scores put
    positives after negatives so ties never flatter the result."""
    s, y = _as_arrays(scores, labels)
    n_pos = int(y.sum())
    if n_pos == 0:
        raise NoPositives("average precision needs at least one positive")
    order = np.lexsort((y, -s))
    tp = 0
    ap = 0.0
    for rank, idx in enumerate(order, start=1):
        if y[idx] == 1:
            tp += 1
            ap += tp / rank
    return float(ap / n_pos)


def evaluate(scores, labels) -> dict:
    s, y = _as_arrays(scores, labels)
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    out = {"n_pos": n_pos, "n_neg": n_neg, "roc_auc": None, "ap": None}
    if n_pos and n_neg:
        out["roc_auc"] = roc_auc(s, y)
        out["ap"] = average_precision(s, y)
    return out


# -- synthetic structural benchmark ---------------------------------------

ANOMALY_TYPES = ("S1", "S2", "S3", "S4")

_CYCLE_EDGES = ((0, 1), (1, 2), (2, 3), (3, 0))


@dataclass
class SyntheticSpec:
    n_normal: int = 10000
    n_per_anomaly: int = 200
    anomaly_types: tuple[str, ...] = ANOMALY_TYPES
    seed: int = 0

    def validate(self) -> list[str]:
        errors = []
        if self.n_normal < 0 or self.n_per_anomaly < 0:
            errors.append("counts must be >= 0")
        bad = [t for t in self.anomaly_types if t not in ANOMALY_TYPES]
        if bad:
            errors.append(f"unknown anomaly types {bad}")
        return errors


def _graph_from_edges(key: str, edges: list[tuple[int, int]], label: str, meta: dict) -> LogGraph:
    weights = np.zeros((4, 4), dtype=np.int64)
    for i, j in edges:
        weights[i, j] += 1
    return LogGraph(
        key,
        [0, 1, 2, 3],
        (weights > 0).astype(np.int64),
        weights,
        np.eye(4),
        label,
        meta,
    )


def _perturb(edges: list[tuple[int, int]], kind: str, rng: np.random.Generator) -> tuple[list, tuple]:
    """Apply one structural edit to the 4-cycle; returns (edges, edited edge)."""
    edges = list(edges)
    if kind == "S1":  # reverse one edge
        i, j = edges.pop(rng.integers(len(edges)))
        edges.append((j, i))
        return edges, (j, i)
    if kind == "S2":  # redirect one edge's head
        i, j = edges.pop(rng.integers(len(edges)))
        candidates = [h for h in range(4) if h not in (i, j) and (i, h) not in edges]
        h = candidates[rng.integers(len(candidates))]
        edges.append((i, h))
        return edges, (i, h)
    if kind == "S3":  # delete one edge
        dropped = edges.pop(rng.integers(len(edges)))
        return edges, dropped
    if kind == "S4":  # add one absent edge (no self-loops)
        absent = [
            (i, j) for i in range(4) for j in range(4) if i != j and (i, j) not in edges
        ]
        added = absent[rng.integers(len(absent))]
        edges.append(added)
        return edges, added
    raise ConfigError(f"unknown anomaly type {kind!r}")


def gen_synthetic(spec: SyntheticSpec) -> list[LogGraph]:
    """Normal graphs are directed 4-cycles with unit weights and one-hot
    attributes; each anomaly type applies one seeded structural edit. The
    edited edge is kept in the graph meta for auditing."""
    problems = spec.validate()
    if problems:
        raise ConfigError("; ".join(problems))
    rng = np.random.default_rng(spec.seed)
    graphs = [
        _graph_from_edges(f"synth-normal-{i:05d}", list(_CYCLE_EDGES), NORMAL, {})
        for i in range(spec.n_normal)
    ]
    for kind in spec.anomaly_types:
        for i in range(spec.n_per_anomaly):
            edges, edited = _perturb(list(_CYCLE_EDGES), kind, rng)
            graphs.append(
                _graph_from_edges(
                    f"synth-{kind.lower()}-{i:05d}",
                    edges,
                    ANOMALOUS,
                    {"anomaly": kind, "edge": list(edited)},
                )
            )
    return graphs


_ROTATIONS = {
    "abcda": [0, 1, 2, 3, 0],
    "bcdab": [1, 2, 3, 0, 1],
    "cdabc": [2, 3, 0, 1, 2],
    "dabcd": [3, 0, 1, 2, 3],
}

_EVENT_NAMES = ("A", "B", "C", "D")


def _sequence_group(key: str, sequence: list[int]) -> LogGroup:
    records = [
        LogRecord(line_no, "", key, [_EVENT_NAMES[tid]], tid)
        for line_no, tid in enumerate(sequence, start=1)
    ]
    return LogGroup(key, records, NORMAL)


def rotation_fixture(copies: int = 1000) -> tuple[list[LogGroup], list[LogGroup]]:
    """Training groups for three rotations of the 4-cycle walk and test
    groups for the held-out fourth rotation, as log groups so the full
    graph pipeline runs on them."""
    train = [
        _sequence_group(f"rot-{name}-{i:04d}", seq)
        for name in ("abcda", "bcdab", "cdabc")
        for i, seq in ((i, _ROTATIONS[name]) for i in range(copies))
    ]
    test = [_sequence_group(f"rot-dabcd-{i:04d}", _ROTATIONS["dabcd"]) for i in range(copies)]
    return train, test


# -- contamination and splitting -------------------------------------------


def contaminate(
    normal_train: list, anomaly_pool: list, rate: float, seed: int = 0
) -> list:
    """Mix anomalies into a normal training set so they make up `rate` of
    the result; sampling is seeded and without replacement. Injected items
    keep their true labels for auditing."""
    if not 0.0 <= rate <= 0.5:
        raise ConfigError(f"contamination rate {rate} outside [0, 0.5]")
    if rate == 0.0:
        return list(normal_train)
    n = len(normal_train)
    n_inject = int(rate * n / (1.0 - rate))
    if n_inject > len(anomaly_pool):
        raise PoolTooSmall(f"need {n_inject} anomalies, pool has {len(anomaly_pool)}")
    rng = np.random.default_rng(seed)
    picked = rng.choice(len(anomaly_pool), size=n_inject, replace=False)
    mixed = list(normal_train) + [anomaly_pool[i] for i in picked]
    rng.shuffle(mixed)
    return mixed


@dataclass
class Split:
    train: list = field(default_factory=list)  # normal-only
    val: list = field(default_factory=list)
    test: list = field(default_factory=list)


def split(items: list, ratios=(0.70, 0.05, 0.25), seed: int = 0) -> Split:
    """Normal-instance split by `ratios`; the validation part receives an
    equal number of anomalies and the test part everything left over.
    Items without an 'anomalous' label count as normal."""
    if len(ratios) != 3 or abs(sum(ratios) - 1.0) > 1e-9 or min(ratios) < 0:
        raise ConfigError(f"ratios {ratios} must be three non-negatives summing to 1")
    normals = [g for g in items if g.label != ANOMALOUS]
    anomalies = [g for g in items if g.label == ANOMALOUS]
    rng = np.random.default_rng(seed)
    normals = [normals[i] for i in rng.permutation(len(normals))]
    anomalies = [anomalies[i] for i in rng.permutation(len(anomalies))]
    n_train = int(ratios[0] * len(normals))
    n_val = int(ratios[1] * len(normals))
    val_anoms = n_val
    if val_anoms > len(anomalies):
        log.warning(
            "validation wants %d anomalies but only %d exist; using all", val_anoms, len(anomalies)
        )
        val_anoms = len(anomalies)
    return Split(
        train=normals[:n_train],
        val=normals[n_train : n_train + n_val] + anomalies[:val_anoms],
        test=normals[n_train + n_val :] + anomalies[val_anoms:],
    )


# -- count-matrix baselines -------------------------------------------------


def pca_baseline(counts: np.ndarray, variance_fraction: float = 0.95) -> np.ndarray:
    """Squared residual after projecting each centered row onto the top
    principal components covering `variance_fraction` of the variance."""
    x = np.asarray(counts, dtype=np.float64)
    centered = x - x.mean(axis=0, keepdims=True)
    u, s, vt = np.linalg.svd(centered, full_matrices=False)
    var = s * s
    total = var.sum()
    if total == 0.0:
        return np.zeros(x.shape[0])
    n_comp = int(np.searchsorted(np.cumsum(var) / total, variance_fraction) + 1)
    n_comp = min(n_comp, len(s))
    basis = vt[:n_comp]
    residual = centered - (centered @ basis.T) @ basis
    return (residual * residual).sum(axis=1)


def hbos_baseline(counts: np.ndarray, bins: int = 10, eps: float = 1e-9) -> np.ndarray:
    """Histogram-based outlier score: sum over features of
    log(1 / (bin density + eps)), with equal-width bins per feature and
    out-of-range values clamped to the edge bins."""
    x = np.asarray(counts, dtype=np.float64)
    n, n_feat = x.shape
    scores = np.zeros(n)
    for f in range(n_feat):
        col = x[:, f]
        lo, hi = col.min(), col.max()
        if hi == lo:
            density = np.ones(1)
            idx = np.zeros(n, dtype=np.int64)
        else:
            width = (hi - lo) / bins
            idx = np.clip(((col - lo) / width).astype(np.int64), 0, bins - 1)
            density = np.bincount(idx, minlength=bins) / n
        scores += np.log(1.0 / (density[idx] + eps))
    return scores
