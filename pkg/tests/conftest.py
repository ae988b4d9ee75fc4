import numpy as np
import pytest

from logmesh.graphbuild import LogGraph
from logmesh.grouping import LogGroup
from logmesh.logparse import LogRecord


def make_group(key: str, template_ids, label: str = "unknown") -> LogGroup:
    records = [
        LogRecord(i + 1, "", key, [f"tok{tid}"], tid) for i, tid in enumerate(template_ids)
    ]
    return LogGroup(key, records, label)


def random_digraph(rng: np.random.Generator, n: int, density: float = 0.4, max_w: int = 4):
    adj = (rng.random((n, n)) < density).astype(np.int64)
    np.fill_diagonal(adj, 0)
    weights = adj * rng.integers(1, max_w + 1, size=(n, n))
    return adj, weights


def random_graph(rng: np.random.Generator, n: int, d_attr: int, key: str = "g") -> LogGraph:
    adj, weights = random_digraph(rng, n)
    return LogGraph(key, list(range(n)), adj, weights, rng.normal(size=(n, d_attr)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
