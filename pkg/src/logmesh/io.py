"""Readers and writers for the on-disk formats that connect the pipeline
stages: records and groups as JSON Lines, catalogs and embedding tables as
JSON, graphs as JSON Lines, scores and explanations as JSON Lines."""

from __future__ import annotations

import csv
import json

import numpy as np

from .errors import FormatError, IoError
from .explain import Explanation
from .graphbuild import LogGraph
from .grouping import LogGroup
from .logparse import LogRecord, TemplateCatalog


def _open_read(path: str):
    try:
        return open(path, "r")
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc


def _open_write(path: str):
    try:
        return open(path, "w")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def _jsonl(path: str):
    with _open_read(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                yield json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}:{line_no}: invalid JSON: {exc}") from exc


# -- records and catalog ---------------------------------------------------


def record_to_dict(rec: LogRecord) -> dict:
    return {"line_no": rec.line_no, "ts": rec.ts, "id": rec.identifier, "template_id": rec.template_id}


def record_from_dict(data: dict) -> LogRecord:
    try:
        return LogRecord(int(data["line_no"]), data.get("ts", ""), data.get("id", ""), [], int(data["template_id"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"bad record object {data!r}: {exc}") from exc


def write_records(records: list[LogRecord], path: str) -> None:
    with _open_write(path) as fh:
        for rec in records:
            fh.write(json.dumps(record_to_dict(rec)) + "\n")


def read_records(path: str) -> list[LogRecord]:
    return [record_from_dict(obj) for obj in _jsonl(path)]


def write_catalog(catalog: TemplateCatalog, path: str) -> None:
    with _open_write(path) as fh:
        json.dump(catalog.templates, fh)


def read_catalog(path: str) -> TemplateCatalog:
    with _open_read(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(data, list) or not all(isinstance(t, list) for t in data):
        raise FormatError(f"{path}: catalog must be a JSON array of token lists")
    return TemplateCatalog([list(map(str, t)) for t in data], [0] * len(data))


# -- groups ------------------------------------------------------------------


def group_to_dict(group: LogGroup) -> dict:
    out = {
        "group_key": group.group_key,
        "label": group.label,
        "records": [record_to_dict(r) for r in group.records],
    }
    if group.meta:
        out["meta"] = group.meta
    return out


def group_from_dict(data: dict) -> LogGroup:
    try:
        return LogGroup(
            data["group_key"],
            [record_from_dict(r) for r in data["records"]],
            data.get("label", "unknown"),
            dict(data.get("meta", {})),
        )
    except (KeyError, TypeError) as exc:
        raise FormatError(f"bad group object: {exc}") from exc


def write_groups(groups: list[LogGroup], path: str) -> None:
    with _open_write(path) as fh:
        for group in groups:
            fh.write(json.dumps(group_to_dict(group)) + "\n")


def read_groups(path: str) -> list[LogGroup]:
    return [group_from_dict(obj) for obj in _jsonl(path)]


def read_line_labels(path: str) -> dict[int, bool]:
    """CSV of line_no,label rows; label is 1/0 or anomalous/normal.
    A header row is detected and skipped."""
    labels: dict[int, bool] = {}
    with _open_read(path) as fh:
        for row_no, row in enumerate(csv.reader(fh), start=1):
            if not row or not row[0].strip():
                continue
            key, value = row[0].strip(), (row[1].strip() if len(row) > 1 else "")
            if row_no == 1 and not key.isdigit():
                continue  # header
            try:
                labels[int(key)] = value.lower() in ("1", "anomalous", "anomaly", "true")
            except ValueError as exc:
                raise FormatError(f"{path}:{row_no}: bad line number {key!r}") from exc
    return labels


# -- embedding tables --------------------------------------------------------


def write_embeddings(matrix: np.ndarray, path: str) -> None:
    """JSON object keyed by template id."""
    with _open_write(path) as fh:
        json.dump({str(i): matrix[i].tolist() for i in range(matrix.shape[0])}, fh)


def read_embeddings(path: str) -> np.ndarray:
    with _open_read(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: invalid JSON: {exc}") from exc
    return embeddings_from_dict(data, origin=path)


def embeddings_from_dict(data: dict, origin: str = "embeddings") -> np.ndarray:
    if not isinstance(data, dict) or not data:
        raise FormatError(f"{origin}: expected a non-empty object keyed by template id")
    try:
        keys = sorted(int(k) for k in data)
    except ValueError as exc:
        raise FormatError(f"{origin}: keys must be template ids: {exc}") from exc
    if keys != list(range(len(keys))):
        raise FormatError(f"{origin}: template ids must be dense 0..{len(keys) - 1}")
    rows = [np.asarray(data[str(k)], dtype=np.float64) for k in keys]
    dims = {r.shape for r in rows}
    if len(dims) != 1 or rows[0].ndim != 1:
        raise FormatError(f"{origin}: rows must share one dimension, got {dims}")
    return np.vstack(rows)


# -- graphs -------------------------------------------------------------------


def graph_to_dict(graph: LogGraph) -> dict:
    out = {
        "group_key": graph.group_key,
        "label": graph.label,
        "nodes": list(graph.nodes),
        "edges": graph.edge_list(),
        "x": graph.attrs.tolist(),
    }
    if graph.meta:
        out["meta"] = graph.meta
    return out


def graph_from_dict(data: dict) -> LogGraph:
    try:
        nodes = [int(t) for t in data["nodes"]]
        n = len(nodes)
        weights = np.zeros((n, n), dtype=np.int64)
        for i, j, w in data["edges"]:
            weights[int(i), int(j)] = int(w)
        attrs = np.asarray(data["x"], dtype=np.float64)
        if attrs.ndim == 1:
            attrs = attrs.reshape(n, -1)
        if attrs.shape[0] != n:
            raise FormatError(f"{n} nodes but {attrs.shape[0]} attribute rows")
        return LogGraph(
            data["group_key"],
            nodes,
            (weights > 0).astype(np.int64),
            weights,
            attrs,
            data.get("label", "unknown"),
            dict(data.get("meta", {})),
        )
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise FormatError(f"bad graph object: {exc}") from exc


def write_graphs(graphs: list[LogGraph], path: str, canonical: bool = True) -> None:
    """Graphs serialize in canonical node order (sorted by template id) so
    structurally equal groups produce identical lines."""
    with _open_write(path) as fh:
        for graph in graphs:
            fh.write(json.dumps(graph_to_dict(graph.canonical() if canonical else graph)) + "\n")


def read_graphs(path: str) -> list[LogGraph]:
    return [graph_from_dict(obj) for obj in _jsonl(path)]


# -- scores and explanations --------------------------------------------------


def write_scores(entries: list[dict], path: str) -> None:
    with _open_write(path) as fh:
        for entry in entries:
            fh.write(json.dumps(entry) + "\n")


def read_scores(path: str) -> list[dict]:
    out = []
    for obj in _jsonl(path):
        if "score" not in obj:
            raise FormatError(f"{path}: score entry missing 'score': {obj!r}")
        out.append(obj)
    return out


def explanation_to_dict(expl: Explanation) -> dict:
    return {
        "group_key": expl.group_key,
        "score": expl.score,
        "nodes": [
            {
                "node": ni.node,
                "template_id": ni.template_id,
                "template": ni.template,
                "importance": ni.importance,
            }
            for ni in expl.nodes
        ],
        "ranked": expl.ranked,
    }


def write_explanations(explanations: list[Explanation], path: str) -> None:
    with _open_write(path) as fh:
        for expl in explanations:
            fh.write(json.dumps(explanation_to_dict(expl)) + "\n")
