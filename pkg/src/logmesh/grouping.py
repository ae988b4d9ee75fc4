"""Partition parsed records into log groups and attach group labels."""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import MissingIdentifier
from .logparse import LogRecord

NORMAL = "normal"
ANOMALOUS = "anomalous"
UNKNOWN = "unknown"


@dataclass
class LogGroup:
    group_key: str
    records: list[LogRecord]
    label: str = UNKNOWN
    meta: dict = field(default_factory=dict)

    def template_ids(self) -> list[int]:
        return [r.template_id for r in self.records]


def group_by_identifier(records: list[LogRecord]) -> list[LogGroup]:
    """One group per distinct identifier, ordered by first appearance;
    records keep their input order within a group."""
    groups: dict[str, LogGroup] = {}
    for rec in records:
        if not rec.identifier:
            raise MissingIdentifier(f"record at line {rec.line_no} has no identifier")
        group = groups.get(rec.identifier)
        if group is None:
            group = groups[rec.identifier] = LogGroup(rec.identifier, [])
        group.records.append(rec)
    return list(groups.values())


def window_split(group: LogGroup, window_size: int = 100) -> list[LogGroup]:
    """Split a group into consecutive chunks of `window_size`; the final
    shorter chunk is kept as a group of its own."""
    if window_size < 1:
        raise ValueError("window_size must be >= 1")
    if len(group.records) <= window_size:
        return [group]
    out = []
    for i, start in enumerate(range(0, len(group.records), window_size)):
        chunk = group.records[start : start + window_size]
        out.append(LogGroup(f"{group.group_key}#w{i}", chunk, group.label, dict(group.meta)))
    return out


def label_groups(groups: list[LogGroup], line_labels: dict[int, bool] | None) -> list[LogGroup]:
    """A group is anomalous iff at least one of its lines is anomalous.

    `line_labels` maps line_no -> is_anomalous; lines absent from the map
    count as normal. With no label map at all, every group stays unknown.
    """
    if line_labels is None:
        for g in groups:
            g.label = UNKNOWN
        return groups
    for g in groups:
        anomalous = any(line_labels.get(r.line_no, False) for r in g.records)
        g.label = ANOMALOUS if anomalous else NORMAL
    return groups
