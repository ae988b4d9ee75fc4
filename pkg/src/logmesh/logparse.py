"""Online log parsing: format descriptors, parameter masking, and the
fixed-depth-tree template miner.

A raw log line is split into header fields plus free-text content by a
:class:`FormatDescriptor`. Content tokens are then routed through a
:class:`Drain` tree that merges similar token sequences into templates;
every line ends up with a dense template id into a :class:`TemplateCatalog`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import IoError, MalformedDescriptor, MalformedLine

WILDCARD = "<*>"

_FIELD_RE = re.compile(r"<([^<>]+)>")


@dataclass(frozen=True)
class MaskRule:
    """Replace every match of `pattern` in the content with a wildcard."""

    pattern: str
    replacement: str = WILDCARD

    def compiled(self) -> re.Pattern:
        try:
            return re.compile(self.pattern)
        except re.error as exc:
            raise MalformedDescriptor(f"bad mask regex {self.pattern!r}: {exc}") from exc


class FormatDescriptor:
    """Describes the fixed layout of a log line.

    `format` names the header fields in order, e.g.
    ``"<Date> <Time> <Pid> <Level> <Component>: <Content>"``. Exactly one
    field must be called ``Content``; it absorbs the rest of the line.
    The identifier used for grouping comes either from a named header
    field (`id_field`) or from a regex searched in the raw content
    (`id_pattern`, first match wins).
    """

    def __init__(
        self,
        format: str,
        id_field: str | None = None,
        id_pattern: str | None = None,
        masks: tuple[MaskRule, ...] | list[MaskRule] = (),
        time_fields: tuple[str, ...] | None = None,
    ):
        self.format = format
        self.id_field = id_field
        self.id_pattern = id_pattern
        self.masks = tuple(masks)
        self.fields = _FIELD_RE.findall(format)
        if self.fields.count("Content") != 1:
            raise MalformedDescriptor("format must contain exactly one <Content> field")
        if id_field is not None and id_field not in self.fields:
            raise MalformedDescriptor(f"id_field {id_field!r} is not a format field")
        self._id_re = re.compile(id_pattern) if id_pattern else None
        self._mask_res = [(m.compiled(), m.replacement) for m in self.masks]
        if time_fields is None:
            time_fields = tuple(f for f in self.fields if f in ("Date", "Time", "Timestamp"))
        self.time_fields = time_fields
        self._line_re = self._build_regex(format)

    @staticmethod
    def _build_regex(format: str) -> re.Pattern:
        parts = _FIELD_RE.split(format)
        out = ["^"]
        for i, part in enumerate(parts):
            if i % 2 == 1:  # a captured field name
                out.append(r"(?P<%s>.*)" % part if part == "Content" else r"(?P<%s>\S+?)" % part)
            else:
                out.append(re.sub(r"\s+", r"\\s+", re.escape(part).replace(r"\ ", " ")))
        out.append("$")
        try:
            return re.compile("".join(out))
        except re.error as exc:
            raise MalformedDescriptor(f"format {format!r} does not compile: {exc}") from exc

    def mask(self, content: str) -> str:
        for rx, repl in self._mask_res:
            content = rx.sub(repl, content)
        return content


@dataclass
class LogRecord:
    """One parsed log message."""

    line_no: int
    ts: str
    identifier: str
    tokens: list[str]
    template_id: int = -1


def parse_line(line_no: int, text: str, fmt: FormatDescriptor) -> tuple[dict, str, list[str]]:
    """Split one line into (header fields, identifier, masked content tokens).

    Raises MalformedLine when the line does not match the descriptor or
    has empty content.
    """
    match = fmt._line_re.match(text.strip())
    if match is None:
        raise MalformedLine(f"line {line_no} does not match format")
    headers = match.groupdict()
    content = headers.pop("Content", "").strip()
    if not content:
        raise MalformedLine(f"line {line_no} has empty content")

    identifier = ""
    if fmt.id_field is not None:
        identifier = headers.get(fmt.id_field, "")
    elif fmt._id_re is not None:
        found = fmt._id_re.search(content)
        if found:
            identifier = found.group(1) if found.groups() else found.group(0)

    tokens = fmt.mask(content).split()
    return headers, identifier, tokens


@dataclass
class TemplateCatalog:
    """Ordered set of unique templates; ids are dense and never reassigned.

    Merging may rewrite a template's tokens in place (differing positions
    become wildcards) but the id and position are stable.
    """

    templates: list[list[str]] = field(default_factory=list)
    counts: list[int] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.templates)

    def add(self, tokens: list[str]) -> int:
        self.templates.append(list(tokens))
        self.counts.append(1)
        return len(self.templates) - 1

    def text(self, template_id: int) -> str:
        return " ".join(self.templates[template_id])


class _Node:
    __slots__ = ("children", "template_ids")

    def __init__(self):
        self.children: dict[str, _Node] = {}
        self.template_ids: list[int] = []


def _has_digit(token: str) -> bool:
    return any(ch.isdigit() for ch in token)


class Drain:
    """Fixed-depth-tree online template miner.

    The first tree level branches on token count, the next `depth - 2`
    levels on leading tokens (digit-bearing tokens collapse onto a
    wildcard branch), and leaves hold candidate templates compared by
    positional similarity.
    """

    def __init__(self, depth: int = 4, similarity: float = 0.4, max_children: int = 100):
        if depth < 3:
            raise MalformedDescriptor("drain depth must be >= 3")
        if not 0.0 < similarity < 1.0:
            raise MalformedDescriptor("similarity threshold must be in (0, 1)")
        self.depth = depth
        self.max_node_depth = depth - 2
        self.similarity = similarity
        self.max_children = max_children
        self.root = _Node()
        self.catalog = TemplateCatalog()

    # -- leaf similarity -------------------------------------------------

    @staticmethod
    def _seq_dist(template: list[str], tokens: list[str]) -> tuple[float, int]:
        """(fraction of positions with equal tokens, wildcard count)."""
        same = 0
        params = 0
        for t, c in zip(template, tokens):
            if t == WILDCARD:
                params += 1
            elif t == c:
                same += 1
        return same / len(template), params

    def _best_match(self, template_ids: list[int], tokens: list[str]) -> int | None:
        best_id = None
        best_sim = -1.0
        best_params = -1
        for tid in template_ids:
            sim, params = self._seq_dist(self.catalog.templates[tid], tokens)
            if sim > best_sim or (sim == best_sim and params > best_params):
                best_sim, best_params, best_id = sim, params, tid
        if best_id is not None and best_sim >= self.similarity:
            return best_id
        return None

    # -- tree walk -------------------------------------------------------

    def _leaf_for(self, tokens: list[str]) -> _Node | None:
        node = self.root.children.get(str(len(tokens)))
        if node is None:
            return None
        depth = 1
        for token in tokens:
            if depth >= self.max_node_depth or depth >= len(tokens):
                break
            child = node.children.get(token)
            if child is None:
                child = node.children.get(WILDCARD)
            if child is None:
                return None
            node = child
            depth += 1
        return node

    def _insert_path(self, tokens: list[str], template_id: int) -> None:
        key = str(len(tokens))
        node = self.root.children.setdefault(key, _Node())
        depth = 1
        for token in tokens:
            if depth >= self.max_node_depth or depth >= len(tokens):
                break
            if token in node.children:
                node = node.children[token]
            elif _has_digit(token):
                node = node.children.setdefault(WILDCARD, _Node())
            elif WILDCARD in node.children:
                if len(node.children) < self.max_children:
                    node = node.children.setdefault(token, _Node())
                else:
                    node = node.children[WILDCARD]
            else:
                if len(node.children) + 1 < self.max_children:
                    node = node.children.setdefault(token, _Node())
                elif len(node.children) + 1 == self.max_children:
                    node = node.children.setdefault(WILDCARD, _Node())
                else:
                    node = node.children[WILDCARD]
            depth += 1
        node.template_ids.append(template_id)

    def insert(self, tokens: list[str]) -> int:
        """Route a token sequence to its template, creating or merging as needed."""
        if not tokens:
            raise MalformedLine("cannot insert empty token list")
        leaf = self._leaf_for(tokens)
        match = self._best_match(leaf.template_ids, tokens) if leaf is not None else None
        if match is None:
            tid = self.catalog.add(tokens)
            self._insert_path(tokens, tid)
            return tid
        template = self.catalog.templates[match]
        merged = [t if t == c else WILDCARD for t, c in zip(template, tokens)]
        self.catalog.templates[match] = merged
        self.catalog.counts[match] += 1
        return match


@dataclass
class ParseResult:
    records: list[LogRecord]
    catalog: TemplateCatalog
    malformed: int = 0


def parse_lines(
    lines,
    fmt: FormatDescriptor,
    drain: Drain | None = None,
) -> ParseResult:
    """Parse an iterable of raw lines in order. Malformed lines are skipped
    and counted; blank lines are ignored."""
    drain = drain or Drain()
    records: list[LogRecord] = []
    malformed = 0
    for line_no, text in enumerate(lines, start=1):
        if not text.strip():
            continue
        try:
            headers, identifier, tokens = parse_line(line_no, text, fmt)
            template_id = drain.insert(tokens)
        except MalformedLine:
            malformed += 1
            continue
        ts = " ".join(headers.get(f, "") for f in fmt.time_fields).strip()
        records.append(LogRecord(line_no, ts, identifier, tokens, template_id))
    return ParseResult(records, drain.catalog, malformed)


def parse_file(path: str, fmt: FormatDescriptor, drain: Drain | None = None) -> ParseResult:
    try:
        with open(path, "r", errors="replace") as fh:
            return parse_lines(fh, fmt, drain)
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
