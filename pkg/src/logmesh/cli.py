"""Command-line interface.

Each subcommand is a thin client of the service layer: it reads local
files, builds the same request model the HTTP API accepts, executes it
(in-process by default, or against a remote server via --server), and
writes the response payload back to local files.

Exit codes: 0 success, 1 validation error, 2 runtime error.
"""

from __future__ import annotations

import json
import os
import sys

import click
import httpx
from pydantic import ValidationError

from .errors import (
    ConfigError,
    FormatError,
    LogmeshError,
    MalformedDescriptor,
    SchemaError,
)
from .pipeline import SEED_ENV, load_config, run_pipeline, validate_config
from .service import schemas as s
from .service.app import (
    handle_bench_synth,
    handle_embed,
    handle_eval,
    handle_explain,
    handle_graphs,
    handle_group,
    handle_parse,
    handle_run,
    handle_score,
    handle_train,
)

_HANDLERS = {
    "parse": (handle_parse, s.ParseResponse),
    "group": (handle_group, s.GroupResponse),
    "embed": (handle_embed, s.EmbedResponse),
    "graphs": (handle_graphs, s.GraphsResponse),
    "train": (handle_train, s.TrainResponse),
    "score": (handle_score, s.ScoreResponse),
    "explain": (handle_explain, s.ExplainResponse),
    "eval": (handle_eval, s.EvalResponse),
    "bench-synth": (handle_bench_synth, s.BenchSynthResponse),
    "run": (handle_run, s.RunResponse),
}

_VALIDATION_ERRORS = (ConfigError, MalformedDescriptor, FormatError, SchemaError, ValidationError)


def _call(server: str | None, stage: str, request):
    handler, response_cls = _HANDLERS[stage]
    if not server:
        return handler(request)
    url = f"{server.rstrip('/')}/{stage}"
    resp = httpx.post(url, json=request.model_dump(mode="json"), timeout=3600.0)
    if resp.status_code != 200:
        raise LogmeshError(f"{url} -> HTTP {resp.status_code}: {resp.text}")
    return response_cls.model_validate(resp.json())


def _read_text(path: str) -> str:
    try:
        with open(path) as fh:
            return fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc


def _read_json(path: str):
    text = _read_text(path)
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path} is not valid JSON: {exc}") from exc


def _load_format(path: str) -> dict:
    """Format file: either a bare format string on the first line, or a
    JSON object {format, id_field, id_pattern}."""
    text = _read_text(path).strip()
    if not text:
        raise ConfigError(f"format file {path} is empty")
    if text.startswith("{"):
        data = json.loads(text)
        if "format" not in data:
            raise ConfigError(f"format file {path} needs a 'format' key")
        return {
            "format": data["format"],
            "id_field": data.get("id_field"),
            "id_pattern": data.get("id_pattern"),
        }
    return {"format": text.splitlines()[0].strip(), "id_field": None, "id_pattern": None}


def _load_masks(path: str | None) -> list[str]:
    """Mask file: a JSON array of regex strings, or one regex per line."""
    if path is None:
        return []
    text = _read_text(path).strip()
    if not text:
        return []
    if text.startswith("["):
        data = json.loads(text)
        return [m if isinstance(m, str) else m["pattern"] for m in data]
    return [line.strip() for line in text.splitlines() if line.strip() and not line.startswith("#")]


def _seed_override() -> int | None:
    value = os.environ.get(SEED_ENV)
    if value is None:
        return None
    try:
        return int(value)
    except ValueError as exc:
        raise ConfigError(f"{SEED_ENV}={value!r} is not an integer") from exc


def _write_jsonl(rows, path: str) -> None:
    with open(path, "w") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")


server_option = click.option("--server", default=None, metavar="URL", help="Run against a remote logmesh service instead of in-process.")


@click.group()
def cli():
    """Event logs to directed graphs to one-class anomaly detection."""


@cli.command()
@click.option("--format", "format_path", required=True, type=click.Path(), help="Format descriptor file.")
@click.option("--mask", "mask_path", default=None, type=click.Path(), help="Masking regex file.")
@click.option("--in", "in_path", required=True, type=click.Path(), help="Raw log file.")
@click.option("--out-records", required=True, type=click.Path())
@click.option("--out-catalog", required=True, type=click.Path())
@click.option("--depth", default=4, show_default=True)
@click.option("--similarity", default=0.4, show_default=True)
@click.option("--max-children", default=100, show_default=True)
@server_option
def parse(format_path, mask_path, in_path, out_records, out_catalog, depth, similarity, max_children, server):
    """Parse a raw log file into records and a template catalog."""
    fmt = _load_format(format_path)
    req = s.ParseRequest(
        lines=_read_text(in_path).splitlines(),
        masks=_load_masks(mask_path),
        drain=s.DrainOptionsModel(depth=depth, similarity=similarity, max_children=max_children),
        **fmt,
    )
    resp = _call(server, "parse", req)
    _write_jsonl((r.model_dump() for r in resp.records), out_records)
    with open(out_catalog, "w") as fh:
        json.dump(resp.catalog, fh)
    click.echo(f"{len(resp.records)} records, {len(resp.catalog)} templates, {resp.malformed} malformed")


@cli.command()
@click.option("--records", "records_path", required=True, type=click.Path())
@click.option("--by", type=click.Choice(["id", "id-window"]), default="id", show_default=True)
@click.option("--window", default=100, show_default=True)
@click.option("--labels", "labels_path", default=None, type=click.Path())
@click.option("--out", "out_path", required=True, type=click.Path())
@server_option
def group(records_path, by, window, labels_path, out_path, server):
    """Group records by identifier (optionally into fixed windows)."""
    from .io import read_line_labels

    records = [s.RecordModel.model_validate(json.loads(line)) for line in _read_text(records_path).splitlines() if line.strip()]
    line_labels = read_line_labels(labels_path) if labels_path else None
    req = s.GroupRequest(records=records, by=by, window=window, line_labels=line_labels)
    resp = _call(server, "group", req)
    _write_jsonl((g.model_dump(exclude_defaults=False) for g in resp.groups), out_path)
    click.echo(f"{len(resp.groups)} groups")


@cli.command()
@click.option("--catalog", "catalog_path", required=True, type=click.Path())
@click.option("--vectors", "vectors_path", default=None, type=click.Path())
@click.option("--onehot", is_flag=True, default=False)
@click.option("--out", "out_path", required=True, type=click.Path())
@server_option
def embed(catalog_path, vectors_path, onehot, out_path, server):
    """Produce per-template attribute vectors (semantic or one-hot)."""
    catalog = _read_json(catalog_path)
    vectors = None
    if not onehot:
        if vectors_path is None:
            raise ConfigError("--vectors is required unless --onehot is set")
        from .semantics import load_vectors

        table = load_vectors(vectors_path)
        vectors = {w: v.tolist() for w, v in table.vectors.items()}
    req = s.EmbedRequest(catalog=catalog, onehot=onehot, vectors=vectors)
    resp = _call(server, "embed", req)
    with open(out_path, "w") as fh:
        json.dump(resp.embeddings, fh)
    click.echo(f"{len(resp.embeddings)} template vectors ({resp.mode})")


@cli.command()
@click.option("--groups", "groups_path", required=True, type=click.Path())
@click.option("--embeddings", "embeddings_path", required=True, type=click.Path())
@click.option("--out", "out_path", required=True, type=click.Path())
@server_option
def graphs(groups_path, embeddings_path, out_path, server):
    """Build one attributed directed graph per group."""
    groups = [s.GroupModel.model_validate(json.loads(line)) for line in _read_text(groups_path).splitlines() if line.strip()]
    req = s.GraphsRequest(groups=groups, embeddings=_read_json(embeddings_path))
    resp = _call(server, "graphs", req)
    _write_jsonl((g.model_dump() for g in resp.graphs), out_path)
    click.echo(f"{len(resp.graphs)} graphs")


def _load_graph_models(path: str) -> list[s.GraphModel]:
    return [s.GraphModel.model_validate(json.loads(line)) for line in _read_text(path).splitlines() if line.strip()]


@cli.command()
@click.option("--graphs", "graphs_path", required=True, type=click.Path())
@click.option("--cfg", "cfg_path", default=None, type=click.Path(), help='JSON {"model": {...}, "train": {...}}.')
@click.option("--val-graphs", "val_path", default=None, type=click.Path())
@click.option("--out", "out_path", required=True, type=click.Path())
@server_option
def train(graphs_path, cfg_path, val_path, out_path, server):
    """Train the one-class model on (assumed normal) graphs."""
    cfg = _read_json(cfg_path) if cfg_path else {}
    model_cfg = s.ModelConfigModel.model_validate(cfg.get("model", {}))
    train_cfg = s.TrainConfigModel.model_validate(cfg.get("train", {}))
    seed = _seed_override()
    if seed is not None:
        train_cfg.seed = seed
    req = s.TrainRequest(
        graphs=_load_graph_models(graphs_path),
        model=model_cfg,
        train=train_cfg,
        val_graphs=_load_graph_models(val_path) if val_path else None,
    )
    resp = _call(server, "train", req)
    with open(out_path, "w") as fh:
        json.dump(resp.model, fh)
    click.echo(f"trained {train_cfg.epochs} epochs; final loss {resp.loss_trace[-1]:.6g}")


@cli.command()
@click.option("--model", "model_path", required=True, type=click.Path())
@click.option("--graphs", "graphs_path", required=True, type=click.Path())
@click.option("--out", "out_path", required=True, type=click.Path())
@server_option
def score(model_path, graphs_path, out_path, server):
    """Score graphs by distance to the hypersphere center."""
    req = s.ScoreRequest(model=_read_json(model_path), graphs=_load_graph_models(graphs_path))
    resp = _call(server, "score", req)
    _write_jsonl((e.model_dump() for e in resp.scores), out_path)
    click.echo(f"{len(resp.scores)} graphs scored")


@cli.command()
@click.option("--model", "model_path", required=True, type=click.Path())
@click.option("--graphs", "graphs_path", required=True, type=click.Path())
@click.option("--top", default=3, show_default=True)
@click.option("--catalog", "catalog_path", default=None, type=click.Path(), help="Catalog for template texts in labels.")
@click.option("--dot-dir", "dot_dir", default=None, type=click.Path())
@click.option("--out", "out_path", required=True, type=click.Path())
@server_option
def explain(model_path, graphs_path, top, catalog_path, dot_dir, out_path, server):
    """Per-node importance for each graph, optionally with DOT files."""
    templates = None
    if catalog_path:
        templates = [" ".join(t) for t in _read_json(catalog_path)]
    req = s.ExplainRequest(
        model=_read_json(model_path),
        graphs=_load_graph_models(graphs_path),
        top=top,
        templates=templates,
        include_dot=dot_dir is not None,
    )
    resp = _call(server, "explain", req)
    rows = []
    for expl in resp.explanations:
        row = expl.model_dump()
        row["top"] = resp.top[expl.group_key]
        rows.append(row)
    _write_jsonl(rows, out_path)
    if dot_dir is not None:
        os.makedirs(dot_dir, exist_ok=True)
        for key, src in resp.dot.items():
            safe = "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in key)[:80]
            with open(os.path.join(dot_dir, f"{safe}.dot"), "w") as fh:
                fh.write(src)
    click.echo(f"{len(resp.explanations)} graphs explained")


@cli.command(name="eval")
@click.option("--scores", "scores_path", required=True, type=click.Path())
@click.option("--out", "out_path", required=True, type=click.Path())
@server_option
def eval_cmd(scores_path, out_path, server):
    """ROC AUC and average precision from a scores file."""
    entries = [json.loads(line) for line in _read_text(scores_path).splitlines() if line.strip()]
    for e in entries:
        if "score" not in e or "label" not in e:
            raise FormatError("each score entry needs 'score' and 'label'")
    req = s.EvalRequest(
        scores=[float(e["score"]) for e in entries],
        labels=[1 if e["label"] in (1, "1", "anomalous") else 0 for e in entries],
    )
    resp = _call(server, "eval", req)
    with open(out_path, "w") as fh:
        json.dump(resp.model_dump(), fh, indent=2)
    click.echo(json.dumps(resp.model_dump()))


@cli.command(name="bench-synth")
@click.option("--spec", "spec_path", default=None, type=click.Path(), help="SyntheticSpec JSON; defaults to the full-size benchmark.")
@click.option("--out-dir", "out_dir", required=True, type=click.Path())
@server_option
def bench_synth(spec_path, out_dir, server):
    """Generate the synthetic structural benchmark as a graphs file."""
    spec = s.SyntheticSpecModel.model_validate(_read_json(spec_path)) if spec_path else s.SyntheticSpecModel()
    resp = _call(server, "bench-synth", s.BenchSynthRequest(spec=spec))
    os.makedirs(out_dir, exist_ok=True)
    _write_jsonl((g.model_dump() for g in resp.graphs), os.path.join(out_dir, "graphs.jsonl"))
    with open(os.path.join(out_dir, "spec.json"), "w") as fh:
        json.dump(spec.model_dump(), fh, indent=2)
    click.echo(f"{len(resp.graphs)} graphs written to {out_dir}")


@cli.command()
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--out-dir", "out_dir", default=None, type=click.Path(), help="Override out_dir from the config.")
@click.option("--seed", default=None, type=int, help="Override train/split seeds.")
@click.option("--epochs", default=None, type=int, help="Override training epochs.")
@server_option
def run(config_path, out_dir, seed, epochs, server):
    """Run the whole pipeline from one config file."""
    if server:
        data = _read_json(config_path)
        if out_dir is not None:
            data["out_dir"] = out_dir
        if seed is not None:
            data.setdefault("train", {})["seed"] = seed
            data.setdefault("split", {})["seed"] = seed
        if epochs is not None:
            data.setdefault("train", {})["epochs"] = epochs
        resp = _call(server, "run", s.RunRequest(config=data))
        report = resp.report
    else:
        cfg = load_config(config_path)
        if out_dir is not None:
            cfg.out_dir = out_dir
        if seed is not None:
            cfg.train.seed = seed
            cfg.split.seed = seed
        if epochs is not None:
            cfg.train.epochs = epochs
        problems = validate_config(cfg)
        if problems:
            raise ConfigError("; ".join(problems))
        report = run_pipeline(cfg)
    metrics = report.get("metrics")
    click.echo(json.dumps({"metrics": metrics, "counts": report.get("counts")}))


@cli.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
def serve(host, port):
    """Run the logmesh HTTP service."""
    import uvicorn

    uvicorn.run("logmesh.service.app:app", host=host, port=port)


def main(argv=None) -> None:
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.UsageError as exc:
        exc.show()
        sys.exit(1)
    except click.ClickException as exc:
        exc.show()
        sys.exit(1)
    except click.exceptions.Abort:
        sys.exit(2)
    except _VALIDATION_ERRORS as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    except LogmeshError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    except httpx.HTTPError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    sys.exit(0)


if __name__ == "__main__":
    main()
