import json
import socket
import subprocess
import sys
import threading
import time

import pytest

from logmesh.cli import main


def run_cli(*argv):
    """Invoke the CLI entry point in-process and capture its exit code."""
    try:
        main(list(argv))
    except SystemExit as exc:
        return exc.code if exc.code is not None else 0
    return 0


@pytest.fixture
def workspace(tmp_path):
    log = tmp_path / "demo.log"
    lines = []
    for block in range(6):
        for step in ("OpenFile", "WriteChunk", "WriteChunk", "CloseFile"):
            lines.append(f"INFO {step} block blk_{block} done")
    log.write_text("\n".join(lines) + "\n")
    fmt = tmp_path / "format.json"
    fmt.write_text(json.dumps({"format": "<Level> <Content>", "id_pattern": r"blk_\d+"}))
    masks = tmp_path / "masks.txt"
    masks.write_text("blk_\\d+\n")
    labels = tmp_path / "labels.csv"
    labels.write_text("line_no,label\n" + "\n".join(f"{i},0" for i in range(1, 21)) + "\n21,1\n22,0\n23,0\n24,0\n")
    return tmp_path


def test_stage_by_stage_pipeline(workspace):
    ws = workspace
    assert run_cli(
        "parse",
        "--format", str(ws / "format.json"),
        "--mask", str(ws / "masks.txt"),
        "--in", str(ws / "demo.log"),
        "--out-records", str(ws / "records.jsonl"),
        "--out-catalog", str(ws / "catalog.json"),
    ) == 0
    records = [json.loads(l) for l in (ws / "records.jsonl").read_text().splitlines()]
    assert len(records) == 24
    assert set(records[0]) == {"line_no", "ts", "id", "template_id"}
    catalog = json.loads((ws / "catalog.json").read_text())
    assert len(catalog) == 3  # OpenFile / WriteChunk / CloseFile lines

    assert run_cli(
        "group",
        "--records", str(ws / "records.jsonl"),
        "--by", "id",
        "--labels", str(ws / "labels.csv"),
        "--out", str(ws / "groups.jsonl"),
    ) == 0
    groups = [json.loads(l) for l in (ws / "groups.jsonl").read_text().splitlines()]
    assert len(groups) == 6
    assert sum(g["label"] == "anomalous" for g in groups) == 1

    assert run_cli(
        "embed",
        "--catalog", str(ws / "catalog.json"),
        "--onehot",
        "--out", str(ws / "embeddings.json"),
    ) == 0

    assert run_cli(
        "graphs",
        "--groups", str(ws / "groups.jsonl"),
        "--embeddings", str(ws / "embeddings.json"),
        "--out", str(ws / "graphs.jsonl"),
    ) == 0
    graphs = [json.loads(l) for l in (ws / "graphs.jsonl").read_text().splitlines()]
    assert all(set(g) >= {"group_key", "label", "nodes", "edges", "x"} for g in graphs)

    cfg = ws / "train.json"
    cfg.write_text(json.dumps({"model": {"dim": 8}, "train": {"epochs": 3, "batch_size": 4}}))
    assert run_cli(
        "train",
        "--graphs", str(ws / "graphs.jsonl"),
        "--cfg", str(cfg),
        "--out", str(ws / "model.json"),
    ) == 0

    assert run_cli(
        "score",
        "--model", str(ws / "model.json"),
        "--graphs", str(ws / "graphs.jsonl"),
        "--out", str(ws / "scores.jsonl"),
    ) == 0
    scores = [json.loads(l) for l in (ws / "scores.jsonl").read_text().splitlines()]
    assert len(scores) == 6

    assert run_cli(
        "eval",
        "--scores", str(ws / "scores.jsonl"),
        "--out", str(ws / "report.json"),
    ) == 0
    report = json.loads((ws / "report.json").read_text())
    assert report["n_pos"] == 1 and report["n_neg"] == 5

    assert run_cli(
        "explain",
        "--model", str(ws / "model.json"),
        "--graphs", str(ws / "graphs.jsonl"),
        "--top", "2",
        "--catalog", str(ws / "catalog.json"),
        "--dot-dir", str(ws / "dot"),
        "--out", str(ws / "explanations.jsonl"),
    ) == 0
    explanations = [json.loads(l) for l in (ws / "explanations.jsonl").read_text().splitlines()]
    assert len(explanations) == 6
    assert all(len(e["top"]) <= 2 for e in explanations)
    dots = list((ws / "dot").glob("*.dot"))
    assert len(dots) == 6
    assert dots[0].read_text().startswith("digraph")


def test_bench_synth_and_run(workspace, monkeypatch):
    ws = workspace
    spec = ws / "spec.json"
    spec.write_text(json.dumps({"n_normal": 12, "n_per_anomaly": 2, "seed": 4}))
    assert run_cli("bench-synth", "--spec", str(spec), "--out-dir", str(ws / "bench")) == 0
    graphs = [json.loads(l) for l in (ws / "bench" / "graphs.jsonl").read_text().splitlines()]
    assert len(graphs) == 20

    cfg = ws / "pipeline.json"
    cfg.write_text(
        json.dumps(
            {
                "source": {"synthetic": {"n_normal": 40, "n_per_anomaly": 4, "seed": 3}},
                "embedding": {"mode": "onehot"},
                "model": {"dim": 8},
                "train": {"epochs": 2, "batch_size": 8},
                "out_dir": str(ws / "run1"),
            }
        )
    )
    assert run_cli("run", "--config", str(cfg)) == 0
    assert (ws / "run1" / "report.json").is_file()

    # LOGMESH_SEED override: equal seeds give byte-identical scores
    monkeypatch.setenv("LOGMESH_SEED", "123")
    assert run_cli("run", "--config", str(cfg), "--out-dir", str(ws / "run2")) == 0
    assert run_cli("run", "--config", str(cfg), "--out-dir", str(ws / "run3")) == 0
    assert (ws / "run2" / "scores.jsonl").read_text() == (ws / "run3" / "scores.jsonl").read_text()
    m2 = json.loads((ws / "run2" / "manifest.json").read_text())
    assert m2["seeds"] == {"train": 123, "split": 123}


class TestExitCodes:
    def test_validation_error_is_exit_1(self, workspace):
        ws = workspace
        cfg = ws / "bad.json"
        cfg.write_text(json.dumps({"source": {}, "out_dir": str(ws / "o")}))
        assert run_cli("run", "--config", str(cfg)) == 1

    def test_unsupported_proximity_is_exit_1(self, workspace):
        ws = workspace
        cfg = ws / "badk.json"
        cfg.write_text(
            json.dumps(
                {
                    "source": {"synthetic": {"n_normal": 5, "n_per_anomaly": 1}},
                    "model": {"proximity": 3},
                    "out_dir": str(ws / "o"),
                }
            )
        )
        code = run_cli("run", "--config", str(cfg))
        assert code == 1

    def test_missing_required_option_is_exit_1(self):
        assert run_cli("parse") == 1

    def test_runtime_error_is_exit_2(self, workspace):
        ws = workspace
        # structurally valid model file with inconsistent matrices -> runtime failure
        (ws / "model.json").write_text(json.dumps({
            "version": 1,
            "config": {"layers": 1, "proximity": 1, "dim": 2, "teleport": 0.1,
                       "fusion": "sum", "readout": "mean"},
            "theta": [[[[0.1, 0.2]], [[0.1, 0.2]]]],
            "center": [0.0, 0.0],
            "meta": {},
        }))
        (ws / "g.jsonl").write_text(json.dumps({
            "group_key": "g", "label": "unknown", "nodes": [0, 1],
            "edges": [[0, 1, 1]], "x": [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
        }) + "\n")
        code = run_cli("score", "--model", str(ws / "model.json"),
                       "--graphs", str(ws / "g.jsonl"), "--out", str(ws / "s.jsonl"))
        assert code == 2


def test_console_script_help():
    proc = subprocess.run(
        [sys.executable, "-m", "logmesh.cli", "--help"], capture_output=True, text=True
    )
    assert proc.returncode == 0
    for sub in ("parse", "group", "embed", "graphs", "train", "score", "explain",
                "eval", "bench-synth", "run", "serve"):
        assert sub in proc.stdout


def test_cli_against_live_server(workspace):
    import uvicorn

    from logmesh.service.app import create_app

    sock = socket.socket()
    sock.bind(("127.0.0.1", 0))
    port = sock.getsockname()[1]
    sock.close()
    config = uvicorn.Config(create_app(), host="127.0.0.1", port=port, log_level="error")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.time() + 20
    while not server.started:
        if time.time() > deadline:
            pytest.fail("server did not start")
        time.sleep(0.05)
    try:
        ws = workspace
        url = f"http://127.0.0.1:{port}"
        code = run_cli(
            "parse",
            "--server", url,
            "--format", str(ws / "format.json"),
            "--in", str(ws / "demo.log"),
            "--out-records", str(ws / "r.jsonl"),
            "--out-catalog", str(ws / "c.json"),
        )
        assert code == 0
        assert len((ws / "r.jsonl").read_text().splitlines()) == 24
    finally:
        server.should_exit = True
        thread.join(timeout=10)
