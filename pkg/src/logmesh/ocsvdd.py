"""One-class training on graph representations: hypersphere center from an
initial forward pass, mini-batch stochastic descent on the squared
center-distance plus weight decay, scoring, and model persistence."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .digcn import (
    ForwardPass,
    LayerParams,
    ModelConfig,
    PropagationOperators,
    batch_gradients,
    build_operators,
    forward,
)
from .errors import EmptyTrainingSet, NonFiniteLoss, SchemaError, ShapeMismatch
from .graphbuild import LogGraph

log = logging.getLogger(__name__)

MODEL_VERSION = 1

OPTIMIZERS = ("sgd", "adam")


@dataclass
class TrainConfig:
    batch_size: int = 128
    optimizer: str = "sgd"
    learning_rate: float = 0.01
    weight_decay: float = 1e-4
    epochs: int = 100
    seed: int = 0
    shuffle: bool = True

    def validate(self) -> list[str]:
        errors = []
        if self.batch_size < 1:
            errors.append("batch_size must be >= 1")
        if self.optimizer not in OPTIMIZERS:
            errors.append(f"optimizer must be one of {OPTIMIZERS}")
        if self.learning_rate <= 0:
            errors.append("learning_rate must be > 0")
        if self.weight_decay < 0:
            errors.append("weight_decay must be >= 0")
        if self.epochs < 1:
            errors.append("epochs must be >= 1")
        return errors


@dataclass
class OneClassModel:
    config: ModelConfig
    layers: list[LayerParams]
    center: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def d_attr(self) -> int:
        return self.layers[0].thetas[0].shape[0]


def init_params(cfg: ModelConfig, d_attr: int, rng: np.random.Generator) -> list[LayerParams]:
    """Uniform [-b, b] with b = sqrt(6 / (fan_in + fan_out)); no biases."""
    layers = []
    d_in = d_attr
    for _ in range(cfg.layers):
        bound = np.sqrt(6.0 / (d_in + cfg.dim))
        thetas = [rng.uniform(-bound, bound, size=(d_in, cfg.dim)) for _ in range(cfg.terms)]
        layers.append(LayerParams(thetas))
        d_in = cfg.layer_out_dim()
    return layers


def new_model(cfg: ModelConfig, d_attr: int, seed: int = 0) -> OneClassModel:
    rng = np.random.default_rng(seed)
    return OneClassModel(cfg, init_params(cfg, d_attr, rng), None, {"seed": seed})


def prepare(graphs: list[LogGraph], cfg: ModelConfig) -> list[tuple[PropagationOperators, np.ndarray]]:
    """Precompute per-graph propagation operators (parameter-independent,
    so they are reused across every epoch)."""
    return [
        (build_operators(g.adj, g.weights, cfg.teleport, cfg.proximity), g.attrs)
        for g in graphs
    ]


def forward_graph(graph: LogGraph, model: OneClassModel) -> ForwardPass:
    ops = build_operators(graph.adj, graph.weights, model.config.teleport, model.config.proximity)
    return forward(graph.attrs, ops, model.layers, model.config)


def init_center(
    prepared: list[tuple[PropagationOperators, np.ndarray]], model: OneClassModel
) -> np.ndarray:
    """Average representation under the initial parameters; frozen afterwards."""
    if not prepared:
        raise EmptyTrainingSet("center needs at least one training graph")
    acc = np.zeros(model.config.output_dim())
    for ops, x in prepared:
        acc += forward(x, ops, model.layers, model.config).z
    return acc / len(prepared)


class _Adam:
    def __init__(self, layers, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [[np.zeros_like(t) for t in lp.thetas] for lp in layers]
        self.v = [[np.zeros_like(t) for t in lp.thetas] for lp in layers]
        self.t = 0

    def step(self, layers, grads):
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for li, lp in enumerate(layers):
            for ti, theta in enumerate(lp.thetas):
                g = grads[li][ti]
                self.m[li][ti] = self.beta1 * self.m[li][ti] + (1 - self.beta1) * g
                self.v[li][ti] = self.beta2 * self.v[li][ti] + (1 - self.beta2) * g * g
                theta -= self.lr * (self.m[li][ti] / c1) / (np.sqrt(self.v[li][ti] / c2) + self.eps)


@dataclass
class TrainResult:
    model: OneClassModel
    loss_trace: list[float]
    best_epoch: int | None = None


def train(
    train_graphs: list[LogGraph],
    model: OneClassModel,
    tcfg: TrainConfig,
    val_graphs: list[LogGraph] | None = None,
    val_labels: list[int] | None = None,
) -> TrainResult:
    """Mini-batch stochastic descent of the one-class objective.

    The center is computed from the initial forward pass (if not already
    set) and stays fixed. When a labelled validation split is supplied the
    epoch with the best validation ROC AUC wins; otherwise the final epoch
    is kept.
    """
    if not train_graphs:
        raise EmptyTrainingSet("no training graphs")
    prepared = prepare(train_graphs, model.config)
    if model.center is None:
        model.center = init_center(prepared, model)
    val_prepared = prepare(val_graphs, model.config) if val_graphs else None
    select = val_prepared is not None and val_labels is not None and 0 < sum(val_labels) < len(val_labels)
    if val_graphs and not select:
        log.warning("validation split unusable for selection (needs both classes); keeping final epoch")

    rng = np.random.default_rng(tcfg.seed)
    adam = _Adam(model.layers, tcfg.learning_rate) if tcfg.optimizer == "adam" else None
    trace: list[float] = []
    best_auc = -1.0
    best_epoch = None
    best_layers = None
    for epoch in range(tcfg.epochs):
        order = rng.permutation(len(prepared)) if tcfg.shuffle else np.arange(len(prepared))
        losses = []
        for start in range(0, len(order), tcfg.batch_size):
            batch = [prepared[i] for i in order[start : start + tcfg.batch_size]]
            loss, grads = batch_gradients(
                batch, model.layers, model.config, model.center, tcfg.weight_decay
            )
            if not np.isfinite(loss):
                raise NonFiniteLoss(
                    f"epoch {epoch}, batch at {start}: loss={loss!r} "
                    f"(lr={tcfg.learning_rate}, wd={tcfg.weight_decay})"
                )
            if adam is not None:
                adam.step(model.layers, grads)
            else:
                for lp, gl in zip(model.layers, grads):
                    for theta, g in zip(lp.thetas, gl):
                        theta -= tcfg.learning_rate * g
            losses.append(loss)
        trace.append(float(np.mean(losses)))
        if select:
            from .evalkit import roc_auc

            val_scores = [
                float(np.linalg.norm(forward(x, ops, model.layers, model.config).z - model.center))
                for ops, x in val_prepared
            ]
            auc = roc_auc(val_scores, val_labels)
            if auc > best_auc:
                best_auc = auc
                best_epoch = epoch
                best_layers = [lp.copy() for lp in model.layers]
    if best_layers is not None:
        model.layers = best_layers
    model.meta.update(
        {
            "seed": tcfg.seed,
            "epochs": tcfg.epochs,
            "final_loss": trace[-1],
            **({"best_epoch": best_epoch, "val_auc": best_auc} if best_layers is not None else {}),
        }
    )
    return TrainResult(model, trace, best_epoch)


def score_graph(graph: LogGraph, model: OneClassModel) -> float:
    """Euclidean distance of the graph representation to the center."""
    if model.center is None:
        raise ShapeMismatch("model has no center; train or load it first")
    return float(np.linalg.norm(forward_graph(graph, model).z - model.center))


def score_graphs(graphs: list[LogGraph], model: OneClassModel) -> list[float]:
    return [score_graph(g, model) for g in graphs]


# -- persistence ---------------------------------------------------------


def model_to_dict(model: OneClassModel) -> dict:
    return {
        "version": MODEL_VERSION,
        "config": {
            "layers": model.config.layers,
            "proximity": model.config.proximity,
            "dim": model.config.dim,
            "teleport": model.config.teleport,
            "fusion": model.config.fusion,
            "readout": model.config.readout,
        },
        "theta": [[t.tolist() for t in lp.thetas] for lp in model.layers],
        "center": None if model.center is None else model.center.tolist(),
        "meta": model.meta,
    }


def model_from_dict(data: dict) -> OneClassModel:
    if not isinstance(data, dict):
        raise SchemaError("model file is not a JSON object")
    if data.get("version") != MODEL_VERSION:
        raise SchemaError(f"unsupported model version {data.get('version')!r}")
    try:
        cfg = ModelConfig(**data["config"])
        layers = [
            LayerParams([np.array(t, dtype=np.float64) for t in lp]) for lp in data["theta"]
        ]
        center = None if data.get("center") is None else np.array(data["center"], dtype=np.float64)
        meta = dict(data.get("meta", {}))
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"malformed model file: {exc}") from exc
    if cfg.validate():
        raise SchemaError(f"model config invalid: {cfg.validate()}")
    for lp in layers:
        if len(lp.thetas) != cfg.terms:
            raise SchemaError("parameter matrices do not match the proximity order")
    return OneClassModel(cfg, layers, center, meta)


def save_model(model: OneClassModel, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(model_to_dict(model), fh)


def load_model(path: str) -> OneClassModel:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise SchemaError(f"cannot read model file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaError(f"model file {path} is not valid JSON: {exc}") from exc
    return model_from_dict(data)
