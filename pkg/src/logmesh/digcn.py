"""Dense kernels of the digraph inception convolution.

Everything here is plain float64 numpy on small (n <= ~40 node) graphs:
the self-looped weighted adjacency, its row-stochastic first-order
proximity, the teleported stationary distribution, the symmetric
normalizations, the layer forward pass, readout, and the reverse-mode
gradients used by the one-class training loop.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyGraph, NoConvergence, ShapeMismatch

PPR_TOL = 1e-10
PPR_MAX_ITER = 10000

FUSIONS = ("sum", "concat")
READOUTS = ("mean", "sum", "max")


@dataclass
class ModelConfig:
    """Architecture hyperparameters (suggested defaults baked in)."""

    layers: int = 1
    proximity: int = 1  # highest proximity order k
    dim: int = 128
    teleport: float = 0.1
    fusion: str = "sum"
    readout: str = "mean"

    def validate(self) -> list[str]:
        errors = []
        if self.layers < 1:
            errors.append("layers must be >= 1")
        if self.proximity not in (1, 2):
            errors.append("proximity order must be 1 or 2")
        if self.dim < 1:
            errors.append("dim must be >= 1")
        if not 0.0 < self.teleport < 1.0:
            errors.append("teleport must be in (0, 1)")
        if self.fusion not in FUSIONS:
            errors.append(f"fusion must be one of {FUSIONS}")
        if self.readout not in READOUTS:
            errors.append(f"readout must be one of {READOUTS}")
        return errors

    @property
    def terms(self) -> int:
        """Number of convolution terms in the inception block."""
        return 2 if self.proximity == 1 else 3

    def layer_out_dim(self) -> int:
        return self.dim if self.fusion == "sum" else self.terms * self.dim

    def output_dim(self) -> int:
        return self.layer_out_dim()


def weighted_tilde_adjacency(adj: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """A-tilde = (A .* Y) + I: raw edge weights plus a unit self-loop.

    With all weights equal to 1 this reduces to the unweighted A + I.
    """
    adj = np.asarray(adj)
    weights = np.asarray(weights, dtype=np.float64)
    if adj.shape != weights.shape or adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
        raise ShapeMismatch(f"adjacency {adj.shape} vs weights {weights.shape}")
    return weights * (adj != 0) + np.eye(adj.shape[0])


def first_order_proximity(a_tilde: np.ndarray) -> np.ndarray:
    """Row-normalize: P = D-tilde^-1 A-tilde. Row sums are positive because
    of the unit self-loops."""
    return a_tilde / a_tilde.sum(axis=1, keepdims=True)


def ppr_stationary(
    p: np.ndarray, alpha: float, tol: float = PPR_TOL, max_iter: int = PPR_MAX_ITER
) -> np.ndarray:
    """Stationary distribution of the teleported chain
    (1 - alpha) P + (alpha / n) 1 1^T, by power iteration from uniform.

    Teleporting makes the chain irreducible and aperiodic, so pi is unique,
    strictly positive (>= alpha/n), and the iteration contracts at rate
    (1 - alpha).
    """
    n = p.shape[0]
    p_ppr = (1.0 - alpha) * p + alpha / n
    pi = np.full(n, 1.0 / n)
    residual = np.inf
    for _ in range(max_iter):
        nxt = pi @ p_ppr
        residual = np.abs(nxt - pi).sum()
        if residual < tol:
            return pi
        pi = nxt / nxt.sum()
    raise NoConvergence(
        f"PPR power iteration did not reach {tol:g} in {max_iter} steps", residual
    )


def psi_operator(p: np.ndarray, pi: np.ndarray) -> np.ndarray:
    """Psi = (Pi^1/2 P Pi^-1/2 + Pi^-1/2 P^T Pi^1/2) / 2, symmetrized."""
    sq = np.sqrt(pi)
    t = p * sq[:, None] / sq[None, :]
    psi = 0.5 * (t + t.T)
    return 0.5 * (psi + psi.T)


def second_order(p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Second-order proximity P2 and its symmetric normalization Phi.

    P2 masks P P^T + P^T P down to entries where both products are nonzero
    (shared out-neighbour AND shared in-neighbour), scaled by 1/4. Phi is
    W^-1/2 P2 W^-1/2 with W the row-sum diagonal (zero rows treated as 1),
    which makes Phi invariant to the scale convention.
    """
    m1 = p @ p.T
    m2 = p.T @ p
    mask = (m1 != 0.0) & (m2 != 0.0)
    p2 = 0.25 * (m1 + m2) * mask
    w = p2.sum(axis=1)
    w = np.where(w == 0.0, 1.0, w)
    inv_sq = 1.0 / np.sqrt(w)
    phi = p2 * inv_sq[:, None] * inv_sq[None, :]
    return p2, 0.5 * (phi + phi.T)


@dataclass
class PropagationOperators:
    """Per-graph matrices consumed by the convolution; reusable across a
    whole training run because they do not depend on the parameters."""

    p1: np.ndarray
    pi: np.ndarray
    psi: np.ndarray
    alpha: float
    p2: np.ndarray | None = None
    phi: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.p1.shape[0]


def build_operators(
    adj: np.ndarray, weights: np.ndarray, alpha: float, order: int = 1
) -> PropagationOperators:
    a_tilde = weighted_tilde_adjacency(adj, weights)
    p1 = first_order_proximity(a_tilde)
    pi = ppr_stationary(p1, alpha)
    psi = psi_operator(p1, pi)
    ops = PropagationOperators(p1, pi, psi, alpha)
    if order >= 2:
        ops.p2, ops.phi = second_order(p1)
    return ops


@dataclass
class LayerParams:
    """Per-layer parameter matrices, one per convolution term; bias-free."""

    thetas: list[np.ndarray]

    def copy(self) -> "LayerParams":
        return LayerParams([t.copy() for t in self.thetas])

    def frobenius_sq(self) -> float:
        return float(sum(np.sum(t * t) for t in self.thetas))


def _term_inputs(x: np.ndarray, ops: PropagationOperators, terms: int) -> list[np.ndarray]:
    inputs = [x, ops.psi @ x]
    if terms == 3:
        if ops.phi is None:
            raise ShapeMismatch("operators were built without the second-order term")
        inputs.append(ops.phi @ x)
    return inputs


def layer_forward(
    x: np.ndarray, ops: PropagationOperators, params: LayerParams, cfg: ModelConfig
) -> tuple[np.ndarray, tuple]:
    """One inception layer: fuse the per-order linear maps, then rectify.

    Returns the activated output and the cache needed by layer_backward.
    """
    if len(params.thetas) != cfg.terms:
        raise ShapeMismatch(f"expected {cfg.terms} parameter matrices, got {len(params.thetas)}")
    inputs = _term_inputs(x, ops, cfg.terms)
    outs = []
    for px, theta in zip(inputs, params.thetas):
        if px.shape[1] != theta.shape[0]:
            raise ShapeMismatch(f"input dim {px.shape[1]} vs theta {theta.shape}")
        outs.append(px @ theta)
    if cfg.fusion == "sum":
        dims = {o.shape[1] for o in outs}
        if len(dims) != 1:
            raise ShapeMismatch(f"sum fusion needs equal output dims, got {dims}")
        pre = outs[0].copy()
        for o in outs[1:]:
            pre += o
    else:
        pre = np.concatenate(outs, axis=1)
    z = np.maximum(pre, 0.0)
    return z, (x, inputs, pre)


def layer_backward(
    grad_out: np.ndarray,
    cache: tuple,
    ops: PropagationOperators,
    params: LayerParams,
    cfg: ModelConfig,
) -> tuple[np.ndarray, list[np.ndarray]]:
    """Backprop one layer; returns (grad wrt layer input, grads wrt thetas)."""
    x, inputs, pre = cache
    dpre = grad_out * (pre > 0.0)
    if cfg.fusion == "sum":
        dterms = [dpre] * len(params.thetas)
    else:
        cuts = np.cumsum([t.shape[1] for t in params.thetas])[:-1]
        dterms = np.split(dpre, cuts, axis=1)
    theta_grads = [px.T @ dt for px, dt in zip(inputs, dterms)]
    dx = dterms[0] @ params.thetas[0].T
    dx += ops.psi.T @ (dterms[1] @ params.thetas[1].T)
    if len(params.thetas) == 3:
        dx += ops.phi.T @ (dterms[2] @ params.thetas[2].T)
    return dx, theta_grads


def readout(z: np.ndarray, mode: str) -> np.ndarray:
    """Aggregate node rows into one graph vector (permutation-invariant)."""
    if z.ndim != 2 or z.shape[0] == 0:
        raise EmptyGraph("readout needs at least one node row")
    if mode == "mean":
        return z.mean(axis=0)
    if mode == "sum":
        return z.sum(axis=0)
    if mode == "max":
        return z.max(axis=0)
    raise ValueError(f"unknown readout {mode!r}")


@dataclass
class ForwardPass:
    """Graph vector plus everything needed to run the backward pass."""

    z: np.ndarray
    node_embeddings: np.ndarray
    caches: list = field(default_factory=list)
    ops: PropagationOperators | None = None


def forward(
    x: np.ndarray, ops: PropagationOperators, layers: list[LayerParams], cfg: ModelConfig
) -> ForwardPass:
    if x.shape[0] != ops.n:
        raise ShapeMismatch(f"{x.shape[0]} attribute rows for {ops.n} nodes")
    h = np.asarray(x, dtype=np.float64)
    caches = []
    for params in layers:
        h, cache = layer_forward(h, ops, params, cfg)
        caches.append(cache)
    return ForwardPass(readout(h, cfg.readout), h, caches, ops)


def backward(
    fp: ForwardPass, layers: list[LayerParams], cfg: ModelConfig, grad_z: np.ndarray
) -> list[list[np.ndarray]]:
    """Push d(loss)/d(graph vector) back through readout and all layers;
    returns per-layer, per-term parameter gradients."""
    zl = fp.node_embeddings
    n = zl.shape[0]
    if cfg.readout == "mean":
        grad_nodes = np.tile(grad_z / n, (n, 1))
    elif cfg.readout == "sum":
        grad_nodes = np.tile(grad_z, (n, 1))
    else:  # max: route each coordinate to its (first) argmax row
        grad_nodes = np.zeros_like(zl)
        rows = np.argmax(zl, axis=0)
        grad_nodes[rows, np.arange(zl.shape[1])] = grad_z
    grads: list[list[np.ndarray]] = [[] for _ in layers]
    for idx in range(len(layers) - 1, -1, -1):
        grad_nodes, theta_grads = layer_backward(
            grad_nodes, fp.caches[idx], fp.ops, layers[idx], cfg
        )
        grads[idx] = theta_grads
    return grads


def batch_gradients(
    batch: list[tuple[PropagationOperators, np.ndarray]],
    layers: list[LayerParams],
    cfg: ModelConfig,
    center: np.ndarray,
    weight_decay: float,
) -> tuple[float, list[list[np.ndarray]]]:
    """Mean squared center-distance over the batch plus the Frobenius
    penalty; returns (loss, gradients matching the layer structure)."""
    total = [[np.zeros_like(t) for t in lp.thetas] for lp in layers]
    dist = 0.0
    m = len(batch)
    for ops, x in batch:
        fp = forward(x, ops, layers, cfg)
        diff = fp.z - center
        dist += float(diff @ diff)
        g = backward(fp, layers, cfg, (2.0 / m) * diff)
        for gl, tl in zip(g, total):
            for t, acc in zip(gl, tl):
                acc += t
    loss = dist / m
    for lp, tl in zip(layers, total):
        for theta, acc in zip(lp.thetas, tl):
            acc += weight_decay * theta
            loss += 0.5 * weight_decay * float(np.sum(theta * theta))
    return loss, total
