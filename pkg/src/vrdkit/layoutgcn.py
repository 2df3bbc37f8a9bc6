"""Graph convolution over page layout: node init from CLS plus font embedding,
per-edge-type weights, double-mean aggregation, and skip connections."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .layoutgraph import ADJACENCY, PageGraph
from .nncore import Parameter, Tensor, add, concat, elu, embedding, linear, matmul, mul


@dataclass(frozen=True)
class GcnConfig:
    num_layers: int = 2
    hidden_dim: int = 64
    edge_types: tuple[str, ...] = (ADJACENCY,)
    skip_connections: bool = True
    font_dim: int = 8
    max_font_ranks: int = 16

    def __post_init__(self):
        if self.num_layers < 1 or self.hidden_dim < 1:
            raise ValueError("num_layers and hidden_dim must be >= 1")
        if not self.edge_types:
            raise ValueError("at least one edge type is required")


def init_gcn_params(cfg: GcnConfig, encoder_dim: int, rng: np.random.Generator, prefix: str = "gcn.") -> dict[str, Parameter]:
    params: dict[str, Parameter] = {}

    def make(name, shape, kind="normal"):
        data = rng.normal(0.0, 0.02, size=shape) if kind == "normal" else np.zeros(shape)
        params[prefix + name] = Parameter(prefix + name, data)

    make("font_table", (cfg.max_font_ranks + 1, cfg.font_dim))
    in_dim = encoder_dim + cfg.font_dim
    make("in_proj.W", (in_dim, cfg.hidden_dim))
    make("in_proj.b", (cfg.hidden_dim,), "zeros")
    for layer in range(cfg.num_layers):
        for etype in cfg.edge_types:
            make(f"l{layer}.W.{etype}", (cfg.hidden_dim, cfg.hidden_dim))
        make(f"l{layer}.b", (cfg.hidden_dim,), "zeros")
    return params


def node_init(cls_vectors: Tensor, font_ranks, table) -> Tensor:
    """Row i = concat(C_i, font_embedding[rank_i])."""
    ranks = np.asarray(font_ranks, dtype=np.int64)
    if ranks.size and ranks.max() >= table.data.shape[0]:
        raise ValueError(f"font rank {int(ranks.max())} outside table of {table.data.shape[0]} rows")
    return concat([cls_vectors, embedding(table, ranks)], axis=-1)


def neighbor_matrices(graph: PageGraph, edge_types) -> dict[str, np.ndarray]:
    """Row-normalized neighborhood matrix per edge type, self always included.

    A type with no edges on the page degrades to self-only neighborhoods, so
    every configured weight matrix still participates uniformly.
    """
    idx = {box_id: k for k, box_id in enumerate(graph.node_ids)}
    n = len(idx)
    mats = {}
    for etype in edge_types:
        m = np.eye(n)
        for i, j in graph.edges_of_type(etype):
            m[idx[i], idx[j]] = 1.0
            m[idx[j], idx[i]] = 1.0
        mats[etype] = m / m.sum(axis=1, keepdims=True)
    return mats


def gcn_layer(
    graph,
    H: Tensor,
    params: dict[str, Parameter],
    layer_index: int,
    cfg: GcnConfig,
    prefix: str = "gcn.",
) -> Tensor:
    """One graph convolution: per type, mean of (W_t h_j + b) over the closed
    neighborhood; then the mean over types; then an optional skip; then eLU.

    The skip applies on layers >= 1 when enabled (dims match there by
    construction; the layer-0 input comes from the input projection). Accepts
    a PageGraph or the precomputed neighbor matrices.
    """
    matrices = graph if isinstance(graph, dict) else neighbor_matrices(graph, cfg.edge_types)
    n = H.shape[0]
    if n == 0:
        raise ValueError("empty graph")
    base = f"{prefix}l{layer_index}."
    bias = params[base + "b"]
    agg = None
    for etype in cfg.edge_types:
        msg = matmul(
            Tensor(matrices[etype]), linear(H, params[base + f"W.{etype}"], bias)
        )
        agg = msg if agg is None else add(agg, msg)
    agg = mul(agg, 1.0 / len(cfg.edge_types))
    if cfg.skip_connections and layer_index >= 1:
        agg = add(agg, H)
    return elu(agg)


def gcn_forward(graph, node_inits: Tensor, params, cfg: GcnConfig, prefix: str = "gcn.") -> Tensor:
    """Input projection followed by the full layer stack; returns (N, hidden).

    Accepts a PageGraph or precomputed neighbor matrices.
    """
    if isinstance(graph, dict):
        mats = graph
        n_nodes = next(iter(mats.values())).shape[0]
    else:
        mats = neighbor_matrices(graph, cfg.edge_types)
        n_nodes = len(graph.node_ids)
    if n_nodes == 0:
        raise ValueError("empty graph")
    if node_inits.shape[0] != n_nodes:
        raise ValueError(
            f"node feature rows {node_inits.shape[0]} != graph nodes {n_nodes}"
        )
    h = linear(node_inits, params[prefix + "in_proj.W"], params[prefix + "in_proj.b"])
    for layer in range(cfg.num_layers):
        h = gcn_layer(mats, h, params, layer, cfg, prefix)
    return h
