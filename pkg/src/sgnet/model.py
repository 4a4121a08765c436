"""The relational message-passing network.

Node latents start from an MLP over raw features (one-hot category, centroid,
box extents). Each iteration computes a per-relation message for every edge,
scales it by an attention weight derived from the raw features of the two
endpoints, folds the weighted messages per receiving node through a
per-relation GRU (furthest emitter first, zero initial state), concatenates
the six aggregated vectors with the node latent, and maps them through the
update MLP. All nodes update synchronously. After the final iteration the
query node's latent is decoded into a category distribution and a box size.

Ablation variants either restrict the edge set (tree / sparse /
co_occur_only), swap the aggregator (sum / max / vanilla RNN), or replace
attention (constant 1 / distance decay). The full edge set is always stored
in the SceneGraph; filtering happens when a graph is prepared for a model.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import (
    Tensor,
    append_zero_rows,
    constant,
    hstack,
    mul,
    rows,
    scatter_rows,
    segment_max,
    segment_sum,
    sigmoid,
    softmax_rows,
)
from .nn import component_rng, gru_cell, init_gru, init_mlp, init_rnn, mlp, rnn_cell
from .relations import RELATION_ORDER, Edge, RelationType, SceneGraph

VARIANTS = (
    "full",
    "tree",
    "sparse",
    "co_occur_only",
    "agg_sum",
    "agg_max",
    "agg_vanilla_rnn",
    "no_attention",
    "dist_weights",
)

_FOLD_AGGREGATORS = {"full", "tree", "sparse", "co_occur_only", "no_attention", "dist_weights"}

CHECKPOINT_MAGIC = b"SGN1"


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    category_count: int
    node_dim: int = 100
    hidden: int = 300
    iterations: int = 3
    variant: str = "full"
    dist_c: float = 1.0
    dist_b: float = 1.0

    def __post_init__(self):
        if self.category_count < 3:
            raise ModelError("category_count must be at least 3")
        if min(self.node_dim, self.hidden, self.iterations) < 1:
            raise ModelError("node_dim, hidden and iterations must be positive")
        if self.variant not in VARIANTS:
            raise ModelError(f"unknown variant {self.variant!r}")
        if self.variant == "dist_weights" and (self.dist_c <= 0 or self.dist_b <= 0):
            raise ModelError("dist_weights variant needs positive c and b")

    @property
    def feature_dim(self) -> int:
        return self.category_count + 6

    @property
    def uses_gru(self) -> bool:
        return self.variant in _FOLD_AGGREGATORS

    @property
    def uses_attention_mlp(self) -> bool:
        return self.variant not in ("no_attention", "dist_weights")


@dataclass(frozen=True)
class PredictionResult:
    probs: np.ndarray  # length C, sums to one
    size: np.ndarray  # predicted box extents, meters


@dataclass(frozen=True)
class MessagePacket:
    src: str
    dst: str
    relation: RelationType
    payload: np.ndarray
    weight: float


def init_params(config: ModelConfig, seed: int) -> dict[str, Tensor]:
    """Allocate all learnable tensors for a variant. Component streams are
    seeded independently, so shared components match across variants."""
    p: dict[str, Tensor] = {}
    d, h, f = config.node_dim, config.hidden, config.feature_dim
    init_mlp(p, "init", f, h, d, component_rng(seed, "init"))
    for r in RELATION_ORDER:
        init_mlp(p, f"msg.{r.value}", 2 * d, h, d, component_rng(seed, f"msg.{r.value}"))
    if config.uses_attention_mlp:
        init_mlp(p, "att", 2 * f, h, 1, component_rng(seed, "att"))
    if config.uses_gru:
        for r in RELATION_ORDER:
            init_gru(p, f"gru.{r.value}", d, component_rng(seed, f"gru.{r.value}"))
    elif config.variant == "agg_vanilla_rnn":
        for r in RELATION_ORDER:
            init_rnn(p, f"rnn.{r.value}", d, component_rng(seed, f"rnn.{r.value}"))
    init_mlp(p, "upd", d + len(RELATION_ORDER) * d, h, d, component_rng(seed, "upd"))
    init_mlp(p, "pred", d, h, config.category_count, component_rng(seed, "pred"))
    init_mlp(p, "size", d, h, 3, component_rng(seed, "size"))
    return p


def param_shapes(config: ModelConfig) -> dict[str, tuple[int, ...]]:
    """Expected tensor shapes for a configuration (the ModelParams contract)."""
    d, h, f, c = config.node_dim, config.hidden, config.feature_dim, config.category_count

    def mlp_shapes(prefix, in_dim, out_dim):
        return {
            f"{prefix}.l1.w": (h, in_dim), f"{prefix}.l1.b": (h,),
            f"{prefix}.l2.w": (h, h), f"{prefix}.l2.b": (h,),
            f"{prefix}.l3.w": (out_dim, h), f"{prefix}.l3.b": (out_dim,),
        }

    shapes: dict[str, tuple[int, ...]] = {}
    shapes.update(mlp_shapes("init", f, d))
    for r in RELATION_ORDER:
        shapes.update(mlp_shapes(f"msg.{r.value}", 2 * d, d))
    if config.uses_attention_mlp:
        shapes.update(mlp_shapes("att", 2 * f, 1))
    if config.uses_gru:
        for r in RELATION_ORDER:
            for gate in ("z", "r", "n"):
                shapes[f"gru.{r.value}.{gate}x.w"] = (d, d)
                shapes[f"gru.{r.value}.{gate}x.b"] = (d,)
                shapes[f"gru.{r.value}.{gate}h.w"] = (d, d)
    elif config.variant == "agg_vanilla_rnn":
        for r in RELATION_ORDER:
            shapes[f"rnn.{r.value}.x.w"] = (d, d)
            shapes[f"rnn.{r.value}.x.b"] = (d,)
            shapes[f"rnn.{r.value}.h.w"] = (d, d)
    shapes.update(mlp_shapes("upd", d + len(RELATION_ORDER) * d, d))
    shapes.update(mlp_shapes("pred", d, c))
    shapes.update(mlp_shapes("size", d, 3))
    return shapes


def validate_params(params: dict[str, Tensor], config: ModelConfig) -> None:
    expected = param_shapes(config)
    if set(params.keys()) != set(expected.keys()):
        missing = sorted(set(expected) - set(params))
        extra = sorted(set(params) - set(expected))
        raise ModelError(f"parameter set mismatch: missing={missing[:4]} extra={extra[:4]}")
    for name, shape in expected.items():
        if params[name].data.shape != shape:
            raise ModelError(f"{name}: shape {params[name].data.shape} != expected {shape}")
        if not np.all(np.isfinite(params[name].data)):
            raise ModelError(f"{name}: non-finite values")


def param_group(name: str) -> str:
    parts = name.split(".")
    return ".".join(parts[:2]) if parts[0] in ("msg", "gru", "rnn") else parts[0]


def param_groups(params: dict[str, Tensor]) -> dict[str, list[str]]:
    groups: dict[str, list[str]] = {}
    for name in params:
        groups.setdefault(param_group(name), []).append(name)
    return groups


def clone_params(params: dict[str, Tensor]) -> dict[str, Tensor]:
    return {k: ad.parameter(v.data.copy()) for k, v in params.items()}


# ---------------------------------------------------------------------------
# Graph preparation
# ---------------------------------------------------------------------------

@dataclass
class _RelationPlan:
    src: np.ndarray  # emitter node indices, grouped per receiver in emission order
    dst: np.ndarray
    recv_nodes: np.ndarray  # receivers sorted by sequence length (desc), node index (asc)
    steps: list  # [(active_receivers, edge_row_indices)] aligned at the sequence end


def _build_plan(rec_lists: list[tuple[int, list[int]]]) -> "_RelationPlan | None":
    """Flatten ordered (receiver, emitters) pairs into gather indices and the
    end-aligned fold schedule (shorter sequences join later with zero state)."""
    if not rec_lists:
        return None
    src: list[int] = []
    dst: list[int] = []
    row_of: dict[int, int] = {}
    for i, ems in rec_lists:
        row_of[i] = len(src)
        src.extend(ems)
        dst.extend([i] * len(ems))
    order = sorted(rec_lists, key=lambda t: (-len(t[1]), t[0]))
    maxlen = len(order[0][1])
    steps = []
    for s in range(maxlen):
        active = [(i, ems) for (i, ems) in order if len(ems) >= maxlen - s]
        rows_idx = np.array(
            [row_of[i] + (s - (maxlen - len(ems))) for (i, ems) in active],
            dtype=np.intp,
        )
        steps.append((len(active), rows_idx))
    return _RelationPlan(
        src=np.array(src, dtype=np.intp),
        dst=np.array(dst, dtype=np.intp),
        recv_nodes=np.array([i for i, _ in order], dtype=np.intp),
        steps=steps,
    )


@dataclass
class PreparedGraph:
    """One graph (or a disjoint union of several) flattened for the model.
    Disjoint graphs in one batch never exchange messages, so running the
    union is equivalent to running each graph on its own."""

    n: int
    features: np.ndarray  # (n, C+6)
    positions: np.ndarray
    node_ids: tuple[str, ...]
    query_indices: np.ndarray  # one per batched graph; -1 entries not allowed
    plans: dict
    rec_lists: dict  # RelationType -> [(receiver index, ordered emitter indices)]

    @property
    def batch(self) -> int:
        return len(self.query_indices)


def merge_prepared(preps: list["PreparedGraph"]) -> "PreparedGraph":
    """Disjoint union of prepared graphs (for batched training/evaluation)."""
    if len(preps) == 1:
        return preps[0]
    offsets = np.cumsum([0] + [p.n for p in preps])
    features = np.concatenate([p.features for p in preps], axis=0)
    positions = np.concatenate([p.positions for p in preps], axis=0)
    node_ids = tuple(nid for p in preps for nid in p.node_ids)
    query_indices = np.concatenate(
        [p.query_indices + off for p, off in zip(preps, offsets)]
    )
    rec_lists: dict = {}
    plans: dict = {}
    for rel in RELATION_ORDER:
        merged: list[tuple[int, list[int]]] = []
        for p, off in zip(preps, offsets):
            off = int(off)
            for i, ems in p.rec_lists.get(rel, []):
                merged.append((i + off, [e + off for e in ems]))
        rec_lists[rel] = merged
        plans[rel] = _build_plan(merged)
    return PreparedGraph(
        n=int(offsets[-1]),
        features=features,
        positions=positions,
        node_ids=node_ids,
        query_indices=query_indices,
        plans=plans,
        rec_lists=rec_lists,
    )


def node_features(node, config: ModelConfig) -> np.ndarray:
    x = np.zeros(config.feature_dim)
    if node.category is not None:
        if node.category >= config.category_count:
            raise ModelError(
                f"node {node.id!r}: category {node.category} outside model vocabulary "
                f"({config.category_count})"
            )
        x[node.category] = 1.0
    x[config.category_count : config.category_count + 3] = node.position
    x[config.category_count + 3 :] = node.size
    return x


def _tree_edges(graph: SceneGraph) -> set[Edge]:
    parent: dict[str, str] = {n.id: n.id for n in graph.nodes}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    kept: set[Edge] = set()
    for e in graph.edges:
        if e.relation is RelationType.SUPPORTING:
            kept.add(e)
            kept.add(Edge(e.dst, e.src, RelationType.SUPPORTED_BY))
            parent[find(e.src)] = find(e.dst)
    pairs = sorted({(e.dst, e.src) for e in graph.edges if e.relation is RelationType.SURROUNDING})
    for center, surrounder in pairs:
        if find(center) != find(surrounder):
            parent[find(center)] = find(surrounder)
            kept.add(Edge(surrounder, center, RelationType.SURROUNDING))
            kept.add(Edge(center, surrounder, RelationType.SURROUNDED_BY))
    return kept


def _variant_edges(graph: SceneGraph, variant: str) -> set[Edge]:
    if variant == "sparse":
        return {e for e in graph.edges if e.relation is not RelationType.CO_OCCURRING}
    if variant == "co_occur_only":
        return {e for e in graph.edges if e.relation is RelationType.CO_OCCURRING}
    if variant == "tree":
        return _tree_edges(graph)
    return set(graph.edges)


def prepare_graph(graph: SceneGraph, config: ModelConfig,
                  edges: set[Edge] | None = None) -> PreparedGraph:
    """Flatten a scene graph into index arrays for one model configuration.
    `edges` overrides the variant's edge filter (used by edge pruning)."""
    nodes = graph.nodes
    index = {n.id: i for i, n in enumerate(nodes)}
    kept = edges if edges is not None else _variant_edges(graph, config.variant)

    features = np.stack([node_features(n, config) for n in nodes])
    positions = np.array([n.position for n in nodes])
    query_indices = (
        np.array([index[graph.query_id]], dtype=np.intp)
        if graph.query_id is not None
        else np.array([], dtype=np.intp)
    )

    rec_lists: dict[RelationType, list] = {}
    plans: dict[RelationType, _RelationPlan | None] = {}
    for rel in RELATION_ORDER:
        lists = []
        for i, node in enumerate(nodes):
            ems = [
                index[s]
                for s in graph.emitters_of(node.id, rel)
                if Edge(s, node.id, rel) in kept
            ]
            if ems:
                lists.append((i, ems))
        rec_lists[rel] = lists
        plans[rel] = _build_plan(lists)
    return PreparedGraph(
        n=len(nodes),
        features=features,
        positions=positions,
        node_ids=tuple(n.id for n in nodes),
        query_indices=query_indices,
        plans=plans,
        rec_lists=rec_lists,
    )


# ---------------------------------------------------------------------------
# Forward pass
# ---------------------------------------------------------------------------

@dataclass
class ForwardOutput:
    """Readout for every batched query: probs is (B, C), size is (B, 3)."""

    probs: Tensor
    size: Tensor

    def result(self, i: int = 0) -> PredictionResult:
        return PredictionResult(probs=self.probs.data[i].copy(), size=self.size.data[i].copy())


def _pair_mlp(params, prefix: str, nodes: Tensor, half: int, src: np.ndarray,
              dst: np.ndarray) -> Tensor:
    """MLP over concat(nodes[src], nodes[dst]) rows, with the first layer
    evaluated per node and gathered per edge (same algebra, far fewer flops
    on dense edge sets)."""
    from .autodiff import add, affine, linear, relu, slice_cols

    w1 = params[f"{prefix}.l1.w"]
    left = linear(nodes, slice_cols(w1, 0, half))
    right = linear(nodes, slice_cols(w1, half, 2 * half))
    x = relu(add(add(rows(left, src), rows(right, dst)), params[f"{prefix}.l1.b"]))
    x = relu(affine(x, params[f"{prefix}.l2.w"], params[f"{prefix}.l2.b"]))
    return affine(x, params[f"{prefix}.l3.w"], params[f"{prefix}.l3.b"])


def _edge_weight_columns(prep: PreparedGraph, params, config: ModelConfig):
    """Per-relation (E, 1) weight columns; None means weight 1.

    Attention is a function of raw features only, so it is evaluated once per
    graph and once per distinct (emitter, receiver) pair: relations sharing a
    pair (e.g. next-to and co-occurring) share the weight."""
    cols: dict[RelationType, Tensor | None] = {}
    if config.variant == "no_attention":
        return {rel: None for rel in prep.plans}
    if config.variant == "dist_weights":
        for rel, plan in prep.plans.items():
            if plan is None:
                cols[rel] = None
                continue
            d = np.linalg.norm(prep.positions[plan.src] - prep.positions[plan.dst], axis=1)
            cols[rel] = constant((config.dist_c * np.exp(-d / config.dist_b))[:, None])
        return cols

    keys = []
    for rel in RELATION_ORDER:
        plan = prep.plans[rel]
        if plan is not None:
            keys.append(plan.src * prep.n + plan.dst)
    if not keys:
        return {rel: None for rel in prep.plans}
    uniq, splits = np.unique(np.concatenate(keys), return_inverse=True)
    x_const = constant(prep.features)
    a_all = sigmoid(_pair_mlp(params, "att", x_const, config.feature_dim,
                              uniq // prep.n, uniq % prep.n))
    pos = 0
    for rel in RELATION_ORDER:
        plan = prep.plans[rel]
        if plan is None:
            cols[rel] = None
            continue
        e = len(plan.src)
        cols[rel] = rows(a_all, splits[pos : pos + e])
        pos += e
    return cols


def _fold_gru(messages: Tensor, plan: _RelationPlan, params, prefix: str, n: int,
              d: int) -> Tensor:
    """End-aligned batched GRU fold. Gate input projections are fused into one
    affine over all messages up front; algebra matches nn.gru_cell exactly."""
    from .autodiff import (
        add,
        affine,
        concat,
        linear,
        sigmoid,
        slice_cols,
        sub,
        tanh,
        vstack,
    )

    w_in = vstack([params[f"{prefix}.zx.w"], params[f"{prefix}.rx.w"], params[f"{prefix}.nx.w"]])
    b_in = concat([params[f"{prefix}.zx.b"], params[f"{prefix}.rx.b"], params[f"{prefix}.nx.b"]])
    u_zr = vstack([params[f"{prefix}.zh.w"], params[f"{prefix}.rh.w"]])
    u_n = params[f"{prefix}.nh.w"]
    projected = affine(messages, w_in, b_in)  # [E, 3d]

    state: Tensor | None = None
    prev_active = 0
    for n_active, rows_idx in plan.steps:
        xp = rows(projected, rows_idx)
        if state is None:
            state = constant(np.zeros((n_active, d)))
        elif n_active > prev_active:
            state = append_zero_rows(state, n_active - prev_active)
        zr = sigmoid(add(slice_cols(xp, 0, 2 * d), linear(state, u_zr)))
        z = slice_cols(zr, 0, d)
        r = slice_cols(zr, d, 2 * d)
        cand = tanh(add(slice_cols(xp, 2 * d, 3 * d), mul(r, linear(state, u_n))))
        state = add(cand, mul(z, sub(state, cand)))
        prev_active = n_active
    return scatter_rows(state, plan.recv_nodes, n)


def _fold_rnn(messages: Tensor, plan: _RelationPlan, params, prefix: str, n: int,
              d: int) -> Tensor:
    from .autodiff import add, affine, linear, tanh

    projected = affine(messages, params[f"{prefix}.x.w"], params[f"{prefix}.x.b"])
    state: Tensor | None = None
    prev_active = 0
    for n_active, rows_idx in plan.steps:
        xp = rows(projected, rows_idx)
        if state is None:
            state = constant(np.zeros((n_active, d)))
        elif n_active > prev_active:
            state = append_zero_rows(state, n_active - prev_active)
        state = tanh(add(xp, linear(state, params[f"{prefix}.h.w"])))
        prev_active = n_active
    return scatter_rows(state, plan.recv_nodes, n)


def _aggregate(messages: Tensor, rel: RelationType, plan: _RelationPlan, params,
               config: ModelConfig, n: int) -> Tensor:
    if config.variant == "agg_sum":
        return segment_sum(messages, plan.dst, n)
    if config.variant == "agg_max":
        return segment_max(messages, plan.dst, n)
    if config.variant == "agg_vanilla_rnn":
        return _fold_rnn(messages, plan, params, f"rnn.{rel.value}", n, config.node_dim)
    return _fold_gru(messages, plan, params, f"gru.{rel.value}", n, config.node_dim)


def run_model(
    prep: PreparedGraph,
    params: dict[str, Tensor],
    config: ModelConfig,
    iterations: int | None = None,
    record: list | None = None,
) -> ForwardOutput:
    """Run message passing on a prepared graph and decode the query node(s)."""
    if prep.batch == 0:
        raise ModelError("graph has no query node")
    n = prep.n
    node_dim = config.node_dim
    T = config.iterations if iterations is None else iterations

    h = mlp(params, "init", constant(prep.features))
    weight_cols = _edge_weight_columns(prep, params, config)

    for t in range(T):
        aggregated = []
        for rel in RELATION_ORDER:
            plan = prep.plans[rel]
            if plan is None:
                aggregated.append(constant(np.zeros((n, node_dim))))
                continue
            m = _pair_mlp(params, f"msg.{rel.value}", h, node_dim, plan.src, plan.dst)
            col = weight_cols[rel]
            weighted = m if col is None else mul(m, col)
            if record is not None:
                w = np.ones(len(plan.src)) if col is None else col.data[:, 0]
                for k in range(len(plan.src)):
                    record.append(MessagePacket(
                        src=prep.node_ids[plan.src[k]],
                        dst=prep.node_ids[plan.dst[k]],
                        relation=rel,
                        payload=weighted.data[k].copy(),
                        weight=float(w[k]),
                    ))
            aggregated.append(_aggregate(weighted, rel, plan, params, config, n))
        h = mlp(params, "upd", hstack([h] + aggregated))
        if not np.all(np.isfinite(h.data)):
            raise ModelError(f"non-finite node latents after iteration {t + 1}")

    q = rows(h, prep.query_indices)
    probs = softmax_rows(mlp(params, "pred", q))
    size = mlp(params, "size", q)
    return ForwardOutput(probs=probs, size=size)


def forward(graph: SceneGraph, params, config: ModelConfig,
            iterations: int | None = None) -> PredictionResult:
    return run_model(prepare_graph(graph, config), params, config, iterations).result()


def collect_packets(graph: SceneGraph, params, config: ModelConfig) -> list[MessagePacket]:
    record: list[MessagePacket] = []
    run_model(prepare_graph(graph, config), params, config, record=record)
    return record


# ---------------------------------------------------------------------------
# Single-node reference operations (used directly by tests and tools)
# ---------------------------------------------------------------------------

def init_nodes(graph: SceneGraph, params, config: ModelConfig) -> dict[str, np.ndarray]:
    """h^(0) per node id."""
    feats = np.stack([node_features(nd, config) for nd in graph.nodes])
    h0 = mlp(params, "init", constant(feats))
    return {nd.id: h0.data[i].copy() for i, nd in enumerate(graph.nodes)}

def compute_message(h_k: np.ndarray, h_i: np.ndarray, relation: RelationType, params) -> np.ndarray:
    if not isinstance(relation, RelationType):
        raise ModelError(f"unknown relation {relation!r}")
    x = constant(np.concatenate([h_k, h_i])[None, :])
    return mlp(params, f"msg.{relation.value}", x).data[0].copy()


def attention_weight(x_k: np.ndarray, x_i: np.ndarray, params, config: ModelConfig) -> float:
    if config.variant == "no_attention":
        return 1.0
    if config.variant == "dist_weights":
        c = config.category_count
        d = float(np.linalg.norm(np.asarray(x_k[c:c + 3]) - np.asarray(x_i[c:c + 3])))
        return config.dist_c * float(np.exp(-d / config.dist_b))
    pair = constant(np.concatenate([x_k, x_i])[None, :])
    return float(sigmoid(mlp(params, "att", pair)).data[0, 0])


def aggregate_messages(messages, weights, relation: RelationType, params,
                       config: ModelConfig) -> np.ndarray:
    """Aggregate an ordered message sequence for one receiving node."""
    if len(messages) == 0:
        return np.zeros(config.node_dim)
    weighted = [np.asarray(m) * w for m, w in zip(messages, weights)]
    if config.variant == "agg_sum":
        return np.sum(weighted, axis=0)
    if config.variant == "agg_max":
        return np.max(weighted, axis=0)
    cell = rnn_cell if config.variant == "agg_vanilla_rnn" else gru_cell
    prefix = ("rnn." if config.variant == "agg_vanilla_rnn" else "gru.") + relation.value
    state = constant(np.zeros((1, config.node_dim)))
    for m in weighted:
        state = cell(state, constant(m[None, :]), params, prefix)
    return state.data[0].copy()


def update_node(h_i: np.ndarray, aggregated: dict, params) -> np.ndarray:
    missing = [r.value for r in RELATION_ORDER if r not in aggregated]
    if missing:
        raise ModelError(f"missing aggregated slots: {missing}")
    x = np.concatenate([np.asarray(h_i)] + [np.asarray(aggregated[r]) for r in RELATION_ORDER])
    return mlp(params, "upd", constant(x[None, :])).data[0].copy()


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

def _write_str(buf: bytearray, s: str) -> None:
    raw = s.encode("utf-8")
    buf += struct.pack("<I", len(raw))
    buf += raw


def save_checkpoint(path, params: dict[str, Tensor], config: ModelConfig, vocab_hash: str) -> None:
    buf = bytearray(CHECKPOINT_MAGIC)
    buf += struct.pack("<IIII", config.category_count, config.node_dim, config.hidden,
                       config.iterations)
    _write_str(buf, config.variant)
    _write_str(buf, vocab_hash)
    buf += struct.pack("<dd", config.dist_c, config.dist_b)
    for name, tensor in params.items():
        _write_str(buf, name)
        dims = tensor.data.shape
        buf += struct.pack("<I", len(dims))
        buf += struct.pack(f"<{len(dims)}I", *dims)
        buf += np.ascontiguousarray(tensor.data, dtype="<f8").tobytes()
    with open(path, "wb") as fh:
        fh.write(bytes(buf))


class _Reader:
    def __init__(self, blob: bytes):
        self.blob = blob
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.blob):
            raise ModelError("truncated checkpoint")
        out = self.blob[self.pos : self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def f64(self) -> float:
        return struct.unpack("<d", self.take(8))[0]

    def string(self) -> str:
        return self.take(self.u32()).decode("utf-8")

    @property
    def exhausted(self) -> bool:
        return self.pos >= len(self.blob)


def load_checkpoint(path) -> tuple[dict[str, Tensor], ModelConfig, str]:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != CHECKPOINT_MAGIC:
        raise ModelError(f"{path}: not a model checkpoint (bad magic)")
    r = _Reader(blob)
    r.take(4)
    c, node_dim, hidden, iterations = (r.u32() for _ in range(4))
    variant = r.string()
    vocab_hash = r.string()
    dist_c, dist_b = r.f64(), r.f64()
    config = ModelConfig(
        category_count=c, node_dim=node_dim, hidden=hidden, iterations=iterations,
        variant=variant, dist_c=dist_c, dist_b=dist_b,
    )
    params: dict[str, Tensor] = {}
    while not r.exhausted:
        name = r.string()
        rank = r.u32()
        dims = tuple(r.u32() for _ in range(rank))
        count = int(np.prod(dims)) if dims else 1
        values = np.frombuffer(r.take(8 * count), dtype="<f8").reshape(dims).astype(np.float64)
        params[name] = ad.parameter(values)
    validate_params(params, config)
    return params, config, vocab_hash
