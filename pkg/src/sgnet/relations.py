"""Typed relationship extraction and message-passing graph assembly.

Six relationship types connect scene objects: support in both directions,
symmetric-arrangement ("surrounding") in both directions, same-surface
adjacency, and dense co-occurrence linking every node pair. The floor and
walls take part in all of them.

Thresholds:
  * support: the upper box's bottom sits within 5 cm above the lower box's
    top and the footprints overlap with positive area;
  * surrounding: surrounders share a supporting parent, their extents differ
    by less than a factor 1.2 per axis, and the set maps onto itself (within
    0.2 m) under point reflection through the centre's centroid or under a
    2*pi/n rotation about its vertical axis;
  * next-to: same supporting parent and horizontal box gap of at most 0.5 m
    (a documented default, not a measured constant; override per call).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from itertools import combinations

from .scene import Scene, SceneObject

SUPPORT_EPS = 0.05
NEXT_TO_GAP = 0.5
SURROUND_TOL = 0.2
SURROUND_SIZE_RATIO = 1.2
SURROUND_MAX_SET = 6

QUERY_ID = "__query__"


class RelationType(str, Enum):
    SUPPORTING = "supporting"
    SUPPORTED_BY = "supported_by"
    SURROUNDING = "surrounding"
    SURROUNDED_BY = "surrounded_by"
    NEXT_TO = "next_to"
    CO_OCCURRING = "co_occurring"

    def reverse(self) -> "RelationType":
        return _REVERSE[self]


_REVERSE = {
    RelationType.SUPPORTING: RelationType.SUPPORTED_BY,
    RelationType.SUPPORTED_BY: RelationType.SUPPORTING,
    RelationType.SURROUNDING: RelationType.SURROUNDED_BY,
    RelationType.SURROUNDED_BY: RelationType.SURROUNDING,
    RelationType.NEXT_TO: RelationType.NEXT_TO,
    RelationType.CO_OCCURRING: RelationType.CO_OCCURRING,
}

# fixed slot order for aggregated-message concatenation
RELATION_ORDER = (
    RelationType.SUPPORTING,
    RelationType.SUPPORTED_BY,
    RelationType.SURROUNDING,
    RelationType.SURROUNDED_BY,
    RelationType.NEXT_TO,
    RelationType.CO_OCCURRING,
)


class GraphError(ValueError):
    pass


@dataclass(frozen=True)
class Edge:
    src: str
    dst: str
    relation: RelationType

    def __post_init__(self):
        if self.src == self.dst:
            raise GraphError(f"self edge on {self.src!r}")


@dataclass(frozen=True)
class GraphNode:
    """Object node, or the query placeholder (category None, zero size)."""

    id: str
    category: int | None
    position: tuple[float, float, float]
    size: tuple[float, float, float]

    @property
    def is_query(self) -> bool:
        return self.category is None

    @property
    def bottom(self) -> float:
        return self.position[2] - self.size[2] / 2.0

    @property
    def top(self) -> float:
        return self.position[2] + self.size[2] / 2.0

    def footprint(self):
        x, y, _ = self.position
        sx, sy, _ = self.size
        return (x - sx / 2.0, x + sx / 2.0, y - sy / 2.0, y + sy / 2.0)


@dataclass(frozen=True)
class SceneGraph:
    nodes: tuple[GraphNode, ...]
    edges: frozenset[Edge]
    emitters: dict  # (node_id, RelationType) -> ordered tuple of emitter ids
    bounds: tuple[tuple[float, float], tuple[float, float]]
    floor_id: str
    query_id: str | None = None
    parents: dict | None = None  # supporting-parent cache (object nodes only)

    def node(self, node_id: str) -> GraphNode:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(node_id)

    def emitters_of(self, node_id: str, relation: RelationType) -> tuple[str, ...]:
        return self.emitters.get((node_id, relation), ())

    def query_node(self) -> GraphNode:
        if self.query_id is None:
            raise GraphError("graph has no query node")
        return self.node(self.query_id)


# ---------------------------------------------------------------------------
# Pairwise predicates
# ---------------------------------------------------------------------------

def _overlap_positive(a, b) -> bool:
    ax0, ax1, ay0, ay1 = a.footprint()
    bx0, bx1, by0, by1 = b.footprint()
    return min(ax1, bx1) - max(ax0, bx0) > 0 and min(ay1, by1) - max(ay0, by0) > 0


def box_gap2d(a, b) -> float:
    ax0, ax1, ay0, ay1 = a.footprint()
    bx0, bx1, by0, by1 = b.footprint()
    dx = max(bx0 - ax1, ax0 - bx1, 0.0)
    dy = max(by0 - ay1, ay0 - by1, 0.0)
    return math.hypot(dx, dy)


def point_box_gap2d(px: float, py: float, b) -> float:
    bx0, bx1, by0, by1 = b.footprint()
    dx = max(bx0 - px, px - bx1, 0.0)
    dy = max(by0 - py, py - by1, 0.0)
    return math.hypot(dx, dy)


def detect_supporting(a, b, eps: float = SUPPORT_EPS) -> bool:
    """True iff a rests on b (b supports a): a's bottom lies within eps above
    b's top and their footprints overlap with positive area."""
    gap = a.bottom - b.top
    if gap < 0.0 or gap > eps:
        return False
    return _overlap_positive(a, b)


def supporting_parents(nodes, floor_id: str) -> dict:
    """Resolve each node's supporting parent: the supporter with the highest
    top face (ties to the smallest id), defaulting to the floor. The floor
    itself has no parent."""
    parents: dict[str, str | None] = {}
    for a in nodes:
        if a.id == floor_id:
            parents[a.id] = None
            continue
        best = None
        for b in nodes:
            if b.id == a.id or getattr(b, "is_query", False):
                continue
            if detect_supporting(a, b):
                if best is None or b.top > best.top or (b.top == best.top and b.id < best.id):
                    best = b
        parents[a.id] = best.id if best is not None else floor_id
    return parents


def detect_next_to(a, b, parents, gap: float = NEXT_TO_GAP) -> bool:
    """Same supporting parent and horizontal box gap at most `gap`."""
    pa, pb = parents.get(a.id), parents.get(b.id)
    if pa is None or pa != pb:
        return False
    return box_gap2d(a, b) <= gap


# ---------------------------------------------------------------------------
# Surrounding sets
# ---------------------------------------------------------------------------

def _sizes_similar(a, b, ratio: float = SURROUND_SIZE_RATIO) -> bool:
    for sa, sb in zip(a.size, b.size):
        if max(sa, sb) / min(sa, sb) >= ratio:
            return False
    return True


def _closed_under(points, mapped, tol: float) -> bool:
    for m in mapped:
        if min(math.dist(m, p) for p in points) > tol:
            return False
    return True


def _symmetric_about(center, members, tol: float = SURROUND_TOL) -> bool:
    cx, cy, _ = center.position
    pts = [m.position for m in members]
    reflected = [(2 * cx - x, 2 * cy - y, z) for (x, y, z) in pts]
    if _closed_under(pts, reflected, tol):
        return True
    n = len(members)
    theta = 2.0 * math.pi / n
    for sign in (1.0, -1.0):
        c, s = math.cos(sign * theta), math.sin(sign * theta)
        rotated = [
            (cx + c * (x - cx) - s * (y - cy), cy + s * (x - cx) + c * (y - cy), z)
            for (x, y, z) in pts
        ]
        if _closed_under(pts, rotated, tol):
            return True
    return False


def detect_surrounding(nodes, parents, tol: float = SURROUND_TOL) -> dict:
    """Find, per central node, the union of all qualifying surrounder sets
    (size 2..6, shared supporting parent, pairwise similar extents, closed
    under reflection through the centre or a 2*pi/n vertical rotation)."""
    by_parent: dict[str, list] = {}
    for o in nodes:
        p = parents.get(o.id)
        if p is not None:
            by_parent.setdefault(p, []).append(o)
    result: dict[str, tuple[str, ...]] = {}
    for center in nodes:
        found: set[str] = set()
        for group in by_parent.values():
            cand = [o for o in group if o.id != center.id]
            if len(cand) < 2:
                continue
            sim = {
                (a.id, b.id): _sizes_similar(a, b)
                for a, b in combinations(cand, 2)
            }
            top = min(len(cand), SURROUND_MAX_SET)
            for k in range(2, top + 1):
                for subset in combinations(cand, k):
                    if not all(sim[(a.id, b.id)] for a, b in combinations(subset, 2)):
                        continue
                    if _symmetric_about(center, subset, tol):
                        found.update(o.id for o in subset)
        if found:
            result[center.id] = tuple(sorted(found))
    return result


# ---------------------------------------------------------------------------
# Graph assembly
# ---------------------------------------------------------------------------

def _order_emitters(edges, nodes_by_id):
    emitters: dict[tuple[str, RelationType], list[str]] = {}
    for e in edges:
        emitters.setdefault((e.dst, e.relation), []).append(e.src)
    ordered = {}
    for (dst, rel), srcs in emitters.items():
        p = nodes_by_id[dst].position
        # furthest first; ties broken by ascending id
        srcs.sort(key=lambda s: (-math.dist(nodes_by_id[s].position, p), s))
        ordered[(dst, rel)] = tuple(srcs)
    return ordered


def _object_nodes(scene: Scene) -> list[GraphNode]:
    return [GraphNode(o.id, o.category, o.position, o.size) for o in scene.objects]


def build_graph(scene: Scene, next_to_gap: float = NEXT_TO_GAP) -> SceneGraph:
    """Materialize all six relation types over a scene.

    Support and surrounding edges appear together with their reverse-typed
    counterparts; co-occurrence forms the complete directed graph.
    """
    nodes = _object_nodes(scene)
    floor_id = scene.floor.id
    by_id = {n.id: n for n in nodes}
    parents = supporting_parents(nodes, floor_id)

    edges: set[Edge] = set()
    for a in nodes:
        for b in nodes:
            if a.id == b.id:
                continue
            if detect_supporting(a, b):
                edges.add(Edge(b.id, a.id, RelationType.SUPPORTING))
                edges.add(Edge(a.id, b.id, RelationType.SUPPORTED_BY))
    for center_id, surrounders in detect_surrounding(nodes, parents).items():
        for s in surrounders:
            edges.add(Edge(s, center_id, RelationType.SURROUNDING))
            edges.add(Edge(center_id, s, RelationType.SURROUNDED_BY))
    for a, b in combinations(nodes, 2):
        if detect_next_to(a, b, parents, next_to_gap):
            edges.add(Edge(a.id, b.id, RelationType.NEXT_TO))
            edges.add(Edge(b.id, a.id, RelationType.NEXT_TO))
        edges.add(Edge(a.id, b.id, RelationType.CO_OCCURRING))
        edges.add(Edge(b.id, a.id, RelationType.CO_OCCURRING))

    return SceneGraph(
        nodes=tuple(nodes),
        edges=frozenset(edges),
        emitters=_order_emitters(edges, by_id),
        bounds=scene.bounds,
        floor_id=floor_id,
        parents=parents,
    )


def insert_query_node(
    graph: SceneGraph,
    p: tuple[float, float, float],
    next_to_gap: float = NEXT_TO_GAP,
) -> SceneGraph:
    """Add the zero-featured query node at p and connect it.

    The query is treated as a zero-size box: it is supported by the object
    whose top face lies within 5 cm below p and whose footprint contains p's
    horizontal projection (falling back to the floor for p_z <= 5 cm), sits
    next to objects sharing its parent within the point-to-box gap, and
    co-occurs with every node.
    """
    if graph.query_id is not None:
        raise GraphError("graph already contains a query node")
    px, py, pz = (float(v) for v in p)
    if not all(math.isfinite(v) for v in (px, py, pz)):
        raise GraphError("query position must be finite")
    (xmin, xmax), (ymin, ymax) = graph.bounds
    if not (xmin <= px <= xmax and ymin <= py <= ymax):
        raise GraphError(f"query ({px:.3f}, {py:.3f}) outside scene bounds")
    if any(n.id == QUERY_ID for n in graph.nodes):
        raise GraphError(f"node id {QUERY_ID!r} is reserved")

    query = GraphNode(QUERY_ID, None, (px, py, pz), (0.0, 0.0, 0.0))
    nodes = graph.nodes + (query,)
    by_id = {n.id: n for n in nodes}
    edges = set(graph.edges)

    supporter = None
    for n in graph.nodes:
        bx0, bx1, by0, by1 = n.footprint()
        if not (bx0 <= px <= bx1 and by0 <= py <= by1):
            continue
        if n.top <= pz <= n.top + SUPPORT_EPS:
            if supporter is None or n.top > supporter.top or (n.top == supporter.top and n.id < supporter.id):
                supporter = n
    if supporter is None and pz <= SUPPORT_EPS:
        supporter = by_id[graph.floor_id]
    if supporter is not None:
        edges.add(Edge(QUERY_ID, supporter.id, RelationType.SUPPORTED_BY))
        edges.add(Edge(supporter.id, QUERY_ID, RelationType.SUPPORTING))

    parents = graph.parents
    if parents is None:
        parents = supporting_parents(graph.nodes, graph.floor_id)
    query_parent = supporter.id if supporter is not None else graph.floor_id
    for n in graph.nodes:
        if parents.get(n.id) == query_parent and point_box_gap2d(px, py, n) <= next_to_gap:
            edges.add(Edge(QUERY_ID, n.id, RelationType.NEXT_TO))
            edges.add(Edge(n.id, QUERY_ID, RelationType.NEXT_TO))
    for n in graph.nodes:
        edges.add(Edge(QUERY_ID, n.id, RelationType.CO_OCCURRING))
        edges.add(Edge(n.id, QUERY_ID, RelationType.CO_OCCURRING))

    return SceneGraph(
        nodes=nodes,
        edges=frozenset(edges),
        emitters=_order_emitters(edges, by_id),
        bounds=graph.bounds,
        floor_id=graph.floor_id,
        query_id=QUERY_ID,
        parents=parents,
    )


def validate_graph(graph: SceneGraph) -> None:
    """Check the structural invariants; raises GraphError on violation."""
    ids = [n.id for n in graph.nodes]
    if len(set(ids)) != len(ids):
        raise GraphError("duplicate node ids")
    id_set = set(ids)
    for e in graph.edges:
        if e.src not in id_set or e.dst not in id_set:
            raise GraphError(f"edge endpoint missing: {e}")
        if Edge(e.dst, e.src, e.relation.reverse()) not in graph.edges:
            raise GraphError(f"missing reverse edge for {e}")
    n = len(graph.nodes)
    co = sum(1 for e in graph.edges if e.relation is RelationType.CO_OCCURRING)
    if co != n * (n - 1):
        raise GraphError(f"co-occurrence not complete: {co} edges for {n} nodes")
    for (dst, rel), srcs in graph.emitters.items():
        expected = sorted(
            s for s in id_set if s != dst and Edge(s, dst, rel) in graph.edges
        )
        if sorted(srcs) != expected:
            raise GraphError(f"emitter list mismatch at ({dst}, {rel})")


def graph_to_dict(graph: SceneGraph) -> dict:
    return {
        "nodes": [
            {
                "id": n.id,
                "category": n.category,
                "position": list(n.position),
                "size": list(n.size),
                "query": n.is_query,
            }
            for n in graph.nodes
        ],
        "edges": sorted(
            (
                {"from": e.src, "to": e.dst, "relation": e.relation.value}
                for e in graph.edges
            ),
            key=lambda d: (d["from"], d["to"], d["relation"]),
        ),
    }


def graph_to_json(graph: SceneGraph) -> str:
    return json.dumps(graph_to_dict(graph), sort_keys=True, indent=2) + "\n"
