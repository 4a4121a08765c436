"""Placement-grid evaluation, greedy iterative synthesis, edge pruning.

A placement grid samples query points on a regular lattice just above a
supporting surface (the floor or a named object's top face) and evaluates
the category distribution at each point. Greedy synthesis repeatedly places
a box of the best (category, cell) pair, skipping cells whose box would
collide with existing objects, until the best admissible score drops below
a stop threshold (default 2/C, twice the uniform probability).

Edge pruning drops edges whose attention weight falls below a cutoff before
message passing. Removing a GRU step is not the same as a zero-weighted
message, so the pruned output is not claimed identical; the report instead
quantifies the total-variation gap.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .generator import LIFT
from .model import (
    ModelConfig,
    PredictionResult,
    prepare_graph,
    run_model,
)
from .relations import Edge, RelationType, SceneGraph, build_graph, insert_query_node
from .scene import Scene, SceneObject

EPS_Z = 0.01  # query height above the surface
MIN_PLACED_EXTENT = 0.01  # predicted sizes are clamped to stay positive


class SynthesisError(RuntimeError):
    pass


@dataclass(frozen=True)
class GridCell:
    point: tuple[float, float, float]
    result: PredictionResult


@dataclass(frozen=True)
class PlacementGrid:
    surface: str
    resolution: float  # cells per meter
    cells: tuple[GridCell, ...]

    def to_dict(self) -> dict:
        return {
            "surface": self.surface,
            "resolution": self.resolution,
            "cells": [
                {"p": [float(v) for v in c.point], "probs": [float(p) for p in c.result.probs]}
                for c in self.cells
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True) + "\n"


def _surface_patch(scene: Scene, surface: str) -> tuple[float, float, float, float, float]:
    """(xmin, xmax, ymin, ymax, top_z) of the requested surface."""
    if surface == "floor" or surface == scene.floor.id:
        (xmin, xmax), (ymin, ymax) = scene.bounds
        return xmin, xmax, ymin, ymax, 0.0
    try:
        obj = scene.object_by_id(surface)
    except KeyError:
        raise SynthesisError(f"unknown surface {surface!r}") from None
    x0, x1, y0, y1 = obj.footprint()
    return x0, x1, y0, y1, obj.top


def grid_points(scene: Scene, surface: str, resolution: float) -> list[tuple[float, float, float]]:
    if resolution <= 0:
        raise SynthesisError("resolution must be positive")
    x0, x1, y0, y1, top = _surface_patch(scene, surface)
    h = 1.0 / resolution
    xs = np.arange(x0 + h / 2.0, x1, h)
    ys = np.arange(y0 + h / 2.0, y1, h)
    if len(xs) == 0 or len(ys) == 0:
        raise SynthesisError(f"surface {surface!r} footprint too small for the grid")
    z = top + EPS_Z
    return [(float(x), float(y), z) for y in ys for x in xs]


def eval_grid(scene: Scene, params, config: ModelConfig, surface: str = "floor",
              resolution: float = 4.0) -> PlacementGrid:
    """Evaluate the query distribution over a lattice on the surface.

    Cells are independent; they are fused into bounded disjoint unions purely
    for speed, which leaves per-cell results order-independent.
    """
    from .model import merge_prepared

    base = build_graph(scene)
    points = grid_points(scene, surface, resolution)
    preps = [prepare_graph(insert_query_node(base, p), config) for p in points]
    cells = []
    chunk = 48
    for lo in range(0, len(preps), chunk):
        merged = merge_prepared(preps[lo : lo + chunk])
        out = run_model(merged, params, config)
        for b in range(merged.batch):
            cells.append(GridCell(point=points[lo + b], result=out.result(b)))
    return PlacementGrid(surface=surface, resolution=resolution, cells=tuple(cells))


@dataclass(frozen=True)
class SynthesisStep:
    stop: bool
    score: float
    category: int | None = None
    category_name: str | None = None
    position: tuple[float, float, float] | None = None
    size: tuple[float, float, float] | None = None
    object_id: str | None = None

    def to_dict(self) -> dict:
        return {
            "stop": self.stop,
            "score": self.score,
            "category": self.category,
            "category_name": self.category_name,
            "position": list(self.position) if self.position else None,
            "size": list(self.size) if self.size else None,
            "object_id": self.object_id,
        }


def _boxes_intersect(pos_a, size_a, b: SceneObject) -> bool:
    for axis in range(3):
        lo_a = pos_a[axis] - size_a[axis] / 2.0
        hi_a = pos_a[axis] + size_a[axis] / 2.0
        lo_b = b.position[axis] - b.size[axis] / 2.0
        hi_b = b.position[axis] + b.size[axis] / 2.0
        if min(hi_a, hi_b) - max(lo_a, lo_b) <= 0:
            return False
    return True


def _next_object_id(scene: Scene, name: str) -> str:
    existing = {o.id for o in scene.objects}
    k = 1
    while f"{name}_synth_{k}" in existing:
        k += 1
    return f"{name}_synth_{k}"


def synth_step(
    scene: Scene,
    params,
    config: ModelConfig,
    surface: str = "floor",
    resolution: float = 4.0,
    stop_threshold: float | None = None,
) -> tuple[SynthesisStep, Scene]:
    """Place one box at the best admissible (cell, category) pair.

    Cells whose predicted box would intersect an existing object (other than
    the surface itself) or stick out of the room are disqualified and the
    next-best cell is tried. Returns a stop step when the best admissible
    score falls below the threshold.
    """
    theta = 2.0 / config.category_count if stop_threshold is None else stop_threshold
    grid = eval_grid(scene, params, config, surface, resolution)
    support_id = scene.floor.id if surface == "floor" else surface
    _, _, _, _, top = _surface_patch(scene, surface)

    ranked = sorted(
        range(len(grid.cells)),
        key=lambda i: (-float(np.max(grid.cells[i].result.probs)), i),
    )
    (xmin, xmax), (ymin, ymax) = scene.bounds
    for i in ranked:
        cell = grid.cells[i]
        score = float(np.max(cell.result.probs))
        if score < theta:
            return SynthesisStep(stop=True, score=score), scene
        category = int(np.argmax(cell.result.probs))
        size = tuple(float(max(MIN_PLACED_EXTENT, s)) for s in cell.result.size)
        pos = (cell.point[0], cell.point[1], top + LIFT + size[2] / 2.0)
        fx0, fx1 = pos[0] - size[0] / 2.0, pos[0] + size[0] / 2.0
        fy0, fy1 = pos[1] - size[1] / 2.0, pos[1] + size[1] / 2.0
        if fx0 < xmin or fx1 > xmax or fy0 < ymin or fy1 > ymax:
            continue
        collision = any(
            o.id != support_id and o.id != scene.floor.id and _boxes_intersect(pos, size, o)
            for o in scene.objects
        )
        if collision:
            continue
        name = scene.vocab.name(category)
        obj = SceneObject(_next_object_id(scene, name), category, pos, size)
        step = SynthesisStep(
            stop=False,
            score=score,
            category=category,
            category_name=name,
            position=pos,
            size=size,
            object_id=obj.id,
        )
        return step, scene.with_object(obj)
    raise SynthesisError("no admissible cell: every candidate collides or leaves the room")


def synthesize(
    scene: Scene,
    params,
    config: ModelConfig,
    max_steps: int,
    surface: str = "floor",
    resolution: float = 4.0,
    stop_threshold: float | None = None,
) -> tuple[Scene, list[SynthesisStep]]:
    """Greedy loop: each step adds exactly one object or stops."""
    steps: list[SynthesisStep] = []
    current = scene
    for _ in range(max_steps):
        step, current = synth_step(current, params, config, surface, resolution, stop_threshold)
        steps.append(step)
        if step.stop:
            break
    return current, steps


# ---------------------------------------------------------------------------
# Attention-based edge pruning
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PruneReport:
    threshold: float
    kept_edges: int
    removed_edges: int
    tv_distance: float


def edge_attention_weights(graph: SceneGraph, params, config: ModelConfig) -> dict[Edge, float]:
    """Attention weight per directed edge (raw-feature function, one pass)."""
    from .autodiff import constant, hstack, rows, sigmoid
    from .model import node_features
    from .nn import mlp

    nodes = graph.nodes
    index = {n.id: i for i, n in enumerate(nodes)}
    feats = np.stack([node_features(n, config) for n in nodes])
    edges = sorted(graph.edges, key=lambda e: (e.src, e.dst, e.relation.value))
    src = np.array([index[e.src] for e in edges], dtype=np.intp)
    dst = np.array([index[e.dst] for e in edges], dtype=np.intp)
    x = constant(feats)
    a = sigmoid(mlp(params, "att", hstack([rows(x, src), rows(x, dst)])))
    return {e: float(a.data[i, 0]) for i, e in enumerate(edges)}


def prune_edges(graph: SceneGraph, params, config: ModelConfig,
                threshold: float) -> tuple[SceneGraph, PruneReport]:
    """Drop edges with attention weight below `threshold`, run the model on
    both graphs, and report the total-variation gap between the outputs."""
    if config.variant != "full":
        raise SynthesisError("edge pruning requires the full variant")
    if not 0.0 <= threshold < 1.0:
        raise SynthesisError("threshold must lie in [0, 1)")
    weights = edge_attention_weights(graph, params, config)
    kept = {e for e, a in weights.items() if a >= threshold}

    from .relations import _order_emitters

    by_id = {n.id: n for n in graph.nodes}
    pruned = SceneGraph(
        nodes=graph.nodes,
        edges=frozenset(kept),
        emitters=_order_emitters(kept, by_id),
        bounds=graph.bounds,
        floor_id=graph.floor_id,
        query_id=graph.query_id,
        parents=graph.parents,
    )
    full_out = run_model(prepare_graph(graph, config), params, config)
    pruned_out = run_model(prepare_graph(pruned, config), params, config)
    tv = 0.5 * float(np.abs(full_out.probs.data - pruned_out.probs.data).sum())
    return pruned, PruneReport(
        threshold=threshold,
        kept_edges=len(kept),
        removed_edges=len(graph.edges) - len(kept),
        tv_distance=tv,
    )
