"""Procedural desk-scale scene generation driven by placement rules.

The generator is the stand-in data source for the pipeline: rules describe a
room-size range, a category table with box sizes, and a sequence of placement
steps. Steps either place one category (on the floor, against a wall, on top
of an earlier object, flanking it, opposite it across the room, or floating
free) or choose uniformly between alternative step sequences.

Everything is deterministic given the RNG handed in, and every emitted scene
satisfies the full Scene invariant set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .scene import (
    FLOOR,
    WALL,
    WALL_THICKNESS,
    CategoryVocab,
    Scene,
    SceneObject,
    make_floor,
    make_walls,
)

# keeps stacked boxes strictly above their support even after 9-digit rounding
LIFT = 1e-6


class GenerationError(RuntimeError):
    """Rules could not be satisfied within the retry budget."""


@dataclass(frozen=True)
class CategorySpec:
    name: str
    size: tuple[float, float, float]
    size_jitter: float = 0.0  # uniform +/- jitter applied per axis, meters


@dataclass(frozen=True)
class Place:
    """One placement step.

    kind: on_floor | against_wall | on_top | flank | opposite | floating
    anchor: category name of a previously placed object (on_top/flank/opposite)
    """

    category: str
    kind: str = "on_floor"
    anchor: str | None = None
    probability: float = 1.0
    count: int = 1
    clearance: float = 0.05  # min horizontal box gap to every earlier object
    z_center: float | None = None  # floating only
    avoid_center: float = 0.0  # keep centroid this far from the room center
    requires: str | None = None  # skip the step when this category is absent


@dataclass(frozen=True)
class Choose:
    """Pick one alternative step sequence uniformly."""

    alternatives: tuple[tuple[Place, ...], ...]


@dataclass(frozen=True)
class GeneratorRules:
    room_type: str
    room_x: tuple[float, float]  # sampled room extent along x
    room_y: tuple[float, float]
    categories: tuple[CategorySpec, ...]
    steps: tuple[Place | Choose, ...]
    wall_height: float = 2.4
    max_retries: int = 20

    def vocab(self) -> CategoryVocab:
        return CategoryVocab((FLOOR, WALL) + tuple(c.name for c in self.categories))

    def spec(self, name: str) -> CategorySpec:
        for c in self.categories:
            if c.name == name:
                return c
        raise GenerationError(f"rules reference unknown category {name!r}")


def _gap2d(a: SceneObject, b: SceneObject) -> float:
    ax0, ax1, ay0, ay1 = a.footprint()
    bx0, bx1, by0, by1 = b.footprint()
    dx = max(bx0 - ax1, ax0 - bx1, 0.0)
    dy = max(by0 - ay1, ay0 - by1, 0.0)
    return math.hypot(dx, dy)


def _sample_size(spec: CategorySpec, rng: np.random.Generator) -> tuple[float, float, float]:
    if spec.size_jitter == 0.0:
        return spec.size
    j = spec.size_jitter
    return tuple(max(1e-3, s + rng.uniform(-j, j)) for s in spec.size)


class _Builder:
    def __init__(self, rules: GeneratorRules, rng: np.random.Generator):
        self.rules = rules
        self.rng = rng
        self.vocab = rules.vocab()
        rx = rng.uniform(*rules.room_x)
        ry = rng.uniform(*rules.room_y)
        self.bounds = ((0.0, rx), (0.0, ry))
        self.objects: list[SceneObject] = [make_floor(self.bounds, self.vocab)]
        self.objects += make_walls(self.bounds, self.vocab, rules.wall_height)
        self.counters: dict[str, int] = {}
        self.placed: dict[str, list[SceneObject]] = {}  # category name -> objects

    def _new_id(self, name: str) -> str:
        self.counters[name] = self.counters.get(name, 0) + 1
        return f"{name}_{self.counters[name]}"

    def _interior(self, half_x: float, half_y: float, margin: float):
        (xmin, xmax), (ymin, ymax) = self.bounds
        t = WALL_THICKNESS + margin
        lo_x, hi_x = xmin + t + half_x, xmax - t - half_x
        lo_y, hi_y = ymin + t + half_y, ymax - t - half_y
        if lo_x > hi_x or lo_y > hi_y:
            raise GenerationError("room too small for requested placement")
        return lo_x, hi_x, lo_y, hi_y

    def _clear_of_others(self, candidate: SceneObject, clearance: float,
                         skip_walls: bool = False, skip_id: str | None = None) -> bool:
        for o in self.objects:
            if o.category == self.vocab.floor_index or o.id == skip_id:
                continue
            if skip_walls and o.category == self.vocab.wall_index:
                continue
            if _gap2d(candidate, o) < clearance:
                return False
        return True

    def _off_center(self, x: float, y: float, dist: float) -> bool:
        (xmin, xmax), (ymin, ymax) = self.bounds
        cx, cy = (xmin + xmax) / 2, (ymin + ymax) / 2
        return math.hypot(x - cx, y - cy) >= dist

    def _commit(self, name: str, position, size) -> SceneObject:
        obj = SceneObject(self._new_id(name), self.vocab.index(name), position, size)
        self.objects.append(obj)
        self.placed.setdefault(name, []).append(obj)
        return obj

    def _anchor_of(self, step: Place) -> SceneObject:
        anchors = self.placed.get(step.anchor or "", [])
        if not anchors:
            raise GenerationError(f"step for {step.category!r}: anchor {step.anchor!r} not present")
        return anchors[-1]

    def place(self, step: Place, tries: int = 200) -> None:
        if step.requires is not None and not self.placed.get(step.requires):
            return
        if self.rng.random() > step.probability:
            return
        if step.kind in ("flank",):
            self._place_flank(step)
            return
        near_wall = step.kind == "against_wall"
        skip_id = self._anchor_of(step).id if step.kind == "on_top" else None
        for _ in range(step.count):
            size = _sample_size(self.rules.spec(step.category), self.rng)
            sx, sy, sz = size
            for _attempt in range(tries):
                pos = self._propose(step, size)
                if pos is None:
                    continue
                candidate = SceneObject("probe", self.vocab.index(step.category), pos, size)
                if not self._clear_of_others(candidate, step.clearance,
                                             skip_walls=near_wall, skip_id=skip_id):
                    continue
                if step.avoid_center and not self._off_center(pos[0], pos[1], step.avoid_center):
                    continue
                self._commit(step.category, pos, size)
                break
            else:
                raise GenerationError(
                    f"could not place {step.category!r} ({step.kind}) within {tries} tries"
                )

    def _propose(self, step: Place, size) -> tuple[float, float, float] | None:
        sx, sy, sz = size
        rng = self.rng
        if step.kind == "on_floor":
            lo_x, hi_x, lo_y, hi_y = self._interior(sx / 2, sy / 2, 0.01)
            return (rng.uniform(lo_x, hi_x), rng.uniform(lo_y, hi_y), sz / 2)
        if step.kind == "against_wall":
            side = rng.integers(0, 4)
            (xmin, xmax), (ymin, ymax) = self.bounds
            t = WALL_THICKNESS
            gap = 0.01
            if side in (0, 1):  # south / north
                lo_x, hi_x, _, _ = self._interior(sx / 2, sy / 2, 0.01)
                x = rng.uniform(lo_x, hi_x)
                y = (ymin + t + gap + sy / 2) if side == 0 else (ymax - t - gap - sy / 2)
            else:  # west / east
                _, _, lo_y, hi_y = self._interior(sx / 2, sy / 2, 0.01)
                y = rng.uniform(lo_y, hi_y)
                x = (xmin + t + gap + sx / 2) if side == 2 else (xmax - t - gap - sx / 2)
            return (x, y, sz / 2)
        if step.kind == "on_top":
            anchor = self._anchor_of(step)
            ax0, ax1, ay0, ay1 = anchor.footprint()
            if ax1 - ax0 <= sx or ay1 - ay0 <= sy:
                return None
            x = rng.uniform(ax0 + sx / 2, ax1 - sx / 2)
            y = rng.uniform(ay0 + sy / 2, ay1 - sy / 2)
            return (x, y, anchor.top + LIFT + sz / 2)
        if step.kind == "opposite":
            anchor = self._anchor_of(step)
            (xmin, xmax), (ymin, ymax) = self.bounds
            cx, cy = (xmin + xmax) / 2, (ymin + ymax) / 2
            lo_x, hi_x, lo_y, hi_y = self._interior(sx / 2, sy / 2, 0.01)
            x = rng.uniform(lo_x, hi_x)
            y = rng.uniform(lo_y, hi_y)
            # keep the candidate in the half-room across the centre from the anchor
            if (x - cx) * (anchor.position[0] - cx) + (y - cy) * (anchor.position[1] - cy) >= 0:
                return None
            return (x, y, sz / 2)
        if step.kind == "floating":
            if step.z_center is None:
                raise GenerationError(f"floating placement for {step.category!r} needs z_center")
            lo_x, hi_x, lo_y, hi_y = self._interior(sx / 2, sy / 2, 0.01)
            return (rng.uniform(lo_x, hi_x), rng.uniform(lo_y, hi_y), step.z_center)
        raise GenerationError(f"unknown placement kind {step.kind!r}")

    def _place_flank(self, step: Place, tries: int = 50) -> None:
        anchor = self._anchor_of(step)
        spec = self.rules.spec(step.category)
        for _attempt in range(tries):
            size = _sample_size(spec, self.rng)
            sx, sy, sz = size
            axis = int(self.rng.integers(0, 2))
            half_anchor = anchor.size[axis] / 2
            half_item = size[axis] / 2
            offset = half_anchor + step.clearance + half_item
            positions = []
            ok = True
            for sign in (-1.0, 1.0):
                p = list(anchor.position)
                p[axis] += sign * offset
                p[2] = sz / 2
                positions.append(tuple(p))
            candidates = [
                SceneObject(f"probe{i}", self.vocab.index(step.category), p, size)
                for i, p in enumerate(positions)
            ]
            (xmin, xmax), (ymin, ymax) = self.bounds
            for c in candidates:
                fx0, fx1, fy0, fy1 = c.footprint()
                t = WALL_THICKNESS
                if fx0 < xmin + t or fx1 > xmax - t or fy0 < ymin + t or fy1 > ymax - t:
                    ok = False
                if not self._clear_of_others(c, min(step.clearance, 0.04)):
                    ok = False
            if ok:
                for p in positions:
                    self._commit(step.category, p, size)
                return
        raise GenerationError(f"could not flank {step.anchor!r} with {step.category!r}")

    def run(self) -> Scene:
        for step in self.rules.steps:
            if isinstance(step, Choose):
                alt = step.alternatives[int(self.rng.integers(0, len(step.alternatives)))]
                for sub in alt:
                    self.place(sub)
            else:
                self.place(step)
        return Scene(self.rules.room_type, self.vocab, self.bounds, tuple(self.objects))


def generate_scene(rules: GeneratorRules, rng: np.random.Generator) -> Scene:
    """Generate one scene; raises GenerationError when the rules cannot be met."""
    last_error: GenerationError | None = None
    for _ in range(rules.max_retries):
        try:
            return _Builder(rules, rng).run()
        except GenerationError as e:
            last_error = e
    raise GenerationError(f"rules unsatisfiable after {rules.max_retries} retries: {last_error}")


def generate_scenes(rules: GeneratorRules, count: int, seed: int) -> list[Scene]:
    rng = np.random.default_rng(seed)
    return [generate_scene(rules, rng) for _ in range(count)]


# ---------------------------------------------------------------------------
# Rule presets
# ---------------------------------------------------------------------------

def bedroom_rules() -> GeneratorRules:
    """A small bedroom: bed against a wall, flanking nightstands, a lamp, and
    an optional tv that forces a sofa on the opposite side of the room."""
    return GeneratorRules(
        room_type="bedroom",
        room_x=(4.0, 5.0),
        room_y=(4.0, 5.0),
        categories=(
            CategorySpec("bed", (1.9, 1.5, 0.55)),
            CategorySpec("nightstand", (0.45, 0.45, 0.55)),
            CategorySpec("lamp", (0.16, 0.16, 0.42)),
            CategorySpec("desk", (1.2, 0.6, 0.75)),
            CategorySpec("chair", (0.45, 0.45, 0.9)),
            CategorySpec("tv", (1.15, 0.12, 0.68)),
            CategorySpec("sofa", (1.7, 0.8, 0.8)),
            CategorySpec("plant", (0.35, 0.35, 1.1)),
        ),
        steps=(
            Place("bed", kind="against_wall"),
            Place("nightstand", kind="flank", anchor="bed", probability=0.9),
            Place("lamp", kind="on_top", anchor="nightstand", probability=0.7,
                  clearance=0.02, requires="nightstand"),
            Place("desk", probability=0.6),
            Place("chair", probability=0.5),
            Place("tv", kind="against_wall", probability=0.5),
            Place("sofa", kind="opposite", anchor="tv", requires="tv"),
            Place("plant", probability=0.4),
        ),
    )


def rule_task_rules() -> GeneratorRules:
    """Deterministic-context task, 10 categories.

    Each scene contains two pedestal/top pairs; the pairing is exact, so every
    removable object's category is a function of the remaining context:
    nightstand carries a lamp, desk a vase, dresser a clock, shelf a book.
    Per-category sizes are fixed up to +/-2 cm jitter.
    """
    j = 0.02
    return GeneratorRules(
        room_type="ruleroom",
        room_x=(3.6, 4.4),
        room_y=(3.6, 4.4),
        categories=(
            CategorySpec("nightstand", (0.50, 0.50, 0.60), j),
            CategorySpec("desk", (1.20, 0.60, 0.75), j),
            CategorySpec("lamp", (0.16, 0.16, 0.45), j),
            CategorySpec("vase", (0.24, 0.24, 0.30), j),
            CategorySpec("dresser", (1.00, 0.55, 0.95), j),
            CategorySpec("shelf", (0.80, 0.30, 1.80), j),
            CategorySpec("clock", (0.34, 0.10, 0.34), j),
            CategorySpec("book", (0.24, 0.16, 0.06), j),
        ),
        steps=(
            Choose((
                (Place("nightstand", clearance=0.2), Place("lamp", kind="on_top", anchor="nightstand")),
                (Place("desk", clearance=0.2), Place("vase", kind="on_top", anchor="desk")),
            )),
            Choose((
                (Place("dresser", clearance=0.2), Place("clock", kind="on_top", anchor="dresser")),
                (Place("shelf", clearance=0.2), Place("book", kind="on_top", anchor="shelf")),
            )),
        ),
    )


LONG_RANGE_MARKER = "tv"
LONG_RANGE_ANSWERS = ("sofa", "bench")  # identical boxes: position leaks nothing


def long_range_rules() -> GeneratorRules:
    """Two-category separation task.

    The floor object to predict is a sofa exactly when a tv is present and a
    bench otherwise. The tv floats in mid-air, at least 0.6 m of horizontal
    gap away from everything (and off the room centre), so it has no support,
    surround or adjacency link to any node: only the dense co-occurrence
    edges can carry its presence to a query.
    """
    answer = (1.60, 0.70, 0.80)
    return GeneratorRules(
        room_type="longrange",
        room_x=(4.4, 4.8),
        room_y=(4.4, 4.8),
        categories=(
            CategorySpec("tv", (1.10, 0.15, 0.65)),
            CategorySpec("sofa", answer),
            CategorySpec("bench", answer),
        ),
        steps=(
            Choose((
                (
                    Place("sofa", clearance=0.05),
                    Place("tv", kind="floating", z_center=1.5, clearance=0.6, avoid_center=0.35),
                ),
                (Place("bench", clearance=0.05),),
            )),
        ),
    )


def long_range_rules_balanced(present: bool) -> GeneratorRules:
    """Like long_range_rules but with the tv coin fixed, for balanced datasets."""
    base = long_range_rules()
    choose = base.steps[0]
    assert isinstance(choose, Choose)
    alt = choose.alternatives[0 if present else 1]
    return GeneratorRules(
        room_type=base.room_type,
        room_x=base.room_x,
        room_y=base.room_y,
        categories=base.categories,
        steps=tuple(alt),
        wall_height=base.wall_height,
    )


def clutter_rules(n_objects: tuple[int, int] = (1, 3)) -> GeneratorRules:
    """Unstructured scenes over the rule-task vocabulary; used for calibration
    and randomized invariant sweeps."""
    base = rule_task_rules()
    lo, hi = n_objects
    floor_cats = ("nightstand", "desk", "dresser", "shelf", "vase", "clock")
    steps: list[Place | Choose] = []
    for i in range(hi):
        prob = 1.0 if i < lo else 0.6
        steps.append(Choose(tuple((Place(c, probability=prob),) for c in floor_cats)))
    return GeneratorRules(
        room_type="clutter",
        room_x=(3.2, 4.6),
        room_y=(3.2, 4.6),
        categories=base.categories,
        steps=tuple(steps),
    )
