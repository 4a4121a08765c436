"""Scene data model: category vocabulary, boxed objects, rooms, and JSON I/O.

Coordinate frame is z-up, in meters, with the floor's top surface at z = 0.
Every object is an axis-aligned box described by its centroid position and
its extents. The floor is a single 0.1 m thick slab below z = 0 and walls
are thin boxes standing on it.

Scene files are self-describing: the category vocabulary travels inside the
file, so a checkpoint and a scene can be cross-checked by vocabulary hash.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

FLOOR = "floor"
WALL = "wall"

SCENE_FORMAT = "sgnet-scene/1"

FLOOR_THICKNESS = 0.1
WALL_THICKNESS = 0.1


class SceneError(ValueError):
    """A scene file or in-memory scene violates the schema."""


@dataclass(frozen=True)
class CategoryVocab:
    """Ordered category label set with reserved floor/wall entries."""

    names: tuple[str, ...]

    def __post_init__(self):
        if len(set(self.names)) != len(self.names):
            raise SceneError("vocab: duplicate category names")
        if len(self.names) < 3:
            raise SceneError("vocab: need at least floor, wall and one more category")
        if FLOOR not in self.names or WALL not in self.names:
            raise SceneError("vocab: reserved names 'floor' and 'wall' are required")

    @property
    def count(self) -> int:
        return len(self.names)

    @property
    def floor_index(self) -> int:
        return self.names.index(FLOOR)

    @property
    def wall_index(self) -> int:
        return self.names.index(WALL)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise SceneError(f"vocab: unknown category {name!r}") from None

    def name(self, index: int) -> str:
        if not 0 <= index < len(self.names):
            raise SceneError(f"vocab: category index {index} out of range")
        return self.names[index]

    def hash(self) -> str:
        """Stable content hash used to pair scenes with checkpoints."""
        blob = json.dumps({"names": list(self.names)}, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class SceneObject:
    """Axis-aligned box with a category, centroid position and extents."""

    id: str
    category: int
    position: tuple[float, float, float]
    size: tuple[float, float, float]

    def __post_init__(self):
        if not self.id:
            raise SceneError("object: empty id")
        if any(not math.isfinite(v) for v in self.position):
            raise SceneError(f"object {self.id}: non-finite position")
        if any(s <= 0 or not math.isfinite(s) for s in self.size):
            raise SceneError(f"object {self.id}: size components must be positive")

    @property
    def bottom(self) -> float:
        return self.position[2] - self.size[2] / 2.0

    @property
    def top(self) -> float:
        return self.position[2] + self.size[2] / 2.0

    def footprint(self) -> tuple[float, float, float, float]:
        """(xmin, xmax, ymin, ymax) of the horizontal projection."""
        x, y, _ = self.position
        sx, sy, _ = self.size
        return (x - sx / 2.0, x + sx / 2.0, y - sy / 2.0, y + sy / 2.0)


@dataclass(frozen=True)
class Scene:
    """One room: a floor, at least one wall, and the remaining objects."""

    room_type: str
    vocab: CategoryVocab
    bounds: tuple[tuple[float, float], tuple[float, float]]  # ((xmin, xmax), (ymin, ymax))
    objects: tuple[SceneObject, ...]
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        if self.validate:
            _validate_scene(self)

    @property
    def floor(self) -> SceneObject:
        fi = self.vocab.floor_index
        return next(o for o in self.objects if o.category == fi)

    def walls(self) -> list[SceneObject]:
        wi = self.vocab.wall_index
        return [o for o in self.objects if o.category == wi]

    def removable_objects(self) -> list[SceneObject]:
        """Objects that are neither the floor nor a wall."""
        skip = {self.vocab.floor_index, self.vocab.wall_index}
        return [o for o in self.objects if o.category not in skip]

    def object_by_id(self, obj_id: str) -> SceneObject:
        for o in self.objects:
            if o.id == obj_id:
                return o
        raise KeyError(obj_id)

    def without(self, obj_id: str) -> "Scene":
        kept = tuple(o for o in self.objects if o.id != obj_id)
        if len(kept) == len(self.objects):
            raise KeyError(obj_id)
        return Scene(self.room_type, self.vocab, self.bounds, kept)

    def with_object(self, obj: SceneObject) -> "Scene":
        return Scene(self.room_type, self.vocab, self.bounds, self.objects + (obj,))

    def contains_point(self, x: float, y: float) -> bool:
        (xmin, xmax), (ymin, ymax) = self.bounds
        return xmin <= x <= xmax and ymin <= y <= ymax


def _validate_scene(scene: Scene) -> None:
    fi = scene.vocab.floor_index
    wi = scene.vocab.wall_index
    floors = [o for o in scene.objects if o.category == fi]
    if len(floors) != 1:
        raise SceneError(f"scene: expected exactly one floor object, found {len(floors)}")
    if not any(o.category == wi for o in scene.objects):
        raise SceneError("scene: at least one wall object is required")
    ids = [o.id for o in scene.objects]
    if len(set(ids)) != len(ids):
        dup = sorted({i for i in ids if ids.count(i) > 1})
        raise SceneError(f"scene: duplicate object ids {dup}")
    (xmin, xmax), (ymin, ymax) = scene.bounds
    if not (xmin < xmax and ymin < ymax):
        raise SceneError("scene: degenerate bounds")
    # slack of 1 um absorbs the 9-significant-digit canonical rounding
    slack = 1e-6
    for o in scene.objects:
        if o.category >= scene.vocab.count:
            raise SceneError(f"objects[{o.id}].category: index {o.category} out of range")
        if o.category == fi:
            continue
        fx0, fx1, fy0, fy1 = o.footprint()
        if fx0 < xmin - slack or fx1 > xmax + slack or fy0 < ymin - slack or fy1 > ymax + slack:
            raise SceneError(f"objects[{o.id}]: footprint outside room bounds")


def make_floor(bounds, vocab: CategoryVocab, obj_id: str = "floor") -> SceneObject:
    (xmin, xmax), (ymin, ymax) = bounds
    return SceneObject(
        id=obj_id,
        category=vocab.floor_index,
        position=((xmin + xmax) / 2.0, (ymin + ymax) / 2.0, -FLOOR_THICKNESS / 2.0),
        size=(xmax - xmin, ymax - ymin, FLOOR_THICKNESS),
    )


def make_walls(bounds, vocab: CategoryVocab, height: float = 2.4) -> list[SceneObject]:
    """Four walls standing just inside the bounds, shortened so corners do not overlap."""
    (xmin, xmax), (ymin, ymax) = bounds
    t = WALL_THICKNESS
    cx, cy = (xmin + xmax) / 2.0, (ymin + ymax) / 2.0
    z = height / 2.0
    lx = xmax - xmin
    ly = ymax - ymin - 2 * t
    return [
        SceneObject("wall_s", vocab.wall_index, (cx, ymin + t / 2, z), (lx, t, height)),
        SceneObject("wall_n", vocab.wall_index, (cx, ymax - t / 2, z), (lx, t, height)),
        SceneObject("wall_w", vocab.wall_index, (xmin + t / 2, cy, z), (t, ly, height)),
        SceneObject("wall_e", vocab.wall_index, (xmax - t / 2, cy, z), (t, ly, height)),
    ]


# ---------------------------------------------------------------------------
# JSON serialization
# ---------------------------------------------------------------------------

def _round9(x: float) -> float:
    # canonical form keeps 9 significant digits; idempotent under re-rounding
    return float(f"{float(x):.9g}")


def scene_to_dict(scene: Scene) -> dict:
    (xr, yr) = scene.bounds
    return {
        "format": SCENE_FORMAT,
        "room_type": scene.room_type,
        "vocab": {"names": list(scene.vocab.names)},
        "bounds": {"x": [_round9(xr[0]), _round9(xr[1])], "y": [_round9(yr[0]), _round9(yr[1])]},
        "objects": [
            {
                "id": o.id,
                "category": scene.vocab.name(o.category),
                "position": [_round9(v) for v in o.position],
                "size": [_round9(v) for v in o.size],
            }
            for o in sorted(scene.objects, key=lambda o: o.id)
        ],
    }


def scene_to_json(scene: Scene) -> str:
    """Canonical serialization: sorted keys, objects sorted by id, 9 significant digits."""
    return json.dumps(scene_to_dict(scene), sort_keys=True, separators=(",", ":")) + "\n"


def scene_from_dict(data: dict) -> Scene:
    def need(d, key, path):
        if not isinstance(d, dict) or key not in d:
            raise SceneError(f"{path}: missing field {key!r}")
        return d[key]

    if need(data, "format", "$") != SCENE_FORMAT:
        raise SceneError(f"$.format: expected {SCENE_FORMAT!r}")
    room_type = need(data, "room_type", "$")
    names = need(need(data, "vocab", "$"), "names", "$.vocab")
    if not isinstance(names, list) or not all(isinstance(n, str) for n in names):
        raise SceneError("$.vocab.names: expected a list of strings")
    vocab = CategoryVocab(tuple(names))
    bounds_d = need(data, "bounds", "$")
    bx = need(bounds_d, "x", "$.bounds")
    by = need(bounds_d, "y", "$.bounds")
    for axis, pair in (("x", bx), ("y", by)):
        if not (isinstance(pair, list) and len(pair) == 2):
            raise SceneError(f"$.bounds.{axis}: expected [min, max]")
    bounds = ((float(bx[0]), float(bx[1])), (float(by[0]), float(by[1])))
    raw_objects = need(data, "objects", "$")
    if not isinstance(raw_objects, list):
        raise SceneError("$.objects: expected a list")
    objects = []
    for i, od in enumerate(raw_objects):
        path = f"$.objects[{i}]"
        oid = need(od, "id", path)
        cat = need(od, "category", path)
        pos = need(od, "position", path)
        size = need(od, "size", path)
        for key, vec in (("position", pos), ("size", size)):
            if not (isinstance(vec, list) and len(vec) == 3):
                raise SceneError(f"{path}.{key}: expected a 3-vector")
        try:
            obj = SceneObject(str(oid), vocab.index(str(cat)), tuple(map(float, pos)), tuple(map(float, size)))
        except SceneError as e:
            raise SceneError(f"{path}: {e}") from None
        objects.append(obj)
    return Scene(room_type=str(room_type), vocab=vocab, bounds=bounds, objects=tuple(objects))


def load_scene(path: str | Path) -> Scene:
    """Load and validate a scene file; invalid content raises SceneError with a field path."""
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as e:
        raise SceneError(f"cannot read scene file {p}: {e}") from e
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise SceneError(f"{p}: not valid JSON ({e})") from e
    return scene_from_dict(data)


def save_scene(scene: Scene, path: str | Path) -> None:
    Path(path).write_text(scene_to_json(scene), encoding="utf-8")
