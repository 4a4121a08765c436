import os

os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
os.environ.setdefault("OMP_NUM_THREADS", "1")

import numpy as np
import pytest

from sgnet.scene import CategoryVocab, Scene, SceneObject, make_floor, make_walls

VOCAB = CategoryVocab(("floor", "wall", "table", "lamp", "chair", "bed", "nightstand", "sofa"))


def box(obj_id, category, x, y, bottom, sx, sy, sz, vocab=VOCAB):
    """Object from its footprint centre and bottom height."""
    return SceneObject(
        id=obj_id,
        category=vocab.index(category) if isinstance(category, str) else category,
        position=(x, y, bottom + sz / 2.0),
        size=(sx, sy, sz),
    )


def room(objects, size=4.0, vocab=VOCAB, room_type="test"):
    """Scene with a floor, four walls, and the given extra objects."""
    bounds = ((0.0, size), (0.0, size))
    base = [make_floor(bounds, vocab)] + make_walls(bounds, vocab)
    return Scene(room_type=room_type, vocab=vocab, bounds=bounds,
                 objects=tuple(base + list(objects)))


@pytest.fixture
def simple_scene():
    return room([
        box("table_1", "table", 2.0, 2.0, 0.0, 1.2, 0.7, 0.75),
        box("lamp_1", "lamp", 2.0, 2.0, 0.7501, 0.15, 0.15, 0.4),
        box("chair_1", "chair", 2.9, 2.0, 0.0, 0.45, 0.45, 0.9),
    ])


@pytest.fixture
def rng():
    return np.random.default_rng(0)
