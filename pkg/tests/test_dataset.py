import numpy as np
import pytest

from conftest import box, room
from sgnet.dataset import DatasetError, make_training_sample, split_dataset
from sgnet.generator import bedroom_rules, generate_scenes


def test_split_10_scenes():
    s = split_dataset(list(range(10)), seed=0)
    assert (len(s.train), len(s.val), len(s.test)) == (8, 1, 1)


def test_split_1000_scenes_disjoint_exhaustive():
    items = list(range(1000))
    s = split_dataset(items, seed=1)
    assert (len(s.train), len(s.val), len(s.test)) == (800, 100, 100)
    union = set(s.train) | set(s.val) | set(s.test)
    assert union == set(items)
    assert not (set(s.train) & set(s.val)) and not (set(s.val) & set(s.test))


def test_split_deterministic():
    a = split_dataset(list(range(100)), seed=9)
    b = split_dataset(list(range(100)), seed=9)
    assert a == b
    c = split_dataset(list(range(100)), seed=10)
    assert a.train != c.train


def test_split_too_few():
    with pytest.raises(DatasetError):
        split_dataset(list(range(9)), seed=0)


def test_forced_choice_single_removable(rng):
    scene = room([box("only", "table", 2, 2, 0, 1, 1, 0.7)])
    for _ in range(5):
        s = make_training_sample(scene, rng)
        assert s.removed_id == "only"
        assert s.query == scene.object_by_id("only").position
        assert s.target_size == (1, 1, 0.7)
        assert len(s.scene.objects) == len(scene.objects) - 1


def test_no_removable_objects(rng):
    scene = room([])
    with pytest.raises(DatasetError):
        make_training_sample(scene, rng)


def test_choice_uniform_multinomial(rng):
    """Each of k removable objects drawn with frequency 1/k within 3 sigma."""
    k = 4
    scene = room([
        box(f"obj{i}", "table", 0.7 + i * 0.9, 2, 0, 0.5, 0.5, 0.5) for i in range(k)
    ])
    n = 10_000
    counts = {f"obj{i}": 0 for i in range(k)}
    for _ in range(n):
        counts[make_training_sample(scene, rng).removed_id] += 1
    p = 1.0 / k
    bound = 3 * np.sqrt(p * (1 - p) * n)
    for c in counts.values():
        assert abs(c - n * p) <= bound


def test_never_removes_floor_or_wall(rng):
    """10^4 draws across random scenes: the hole is always furniture."""
    scenes = generate_scenes(bedroom_rules(), 25, seed=13)
    fi = scenes[0].vocab.floor_index
    wi = scenes[0].vocab.wall_index
    for i in range(10_000):
        s = make_training_sample(scenes[i % len(scenes)], rng)
        assert s.target_category not in (fi, wi)


def test_category_filter(rng):
    scene = room([
        box("a", "table", 1, 1, 0, 0.5, 0.5, 0.5),
        box("b", "lamp", 3, 3, 0, 0.2, 0.2, 0.4),
    ])
    want = {scene.vocab.index("lamp")}
    for _ in range(10):
        assert make_training_sample(scene, rng, category_filter=want).removed_id == "b"
