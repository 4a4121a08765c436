"""Dataset plumbing: train/val/test splits and remove-one-object samples."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, TypeVar

import numpy as np

from .scene import Scene

T = TypeVar("T")


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class DatasetSplit:
    train: tuple
    val: tuple
    test: tuple
    seed: int


@dataclass(frozen=True)
class TrainingSample:
    """A scene with one object removed plus the ground truth for the hole."""

    scene: Scene
    target_category: int
    target_size: tuple[float, float, float]
    query: tuple[float, float, float]
    removed_id: str


def split_dataset(items: Sequence[T], seed: int) -> DatasetSplit:
    """Deterministic 80/10/10 partition (val and test get round(n/10) each)."""
    n = len(items)
    if n < 10:
        raise DatasetError(f"need at least 10 scenes to split, got {n}")
    order = np.random.default_rng(seed).permutation(n)
    n_eval = max(1, round(n * 0.1))
    test_idx = order[:n_eval]
    val_idx = order[n_eval : 2 * n_eval]
    train_idx = order[2 * n_eval :]
    pick = lambda idx: tuple(items[i] for i in idx)
    return DatasetSplit(train=pick(train_idx), val=pick(val_idx), test=pick(test_idx), seed=seed)


def make_training_sample(
    scene: Scene,
    rng: np.random.Generator,
    category_filter: set[int] | None = None,
) -> TrainingSample:
    """Remove a uniformly chosen object (never the floor or a wall) and turn
    its centroid into the query point.

    category_filter restricts the candidate pool to the given category
    indices; this is how task-specific query protocols are expressed.
    """
    candidates = scene.removable_objects()
    if category_filter is not None:
        candidates = [o for o in candidates if o.category in category_filter]
    if not candidates:
        raise DatasetError("scene has no removable object")
    victim = candidates[int(rng.integers(0, len(candidates)))]
    return TrainingSample(
        scene=scene.without(victim.id),
        target_category=victim.category,
        target_size=victim.size,
        query=victim.position,
        removed_id=victim.id,
    )


def make_training_samples(
    scenes: Sequence[Scene],
    seed: int,
    category_filter: set[int] | None = None,
) -> list[TrainingSample]:
    rng = np.random.default_rng(seed)
    return [make_training_sample(s, rng, category_filter) for s in scenes]
