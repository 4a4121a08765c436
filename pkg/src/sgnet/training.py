"""Training loop for the remove-one-object task.

Each sample is a scene with one object removed; the query node sits at the
removed centroid. The loss is categorical cross entropy on the removed
category plus a weighted squared-error term on the removed box size,
averaged over the batch, optimized with Adam. Validation top-1 drives early
stopping and final model selection.

Serial by design: identical seeds produce bit-identical parameters.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .autodiff import (
    Tensor,
    add,
    constant,
    cross_entropy,
    cross_entropy_rows,
    l2_loss,
    mul,
    sub,
    sum_all,
)
from .dataset import TrainingSample
from .model import (
    ModelConfig,
    PreparedGraph,
    clone_params,
    merge_prepared,
    prepare_graph,
    run_model,
)
from .optim import AdamState, adam_step, zero_grads
from .relations import SceneGraph, build_graph, insert_query_node

# upper bound on graphs fused into one tape; keeps peak memory flat
MAX_UNION_SAMPLES = 48


class TrainingError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    batch_size: int = 350
    max_iterations: int = 10_000
    seed: int = 0
    size_loss_weight: float = 1.0
    eval_every: int = 50
    patience: int = 10  # validation rounds without improvement before stopping
    lr: float = 0.001
    weight_decay: float = 1e-5
    stop_at_val: float | None = None  # stop once validation top-1 reaches this

    def __post_init__(self):
        if self.batch_size < 1:
            raise TrainingError("batch_size must be >= 1")
        if self.size_loss_weight < 0:
            raise TrainingError("size_loss_weight must be >= 0")


@dataclass
class PreparedSample:
    prep: PreparedGraph
    target_category: int
    target_size: np.ndarray
    sample_id: str
    room_type: str
    object_count: int


def sample_graph(sample: TrainingSample) -> SceneGraph:
    return insert_query_node(build_graph(sample.scene), sample.query)


def prepare_samples(
    samples: list[TrainingSample],
    config: ModelConfig,
    graphs: list[SceneGraph] | None = None,
) -> list[PreparedSample]:
    """Build (or reuse) the query graphs and flatten them for `config`."""
    if graphs is None:
        graphs = [sample_graph(s) for s in samples]
    out = []
    for s, g in zip(samples, graphs):
        out.append(PreparedSample(
            prep=prepare_graph(g, config),
            target_category=s.target_category,
            target_size=np.asarray(s.target_size, dtype=np.float64),
            sample_id=s.removed_id,
            room_type=s.scene.room_type,
            object_count=len(s.scene.objects),
        ))
    return out


def _row(t: Tensor, i: int = 0) -> Tensor:
    from .autodiff import flatten
    from .autodiff import rows as rows_op

    return flatten(rows_op(t, np.array([i], dtype=np.intp)))


def sample_loss(ps: PreparedSample, params, config: ModelConfig, size_weight: float) -> Tensor:
    """Loss of a single sample: cross entropy plus weighted squared size error."""
    out = run_model(ps.prep, params, config)
    loss = cross_entropy(_row(out.probs), ps.target_category)
    if size_weight > 0.0:
        loss = add(loss, mul(l2_loss(_row(out.size), constant(ps.target_size)), size_weight))
    return loss


def _chunk_loss(chunk: list[PreparedSample], params, config: ModelConfig,
                size_weight: float) -> tuple[Tensor, np.ndarray]:
    """Summed loss over a fused chunk plus per-sample values for diagnostics."""
    merged = merge_prepared([ps.prep for ps in chunk])
    out = run_model(merged, params, config)
    targets = np.array([ps.target_category for ps in chunk], dtype=np.intp)
    ce = cross_entropy_rows(out.probs, targets)
    per_sample = ce.data.copy()
    loss = sum_all(ce)
    if size_weight > 0.0:
        sizes = np.stack([ps.target_size for ps in chunk])
        d = sub(out.size, constant(sizes))
        sq = mul(d, d)
        per_sample = per_sample + size_weight * sq.data.sum(axis=1)
        loss = add(loss, mul(sum_all(sq), size_weight))
    return loss, per_sample


def training_step(
    batch: list[PreparedSample],
    params,
    config: ModelConfig,
    opt: AdamState,
    size_weight: float = 1.0,
) -> float:
    """One optimizer step on a batch; returns the mean loss.

    Samples are fused into disjoint-union graphs (bounded chunks) so one tape
    covers many scenes; gradients accumulate across chunks before the single
    Adam update.
    """
    zero_grads(params)
    scale = 1.0 / len(batch)
    total = 0.0
    for lo in range(0, len(batch), MAX_UNION_SAMPLES):
        chunk = batch[lo : lo + MAX_UNION_SAMPLES]
        loss, per_sample = _chunk_loss(chunk, params, config, size_weight)
        if not np.all(np.isfinite(per_sample)):
            bad = chunk[int(np.argmax(~np.isfinite(per_sample)))]
            raise TrainingError(
                f"non-finite loss on sample {bad.sample_id!r} ({bad.prep.n} nodes)"
            )
        mul(loss, scale).backward()
        total += float(loss.data)
    adam_step(params, opt)
    return total * scale


def predict_batches(params, config, samples: list[PreparedSample],
                    iterations: int | None = None):
    """Yield (chunk, probs (B,C), sizes (B,3)) without touching gradients."""
    for lo in range(0, len(samples), MAX_UNION_SAMPLES):
        chunk = samples[lo : lo + MAX_UNION_SAMPLES]
        merged = merge_prepared([ps.prep for ps in chunk])
        out = run_model(merged, params, config, iterations=iterations)
        yield chunk, out.probs.data, out.size.data


def _top1_accuracy(params, config, samples: list[PreparedSample]) -> float:
    if not samples:
        return 0.0
    hits = 0
    for chunk, probs, _sizes in predict_batches(params, config, samples):
        preds = np.argmax(probs, axis=1)
        hits += int(np.sum(preds == np.array([ps.target_category for ps in chunk])))
    return hits / len(samples)


@dataclass
class TrainResult:
    params: dict
    history: list = field(default_factory=list)
    best_val_top1: float = 0.0
    iterations_run: int = 0
    wall_seconds: float = 0.0


def train(
    train_samples: list[PreparedSample],
    val_samples: list[PreparedSample],
    params,
    config: ModelConfig,
    tc: TrainConfig,
    time_budget: float | None = None,
) -> TrainResult:
    """Iterate Adam steps over shuffled batches with early stopping on
    validation top-1; returns the best-validation parameters."""
    opt = AdamState(lr=tc.lr, weight_decay=tc.weight_decay)
    rng = np.random.default_rng(tc.seed)
    order = rng.permutation(len(train_samples))
    cursor = 0
    history = []
    best = clone_params(params)
    best_top1 = -1.0
    stale = 0
    start = time.monotonic()
    it = 0
    for it in range(1, tc.max_iterations + 1):
        idx = []
        while len(idx) < min(tc.batch_size, len(train_samples)):
            if cursor >= len(order):
                order = rng.permutation(len(train_samples))
                cursor = 0
            idx.append(int(order[cursor]))
            cursor += 1
        batch = [train_samples[i] for i in idx]
        loss = training_step(batch, params, config, opt, tc.size_loss_weight)
        out_of_time = time_budget is not None and time.monotonic() - start > time_budget
        if it % tc.eval_every == 0 or it == tc.max_iterations or out_of_time:
            val_top1 = _top1_accuracy(params, config, val_samples)
            history.append({"iteration": it, "loss": loss, "val_top1": val_top1})
            if val_top1 > best_top1:
                best_top1 = val_top1
                best = clone_params(params)
                stale = 0
            else:
                stale += 1
            reached_target = tc.stop_at_val is not None and val_top1 >= tc.stop_at_val
            if stale >= tc.patience or out_of_time or reached_target:
                break
    return TrainResult(
        params=best,
        history=history,
        best_val_top1=best_top1,
        iterations_run=it,
        wall_seconds=time.monotonic() - start,
    )
