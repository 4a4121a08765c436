"""Evaluation: top-K accuracy, size error, ablation tables, posterior fusion.

The evaluation protocol removes one seeded object per test scene, queries at
its centroid, and scores the predicted distribution against the removed
category. Ties in the ranking break toward the lower category index.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .dataset import make_training_samples, split_dataset
from .model import ModelConfig, init_params, run_model
from .scene import Scene
from .training import PreparedSample, TrainConfig, prepare_samples, sample_graph, train


class EvaluationError(ValueError):
    pass


OBJECT_COUNT_BINS = ((0, 6), (7, 9), (10, 14), (15, 10**9))


@dataclass(frozen=True)
class EvalReport:
    topk: dict  # requested K -> accuracy
    curve: dict  # K = 1..10 -> accuracy
    size_mae_cm: float
    per_room: dict  # room type -> top-1
    by_object_count: dict  # bin label -> top-1
    n_queries: int

    def to_dict(self) -> dict:
        return {
            "topk": {str(k): v for k, v in self.topk.items()},
            "curve": {str(k): v for k, v in self.curve.items()},
            "size_mae_cm": self.size_mae_cm,
            "per_room": dict(self.per_room),
            "by_object_count": dict(self.by_object_count),
            "n_queries": self.n_queries,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def rank_categories(probs: np.ndarray) -> np.ndarray:
    """Categories from most to least probable; ties keep ascending index."""
    return np.argsort(-np.asarray(probs), kind="stable")


def topk_hit(probs: np.ndarray, target: int, k: int) -> bool:
    return target in rank_categories(probs)[:k]


def _bin_label(count: int) -> str:
    for lo, hi in OBJECT_COUNT_BINS:
        if lo <= count <= hi:
            return f"{lo}-{hi}" if hi < 10**9 else f"{lo}+"
    return "?"


def evaluate_samples(params, config: ModelConfig, samples: list[PreparedSample],
                     ks=(1, 3, 5), iterations: int | None = None) -> EvalReport:
    from .training import predict_batches

    if not samples:
        raise EvaluationError("empty evaluation set")
    max_k = min(10, config.category_count)
    curve_hits = {k: 0 for k in range(1, max_k + 1)}
    room_tot: dict[str, list[int]] = {}
    bin_tot: dict[str, list[int]] = {}
    size_err = 0.0
    for chunk, probs, sizes in predict_batches(params, config, samples, iterations):
        for b, ps in enumerate(chunk):
            ranked = rank_categories(probs[b])
            rank_of_target = int(np.where(ranked == ps.target_category)[0][0]) + 1
            for k in curve_hits:
                if rank_of_target <= k:
                    curve_hits[k] += 1
            top1 = 1 if rank_of_target == 1 else 0
            room_tot.setdefault(ps.room_type, []).append(top1)
            bin_tot.setdefault(_bin_label(ps.object_count), []).append(top1)
            size_err += float(np.mean(np.abs(sizes[b] - ps.target_size)))
    n = len(samples)
    curve = {k: h / n for k, h in curve_hits.items()}
    return EvalReport(
        topk={k: curve[min(k, max_k)] for k in ks},
        curve=curve,
        size_mae_cm=100.0 * size_err / n,
        per_room={r: float(np.mean(v)) for r, v in sorted(room_tot.items())},
        by_object_count={b: float(np.mean(v)) for b, v in sorted(bin_tot.items())},
        n_queries=n,
    )


def evaluate_topk(params, config: ModelConfig, scenes: list[Scene], ks=(1, 3, 5),
                  seed: int = 0) -> EvalReport:
    """Remove one seeded object per scene and score the model on the holes."""
    if not scenes:
        raise EvaluationError("empty test set")
    samples = prepare_samples(make_training_samples(scenes, seed), config)
    return evaluate_samples(params, config, samples, ks)


def size_error(params, config: ModelConfig, scenes: list[Scene], seed: int = 0) -> float:
    """Mean absolute size error in cm, averaged over the three axes."""
    return evaluate_topk(params, config, scenes, ks=(1,), seed=seed).size_mae_cm


# ---------------------------------------------------------------------------
# Posterior fusion (context-based recognition)
# ---------------------------------------------------------------------------

def fuse_posteriors(context: np.ndarray, external: np.ndarray) -> np.ndarray:
    """Renormalized elementwise product of two category distributions."""
    p1 = np.asarray(context, dtype=np.float64)
    p2 = np.asarray(external, dtype=np.float64)
    if p1.shape != p2.shape or p1.ndim != 1:
        raise EvaluationError("fuse_posteriors: distributions must share one length")
    for name, p in (("context", p1), ("external", p2)):
        if np.any(p < 0) or not np.isclose(p.sum(), 1.0, atol=1e-6):
            raise EvaluationError(f"fuse_posteriors: {name} input is not a distribution")
    prod = p1 * p2
    z = prod.sum()
    if z <= 0.0:
        raise EvaluationError("fuse_posteriors: disjoint supports (all-zero product)")
    return prod / z


def load_external_posteriors(path, category_count: int) -> dict[str, np.ndarray]:
    """JSON file mapping object id -> C-vector distribution."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    out = {}
    for oid, vec in raw.items():
        arr = np.asarray(vec, dtype=np.float64)
        if arr.shape != (category_count,):
            raise EvaluationError(f"posterior for {oid!r}: expected length {category_count}")
        out[str(oid)] = arr
    return out


def recognize_objects(params, config: ModelConfig, scene: Scene,
                      posteriors: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    """Fuse each object's external shape posterior with the context
    distribution predicted at its location (object temporarily removed)."""
    from .relations import build_graph, insert_query_node

    fused = {}
    for oid, external in posteriors.items():
        obj = scene.object_by_id(oid)
        graph = insert_query_node(build_graph(scene.without(oid)), obj.position)
        from .model import forward

        ctx = forward(graph, params, config).probs
        fused[oid] = fuse_posteriors(ctx, external)
    return fused


# ---------------------------------------------------------------------------
# Ablation harness
# ---------------------------------------------------------------------------

@dataclass
class AblationRow:
    variant: str
    top1: float
    top3: float
    top5: float
    size_cm: float

    def to_dict(self) -> dict:
        return {"variant": self.variant, "top1": self.top1, "top3": self.top3,
                "top5": self.top5, "size_cm": self.size_cm}


@dataclass
class AblationResult:
    rows: list
    reports: dict = field(default_factory=dict)  # variant -> EvalReport
    results: dict = field(default_factory=dict)  # variant -> TrainResult


def run_ablation(
    scenes: list[Scene],
    variants: list[str],
    base_config: ModelConfig,
    train_config: TrainConfig,
    seed: int = 0,
    category_filter: set[int] | None = None,
) -> AblationResult:
    """Train and evaluate each variant on identical splits, seeds and samples."""
    split = split_dataset(scenes, seed)
    mk = lambda sc: make_training_samples(list(sc), seed, category_filter)
    raw = {name: mk(part) for name, part in
           (("train", split.train), ("val", split.val), ("test", split.test))}
    graphs = {name: [sample_graph(s) for s in samples] for name, samples in raw.items()}

    rows: list[AblationRow] = []
    reports = {}
    results = {}
    for variant in variants:
        config = ModelConfig(
            category_count=base_config.category_count,
            node_dim=base_config.node_dim,
            hidden=base_config.hidden,
            iterations=base_config.iterations,
            variant=variant,
            dist_c=base_config.dist_c,
            dist_b=base_config.dist_b,
        )
        prepared = {
            name: prepare_samples(raw[name], config, graphs[name]) for name in raw
        }
        params = init_params(config, seed)
        result = train(prepared["train"], prepared["val"], params, config, train_config)
        report = evaluate_samples(result.params, config, prepared["test"])
        rows.append(AblationRow(
            variant=variant,
            top1=report.topk[1],
            top3=report.topk[3],
            top5=report.topk[5],
            size_cm=report.size_mae_cm,
        ))
        reports[variant] = report
        results[variant] = result
    return AblationResult(rows=rows, reports=reports, results=results)
