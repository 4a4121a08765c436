"""Command-line entry points.

Verbs: gen-data, train, eval, ablate, predict, synth, serve. Every verb
honors --seed; --checkpoint falls back to the SGNET_CHECKPOINT environment
variable. Report-producing verbs write JSON plus delimited tables and PNG
figures into their output directory.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from . import generator
from .dataset import make_training_samples, split_dataset
from .evaluation import evaluate_samples, run_ablation
from .generator import GenerationError, generate_scenes
from .model import (
    ModelConfig,
    forward,
    init_params,
    load_checkpoint,
    save_checkpoint,
)
from .relations import GraphError, build_graph, insert_query_node
from .scene import Scene, SceneError, load_scene, save_scene
from .training import TrainConfig, prepare_samples, train

RULESETS = {
    "bedroom": generator.bedroom_rules,
    "rule-task": generator.rule_task_rules,
    "long-range": generator.long_range_rules,
    "clutter": generator.clutter_rules,
}


def _fail(message: str) -> "click.ClickException":
    return click.ClickException(message)


def _load_scene_dir(data_dir: str) -> list[Scene]:
    paths = sorted(Path(data_dir).glob("*.json"))
    if not paths:
        raise _fail(f"no scene files (*.json) found in {data_dir}")
    scenes = []
    for p in paths:
        try:
            scenes.append(load_scene(p))
        except SceneError as e:
            raise _fail(f"{p}: {e}")
    hashes = {s.vocab.hash() for s in scenes}
    if len(hashes) > 1:
        raise _fail(f"{data_dir}: scenes disagree on the category vocabulary")
    return scenes


def _load_checkpoint_or_fail(path: str | None):
    if not path:
        raise _fail("no checkpoint given (use --checkpoint or SGNET_CHECKPOINT)")
    if not Path(path).is_file():
        raise _fail(f"checkpoint not found: {path}")
    try:
        return load_checkpoint(path)
    except Exception as e:
        raise _fail(f"cannot load checkpoint {path}: {e}")


checkpoint_option = click.option(
    "--checkpoint", envvar="SGNET_CHECKPOINT", default=None,
    help="Model checkpoint path (default: $SGNET_CHECKPOINT).",
)


@click.group()
def main():
    """Scene-context object prediction: data, training, evaluation, service."""


@main.command("gen-data")
@click.option("--rules", type=click.Choice(sorted(RULESETS)), default="bedroom")
@click.option("--count", type=int, default=100, show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--seed", type=int, default=0, show_default=True)
def gen_data(rules, count, out_dir, seed):
    """Generate scenes into a directory of canonical scene files."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        scenes = generate_scenes(RULESETS[rules](), count, seed)
    except GenerationError as e:
        raise _fail(str(e))
    for i, scene in enumerate(scenes):
        save_scene(scene, out / f"scene_{i:05d}.json")
    click.echo(f"wrote {len(scenes)} scenes to {out}")


@main.command("train")
@click.option("--data", "data_dir", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--variant", type=click.Choice(
    ("full", "tree", "sparse", "co_occur_only", "agg_sum", "agg_max",
     "agg_vanilla_rnn", "no_attention", "dist_weights")), default="full")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--iterations", "max_iterations", type=int, default=10_000, show_default=True)
@click.option("--batch-size", type=int, default=350, show_default=True)
@click.option("--eval-every", type=int, default=50, show_default=True)
@click.option("--patience", type=int, default=10, show_default=True)
@click.option("--size-loss-weight", type=float, default=1.0, show_default=True)
@click.option("--lr", type=float, default=0.001, show_default=True)
@click.option("--node-dim", type=int, default=100, show_default=True)
@click.option("--hidden", type=int, default=300, show_default=True)
@click.option("--passes", "mp_iterations", type=int, default=3, show_default=True,
              help="Message-passing iterations T.")
def train_cmd(data_dir, out_path, variant, seed, max_iterations, batch_size, eval_every,
              patience, size_loss_weight, lr, node_dim, hidden, mp_iterations):
    """Train a model on a scene directory (80/10/10 split by --seed)."""
    scenes = _load_scene_dir(data_dir)
    vocab = scenes[0].vocab
    config = ModelConfig(
        category_count=vocab.count, node_dim=node_dim, hidden=hidden,
        iterations=mp_iterations, variant=variant,
    )
    split = split_dataset(scenes, seed)
    tc = TrainConfig(
        batch_size=batch_size, max_iterations=max_iterations, seed=seed,
        size_loss_weight=size_loss_weight, eval_every=eval_every,
        patience=patience, lr=lr,
    )
    train_samples = prepare_samples(make_training_samples(list(split.train), seed), config)
    val_samples = prepare_samples(make_training_samples(list(split.val), seed + 1), config)
    params = init_params(config, seed)
    result = train(train_samples, val_samples, params, config, tc)
    save_checkpoint(out_path, result.params, config, vocab.hash())

    from .report import write_history

    write_history(result.history, Path(out_path).parent)
    click.echo(json.dumps({
        "checkpoint": str(out_path),
        "iterations_run": result.iterations_run,
        "best_val_top1": result.best_val_top1,
        "wall_seconds": round(result.wall_seconds, 2),
    }, sort_keys=True))


@main.command("eval")
@checkpoint_option
@click.option("--data", "data_dir", required=True, type=click.Path(exists=True))
@click.option("--topk", default="1,3,5", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_dir", default=None, type=click.Path(),
              help="Directory for report files and figures.")
def eval_cmd(checkpoint, data_dir, topk, seed, out_dir):
    """Evaluate a checkpoint on held-out scenes (one removal per scene)."""
    params, config, vocab_hash = _load_checkpoint_or_fail(checkpoint)
    scenes = _load_scene_dir(data_dir)
    if scenes[0].vocab.hash() != vocab_hash:
        raise _fail("scene vocabulary does not match the checkpoint")
    try:
        ks = tuple(int(k) for k in topk.split(","))
    except ValueError:
        raise _fail(f"--topk must be a comma-separated integer list, got {topk!r}")
    samples = prepare_samples(make_training_samples(scenes, seed), config)
    report = evaluate_samples(params, config, samples, ks)
    click.echo(report.to_json(), nl=False)
    if out_dir:
        from .report import write_eval_report

        write_eval_report(report, out_dir)


@main.command("ablate")
@click.option("--data", "data_dir", required=True, type=click.Path(exists=True))
@click.option("--variants", default="full,tree,sparse,co_occur_only,agg_sum,agg_max,"
              "agg_vanilla_rnn,no_attention,dist_weights", show_default=False,
              help="Comma-separated variant list (default: all nine).")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--iterations", "max_iterations", type=int, default=2000, show_default=True)
@click.option("--batch-size", type=int, default=32, show_default=True)
@click.option("--node-dim", type=int, default=100, show_default=True)
@click.option("--hidden", type=int, default=300, show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path())
def ablate_cmd(data_dir, variants, seed, max_iterations, batch_size, node_dim, hidden, out_dir):
    """Train and evaluate several variants on identical splits."""
    scenes = _load_scene_dir(data_dir)
    variant_list = [v.strip() for v in variants.split(",") if v.strip()]
    config = ModelConfig(category_count=scenes[0].vocab.count, node_dim=node_dim,
                         hidden=hidden)
    tc = TrainConfig(batch_size=batch_size, max_iterations=max_iterations, seed=seed)
    try:
        result = run_ablation(scenes, variant_list, config, tc, seed)
    except Exception as e:
        raise _fail(f"ablation failed: {e}")
    from .report import write_ablation

    write_ablation(result.rows, out_dir)
    click.echo(json.dumps([r.to_dict() for r in result.rows], indent=2, sort_keys=True))


@main.command("predict")
@checkpoint_option
@click.option("--scene", "scene_path", required=True, type=click.Path(exists=True))
@click.option("--query", required=True, help="Query point as x,y,z (meters).")
def predict_cmd(checkpoint, scene_path, query):
    """Predict the category distribution and size at a query point."""
    params, config, vocab_hash = _load_checkpoint_or_fail(checkpoint)
    try:
        scene = load_scene(scene_path)
    except SceneError as e:
        raise _fail(str(e))
    if scene.vocab.hash() != vocab_hash:
        raise _fail("scene vocabulary does not match the checkpoint")
    try:
        q = tuple(float(v) for v in query.split(","))
    except ValueError:
        raise _fail(f"--query must be x,y,z, got {query!r}")
    if len(q) != 3:
        raise _fail("--query must have exactly three components")
    try:
        graph = insert_query_node(build_graph(scene), q)
    except GraphError as e:
        raise _fail(str(e))
    result = forward(graph, params, config)
    click.echo(json.dumps({
        "categories": list(scene.vocab.names),
        "probs": [float(p) for p in result.probs],
        "size": [float(s) for s in result.size],
    }, sort_keys=True))


@main.command("synth")
@checkpoint_option
@click.option("--scene", "scene_path", required=True, type=click.Path(exists=True))
@click.option("--steps", type=int, default=5, show_default=True)
@click.option("--surface", default="floor", show_default=True)
@click.option("--resolution", type=float, default=4.0, show_default=True)
@click.option("--stop-threshold", type=float, default=None)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path(),
              help="Where to write the augmented scene.")
@click.option("--log", "log_path", default=None, type=click.Path(),
              help="JSON-lines synthesis log.")
@click.option("--heatmap-dir", default=None, type=click.Path(),
              help="Also render the initial placement heatmap here.")
def synth_cmd(checkpoint, scene_path, steps, surface, resolution, stop_threshold, seed,
              out_path, log_path, heatmap_dir):
    """Iteratively add objects at the most probable locations."""
    params, config, vocab_hash = _load_checkpoint_or_fail(checkpoint)
    try:
        scene = load_scene(scene_path)
    except SceneError as e:
        raise _fail(str(e))
    if scene.vocab.hash() != vocab_hash:
        raise _fail("scene vocabulary does not match the checkpoint")
    from .synthesis import SynthesisError, eval_grid, synthesize

    if heatmap_dir:
        from .report import write_heatmap

        grid = eval_grid(scene, params, config, surface, resolution)
        write_heatmap(grid, scene, heatmap_dir)
    try:
        final_scene, step_log = synthesize(
            scene, params, config, steps, surface, resolution, stop_threshold
        )
    except SynthesisError as e:
        raise _fail(str(e))
    save_scene(final_scene, out_path)
    lines = [json.dumps(s.to_dict(), sort_keys=True) for s in step_log]
    if log_path:
        Path(log_path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    for line in lines:
        click.echo(line)


@main.command("serve")
@checkpoint_option
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
def serve_cmd(checkpoint, host, port):
    """Serve prediction, heatmap and synthesis endpoints over HTTP."""
    if not checkpoint or not Path(checkpoint).is_file():
        raise _fail(f"checkpoint not found: {checkpoint}")
    import uvicorn

    from .service import create_app, load_service_state

    app = create_app(load_service_state(checkpoint))
    uvicorn.run(app, host=host, port=port, log_level="info")


if __name__ == "__main__":
    sys.exit(main())
