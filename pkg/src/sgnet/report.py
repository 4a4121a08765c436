"""Report rendering: JSON + delimited tables + matplotlib figures.

Every CLI path that produces an evaluation artifact writes three forms next
to each other: machine-readable JSON, a delimited table (CSV), and PNG
figures (top-K curve, accuracy by scene size, ablation bars, placement
heatmaps).
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .evaluation import AblationRow, EvalReport
from .scene import Scene
from .synthesis import PlacementGrid


def _ensure_dir(path: Path) -> Path:
    path.mkdir(parents=True, exist_ok=True)
    return path


def aligned_table(headers: list[str], rows: list[list[str]]) -> str:
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h)
              for i, h in enumerate(headers)]
    fmt = "  ".join(f"{{:<{w}}}" for w in widths)
    lines = [fmt.format(*headers), fmt.format(*("-" * w for w in widths))]
    lines += [fmt.format(*row) for row in rows]
    return "\n".join(lines) + "\n"


def write_eval_report(report: EvalReport, out_dir: str | Path) -> Path:
    out = _ensure_dir(Path(out_dir))
    (out / "report.json").write_text(report.to_json(), encoding="utf-8")

    with open(out / "topk_curve.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "accuracy"])
        for k, acc in sorted(report.curve.items()):
            w.writerow([k, f"{acc:.6f}"])

    rows = [[f"top-{k}", f"{v:.4f}"] for k, v in sorted(report.topk.items())]
    rows.append(["size MAE (cm)", f"{report.size_mae_cm:.2f}"])
    rows.append(["queries", str(report.n_queries)])
    for room, acc in report.per_room.items():
        rows.append([f"top-1 [{room}]", f"{acc:.4f}"])
    for label, acc in report.by_object_count.items():
        rows.append([f"top-1 [{label} objects]", f"{acc:.4f}"])
    (out / "report.txt").write_text(aligned_table(["metric", "value"], rows), encoding="utf-8")

    ks = sorted(report.curve.keys())
    fig, ax = plt.subplots(figsize=(5, 3.4))
    ax.plot(ks, [report.curve[k] for k in ks], marker="o")
    ax.set_xlabel("K")
    ax.set_ylabel("top-K accuracy")
    ax.set_ylim(0, 1.02)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(out / "topk_curve.png", dpi=130)
    plt.close(fig)

    if report.by_object_count:
        labels = list(report.by_object_count.keys())
        values = [report.by_object_count[b] for b in labels]
        fig, ax = plt.subplots(figsize=(5, 3.4))
        ax.bar(labels, values)
        ax.set_xlabel("objects in scene")
        ax.set_ylabel("top-1 accuracy")
        ax.set_ylim(0, 1.02)
        fig.tight_layout()
        fig.savefig(out / "accuracy_by_object_count.png", dpi=130)
        plt.close(fig)
    return out


def write_ablation(rows: list[AblationRow], out_dir: str | Path) -> Path:
    out = _ensure_dir(Path(out_dir))
    payload = [r.to_dict() for r in rows]
    (out / "ablation.json").write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")

    with open(out / "ablation.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["variant", "top1", "top3", "top5", "size_cm"])
        for r in rows:
            w.writerow([r.variant, f"{r.top1:.6f}", f"{r.top3:.6f}", f"{r.top5:.6f}",
                        f"{r.size_cm:.3f}"])

    table = aligned_table(
        ["variant", "top1", "top3", "top5", "size_cm"],
        [[r.variant, f"{r.top1:.4f}", f"{r.top3:.4f}", f"{r.top5:.4f}", f"{r.size_cm:.2f}"]
         for r in rows],
    )
    (out / "ablation.txt").write_text(table, encoding="utf-8")

    x = np.arange(len(rows))
    width = 0.27
    fig, ax = plt.subplots(figsize=(max(5.0, 1.1 * len(rows)), 3.6))
    for i, k in enumerate((1, 3, 5)):
        vals = [getattr(r, f"top{k}") for r in rows]
        ax.bar(x + (i - 1) * width, vals, width, label=f"top-{k}")
    ax.set_xticks(x)
    ax.set_xticklabels([r.variant for r in rows], rotation=30, ha="right")
    ax.set_ylim(0, 1.02)
    ax.set_ylabel("accuracy")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out / "ablation.png", dpi=130)
    plt.close(fig)
    return out


def write_heatmap(grid: PlacementGrid, scene: Scene, out_dir: str | Path,
                  top_categories: int = 2) -> Path:
    """JSON export plus a per-category probability raster over the scene."""
    out = _ensure_dir(Path(out_dir))
    (out / "heatmap.json").write_text(grid.to_json(), encoding="utf-8")

    xs = sorted({c.point[0] for c in grid.cells})
    ys = sorted({c.point[1] for c in grid.cells})
    xi = {v: i for i, v in enumerate(xs)}
    yi = {v: i for i, v in enumerate(ys)}
    probs = np.stack([c.result.probs for c in grid.cells])
    mean = probs.mean(axis=0)
    cats = np.argsort(-mean, kind="stable")[:top_categories]

    fig, axes = plt.subplots(1, len(cats), figsize=(4.2 * len(cats), 3.8), squeeze=False)
    for ax, cat in zip(axes[0], cats):
        raster = np.full((len(ys), len(xs)), np.nan)
        for c in grid.cells:
            raster[yi[c.point[1]], xi[c.point[0]]] = c.result.probs[cat]
        im = ax.imshow(
            raster,
            origin="lower",
            extent=(min(xs), max(xs), min(ys), max(ys)),
            vmin=0.0,
            cmap="viridis",
        )
        for o in scene.objects:
            if o.id == scene.floor.id:
                continue
            x0, x1, y0, y1 = o.footprint()
            ax.add_patch(plt.Rectangle((x0, y0), x1 - x0, y1 - y0, fill=False,
                                       edgecolor="white", linewidth=0.8))
        ax.set_title(scene.vocab.name(int(cat)))
        fig.colorbar(im, ax=ax, shrink=0.8)
    fig.tight_layout()
    fig.savefig(out / "heatmap.png", dpi=130)
    plt.close(fig)
    return out


def write_history(history: list[dict], out_dir: str | Path) -> None:
    """Training-curve CSV + figure."""
    out = _ensure_dir(Path(out_dir))
    with open(out / "training_curve.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "loss", "val_top1"])
        for h in history:
            w.writerow([h["iteration"], f"{h['loss']:.6f}", f"{h['val_top1']:.6f}"])
    if not history:
        return
    fig, ax1 = plt.subplots(figsize=(5.4, 3.4))
    its = [h["iteration"] for h in history]
    ax1.plot(its, [h["loss"] for h in history], color="tab:red", label="loss")
    ax1.set_xlabel("iteration")
    ax1.set_ylabel("loss", color="tab:red")
    ax2 = ax1.twinx()
    ax2.plot(its, [h["val_top1"] for h in history], color="tab:blue", label="val top-1")
    ax2.set_ylabel("val top-1", color="tab:blue")
    ax2.set_ylim(0, 1.02)
    fig.tight_layout()
    fig.savefig(out / "training_curve.png", dpi=130)
    plt.close(fig)
