/** Top-down canvas renderer: floor, walls, labeled boxes, heatmap overlays,
 * and the query marker. Pure drawing; all state lives in the Editor. */

import type { Editor } from "./editor.js";
import type { SceneDoc, SceneObjectDoc } from "./types.js";

const CATEGORY_COLORS = [
  "#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#b07aa1",
  "#76b7b2", "#edc948", "#ff9da7", "#9c755f", "#bab0ac",
];

function colorFor(doc: SceneDoc, category: string): string {
  const idx = doc.vocab.names.indexOf(category);
  return CATEGORY_COLORS[((idx % CATEGORY_COLORS.length) + CATEGORY_COLORS.length)
    % CATEGORY_COLORS.length];
}

export class SceneCanvas {
  private ctx: CanvasRenderingContext2D;
  scale = 120; // pixels per meter
  margin = 20;

  constructor(private canvas: HTMLCanvasElement, private editor: Editor) {
    const ctx = canvas.getContext("2d");
    if (!ctx) throw new Error("no 2d context");
    this.ctx = ctx;
  }

  toScene(px: number, py: number): [number, number] {
    const doc = this.editor.doc;
    if (!doc) return [0, 0];
    const x = (px - this.margin) / this.scale + doc.bounds.x[0];
    const y = doc.bounds.y[1] - (py - this.margin) / this.scale;
    return [x, y];
  }

  private toPixel(x: number, y: number): [number, number] {
    const doc = this.editor.doc!;
    return [
      this.margin + (x - doc.bounds.x[0]) * this.scale,
      this.margin + (doc.bounds.y[1] - y) * this.scale,
    ];
  }

  objectAt(px: number, py: number): SceneObjectDoc | null {
    const doc = this.editor.doc;
    if (!doc) return null;
    const [x, y] = this.toScene(px, py);
    let best: SceneObjectDoc | null = null;
    for (const o of doc.objects) {
      if (o.category === "floor" || o.category === "wall") continue;
      if (
        Math.abs(x - o.position[0]) <= o.size[0] / 2 &&
        Math.abs(y - o.position[1]) <= o.size[1] / 2
      ) {
        if (!best || o.position[2] > best.position[2]) best = o;
      }
    }
    return best;
  }

  fitTo(doc: SceneDoc): void {
    const w = doc.bounds.x[1] - doc.bounds.x[0];
    const h = doc.bounds.y[1] - doc.bounds.y[0];
    this.scale = Math.min(
      (this.canvas.width - 2 * this.margin) / w,
      (this.canvas.height - 2 * this.margin) / h,
    );
  }

  draw(): void {
    const { ctx } = this;
    const doc = this.editor.doc;
    ctx.clearRect(0, 0, this.canvas.width, this.canvas.height);
    if (!doc) {
      ctx.fillStyle = "#888";
      ctx.font = "16px sans-serif";
      ctx.fillText("Load a scene file to begin", 30, 40);
      return;
    }
    this.fitTo(doc);

    // floor
    const [fx, fy] = this.toPixel(doc.bounds.x[0], doc.bounds.y[1]);
    ctx.fillStyle = "#f4f1ea";
    ctx.fillRect(fx, fy, (doc.bounds.x[1] - doc.bounds.x[0]) * this.scale,
                 (doc.bounds.y[1] - doc.bounds.y[0]) * this.scale);

    // heatmap overlays (under the furniture)
    for (const overlay of this.editor.overlays) {
      const cell = 1 / overlay.resolution;
      const peak = Math.max(...overlay.cells.map((c) => c.p), 1e-9);
      for (const c of overlay.cells) {
        const [px, py] = this.toPixel(c.x - cell / 2, c.y + cell / 2);
        ctx.fillStyle = `rgba(214, 39, 40, ${(0.65 * c.p / peak).toFixed(3)})`;
        ctx.fillRect(px, py, cell * this.scale, cell * this.scale);
      }
    }

    // objects, floor-level first
    const objects = [...doc.objects]
      .filter((o) => o.category !== "floor")
      .sort((a, b) => a.position[2] - b.position[2]);
    for (const o of objects) {
      const [px, py] = this.toPixel(o.position[0] - o.size[0] / 2,
                                    o.position[1] + o.size[1] / 2);
      const w = o.size[0] * this.scale;
      const h = o.size[1] * this.scale;
      if (o.category === "wall") {
        ctx.fillStyle = "#5c5c5c";
        ctx.fillRect(px, py, w, h);
        continue;
      }
      ctx.fillStyle = colorFor(doc, o.category) + "cc";
      ctx.fillRect(px, py, w, h);
      ctx.strokeStyle = "#333";
      ctx.strokeRect(px, py, w, h);
      ctx.fillStyle = "#111";
      ctx.font = "11px sans-serif";
      ctx.fillText(o.category, px + 3, py + 12, w - 6);
    }

    // query marker
    const q = this.editor.prediction?.point;
    if (q) {
      const [px, py] = this.toPixel(q[0], q[1]);
      ctx.strokeStyle = "#d62728";
      ctx.lineWidth = 2;
      ctx.beginPath();
      ctx.moveTo(px - 8, py);
      ctx.lineTo(px + 8, py);
      ctx.moveTo(px, py - 8);
      ctx.lineTo(px, py + 8);
      ctx.stroke();
      ctx.lineWidth = 1;
    }
  }
}
