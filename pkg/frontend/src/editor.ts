/** Editor state machine: everything the canvas renders lives here, and every
 * probability shown comes from a service response. Scene edits snapshot the
 * canonical document text, so undo restores byte-identical documents. */

import type { ApiClient } from "./api.js";
import {
  addObject,
  boxesOverlap,
  moveObject,
  parseScene,
  serializeScene,
  surfaceTopAt,
  uniqueObjectId,
} from "./document.js";
import type { PredictResponse, SceneDoc, Vec3 } from "./types.js";

export interface Bar {
  name: string;
  index: number;
  p: number;
}

export interface PredictionView {
  point: Vec3;
  bars: Bar[]; // top 10, sorted by probability (ties to lower index)
  suggestedSizeCm: [number, number, number];
  raw: PredictResponse;
}

export interface HeatmapOverlay {
  category: string;
  resolution: number;
  cells: { x: number; y: number; p: number }[];
}

const PLACEMENT_LIFT = 1e-6;
const QUERY_HEIGHT = 0.01;
const MAX_OVERLAYS = 2;

export class Editor {
  doc: SceneDoc | null = null;
  prediction: PredictionView | null = null;
  overlays: HeatmapOverlay[] = [];
  synthStopped = false;
  collisionWarning: string | null = null;
  lastError: string | null = null;

  private undoStack: string[] = [];
  private clickSeq = 0;

  constructor(private api: ApiClient, private gridResolution = 4.0) {}

  loadScene(text: string): void {
    this.doc = parseScene(text);
    this.undoStack = [];
    this.prediction = null;
    this.overlays = [];
    this.synthStopped = false;
    this.collisionWarning = null;
  }

  saveScene(): string {
    if (!this.doc) throw new Error("no scene loaded");
    return serializeScene(this.doc);
  }

  get canUndo(): boolean {
    return this.undoStack.length > 0;
  }

  private snapshot(): void {
    if (this.doc) this.undoStack.push(serializeScene(this.doc));
  }

  /** One /v1/predict per click; a newer click supersedes older in-flight
   * responses (they are dropped, never rendered). The query sits 1 cm above
   * the surface under the cursor. */
  async clickQuery(x: number, y: number): Promise<PredictionView | null> {
    if (!this.doc) throw new Error("no scene loaded");
    const seq = ++this.clickSeq;
    const z = surfaceTopAt(this.doc, x, y) + QUERY_HEIGHT;
    const point: Vec3 = [x, y, z];
    let response: PredictResponse;
    try {
      response = await this.api.predict(this.doc, point);
    } catch (err) {
      if (seq === this.clickSeq) this.lastError = String(err);
      return null;
    }
    if (seq !== this.clickSeq) return null; // superseded by a later click
    const order = response.probs
      .map((p, index) => ({ p, index }))
      .sort((a, b) => b.p - a.p || a.index - b.index);
    this.prediction = {
      point,
      bars: order.slice(0, 10).map(({ p, index }) => ({
        name: response.categories[index],
        index,
        p,
      })),
      suggestedSizeCm: response.size.map((s) => Math.round(s * 100)) as [
        number,
        number,
        number,
      ],
      raw: response,
    };
    this.lastError = null;
    return this.prediction;
  }

  /** Add a box of the suggested top category and size at the query point. */
  acceptPlacement(): string | null {
    if (!this.doc || !this.prediction) return null;
    const best = this.prediction.bars[0];
    const [x, y, z] = this.prediction.point;
    const size = this.prediction.raw.size.map((s) => Math.max(0.01, s)) as Vec3;
    const bottom = z - QUERY_HEIGHT + PLACEMENT_LIFT;
    const obj = {
      id: uniqueObjectId(this.doc, best.name),
      category: best.name,
      position: [x, y, bottom + size[2] / 2] as Vec3,
      size,
    };
    this.snapshot();
    const collides = this.doc.objects.some(
      (o) => o.category !== "floor" && boxesOverlap(o, obj),
    );
    this.collisionWarning = collides
      ? `${obj.id} overlaps an existing object`
      : null;
    this.doc = addObject(this.doc, obj);
    return obj.id;
  }

  dragObject(id: string, x: number, y: number, begin: boolean): void {
    if (!this.doc) return;
    if (begin) this.snapshot();
    this.doc = moveObject(this.doc, id, x, y);
  }

  /** Pop exactly one snapshot; the restored document is byte-identical. */
  undo(): boolean {
    const prev = this.undoStack.pop();
    if (prev === undefined) return false;
    this.doc = parseScene(prev);
    this.synthStopped = false;
    return true;
  }

  /** Toggle a per-category heatmap overlay (at most two at once). */
  async toggleHeatmap(category: string): Promise<HeatmapOverlay | null> {
    if (!this.doc) throw new Error("no scene loaded");
    const existing = this.overlays.findIndex((o) => o.category === category);
    if (existing >= 0) {
      this.overlays.splice(existing, 1);
      return null;
    }
    let grid;
    try {
      grid = await this.api.heatmap(this.doc, "floor", this.gridResolution);
    } catch (err) {
      this.lastError = String(err);
      return null;
    }
    const index = grid.categories.indexOf(category);
    if (index < 0) {
      this.lastError = `unknown category ${category}`;
      return null;
    }
    const overlay: HeatmapOverlay = {
      category,
      resolution: grid.resolution,
      cells: grid.cells.map((c) => ({ x: c.p[0], y: c.p[1], p: c.probs[index] })),
    };
    this.overlays.push(overlay);
    if (this.overlays.length > MAX_OVERLAYS) this.overlays.shift();
    return overlay;
  }

  /** One greedy synthesis step; honors the stop flag (no mutation). */
  async synthStep(): Promise<boolean> {
    if (!this.doc) throw new Error("no scene loaded");
    let result;
    try {
      result = await this.api.synthStep(this.doc, "floor", this.gridResolution);
    } catch (err) {
      this.lastError = String(err);
      return false;
    }
    if (result.step.stop) {
      this.synthStopped = true;
      return false;
    }
    this.snapshot();
    this.doc = result.scene;
    return true;
  }
}
