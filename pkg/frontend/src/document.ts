/** Scene document handling with a canonical serializer that byte-matches the
 * CLI's format: keys sorted, objects sorted by id, floats printed with nine
 * significant digits, compact separators, trailing newline. A document saved
 * here reloads in the CLI with zero diffs. */

import type { SceneDoc, SceneObjectDoc, Vec3 } from "./types.js";

export const SCENE_FORMAT = "sgnet-scene/1";

/** Python prints floats via repr (shortest round-trip); for the scene's
 * magnitude range (|x| >= 1e-4 or 0) JS does the same, except that integral
 * doubles drop the ".0". Round to nine significant digits first. */
export function formatFloat(x: number): string {
  const r = x === 0 ? 0 : Number(x.toPrecision(9));
  if (Number.isInteger(r)) return `${r}.0`;
  return String(r);
}

function serializeValue(v: unknown): string {
  if (typeof v === "number") return formatFloat(v);
  if (typeof v === "string") return JSON.stringify(v);
  if (typeof v === "boolean") return v ? "true" : "false";
  if (Array.isArray(v)) return `[${v.map(serializeValue).join(",")}]`;
  if (v !== null && typeof v === "object") {
    const keys = Object.keys(v as Record<string, unknown>).sort();
    const body = keys
      .map((k) => `${JSON.stringify(k)}:${serializeValue((v as Record<string, unknown>)[k])}`)
      .join(",");
    return `{${body}}`;
  }
  throw new Error(`cannot serialize ${String(v)}`);
}

export function serializeScene(doc: SceneDoc): string {
  const canonical = {
    format: doc.format,
    room_type: doc.room_type,
    vocab: { names: doc.vocab.names },
    bounds: { x: doc.bounds.x, y: doc.bounds.y },
    objects: [...doc.objects]
      .sort((a, b) => (a.id < b.id ? -1 : a.id > b.id ? 1 : 0))
      .map((o) => ({ id: o.id, category: o.category, position: o.position, size: o.size })),
  };
  return serializeValue(canonical) + "\n";
}

export function parseScene(text: string): SceneDoc {
  const data = JSON.parse(text) as SceneDoc;
  if (data.format !== SCENE_FORMAT) throw new Error(`unsupported format ${data.format}`);
  if (!Array.isArray(data.objects) || !Array.isArray(data.vocab?.names)) {
    throw new Error("malformed scene document");
  }
  return data;
}

export function cloneScene(doc: SceneDoc): SceneDoc {
  return JSON.parse(JSON.stringify(doc)) as SceneDoc;
}

export function floorOf(doc: SceneDoc): SceneObjectDoc | undefined {
  return doc.objects.find((o) => o.category === "floor");
}

/** Top face height of the topmost non-floor object under (x, y), or 0. */
export function surfaceTopAt(doc: SceneDoc, x: number, y: number): number {
  let top = 0.0;
  for (const o of doc.objects) {
    if (o.category === "floor" || o.category === "wall") continue;
    const [cx, cy] = o.position;
    const [sx, sy, sz] = o.size;
    if (Math.abs(x - cx) <= sx / 2 && Math.abs(y - cy) <= sy / 2) {
      top = Math.max(top, o.position[2] + sz / 2);
    }
  }
  return top;
}

export function uniqueObjectId(doc: SceneDoc, base: string): string {
  const ids = new Set(doc.objects.map((o) => o.id));
  let k = 1;
  while (ids.has(`${base}_ui_${k}`)) k += 1;
  return `${base}_ui_${k}`;
}

export function addObject(doc: SceneDoc, obj: SceneObjectDoc): SceneDoc {
  const next = cloneScene(doc);
  next.objects.push(obj);
  return next;
}

export function moveObject(doc: SceneDoc, id: string, x: number, y: number): SceneDoc {
  const next = cloneScene(doc);
  const obj = next.objects.find((o) => o.id === id);
  if (!obj) throw new Error(`no object ${id}`);
  obj.position = [x, y, obj.position[2]] as Vec3;
  return next;
}

export function boxesOverlap(a: SceneObjectDoc, b: SceneObjectDoc): boolean {
  for (let axis = 0; axis < 3; axis++) {
    const loA = a.position[axis] - a.size[axis] / 2;
    const hiA = a.position[axis] + a.size[axis] / 2;
    const loB = b.position[axis] - b.size[axis] / 2;
    const hiB = b.position[axis] + b.size[axis] / 2;
    if (Math.min(hiA, hiB) - Math.max(loA, loB) <= 0) return false;
  }
  return true;
}
