/** Wire and document types shared across the editor. */

export type Vec3 = [number, number, number];

export interface SceneObjectDoc {
  id: string;
  category: string;
  position: Vec3;
  size: Vec3;
}

export interface SceneDoc {
  format: string;
  room_type: string;
  vocab: { names: string[] };
  bounds: { x: [number, number]; y: [number, number] };
  objects: SceneObjectDoc[];
}

export interface PredictResponse {
  categories: string[];
  probs: number[];
  size: Vec3;
}

export interface HeatmapCell {
  p: Vec3;
  probs: number[];
}

export interface HeatmapResponse {
  surface: string;
  resolution: number;
  cells: HeatmapCell[];
  categories: string[];
}

export interface SynthStepResponse {
  step: {
    stop: boolean;
    score: number;
    category: number | null;
    category_name: string | null;
    position: Vec3 | null;
    size: Vec3 | null;
    object_id: string | null;
  };
  scene: SceneDoc;
}
