/** Wires the editor, canvas and service client to the page. */

import { ApiClient } from "./api.js";
import { SceneCanvas } from "./canvas.js";
import { Editor } from "./editor.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

const serviceUrl = el<HTMLInputElement>("service-url");
const api = () => new ApiClient(serviceUrl.value.replace(/\/$/, ""));
let editor = new Editor(api());
const canvas = el<HTMLCanvasElement>("scene-canvas");
const view = new SceneCanvas(canvas, editor);
const bars = el<HTMLDivElement>("bars");
const toast = el<HTMLDivElement>("toast");
const synthButton = el<HTMLButtonElement>("synth-step");
const undoButton = el<HTMLButtonElement>("undo");
const acceptButton = el<HTMLButtonElement>("accept");
const heatmapButtons = el<HTMLDivElement>("heatmap-buttons");

let dragging: { id: string; began: boolean } | null = null;

function showToast(message: string): void {
  toast.textContent = message;
  toast.style.opacity = "1";
  setTimeout(() => (toast.style.opacity = "0"), 2600);
}

function refresh(): void {
  view.draw();
  synthButton.disabled = editor.synthStopped || !editor.doc;
  synthButton.textContent = editor.synthStopped
    ? "model suggests stopping"
    : "synthesize step";
  undoButton.disabled = !editor.canUndo;
  acceptButton.disabled = !editor.prediction;
  renderBars();
  renderHeatmapButtons();
  if (editor.collisionWarning) {
    showToast(`warning: ${editor.collisionWarning}`);
    editor.collisionWarning = null;
  }
  if (editor.lastError) {
    showToast(editor.lastError);
    editor.lastError = null;
  }
}

function renderBars(): void {
  bars.innerHTML = "";
  const pred = editor.prediction;
  if (!pred) return;
  const size = document.createElement("div");
  size.className = "size-hint";
  size.textContent = `suggested size: ${pred.suggestedSizeCm.join(" x ")} cm`;
  bars.appendChild(size);
  for (const bar of pred.bars) {
    const row = document.createElement("div");
    row.className = "bar-row";
    const label = document.createElement("span");
    label.textContent = bar.name;
    const track = document.createElement("div");
    track.className = "bar-track";
    const fill = document.createElement("div");
    fill.className = "bar-fill";
    fill.style.width = `${(100 * bar.p).toFixed(1)}%`;
    const pct = document.createElement("span");
    pct.className = "bar-pct";
    pct.textContent = `${(100 * bar.p).toFixed(1)}%`;
    track.appendChild(fill);
    row.append(label, track, pct);
    bars.appendChild(row);
  }
}

function renderHeatmapButtons(): void {
  heatmapButtons.innerHTML = "";
  const pred = editor.prediction;
  if (!pred) return;
  for (const bar of pred.bars.slice(0, 2)) {
    const button = document.createElement("button");
    const active = editor.overlays.some((o) => o.category === bar.name);
    button.textContent = `${active ? "hide" : "show"} ${bar.name} heatmap`;
    button.onclick = async () => {
      await editor.toggleHeatmap(bar.name);
      refresh();
    };
    heatmapButtons.appendChild(button);
  }
}

canvas.addEventListener("pointerdown", (ev) => {
  const rect = canvas.getBoundingClientRect();
  const obj = view.objectAt(ev.clientX - rect.left, ev.clientY - rect.top);
  if (obj) dragging = { id: obj.id, began: false };
});

canvas.addEventListener("pointermove", (ev) => {
  if (!dragging) return;
  const rect = canvas.getBoundingClientRect();
  const [x, y] = view.toScene(ev.clientX - rect.left, ev.clientY - rect.top);
  editor.dragObject(dragging.id, x, y, !dragging.began);
  dragging.began = true;
  refresh();
});

canvas.addEventListener("pointerup", async (ev) => {
  const wasDrag = dragging?.began;
  dragging = null;
  if (wasDrag) {
    refresh();
    return;
  }
  if (!editor.doc) return;
  const rect = canvas.getBoundingClientRect();
  const [x, y] = view.toScene(ev.clientX - rect.left, ev.clientY - rect.top);
  await editor.clickQuery(x, y);
  refresh();
});

acceptButton.onclick = () => {
  editor.acceptPlacement();
  refresh();
};

undoButton.onclick = () => {
  editor.undo();
  refresh();
};

synthButton.onclick = async () => {
  await editor.synthStep();
  refresh();
};

el<HTMLInputElement>("file-input").addEventListener("change", async (ev) => {
  const input = ev.target as HTMLInputElement;
  const file = input.files?.[0];
  if (!file) return;
  try {
    editor = new Editor(api());
    editor.loadScene(await file.text());
    (view as unknown as { editor: Editor }).editor = editor;
  } catch (err) {
    showToast(String(err));
  }
  refresh();
});

el<HTMLButtonElement>("save-button").onclick = () => {
  if (!editor.doc) return;
  const blob = new Blob([editor.saveScene()], { type: "application/json" });
  const link = document.createElement("a");
  link.href = URL.createObjectURL(blob);
  link.download = "scene.json";
  link.click();
  URL.revokeObjectURL(link.href);
};

refresh();
