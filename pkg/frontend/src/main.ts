/**
 * Browser entry point: wires the session controller to the page. All review
 * logic lives in session.ts; this file only moves pixels and events.
 */

import { AnnotatorClient, Box } from "./api.js";
import { dragToBox, drawScene, fitTransform } from "./canvas.js";
import { Channel, ReviewSession } from "./session.js";

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (el === null) throw new Error(`missing element #${id}`);
  return el as T;
};

const canvas = $<HTMLCanvasElement>("view");
const ctx = canvas.getContext("2d")!;
const bannerEl = $<HTMLDivElement>("banner");
const countsEl = $<HTMLSpanElement>("counts");
const taskEl = $<HTMLSpanElement>("task");
const channelEl = $<HTMLSelectElement>("channel");
const opacityEl = $<HTMLInputElement>("opacity");

const client = new AnnotatorClient("");
const session = new ReviewSession(client, "browser");

const images = new Map<string, HTMLImageElement>();
let dragStart: [number, number] | null = null;
let dragBox: Box | null = null;

function currentImage(): HTMLImageElement | null {
  const task = session.current;
  if (task === null) return null;
  const url = client.imageUrl(task.id, session.channel);
  let img = images.get(url);
  if (img === undefined) {
    img = new Image();
    img.src = url;
    img.onload = render;
    img.onerror = render; // stain channel may not exist for this record
    images.set(url, img);
  }
  return img.complete && img.naturalWidth > 0 ? img : null;
}

function render(): void {
  drawScene(ctx, currentImage(), session.current, session.overlayOpacity, dragBox);
  const task = session.current;
  taskEl.textContent =
    task === null
      ? "queue empty"
      : `${task.id} — ${task.status}${task.reviewer ? ` (${task.reviewer})` : ""}`;
  countsEl.textContent =
    `${session.counts.pending} pending · ${session.counts.proposed} proposed · ` +
    `${session.counts.accepted} accepted`;
  bannerEl.textContent = session.banner?.text ?? "";
  bannerEl.dataset.kind = session.banner?.kind ?? "";
}

function canvasPoint(ev: MouseEvent): [number, number] {
  const r = canvas.getBoundingClientRect();
  return [ev.clientX - r.left, ev.clientY - r.top];
}

canvas.addEventListener("mousedown", (ev) => {
  dragStart = canvasPoint(ev);
});

canvas.addEventListener("mousemove", (ev) => {
  const task = session.current;
  if (dragStart === null || task === null) return;
  const t = fitTransform(task.width, task.height, canvas.width, canvas.height);
  dragBox = dragToBox(dragStart, canvasPoint(ev), task.width, task.height, t);
  render();
});

canvas.addEventListener("mouseup", (ev) => {
  const task = session.current;
  if (dragStart === null || task === null) return;
  const t = fitTransform(task.width, task.height, canvas.width, canvas.height);
  const box = dragToBox(dragStart, canvasPoint(ev), task.width, task.height, t);
  dragStart = null;
  dragBox = null;
  if (box[2] * task.width < 2 || box[3] * task.height < 2) {
    render(); // a click, not a drag
    return;
  }
  void session.drawBox(box).then(render);
});

window.addEventListener("keydown", (ev) => {
  if (ev.target instanceof HTMLInputElement || ev.target instanceof HTMLSelectElement) {
    return;
  }
  void session.handleKey(ev.key).then(render);
});

channelEl.addEventListener("change", () => {
  session.setChannel(channelEl.value as Channel);
  render();
});

opacityEl.addEventListener("input", () => {
  session.setOpacity(Number(opacityEl.value) / 100);
  render();
});

void session.sync().then(render);
setInterval(() => void session.sync().then(render), 5000);
