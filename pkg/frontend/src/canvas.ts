/**
 * Geometry between image space and canvas space, plus the overlay painter.
 * The projection math is pure so it can be tested without a browser.
 */

import { Box, Task } from "./api.js";

export interface ViewTransform {
  scale: number;
  offsetX: number;
  offsetY: number;
}

/** Contain-fit an image into a viewport, centered. */
export function fitTransform(
  imgW: number,
  imgH: number,
  viewW: number,
  viewH: number,
): ViewTransform {
  const scale = Math.min(viewW / imgW, viewH / imgH);
  return {
    scale,
    offsetX: (viewW - imgW * scale) / 2,
    offsetY: (viewH - imgH * scale) / 2,
  };
}

/** Normalized image point -> canvas pixels. */
export function toCanvas(
  point: [number, number],
  imgW: number,
  imgH: number,
  t: ViewTransform,
): [number, number] {
  return [
    point[0] * imgW * t.scale + t.offsetX,
    point[1] * imgH * t.scale + t.offsetY,
  ];
}

/**
 * A drag from `start` to `end` in canvas pixels becomes a normalized box,
 * clamped to the unit square. Degenerate drags collapse to zero size and are
 * for the caller to ignore.
 */
export function dragToBox(
  start: [number, number],
  end: [number, number],
  imgW: number,
  imgH: number,
  t: ViewTransform,
): Box {
  const toImage = (p: [number, number]): [number, number] => [
    (p[0] - t.offsetX) / (imgW * t.scale),
    (p[1] - t.offsetY) / (imgH * t.scale),
  ];
  const [ax, ay] = toImage(start);
  const [bx, by] = toImage(end);
  const clamp = (v: number) => Math.min(1, Math.max(0, v));
  const x0 = clamp(Math.min(ax, bx));
  const y0 = clamp(Math.min(ay, by));
  const x1 = clamp(Math.max(ax, bx));
  const y1 = clamp(Math.max(ay, by));
  return [x0, y0, x1 - x0, y1 - y0];
}

/** Project a normalized polygon into canvas coordinates. */
export function projectPolygon(
  points: [number, number][],
  imgW: number,
  imgH: number,
  t: ViewTransform,
): [number, number][] {
  return points.map((p) => toCanvas(p, imgW, imgH, t));
}

/** Paint the frame, the proposal overlay, and the box. Browser-only. */
export function drawScene(
  ctx: CanvasRenderingContext2D,
  image: CanvasImageSource | null,
  task: Task | null,
  opacity: number,
  dragBox: Box | null,
): void {
  const { width, height } = ctx.canvas;
  ctx.clearRect(0, 0, width, height);
  ctx.fillStyle = "#111418";
  ctx.fillRect(0, 0, width, height);
  if (task === null) return;

  const t = fitTransform(task.width, task.height, width, height);
  if (image !== null) {
    ctx.drawImage(
      image,
      t.offsetX,
      t.offsetY,
      task.width * t.scale,
      task.height * t.scale,
    );
  }

  if (task.proposal !== null) {
    const path = projectPolygon(task.proposal.points, task.width, task.height, t);
    if (path.length >= 3) {
      ctx.beginPath();
      ctx.moveTo(path[0]![0], path[0]![1]);
      for (const [x, y] of path.slice(1)) ctx.lineTo(x, y);
      ctx.closePath();
      ctx.fillStyle = `rgba(80, 200, 120, ${opacity})`;
      ctx.fill();
      ctx.strokeStyle = "rgb(80, 200, 120)";
      ctx.lineWidth = 1.5;
      ctx.stroke();
    }
  }

  const box = dragBox ?? task.box;
  if (box !== null) {
    const [x, y] = toCanvas([box[0], box[1]], task.width, task.height, t);
    const w = box[2] * task.width * t.scale;
    const h = box[3] * task.height * t.scale;
    ctx.strokeStyle = "rgb(255, 196, 0)";
    ctx.lineWidth = 1.5;
    ctx.setLineDash([5, 3]);
    ctx.strokeRect(x, y, w, h);
    ctx.setLineDash([]);
  }
}
